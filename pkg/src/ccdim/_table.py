"""Flat, array-backed description of every branch of a system.

Both kernel backends consume a :class:`BranchTable`; they never see the
expression trees.  Branch ``bid`` of kind ``INVERSE`` stores the program of
``phi`` and ``phi'``; kind ``FORWARD`` stores ``f`` and ``f'`` together with
the branch domain ``[u, v]`` on which ``f`` is inverted numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainFault, NumericError
from .maplang import Program

INVERSE, FORWARD = 0, 1

# bisection stops once the bracket is no wider than this
BISECT_WIDTH = 1e-14
BISECT_MAX_ITER = 200
NEWTON_STEPS = 2

# error codes reported by kernels
ERR_DOMAIN, ERR_ZERO_DERIV = 1, 2


@dataclass(frozen=True)
class BranchTable:
    ops: np.ndarray          # int32, all programs concatenated
    args: np.ndarray         # float64
    kind: np.ndarray         # int32[nb]
    p_off: np.ndarray        # int32[nb]  phi (INVERSE) or f (FORWARD)
    p_len: np.ndarray
    d_off: np.ndarray        # int32[nb]  phi' (INVERSE) or f' (FORWARD)
    d_len: np.ndarray
    dom_lo: np.ndarray       # float64[nb]  forward domain; unused for INVERSE
    dom_hi: np.ndarray
    increasing: np.ndarray   # int32[nb]  forward orientation
    stage_branch: np.ndarray  # int32[n_stages, N]
    programs: tuple[tuple[Program, Program], ...]

    @property
    def n_letters(self) -> int:
        return self.stage_branch.shape[1]

    def program(self, bid: int, which: int) -> Program:
        return self.programs[bid][which]

    @classmethod
    def build(cls, branches: list[tuple[int, Program, Program, float, float, bool]],
              stage_branch: np.ndarray) -> BranchTable:
        """``branches[bid] = (kind, main, deriv, u, v, increasing)``."""
        ops, args = [], []
        kind, p_off, p_len, d_off, d_len, lo, hi, inc = ([] for _ in range(8))
        offset = 0
        for k, main, deriv, u, v, up in branches:
            kind.append(k)
            for prog, off_list, len_list in ((main, p_off, p_len), (deriv, d_off, d_len)):
                off_list.append(offset)
                len_list.append(len(prog))
                ops.append(prog.ops)
                args.append(prog.args)
                offset += len(prog)
            lo.append(u)
            hi.append(v)
            inc.append(1 if up else 0)
        i32 = lambda seq: np.ascontiguousarray(seq, dtype=np.int32)  # noqa: E731
        f64 = lambda seq: np.ascontiguousarray(seq, dtype=np.float64)  # noqa: E731
        return cls(
            ops=i32(np.concatenate(ops)),
            args=f64(np.concatenate(args)),
            kind=i32(kind),
            p_off=i32(p_off),
            p_len=i32(p_len),
            d_off=i32(d_off),
            d_len=i32(d_len),
            dom_lo=f64(lo),
            dom_hi=f64(hi),
            increasing=i32(inc),
            stage_branch=i32(stage_branch),
            programs=tuple((b[1], b[2]) for b in branches),
        )


def raise_kernel_error(table: BranchTable, code: int, bid: int, which: int,
                       op: int, x: float) -> None:
    """Translate a kernel error record into an exception."""
    if code == ERR_DOMAIN:
        prog = table.program(bid, which)
        raise DomainFault(
            f"invalid argument while evaluating branch {bid} at x={x!r}", prog.text[op]
        )
    if code == ERR_ZERO_DERIV:
        raise NumericError(
            f"f' vanished while inverting forward branch {bid} at x={x!r}; "
            "the branch is not expanding there"
        )
    raise NumericError(f"kernel error code {code}")
