"""Pure numpy implementation of the numeric kernels.

Used when the compiled extension is unavailable or when
``CCDIM_BACKEND=python``.  Semantics match ``_ckernels`` element for element
(same bisection rule, same Newton polish, same fold order); only the
summation in :func:`log_power_sum` differs (exact ``math.fsum`` here,
Neumaier compensation in the compiled core).
"""

from __future__ import annotations

import math

import numpy as np

from . import maplang as ml
from ._table import (
    BISECT_MAX_ITER,
    BISECT_WIDTH,
    ERR_DOMAIN,
    ERR_ZERO_DERIV,
    FORWARD,
    NEWTON_STEPS,
    BranchTable,
    raise_kernel_error,
)

NAME = "python"


def _run(table: BranchTable, bid: int, which: int, xs: np.ndarray) -> np.ndarray:
    off = int(table.p_off[bid] if which == 0 else table.d_off[bid])
    length = int(table.p_len[bid] if which == 0 else table.d_len[bid])
    ops = table.ops[off:off + length]
    args = table.args[off:off + length]
    stack: list[np.ndarray] = []
    n = xs.shape[0]
    with np.errstate(all="ignore"):
        for i in range(length):
            op = ops[i]
            if op == ml.OP_CONST:
                stack.append(np.full(n, args[i]))
                continue
            if op == ml.OP_X:
                stack.append(xs.copy())
                continue
            bad = None
            if op in (ml.OP_ADD, ml.OP_SUB, ml.OP_MUL, ml.OP_DIV):
                b = stack.pop()
                a = stack.pop()
                if op == ml.OP_ADD:
                    r = a + b
                elif op == ml.OP_SUB:
                    r = a - b
                elif op == ml.OP_MUL:
                    r = a * b
                else:
                    bad = b == 0
                    r = a / b
            else:
                a = stack.pop()
                if op == ml.OP_NEG:
                    r = -a
                elif op == ml.OP_POW:
                    p = args[i]
                    bad = (a == 0) & (p < 0)
                    if p != math.floor(p):
                        bad |= a < 0
                    r = np.power(a, p)
                elif op == ml.OP_SQRT:
                    bad = a < 0
                    r = np.sqrt(a)
                elif op == ml.OP_EXP:
                    r = np.exp(a)
                else:
                    bad = a <= 0
                    r = np.log(a)
            bad = ~np.isfinite(r) if bad is None else bad | ~np.isfinite(r)
            if bad.any():
                k = int(np.flatnonzero(bad)[0])
                raise_kernel_error(table, ERR_DOMAIN, bid, which, i, float(xs[k]))
            stack.append(r)
    return stack[0]


def _invert(table: BranchTable, bid: int, xs: np.ndarray) -> np.ndarray:
    u = float(table.dom_lo[bid])
    v = float(table.dom_hi[bid])
    up = bool(table.increasing[bid])
    n = xs.shape[0]
    lo = np.full(n, u)
    hi = np.full(n, v)
    iters = np.zeros(n, dtype=np.int64)
    active = np.flatnonzero(hi - lo > BISECT_WIDTH)
    while active.size:
        mid = 0.5 * (lo[active] + hi[active])
        fm = _run(table, bid, 0, mid)
        g = fm - xs[active] if up else xs[active] - fm
        left = g < 0
        lo[active[left]] = mid[left]
        hi[active[~left]] = mid[~left]
        iters[active] += 1
        still = (hi[active] - lo[active] > BISECT_WIDTH) & (iters[active] < BISECT_MAX_ITER)
        active = active[still]
    y = 0.5 * (lo + hi)
    for _ in range(NEWTON_STEPS):
        fy = _run(table, bid, 0, y)
        dy = _run(table, bid, 1, y)
        zero = dy == 0
        if zero.any():
            k = int(np.flatnonzero(zero)[0])
            raise_kernel_error(table, ERR_ZERO_DERIV, bid, 1, 0, float(xs[k]))
        y = y - (fy - xs) / dy
        y = np.minimum(np.maximum(y, u), v)
    return y


def apply(table: BranchTable, bid: int, xs: np.ndarray) -> np.ndarray:
    """phi_bid evaluated at every point of ``xs``."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if table.kind[bid] == FORWARD:
        return _invert(table, bid, xs)
    return _run(table, bid, 0, xs)


def apply_with_deriv(table: BranchTable, bid: int, xs: np.ndarray):
    """Return ``(phi(xs), phi'(xs))``."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if table.kind[bid] == FORWARD:
        y = _invert(table, bid, xs)
        df = _run(table, bid, 1, y)
        with np.errstate(divide="ignore", over="ignore"):
            inv = 1.0 / df
        bad = ~np.isfinite(inv)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise_kernel_error(table, ERR_ZERO_DERIV, bid, 1, 0, float(xs[k]))
        return y, inv
    return _run(table, bid, 0, xs), _run(table, bid, 1, xs)


def fold(table: BranchTable, stages: np.ndarray, words: np.ndarray, xs: np.ndarray,
         want_deriv: bool = False):
    """Compose branch inverses right to left along each row of ``words``.

    ``words`` holds 0-based letters, shape ``(m, L)``; ``stages[i]`` is the
    stage used at level ``i + 1``.  Returns ``(values, log|derivative|)``,
    the second entry ``None`` unless ``want_deriv``.
    """
    words = np.asarray(words, dtype=np.int32)
    vals = np.array(xs, dtype=np.float64, copy=True)
    logd = np.zeros_like(vals) if want_deriv else None
    m, length = words.shape
    for i in range(length - 1, -1, -1):
        col = words[:, i]
        row = table.stage_branch[stages[i]]
        for j in range(table.n_letters):
            mask = col == j
            if not mask.any():
                continue
            bid = int(row[j])
            if want_deriv:
                y, d = apply_with_deriv(table, bid, vals[mask])
                with np.errstate(divide="ignore"):
                    logd[mask] += np.log(np.abs(d))
            else:
                y = apply(table, bid, vals[mask])
            vals[mask] = y
    return vals, logd


def log_power_sum(logd: np.ndarray, t: float) -> tuple[float, float]:
    """Return ``(shift, s)`` with ``sum(exp(t * logd)) == exp(shift) * s``."""
    logd = np.asarray(logd, dtype=np.float64)
    if logd.size == 0:
        return 0.0, 0.0
    shift = t * float(logd.max())
    return shift, math.fsum(np.exp(t * logd - shift))


def evaluate(table: BranchTable, bid: int, which: int, xs: np.ndarray) -> np.ndarray:
    """Raw program ``which`` (0 main, 1 derivative) of branch ``bid`` at ``xs``."""
    return _run(table, bid, which, np.ascontiguousarray(xs, dtype=np.float64))
