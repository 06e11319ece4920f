"""Partition sums, two-sided pressure brackets and dimension enclosures.

For depth ``n`` and exponent ``t >= 0`` let ``Z_n(t) = sum |J_sigma|**t`` over
all words of length ``n``.  Quasi-multiplicativity of diameters,
``xi**-3 |J_s||J_t| <= |J_st| <= xi**3 |J_s||J_t|``, makes
``log Z + 3t log xi`` subadditive and ``log Z - 3t log xi`` superadditive
along multiples of ``n``, so

    L = (log Z - 3t log xi) / n  <=  P(t)  <=  (log Z + 3t log xi) / n = U.

For a schedule that is not constant, the tail words must see the same stages
as the head words, so the argument only applies when ``n`` is a multiple of
the schedule period (and the sums start after any prefix).  Brackets at other
depths are still computed but labelled ``heuristic``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass

import numpy as np

from . import _backend
from ._csvout import to_csv
from .errors import InputError, NumericError
from .system import System

MAX_DOUBLINGS = 60
DEFAULT_TOL = 1e-12

CERTIFIED = "certified"
SAMPLED = "sampled-constants"
HEURISTIC = "heuristic"


def merge_log_sums(parts: Iterable[tuple[float, float]]) -> float:
    """Combine ``exp(shift_i) * s_i`` terms in the given order; returns the log."""
    shift, acc = -math.inf, 0.0
    for sh, s in parts:
        if s == 0.0:
            continue
        if sh > shift:
            acc = acc * math.exp(shift - sh) + s if acc else s
            shift = sh
        else:
            acc += s * math.exp(sh - shift)
    if acc <= 0.0:
        return -math.inf
    return shift + math.log(acc)


def log_partition_sum(blocks: Iterable[np.ndarray], t: float) -> float:
    """``log sum exp(t * logd)`` over blocks of log-diameters, block order preserved."""
    k = _backend.kernels
    return merge_log_sums(k.log_power_sum(b, t) for b in blocks)


def partition_sum(system: System, n: int, t: float, *, threads: int = 1,
                  offset: int = 0) -> float:
    """``log Z_n(t)``.

    With ``offset`` the words are read against the stages of levels
    ``offset + 1 .. offset + n``.  Blocks are reduced in lexicographic order
    with compensated summation inside each block, so the value does not depend
    on ``threads``.
    """
    if n < 1:
        raise InputError("depth must be >= 1")
    if t < 0:
        raise InputError("t < 0 is not supported (the dimension is positive)")
    return log_partition_sum(system.level_log_diams(n, offset=offset, threads=threads), t)


def status_for(system: System, n: int) -> str:
    if not system.schedule.aligned(n):
        return HEURISTIC
    return CERTIFIED if system.constants.certified else SAMPLED


@dataclass(frozen=True)
class PressureBracket:
    depth: int
    t: float
    logZ: float
    L: float
    U: float
    status: str

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.L + self.U)

    @property
    def width(self) -> float:
        return self.U - self.L


def _bracket(n: int, t: float, logz: float, lnxi: float, status: str) -> PressureBracket:
    slack = 3.0 * t * lnxi
    return PressureBracket(n, t, logz, (logz - slack) / n, (logz + slack) / n, status)


def pressure_bracket(system: System, n: int, t: float, *, threads: int = 1) -> PressureBracket:
    """Rigorous ``[L, U]`` around ``P(t)`` from depth-``n`` sums."""
    if t < 0:
        raise InputError("t < 0 is not supported (the dimension is positive)")
    off = system.schedule.pressure_offset
    logz = partition_sum(system, n, t, threads=threads, offset=off)
    return _bracket(n, t, logz, math.log(system.xi), status_for(system, n))


def pressure_curve(system: System, n: int, ts: Sequence[float], *,
                   threads: int = 1) -> list[PressureBracket]:
    return [pressure_bracket(system, n, float(t), threads=threads) for t in ts]


@dataclass(frozen=True)
class DimensionEnclosure:
    h_lo: float
    h_hi: float
    depth: int
    tol: float
    xi: float
    width_bound: float
    xi_emp: float
    emp_width: float
    status: str
    evaluations: int

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.h_lo + self.h_hi)

    @property
    def width(self) -> float:
        return self.h_hi - self.h_lo

    def contains(self, h: float) -> bool:
        return self.h_lo <= h <= self.h_hi

    def within(self, other: DimensionEnclosure) -> bool:
        return other.h_lo <= self.h_lo and self.h_hi <= other.h_hi

    def as_dict(self) -> dict:
        d = asdict(self)
        d["certified_width_bound"] = d.pop("width_bound")
        return d


def _bisect(fn, hi: float, tol: float) -> tuple[float, float]:
    """Bracket the sign change of ``fn`` (positive at 0, negative at ``hi``)."""
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def dimension_enclosure(system: System, n: int, tol: float = DEFAULT_TOL, *,
                        threads: int = 1, xi_samples: int = 2000) -> DimensionEnclosure:
    """Enclose the zero ``h`` of the pressure from depth-``n`` sums.

    ``h_lo`` is the left end of the bisection bracket for the root of ``L``
    and ``h_hi`` the right end of the bracket for the root of ``U``, so the
    true zero lies in ``[h_lo, h_hi]``.  ``L`` is strictly decreasing;
    ``U`` is convex with ``U(0) = log N > 0``, so once ``U(T) < 0`` it has
    exactly one zero in ``[0, T]``.
    """
    if n < 1:
        raise InputError("depth must be >= 1")
    if not tol > 0:
        raise InputError("bisection tolerance must be positive")
    off = system.schedule.pressure_offset
    blocks = system.level_log_diams(n, offset=off, threads=threads)
    if not isinstance(blocks, tuple):
        blocks = tuple(blocks)
    lnxi = math.log(system.xi)
    lnb = math.log(system.constants.b)
    calls = 0

    def logz(t: float) -> float:
        nonlocal calls
        calls += 1
        return log_partition_sum(blocks, t)

    upper = lambda t: (logz(t) + 3.0 * t * lnxi) / n  # noqa: E731
    lower = lambda t: (logz(t) - 3.0 * t * lnxi) / n  # noqa: E731

    top = math.log(system.N) / lnb
    for _ in range(MAX_DOUBLINGS + 1):
        if upper(top) < 0:
            break
        top *= 2.0
    else:
        raise NumericError(
            f"could not bracket the root of the upper pressure bound after {MAX_DOUBLINGS} "
            f"doublings (xi = {system.xi:.6g}, depth {n}); the constants are too loose "
            "for this depth")
    h_hi = _bisect(upper, top, tol)[1]
    h_lo = _bisect(lower, top, tol)[0]
    xi_emp = system.empirical_xi(max(2, min(n, 10)), xi_samples) if xi_samples else 1.0
    return DimensionEnclosure(
        h_lo=h_lo,
        h_hi=h_hi,
        depth=n,
        tol=tol,
        xi=system.xi,
        width_bound=6.0 * h_hi * lnxi / (n * lnb),
        xi_emp=xi_emp,
        emp_width=2.0 * h_hi * math.log(xi_emp) / (n * lnb),
        status=status_for(system, n),
        evaluations=calls,
    )


@dataclass(frozen=True)
class CorollaryReport:
    ok: bool
    rows: tuple[tuple[float, float, float, float], ...]  # t, sum, lower, upper

    def as_dict(self) -> dict:
        return {"ok": self.ok, "rows": [
            {"t": t, "sum": s, "lower": lo, "upper": hi} for t, s, lo, hi in self.rows]}


def corollary_check(system: System, n: int, enclosure: DimensionEnclosure, *,
                    threads: int = 1) -> CorollaryReport:
    """Check ``xi**-3t <= Z_n(t) <= xi**3t`` at ``h_lo``, ``h_hi`` and the midpoint.

    The enclosure ends are roots of ``L`` and ``U`` and therefore sit on the
    boundary of this band; the comparison is made in log space with a slack
    of ``2 n log(B) tol`` for the bisection width plus rounding.
    """
    off = system.schedule.pressure_offset
    lnxi = math.log(system.xi)
    slack = 2.0 * n * math.log(system.constants.B) * enclosure.tol + 1e-12
    rows, ok = [], True
    for t in (enclosure.h_lo, enclosure.h_hi, enclosure.midpoint):
        lz = partition_sum(system, n, t, threads=threads, offset=off)
        ok &= -3 * t * lnxi - slack <= lz <= 3 * t * lnxi + slack
        rows.append((t, math.exp(lz), math.exp(-3 * t * lnxi), math.exp(3 * t * lnxi)))
    return CorollaryReport(bool(ok), tuple(rows))


def pressure_csv(brackets: Iterable[PressureBracket]) -> str:
    return to_csv(("t", "logZ", "L", "U", "midpoint"),
                  ((b.t, b.logZ, b.L, b.U, b.midpoint) for b in brackets))
