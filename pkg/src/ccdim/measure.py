"""Finite-stage measure, Moran covers, box counts and measure bounds."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _backend
from ._csvout import to_csv
from .errors import InputError
from .pressure import DimensionEnclosure, log_partition_sum, merge_log_sums
from .system import System
from .words import Word, check_word, format_word

# A cover element counts as "diam <= r" when diam <= r * (1 + MORAN_SLACK).
# Without it, r = 3**-k misses the exact Cantor level through endpoint rounding.
MORAN_SLACK = 1e-9
# relative allowance for rounding in enclosure containment of nu values
FP_REL = 1e-9
MAX_COVER_DEPTH = 64


# ----------------------------------------------------------------------
# finite-stage measure


@dataclass(frozen=True)
class MeasureEstimate:
    word: Word
    stage: int
    h: float
    value: float
    enclosure_lo: float
    enclosure_hi: float

    @property
    def inside(self) -> bool:
        return (self.enclosure_lo * (1 - FP_REL) <= self.value
                <= self.enclosure_hi * (1 + FP_REL))


def measure_enclosure(system: System, sigma: Iterable[int], h: float) -> tuple[float, float]:
    """``[xi**-9h |J_sigma|**h, xi**9h |J_sigma|**h]``; the empty word gives ``|J| = 1``."""
    w = check_word(sigma, system.N)
    d = system.basic_interval(w).diam if w else 1.0
    eta = system.xi ** (9.0 * h)
    return d**h / eta, d**h * eta


def nu(system: System, sigma: Iterable[int], n: int, h: float, *,
       threads: int = 1) -> MeasureEstimate:
    """``nu_n(C(sigma))``: the share of ``Z_{|sigma|+n}(h)`` carried by extensions of sigma."""
    if n < 1:
        raise InputError("stage must be >= 1")
    w = check_word(sigma, system.N)
    depth = len(w) + n
    num = log_partition_sum(system.level_log_diams(depth, w, threads=threads), h)
    den = log_partition_sum(system.level_log_diams(depth, threads=threads), h)
    lo, hi = measure_enclosure(system, w, h)
    return MeasureEstimate(w, n, h, math.exp(num - den), lo, hi)


def nu_level(system: System, m: int, n: int, h: float, *, threads: int = 1) -> np.ndarray:
    """``nu_n(C(sigma))`` for every ``sigma`` of length ``m``, in lexicographic order.

    Level ``m + n`` is swept once; the extensions of each ``sigma`` form a
    contiguous run of ``N**n`` entries, reduced exactly as :func:`nu` does.
    """
    if n < 1 or m < 0:
        raise InputError("need stage n >= 1 and level m >= 0")
    k = _backend.kernels
    run = system.N**n
    parts = []
    for block in system.level_log_diams(m + n, threads=threads):
        for i in range(0, block.size, run):
            parts.append(k.log_power_sum(block[i:i + run], h))
    if len(parts) != system.N**m:
        # blocks are shorter than a run: merge runs that span several blocks
        per = len(parts) // system.N**m
        parts = [_merge(parts[i:i + per]) for i in range(0, len(parts), per)]
    logs = np.array([sh + math.log(s) for sh, s in parts])
    den = merge_log_sums(parts)
    return np.exp(logs - den)


def _merge(parts: list[tuple[float, float]]) -> tuple[float, float]:
    return merge_log_sums(parts), 1.0


def nu_sensitivity(system: System, sigma: Iterable[int], n: int,
                   enclosure: DimensionEnclosure, *, threads: int = 1) -> float:
    """Spread of ``nu_n(C(sigma))`` as ``h`` ranges over the enclosure ends."""
    a = nu(system, sigma, n, enclosure.h_lo, threads=threads).value
    b = nu(system, sigma, n, enclosure.h_hi, threads=threads).value
    return abs(b - a)


# ----------------------------------------------------------------------
# Moran covers


def ball_bound(system: System) -> int:
    """``M = floor(4 xi B)``: most cover elements one ``r``-ball can meet."""
    return math.floor(4.0 * system.xi * system.constants.B)


@dataclass(frozen=True)
class MoranCover:
    r: float
    words: tuple[Word, ...]
    lo: np.ndarray
    hi: np.ndarray
    lower_violations: int

    def __len__(self) -> int:
        return len(self.words)

    @property
    def diam(self) -> np.ndarray:
        return self.hi - self.lo

    def prefix_of(self, address: Sequence[int]) -> list[Word]:
        """Cover words that are prefixes of ``address``."""
        return [w for w in self.words if tuple(address[:len(w)]) == w]


def moran_cover(system: System, r: float) -> MoranCover:
    """``{J_sigma : |J_sigma| <= r < |J_parent|}`` in lexicographic order.

    Built breadth first: words still wider than ``r`` are split into their
    ``N`` children at the next level.  Every element is also compared with
    the size floor ``r / (xi B)``; failures are counted, never hidden.
    """
    if not 0 < r < 1:
        raise InputError(f"radius must lie in (0, 1), got {r}")
    N = system.N
    cut = r * (1 + MORAN_SLACK)
    floor_ = r / (system.xi * system.constants.B)
    kept_w, kept_lo, kept_hi = [], [], []
    frontier = np.zeros((1, 0), dtype=np.int32)
    for depth in range(1, MAX_COVER_DEPTH + 1):
        m = frontier.shape[0]
        letters = np.tile(np.arange(N, dtype=np.int32), m)[:, None]
        words = np.hstack([np.repeat(frontier, N, axis=0), letters])
        lo, hi = system.endpoints(words)
        done = (hi - lo) <= cut
        kept_w.append(words[done])
        kept_lo.append(lo[done])
        kept_hi.append(hi[done])
        frontier = words[~done]
        if frontier.shape[0] == 0:
            break
    else:
        raise InputError(f"radius {r} needs more than {MAX_COVER_DEPTH} levels")
    entries = [(Word(int(a) + 1 for a in w), l, h)
               for ws, ls, hs in zip(kept_w, kept_lo, kept_hi)
               for w, l, h in zip(ws, ls, hs)]
    entries.sort(key=lambda e: e[0])
    lo = np.array([e[1] for e in entries])
    hi = np.array([e[2] for e in entries])
    return MoranCover(
        r=r,
        words=tuple(e[0] for e in entries),
        lo=lo,
        hi=hi,
        lower_violations=int(np.count_nonzero(hi - lo <= floor_)),
    )


def ball_intersection_count(cover: MoranCover, x: float, r: float | None = None) -> int:
    """Number of cover intervals meeting ``[x - r, x + r]``."""
    r = cover.r if r is None else r
    return int(np.count_nonzero((cover.hi >= x - r) & (cover.lo <= x + r)))


# ----------------------------------------------------------------------
# box counting


@dataclass(frozen=True)
class BoxCount:
    r: float
    count: int
    certified_upper: float


def box_upper_bound(system: System, r: float, h: float) -> float:
    """``eta (xi B)**h r**-h`` with ``eta = xi**9h``."""
    xi, B = system.xi, system.constants.B
    return xi ** (9 * h) * (xi * B) ** h * r ** (-h)


def box_count(system: System, r: float, h: float) -> BoxCount:
    """Moran-cover cardinality as the box count, with its certified upper bound."""
    return BoxCount(r, len(moran_cover(system, r)), box_upper_bound(system, r, h))


@dataclass(frozen=True)
class Regression:
    slope: float
    stderr: float
    intercept: float
    counts: tuple[BoxCount, ...]


def boxdim_regress(system: System, radii: Sequence[float], h: float = 1.0) -> Regression:
    """OLS slope of ``log N_r`` against ``-log r``.

    ``h`` only feeds the certified upper bound reported with each count.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 4:
        raise InputError("box-dimension regression needs at least 4 radii")
    if max(radii) / min(radii) < 100:
        raise InputError("radii must span at least two decades")
    counts = tuple(box_count(system, r, h) for r in radii)
    x = [-math.log(c.r) for c in counts]
    y = [math.log(c.count) for c in counts]
    fit = stats.linregress(x, y)
    return Regression(float(fit.slope), float(fit.stderr), float(fit.intercept), counts)


# ----------------------------------------------------------------------
# measure bounds


@dataclass(frozen=True)
class CertifiedBounds:
    h: float
    h_lo: float
    M: int
    hausdorff_lower: float
    hausdorff_upper: float
    packing_upper: float
    certified: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def certified_bounds(system: System, enclosure: DimensionEnclosure) -> CertifiedBounds:
    """Hausdorff and packing measure bounds at the dimension.

    Every bound is monotone in ``h`` in the direction that makes ``h_hi`` the
    safe choice: ``1 / (eta M)`` shrinks and the upper bounds grow with ``h``
    (``xi >= 1``, ``B > 1``).  All three are therefore evaluated at ``h_hi``.
    """
    h = enclosure.h_hi
    xi, B = system.xi, system.constants.B
    eta = xi ** (9 * h)
    M = ball_bound(system)
    return CertifiedBounds(
        h=h,
        h_lo=enclosure.h_lo,
        M=M,
        hausdorff_lower=1.0 / (eta * M),
        hausdorff_upper=xi ** (3 * h),
        packing_upper=2.0**h * eta * xi**h * B**h,
        certified=enclosure.status == "certified",
    )


# ----------------------------------------------------------------------
# CSV


def cover_csv(cover: MoranCover, N: int) -> str:
    return to_csv(("word", "lo", "hi", "diam"),
                ((format_word(w, N), lo, hi, hi - lo)
                 for w, lo, hi in zip(cover.words, cover.lo, cover.hi)))


def boxcount_csv(counts: Iterable[BoxCount]) -> str:
    return to_csv(("r", "count", "certified_upper"),
                ((c.r, c.count, c.certified_upper) for c in counts))


def measure_csv(estimates: Iterable[MeasureEstimate], N: int) -> str:
    return to_csv(("word", "nu", "enclosure_lo", "enclosure_hi"),
                ((format_word(e.word, N), e.value, e.enclosure_lo, e.enclosure_hi)
                 for e in estimates))
