"""Cookie-cutter-like systems: configuration, validation, basic intervals.

A system is a schedule of stages.  Stage ``s`` holds ``N`` branch inverses
``phi_{s,1..N}`` mapping the unit interval into disjoint subintervals; level
``k`` of the construction uses stage ``schedule.stage_at(k)``.  The basic
interval of a word ``sigma`` is ``phi_{1,s1} o ... o phi_{n,sn}([0, 1])``.

Nonlinear defining data (expansion bounds ``b_k, B_k`` and Hoelder constants
``c_k``) are audited by sampling; results built on sampled constants carry
``certified=False`` unless the config declares authoritative overrides.
"""

from __future__ import annotations

import json
import math
import threading
from collections import OrderedDict
from collections.abc import Iterable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import _backend
from . import maplang as ml
from ._table import FORWARD, INVERSE, BranchTable
from .errors import ConfigError, ExpansionViolation, InputError, NumericError
from .words import Address, Word, check_word

GRID_POINTS = 4097
HOLDER_PAIRS = 10_000
GAP_TOL = 1e-12
ENDPOINT_TOL = 1e-9
# rounding allowance when comparing sampled Hoelder quotients with a declared c
HOLDER_REL = 1e-9
AUDIT_SEED = 20_240_611

# level blocks hold at most this many words; a level is cached whole when small
BLOCK_WORDS = 1 << 16
CACHE_WORDS = 1 << 22
CACHE_ENTRIES = 16


@dataclass(frozen=True)
class BranchSpec:
    """One branch after normalization of ``J`` to ``[0, 1]``."""

    mode: str                      # affine | explicit_inverse | forward_branch
    a: float = 0.0
    r: float = 0.0
    expr: ml.Expr | None = None    # phi (explicit_inverse) or f (forward_branch)
    domain: tuple[float, float] | None = None
    source: str = ""

    def programs(self) -> tuple[int, ml.Program, ml.Program, float, float, bool]:
        if self.mode == "affine":
            phi = ml.BinOp("+", ml.Num(self.a), ml.BinOp("*", ml.Num(self.r), ml.X))
            return INVERSE, ml.compile_expr(phi), ml.compile_expr(ml.Num(self.r)), 0.0, 1.0, True
        main = ml.compile_expr(self.expr)
        deriv = ml.compile_expr(ml.differentiate(self.expr))
        if self.mode == "explicit_inverse":
            return INVERSE, main, deriv, 0.0, 1.0, True
        u, v = self.domain
        up = ml.evaluate(self.expr, v) > ml.evaluate(self.expr, u)
        return FORWARD, main, deriv, u, v, up


@dataclass(frozen=True)
class StageAudit:
    b: float
    B: float
    c_est: float
    holder_ok: bool
    images: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Stage:
    branches: tuple[BranchSpec, ...]
    gamma: float
    c_user: float | None
    holder_certified: bool
    b_override: float | None
    B_override: float | None
    expansion_certified: bool
    audit: StageAudit | None = None

    @property
    def affine(self) -> bool:
        return all(br.mode == "affine" for br in self.branches)

    @property
    def b(self) -> float:
        return self.b_override if self.b_override is not None else self.audit.b

    @property
    def B(self) -> float:
        return self.B_override if self.B_override is not None else self.audit.B

    @property
    def c(self) -> float:
        return self.c_user if self.c_user is not None else self.audit.c_est

    @property
    def certified(self) -> bool:
        if self.affine:
            return True
        return (
            self.c_user is not None
            and self.holder_certified
            and self.b_override is not None
            and self.B_override is not None
            and self.expansion_certified
        )


@dataclass(frozen=True)
class Schedule:
    """Finite description of the stage sequence: ``prefix`` then ``cycle`` forever."""

    kind: str
    prefix: tuple[int, ...]
    cycle: tuple[int, ...]

    def stage_at(self, k: int) -> int:
        if k < 1:
            raise InputError(f"levels are numbered from 1, got {k}")
        if k <= len(self.prefix):
            return self.prefix[k - 1]
        return self.cycle[(k - 1 - len(self.prefix)) % len(self.cycle)]

    def sequence(self, n: int, offset: int = 0) -> np.ndarray:
        """Stage indices for levels ``offset + 1 .. offset + n``."""
        return np.array([self.stage_at(offset + k) for k in range(1, n + 1)], dtype=np.int32)

    @property
    def distinct(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.prefix) | set(self.cycle)))

    @property
    def period(self) -> int:
        return 1 if len(set(self.cycle)) == 1 else len(self.cycle)

    @property
    def pressure_offset(self) -> int:
        """Levels skipped so that the remaining schedule is purely periodic."""
        return len(self.prefix)

    def aligned(self, n: int) -> bool:
        """True when level sums of depth ``n`` after the prefix obey the
        submultiplicativity argument (``n`` a multiple of the period)."""
        return n % self.period == 0


@dataclass(frozen=True)
class SystemConstants:
    b: float
    B: float
    c: float
    gamma: float
    xi: float
    certified: bool

    def as_dict(self) -> dict:
        return {"b": self.b, "B": self.B, "c": self.c, "gamma": self.gamma,
                "xi": self.xi, "certified": self.certified}


@dataclass(frozen=True)
class BasicInterval:
    word: Word
    lo: float
    hi: float

    @property
    def diam(self) -> float:
        return self.hi - self.lo

    def contains(self, other: BasicInterval) -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


def distortion_constant(c: float, b: float, gamma: float) -> float:
    """``exp(c / (b**gamma - 1))``; equals 1 exactly when ``c == 0``."""
    if b <= 1:
        raise InputError(f"expansion bound b must exceed 1, got {b}")
    if c == 0:
        return 1.0
    return math.exp(c / (b**gamma - 1.0))


class System:
    """A validated, immutable cookie-cutter-like system on ``[0, 1]``."""

    def __init__(self, stages: Sequence[Stage], schedule: Schedule, *,
                 interval: tuple[float, float] = (0.0, 1.0), name: str = ""):
        self.stages = tuple(stages)
        self.schedule = schedule
        self.interval = interval
        self.name = name
        self.n_letters = len(self.stages[0].branches)
        bids = []
        specs = []
        for stage in self.stages:
            row = []
            for br in stage.branches:
                row.append(len(specs))
                specs.append(br.programs())
            bids.append(row)
        self.table = BranchTable.build(specs, np.array(bids, dtype=np.int32))
        self.stages = tuple(
            _with_audit(stage, self, s) for s, stage in enumerate(self.stages)
        )
        used = [self.stages[s] for s in schedule.distinct]
        b = min(st.b for st in used)
        B = max(st.B for st in used)
        c = max(st.c for st in used)
        gamma = min(st.gamma for st in used)
        self.constants = SystemConstants(
            b=b, B=B, c=c, gamma=gamma,
            xi=distortion_constant(c, b, gamma),
            certified=all(st.certified for st in used),
        )
        self._cache: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self._xi_emp: dict = {}

    # ------------------------------------------------------------------
    # convenience

    @property
    def N(self) -> int:
        return self.n_letters

    @property
    def xi(self) -> float:
        return self.constants.xi

    @property
    def consistent(self) -> bool:
        return all(st.audit.holder_ok for st in self.stages)

    def __repr__(self) -> str:
        k = self.constants
        return (f"System(name={self.name!r}, N={self.N}, schedule={self.schedule.kind}, "
                f"b={k.b:.6g}, B={k.B:.6g}, xi={k.xi:.6g})")

    def _bid(self, k: int, j: int) -> int:
        if not 1 <= j <= self.N:
            raise InputError(f"branch index {j} outside 1..{self.N}")
        return int(self.table.stage_branch[self.schedule.stage_at(k), j - 1])

    # ------------------------------------------------------------------
    # branch maps

    def branch_inverse(self, k: int, j: int, x: float) -> float:
        """``phi_{k,j}(x)`` for level ``k >= 1`` and 1-based branch ``j``."""
        _check_unit(x)
        return float(_backend.kernels.apply(self.table, self._bid(k, j), np.array([x]))[0])

    def branch_inverse_deriv(self, k: int, j: int, x: float) -> float:
        _check_unit(x)
        _, d = _backend.kernels.apply_with_deriv(self.table, self._bid(k, j), np.array([x]))
        return float(d[0])

    def stage_sequence(self, n: int, offset: int = 0) -> np.ndarray:
        return self.schedule.sequence(n, offset)

    # ------------------------------------------------------------------
    # basic intervals

    def _words_array(self, words: Iterable[Iterable[int]]) -> np.ndarray:
        arr = np.array([tuple(w) for w in words], dtype=np.int32)
        if arr.ndim != 2:
            raise InputError("words passed together must share one length")
        if arr.size and (arr.min() < 1 or arr.max() > self.N):
            raise InputError(f"letters must lie in 1..{self.N}")
        return arr - 1

    def endpoints(self, words: np.ndarray, offset: int = 0):
        """Endpoints of ``J_sigma`` for a ``(m, n)`` array of 0-based letters."""
        words = np.ascontiguousarray(words, dtype=np.int32)
        m, n = words.shape
        if n == 0:
            return np.zeros(m), np.ones(m)
        stages = self.stage_sequence(n, offset)
        k = _backend.kernels
        e0, _ = k.fold(self.table, stages, words, np.zeros(m))
        e1, _ = k.fold(self.table, stages, words, np.ones(m))
        return np.minimum(e0, e1), np.maximum(e0, e1)

    def basic_interval(self, sigma: Iterable[int], offset: int = 0) -> BasicInterval:
        """``J_sigma``; with ``offset`` the stages start at level ``offset + 1``."""
        w = check_word(sigma, self.N)
        lo, hi = self.endpoints(np.array([w], dtype=np.int32).reshape(1, len(w)) - 1, offset)
        return BasicInterval(w, float(lo[0]), float(hi[0]))

    def basic_intervals(self, words: Iterable[Iterable[int]], offset: int = 0):
        """Vectorised ``basic_interval`` for equal-length words; returns (lo, hi)."""
        return self.endpoints(self._words_array(words), offset)

    def word_derivative(self, sigma: Iterable[int], x: float, offset: int = 0) -> float:
        """``|phi_sigma'(x)|`` by the chain rule."""
        _check_unit(x)
        w = check_word(sigma, self.N)
        arr = np.array(w, dtype=np.int32).reshape(1, len(w)) - 1
        _, logd = _backend.kernels.fold(
            self.table, self.stage_sequence(len(w), offset), arr, np.array([x]), True
        )
        return math.exp(float(logd[0]))

    def code_point(self, address: Address | str, n: int) -> BasicInterval:
        """Enclosure ``J_{sigma|n}`` of the coded point ``pi(sigma)``."""
        if n < 1:
            raise InputError("depth must be >= 1")
        if isinstance(address, str):
            address = Address.parse(address, self.N)
        return self.basic_interval(address.truncate(n))

    # ------------------------------------------------------------------
    # whole levels

    def _suffix_levels(self) -> int:
        return max(1, int(math.floor(math.log(BLOCK_WORDS) / math.log(self.N) + 1e-9)))

    def iter_level(self, n: int, prefix: Sequence[int] = (), *, offset: int = 0,
                   threads: int = 1) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(lo, hi)`` blocks covering every length-``n`` word that
        extends ``prefix``, in lexicographic order.

        The deepest levels are shared by all blocks and computed once; each
        block then applies the maps of its own middle word and the prefix.
        Per word this performs exactly the right-to-left fold of
        :meth:`basic_interval`, so values agree bit for bit.  Block
        boundaries depend only on ``N`` and ``n``, never on ``threads``.
        """
        prefix = check_word(prefix, self.N)
        p = len(prefix)
        if n < p:
            raise InputError(f"level {n} is shallower than the prefix")
        rest = n - p
        s = min(rest, self._suffix_levels())
        m = rest - s
        k = _backend.kernels
        table = self.table
        e0, e1 = np.zeros(1), np.ones(1)
        for level in range(n, n - s, -1):
            row = table.stage_branch[self.schedule.stage_at(offset + level)]
            e0 = np.concatenate([k.apply(table, int(row[j]), e0) for j in range(self.N)])
            e1 = np.concatenate([k.apply(table, int(row[j]), e1) for j in range(self.N)])
        head_bids = [
            int(table.stage_branch[self.schedule.stage_at(offset + i + 1), a - 1])
            for i, a in enumerate(prefix)
        ]

        def block(middle: tuple[int, ...]):
            a0, a1 = e0, e1
            for i in range(m - 1, -1, -1):
                bid = int(table.stage_branch[self.schedule.stage_at(offset + p + i + 1), middle[i]])
                a0 = k.apply(table, bid, a0)
                a1 = k.apply(table, bid, a1)
            for bid in reversed(head_bids):
                a0 = k.apply(table, bid, a0)
                a1 = k.apply(table, bid, a1)
            return np.minimum(a0, a1), np.maximum(a0, a1)

        middles = product(range(self.N), repeat=m)
        if threads <= 1 or m == 0:
            for mid in middles:
                yield block(mid)
            return
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(block, middles)

    def level_intervals(self, n: int, prefix: Sequence[int] = (), *, offset: int = 0,
                        threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Concatenated ``(lo, hi)`` over a level; materializes ``N**n`` values."""
        blocks = list(self.iter_level(n, prefix, offset=offset, threads=threads))
        return (np.concatenate([b[0] for b in blocks]),
                np.concatenate([b[1] for b in blocks]))

    def level_log_diams(self, n: int, prefix: Sequence[int] = (), *, offset: int = 0,
                        threads: int = 1) -> Iterable[np.ndarray]:
        """Blocks of ``log diam J_sigma`` in lexicographic order.

        Small levels are cached on the system so repeated partition sums at the
        same depth (bisection in ``t``) do not recompute intervals.
        """
        prefix = tuple(prefix)
        key = (n, prefix, offset)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        gen = (_log_diam(lo, hi) for lo, hi in
               self.iter_level(n, prefix, offset=offset, threads=threads))
        if self.N ** (n - len(prefix)) > CACHE_WORDS:
            return gen
        blocks = tuple(gen)
        with self._lock:
            self._cache[key] = blocks
            while len(self._cache) > CACHE_ENTRIES:
                self._cache.popitem(last=False)
        return blocks

    # ------------------------------------------------------------------
    # distortion

    def empirical_xi(self, depth: int = 10, samples: int = 10_000, seed: int = 0) -> float:
        """Largest sampled ratio ``max(q, 1/q)`` with
        ``q = |J_{sigma tau}| / (|J_sigma| |J'_tau|)``.

        ``J'_tau`` uses the stages following ``sigma`` (identical to ``J_tau``
        for a constant schedule).  Informational only; never replaces the
        certified ``xi**3``.
        """
        if depth < 2:
            raise InputError("empirical_xi needs depth >= 2")
        key = (depth, samples, seed)
        if key in self._xi_emp:
            return self._xi_emp[key]
        rng = np.random.default_rng(seed)
        len_s = rng.integers(1, depth, size=samples)
        len_t = np.array([rng.integers(1, depth - a + 1) for a in len_s])
        worst = 1.0
        for a in np.unique(len_s):
            for b in np.unique(len_t[len_s == a]):
                sel = int(np.count_nonzero((len_s == a) & (len_t == b)))
                letters = rng.integers(0, self.N, size=(sel, a + b)).astype(np.int32)
                lo, hi = self.endpoints(letters)
                lo_s, hi_s = self.endpoints(letters[:, :a])
                lo_t, hi_t = self.endpoints(letters[:, a:], offset=int(a))
                q = (hi - lo) / ((hi_s - lo_s) * (hi_t - lo_t))
                worst = max(worst, float(np.max(q)), float(np.max(1.0 / q)))
        self._xi_emp[key] = worst
        return worst

    # ------------------------------------------------------------------
    # reporting

    def summary(self) -> dict:
        k = self.constants
        return {
            "name": self.name,
            "N": self.N,
            "schedule": {"kind": self.schedule.kind, "prefix": list(self.schedule.prefix),
                         "cycle": list(self.schedule.cycle)},
            "interval": list(self.interval),
            **k.as_dict(),
            "stages": [
                {
                    "b": st.b, "B": st.B, "c": st.c, "c_est": st.audit.c_est,
                    "gamma": st.gamma, "holder_ok": st.audit.holder_ok,
                    "certified": st.certified,
                    "images": [list(im) for im in st.audit.images],
                    "branches": [br.source for br in st.branches],
                }
                for st in self.stages
            ],
        }


def _log_diam(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    d = hi - lo
    if not np.all(d > 0):
        raise NumericError("a basic interval collapsed to zero width in double precision")
    return np.log(d)


def _check_unit(x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise InputError(f"x = {x!r} lies outside J = [0, 1]")


# ----------------------------------------------------------------------
# auditing


def defining_data_audit(system: System, s: int, stage: Stage | None = None) -> StageAudit:
    """Sample the defining data of stage ``s``.

    ``b_k, B_k`` are the min/max of ``|f'|`` on a uniform grid over each branch
    domain; ``c_est`` is the largest Hoelder quotient over random pairs.
    """
    stage = stage or system.stages[s]
    k = _backend.kernels
    table = system.table
    rng = np.random.default_rng(AUDIT_SEED + s)
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    fmin, fmax, c_est = math.inf, 0.0, 0.0
    images = []
    where = lambda j: f"stage {s}, branch {j + 1}"  # noqa: E731
    for j, br in enumerate(stage.branches):
        bid = int(table.stage_branch[s, j])
        if br.mode == "affine":
            if not 0 < abs(br.r) < 1:
                raise ExpansionViolation(
                    f"{where(j)}: affine ratio {br.r} is not a contraction (need 0 < |r| < 1)")
            fp = np.full(GRID_POINTS, 1.0 / abs(br.r))
            ends = (br.a, br.a + br.r)
            images.append((min(ends), max(ends)))
            pair_y = pair_fp = None
        elif br.mode == "explicit_inverse":
            y, d = k.apply_with_deriv(table, bid, grid)
            _check_monotone(y, where(j) + ": phi")
            if np.any(d == 0) or not (np.all(d > 0) or np.all(d < 0)):
                raise ConfigError(f"{where(j)}: phi' changes sign or vanishes on J")
            if np.any(np.abs(d) >= 1):
                x0 = float(grid[np.argmax(np.abs(d))])
                raise ExpansionViolation(
                    f"{where(j)}: |phi'| >= 1 at x = {x0:.6g}; the branch does not contract")
            if y.min() < -GAP_TOL or y.max() > 1 + GAP_TOL:
                raise ConfigError(f"{where(j)}: phi does not map J into J "
                                  f"(range [{y.min():.6g}, {y.max():.6g}])")
            fp = 1.0 / np.abs(d)
            images.append((float(min(y[0], y[-1])), float(max(y[0], y[-1]))))
            s1 = rng.random(HOLDER_PAIRS)
            s2 = rng.random(HOLDER_PAIRS)
            y1, d1 = k.apply_with_deriv(table, bid, s1)
            y2, d2 = k.apply_with_deriv(table, bid, s2)
            pair_y = (y1, y2)
            pair_fp = (1.0 / np.abs(d1), 1.0 / np.abs(d2))
        else:
            u, v = br.domain
            ys = np.linspace(u, v, GRID_POINTS)
            fy = k.evaluate(table, bid, 0, ys)
            d = k.evaluate(table, bid, 1, ys)
            _check_monotone(fy, where(j) + ": f")
            if np.any(np.abs(d) <= 1):
                x0 = float(ys[np.argmin(np.abs(d))])
                raise ExpansionViolation(
                    f"{where(j)}: |f'| <= 1 at x = {x0:.6g}; the branch is not expanding")
            lo_end, hi_end = sorted((float(fy[0]), float(fy[-1])))
            if abs(lo_end) > ENDPOINT_TOL or abs(hi_end - 1) > ENDPOINT_TOL:
                raise ConfigError(
                    f"{where(j)}: f maps [{u:.12g}, {v:.12g}] onto [{lo_end:.12g}, {hi_end:.12g}], "
                    "not onto J")
            fp = np.abs(d)
            images.append((u, v))
            y1 = u + (v - u) * rng.random(HOLDER_PAIRS)
            y2 = u + (v - u) * rng.random(HOLDER_PAIRS)
            pair_y = (y1, y2)
            pair_fp = (np.abs(k.evaluate(table, bid, 1, y1)), np.abs(k.evaluate(table, bid, 1, y2)))
        fmin = min(fmin, float(fp.min()))
        fmax = max(fmax, float(fp.max()))
        if pair_y is not None:
            dy = np.abs(pair_y[0] - pair_y[1])
            ok = dy > 0
            q = np.abs(pair_fp[0] - pair_fp[1])[ok] / dy[ok] ** stage.gamma
            if q.size:
                c_est = max(c_est, float(q.max()))
    if fmin <= 1:
        raise ExpansionViolation(f"stage {s}: sampled inf |f'| = {fmin} <= 1")
    order = sorted(range(len(images)), key=lambda i: images[i][0])
    for a, b in zip(order, order[1:]):
        if images[b][0] - images[a][1] < GAP_TOL:
            raise ConfigError(
                f"stage {s}: branch images overlap or touch: branch {a + 1} "
                f"[{images[a][0]:.12g}, {images[a][1]:.12g}] and branch {b + 1} "
                f"[{images[b][0]:.12g}, {images[b][1]:.12g}]")
    holder_ok = stage.c_user is None or c_est <= stage.c_user * (1 + HOLDER_REL)
    return StageAudit(b=fmin, B=fmax, c_est=c_est, holder_ok=holder_ok, images=tuple(images))


def _check_monotone(values: np.ndarray, what: str) -> None:
    diffs = np.diff(values)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ConfigError(f"{what} is not strictly monotone on its domain")


def _with_audit(stage: Stage, system: System, s: int) -> Stage:
    audit = defining_data_audit(system, s, stage)
    b = stage.b_override if stage.b_override is not None else audit.b
    B = stage.B_override if stage.B_override is not None else audit.B
    if not 1 < b <= B < math.inf:
        raise ExpansionViolation(f"stage {s}: need 1 < b_k <= B_k < inf, got b={b}, B={B}")
    return Stage(
        branches=stage.branches, gamma=stage.gamma, c_user=stage.c_user,
        holder_certified=stage.holder_certified, b_override=stage.b_override,
        B_override=stage.B_override, expansion_certified=stage.expansion_certified,
        audit=audit,
    )


# ----------------------------------------------------------------------
# loading


def _num(obj, key, where, default=None):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}: missing {key!r}")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"{where}.{key}: expected a finite number, got {val!r}")
    return float(val)


def _expr(obj, key, where) -> ml.Expr:
    if key not in obj or not isinstance(obj[key], str):
        raise ConfigError(f"{where}: missing expression {key!r}")
    try:
        return ml.parse(obj[key])
    except ml.ParseError as exc:
        raise ConfigError(f"{where}.{key}: {exc}") from None


def _branch(obj, where: str, p: float, scale: float) -> BranchSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    mode = obj.get("mode")
    rescale = not (p == 0.0 and scale == 1.0)
    if mode == "affine":
        a, r = _num(obj, "a", where), _num(obj, "r", where)
        src = f"affine a={a!r} r={r!r}"
        if rescale:
            a = (a + r * p - p) / scale
        return BranchSpec("affine", a=a, r=r, source=src)
    if mode == "explicit_inverse":
        e = _expr(obj, "phi", where)
        src = obj["phi"]
        if rescale:
            e = _conjugate(e, p, scale)
        return BranchSpec("explicit_inverse", expr=e, source=src)
    if mode == "forward_branch":
        e = _expr(obj, "f", where)
        dom = obj.get("domain")
        if (not isinstance(dom, list) or len(dom) != 2
                or not all(isinstance(t, (int, float)) for t in dom)):
            raise ConfigError(f"{where}.domain: expected [u, v]")
        u, v = float(dom[0]), float(dom[1])
        if not u < v:
            raise ConfigError(f"{where}.domain: need u < v")
        src = obj["f"]
        if rescale:
            e = _conjugate(e, p, scale)
            u, v = (u - p) / scale, (v - p) / scale
        if u < -GAP_TOL or v > 1 + GAP_TOL:
            raise ConfigError(f"{where}.domain: [{u}, {v}] is not inside J")
        return BranchSpec("forward_branch", expr=e, domain=(max(u, 0.0), min(v, 1.0)), source=src)
    raise ConfigError(f"{where}.mode: expected affine, explicit_inverse or forward_branch, "
                      f"got {mode!r}")


def _conjugate(e: ml.Expr, p: float, scale: float) -> ml.Expr:
    """``(e(p + scale*y) - p) / scale``: the map expressed on the unit interval."""
    inner = ml.BinOp("+", ml.Num(p), ml.BinOp("*", ml.Num(scale), ml.X))
    return ml.BinOp("/", ml.BinOp("-", ml.substitute(e, inner), ml.Num(p)), ml.Num(scale))


def _stage(obj, where: str, p: float, scale: float) -> Stage:
    if not isinstance(obj, dict) or not isinstance(obj.get("branches"), list):
        raise ConfigError(f"{where}: expected an object with a 'branches' list")
    branches = tuple(_branch(b, f"{where}.branches[{j}]", p, scale)
                     for j, b in enumerate(obj["branches"]))
    holder = obj.get("holder", {})
    if not isinstance(holder, dict):
        raise ConfigError(f"{where}.holder: expected an object")
    gamma = _num(holder, "gamma", f"{where}.holder", 1.0)
    if not 0 < gamma <= 1:
        raise ConfigError(f"{where}.holder.gamma: must lie in (0, 1], got {gamma}")
    c_user = _num(holder, "c", f"{where}.holder") if "c" in holder else None
    if c_user is not None:
        if c_user < 0:
            raise ConfigError(f"{where}.holder.c: must be >= 0")
        c_user *= scale**gamma
    exp_obj = obj.get("expansion", {})
    if not isinstance(exp_obj, dict):
        raise ConfigError(f"{where}.expansion: expected an object")
    return Stage(
        branches=branches,
        gamma=gamma,
        c_user=c_user,
        holder_certified=bool(holder.get("certified", False)),
        b_override=_num(exp_obj, "b", f"{where}.expansion") if "b" in exp_obj else None,
        B_override=_num(exp_obj, "B", f"{where}.expansion") if "B" in exp_obj else None,
        expansion_certified=bool(exp_obj.get("certified", False)),
    )


def _index_list(obj, key, where, n_stages) -> tuple[int, ...]:
    vals = obj.get(key, [])
    if not isinstance(vals, list) or not all(isinstance(v, int) and not isinstance(v, bool)
                                             for v in vals):
        raise ConfigError(f"{where}.{key}: expected a list of stage indices")
    for v in vals:
        if not 0 <= v < n_stages:
            raise ConfigError(f"{where}.{key}: stage index {v} outside 0..{n_stages - 1}")
    return tuple(vals)


def _schedule(obj, n_stages: int) -> Schedule:
    where = "schedule"
    if obj is None:
        if n_stages != 1:
            raise ConfigError("schedule: required when more than one stage is given")
        return Schedule("constant", (), (0,))
    if not isinstance(obj, dict):
        raise ConfigError("schedule: expected an object")
    kind = obj.get("kind")
    prefix = _index_list(obj, "prefix", where, n_stages)
    cycle = _index_list(obj, "cycle", where, n_stages)
    if kind == "constant":
        if "stage" in obj:
            cycle = _index_list({"c": [obj["stage"]]}, "c", where, n_stages)
        cycle = cycle or (0,)
        if len(set(cycle)) != 1 or prefix:
            raise ConfigError("schedule: a constant schedule names exactly one stage")
        return Schedule("constant", (), cycle[:1])
    if kind == "periodic":
        if not cycle:
            raise ConfigError("schedule.cycle: a periodic schedule needs at least one stage")
        if prefix:
            raise ConfigError("schedule.prefix: use kind 'prefix_periodic' for a prefix")
        return Schedule("periodic", (), cycle)
    if kind == "prefix_periodic":
        if not cycle:
            raise ConfigError("schedule.cycle: the cycle must be nonempty")
        return Schedule("prefix_periodic", prefix, cycle)
    raise ConfigError(f"schedule.kind: expected constant, periodic or prefix_periodic, got {kind!r}")


def load_system(config: dict | str | Path, *, name: str | None = None) -> System:
    """Build a validated :class:`System` from a config mapping or JSON file."""
    if isinstance(config, (str, Path)):
        path = Path(config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
        try:
            config = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        name = name or path.stem
    if not isinstance(config, dict):
        raise ConfigError("config: expected a JSON object")
    interval = config.get("interval", [0.0, 1.0])
    if (not isinstance(interval, list) or len(interval) != 2
            or not all(isinstance(t, (int, float)) and math.isfinite(t) for t in interval)
            or not interval[0] < interval[1]):
        raise ConfigError("interval: expected [p, q] with p < q")
    p, q = float(interval[0]), float(interval[1])
    stages_obj = config.get("stages")
    if not isinstance(stages_obj, list) or not stages_obj:
        raise ConfigError("stages: the schedule needs at least one stage")
    stages = [_stage(s, f"stages[{i}]", p, q - p) for i, s in enumerate(stages_obj)]
    n_letters = len(stages[0].branches)
    if n_letters < 2:
        raise ConfigError("stages[0]: need at least two branches")
    for i, st in enumerate(stages):
        if len(st.branches) != n_letters:
            raise ConfigError(f"stages[{i}]: has {len(st.branches)} branches, "
                              f"stage 0 has {n_letters}")
    schedule = _schedule(config.get("schedule"), len(stages))
    try:
        return System(stages, schedule, interval=(p, q), name=name or config.get("name", ""))
    except ml.DomainFault as exc:
        raise ConfigError(f"expression cannot be evaluated on J: {exc}") from None


def affine_system(ratios: Sequence[Sequence[float]] | Sequence[float],
                  offsets: Sequence[Sequence[float]] | Sequence[float] | None = None,
                  *, cycle: Sequence[int] | None = None) -> System:
    """Shortcut for affine systems with left-aligned, evenly spread branches.

    ``ratios`` is one list of ratios per stage (or a single list).  Without
    explicit offsets, branches are placed so the first touches 0 and the last
    touches 1 with equal gaps between them.
    """
    if ratios and not isinstance(ratios[0], (list, tuple)):
        ratios = [ratios]
        offsets = [offsets] if offsets is not None else None
    stages = []
    for s, rs in enumerate(ratios):
        if offsets is not None:
            offs = list(offsets[s])
        else:
            gap = (1.0 - sum(rs)) / (len(rs) - 1)
            offs, pos = [], 0.0
            for r in rs:
                offs.append(pos)
                pos += r + gap
            offs[-1] = 1.0 - rs[-1]
        stages.append({"branches": [{"mode": "affine", "a": a, "r": r} for a, r in zip(offs, rs)]})
    cfg: dict = {"stages": stages}
    if len(stages) > 1:
        cfg["schedule"] = {"kind": "periodic", "cycle": list(cycle or range(len(stages)))}
    return load_system(cfg)
