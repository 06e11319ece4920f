from __future__ import annotations

import itertools
import math

import mpmath as mp
import pytest

from ccdim import InputError, NumericError, _backend, load_system
from ccdim.pressure import (
    CERTIFIED,
    HEURISTIC,
    SAMPLED,
    corollary_check,
    dimension_enclosure,
    partition_sum,
    pressure_bracket,
    pressure_csv,
    pressure_curve,
)
from conftest import CANTOR_DIM, config

mp.mp.dps = 40


def root(fn, guess):
    return float(mp.findroot(fn, mp.mpf(guess)))


CANTOR_ROOT = root(lambda s: 2 * mp.mpf(3) ** -s - 1, 0.6)
HALFQUARTER_ROOT = root(lambda s: mp.mpf(2) ** -s + mp.mpf(4) ** -s - 1, 0.7)
PERIOD2_ROOT = root(lambda t: mp.log(2) - t / 2 * mp.log(12), 0.5)


def mp_perturbed_log_sum(n: int, t: float) -> mp.mpf:
    """log sum |J_sigma|^t for the perturbed Cantor set, composed in mpmath."""
    c = mp.mpf("0.01")
    phis = [lambda x: x / 3 + c * x**2, lambda x: mp.mpf("0.6") + x / 3 + c * x**2]
    total = mp.mpf(0)
    for w in itertools.product((0, 1), repeat=n):
        lo, hi = mp.mpf(0), mp.mpf(1)
        for j in reversed(w):
            lo, hi = phis[j](lo), phis[j](hi)
        total += (hi - lo) ** t
    return mp.log(total)


def test_oracles_agree_with_closed_forms():
    assert CANTOR_ROOT == pytest.approx(CANTOR_DIM, rel=1e-15)
    assert HALFQUARTER_ROOT == pytest.approx(math.log((1 + math.sqrt(5)) / 2) / math.log(2), rel=1e-15)


def test_partition_sum_examples(cantor, halfquarter):
    assert partition_sum(cantor, 3, 1.0) == pytest.approx(math.log(8 / 27), rel=1e-14)
    assert partition_sum(halfquarter, 5, 0.0) == pytest.approx(math.log(32), rel=1e-15)
    for n in (1, 5, 12):
        assert abs(partition_sum(cantor, n, CANTOR_DIM)) < 1e-13


@pytest.mark.parametrize("n,t", [(4, 0.65), (7, 0.3), (8, 1.7)])
def test_partition_sum_matches_high_precision(perturbed, n, t):
    assert partition_sum(perturbed, n, t) == pytest.approx(float(mp_perturbed_log_sum(n, t)),
                                                           rel=1e-13, abs=1e-14)


def test_partition_sum_domain(cantor):
    with pytest.raises(InputError, match="t < 0"):
        partition_sum(cantor, 3, -0.1)
    with pytest.raises(InputError):
        partition_sum(cantor, 0, 1.0)
    with pytest.raises(InputError):
        pressure_bracket(cantor, 3, -1.0)


def test_partition_sum_thread_independent(perturbed):
    values = {partition_sum(perturbed, 14, 0.65, threads=k) for k in (1, 2, 8)}
    assert len(values) == 1


def test_backends_agree(perturbed):
    results = {}
    for name in _backend.available():
        with _backend.use_backend(name):
            results[name] = partition_sum(perturbed, 12, 0.65)
    ref = next(iter(results.values()))
    for v in results.values():
        assert v == pytest.approx(ref, rel=1e-13, abs=1e-15)


# ----------------------------------------------------------------------
# brackets


def test_affine_bracket_collapses(cantor):
    for t in (0.0, 0.4, 1.0, 2.5):
        br = pressure_bracket(cantor, 7, t)
        assert br.L == br.U
        assert br.L == pytest.approx(math.log(2) - t * math.log(3), abs=1e-14)


def test_bracket_at_zero_is_log_n(systems):
    for s in systems.values():
        br = pressure_bracket(s, 9, 0.0)
        assert br.L == br.U == pytest.approx(math.log(s.N), rel=1e-15)


def test_perturbed_bracket_width(perturbed):
    br = pressure_bracket(perturbed, 12, 0.63)
    b = 1 / (mp.mpf(1) / 3 + mp.mpf("0.02"))
    xi = mp.exp(mp.mpf("0.54") / (b - 1))
    assert br.width == pytest.approx(float(6 * mp.mpf("0.63") * mp.log(xi) / 12), rel=1e-12)
    assert br.status == CERTIFIED


def test_brackets_nest_along_doubling(perturbed, period2, logistic):
    for s, n in ((perturbed, 6), (period2, 4), (logistic, 5)):
        for t in (0.2, 0.6, 0.65, 1.0, 1.5):
            a, b = pressure_bracket(s, n, t), pressure_bracket(s, 2 * n, t)
            assert a.L - 1e-13 <= b.L <= b.U <= a.U + 1e-13


def test_status_labels(cantor, period2, logistic):
    assert pressure_bracket(cantor, 5, 0.5).status == CERTIFIED
    assert pressure_bracket(period2, 6, 0.5).status == CERTIFIED
    assert pressure_bracket(period2, 7, 0.5).status == HEURISTIC
    assert pressure_bracket(logistic, 6, 0.5).status == SAMPLED


def test_pressure_curve_cantor(cantor):
    curve = pressure_curve(cantor, 8, [0.0, CANTOR_DIM, 1.0])
    mids = [b.midpoint for b in curve]
    assert mids == pytest.approx([math.log(2), 0.0, math.log(2 / 3)], abs=1e-14)


def test_pressure_curve_shape(perturbed):
    ts = [0.1 * k for k in range(21)]
    curve = pressure_curve(perturbed, 10, ts)
    lnb = math.log(perturbed.constants.b)
    for a, b in zip(curve, curve[1:]):
        assert b.midpoint <= a.midpoint - 0.1 * lnb + 1e-12
    logz = [b.logZ for b in curve]
    for a, m, c in zip(logz, logz[1:], logz[2:]):
        assert m <= 0.5 * (a + c) + 1e-12


def test_pressure_csv(cantor):
    text = pressure_csv(pressure_curve(cantor, 4, [0.0, 1.0]))
    lines = text.splitlines()
    assert lines[0] == "t,logZ,L,U,midpoint"
    assert lines[1].startswith("0.0,")
    assert len(lines) == 3


# ----------------------------------------------------------------------
# enclosures


def test_cantor_enclosure(cantor):
    enc = dimension_enclosure(cantor, 8, 1e-12)
    assert abs(enc.h_lo - CANTOR_ROOT) <= 1e-12 and abs(enc.h_hi - CANTOR_ROOT) <= 1e-12
    assert enc.contains(CANTOR_ROOT)
    assert enc.width_bound == 0.0


def test_halfquarter_enclosure(halfquarter):
    enc = dimension_enclosure(halfquarter, 8, 1e-12)
    assert abs(enc.h_lo - HALFQUARTER_ROOT) <= 1e-12 and abs(enc.h_hi - HALFQUARTER_ROOT) <= 1e-12
    assert enc.contains(HALFQUARTER_ROOT)


def test_period2_enclosure(period2):
    enc = dimension_enclosure(period2, 8, 1e-12)
    assert abs(enc.midpoint - PERIOD2_ROOT) <= 1e-9
    assert enc.contains(PERIOD2_ROOT)
    assert enc.status == CERTIFIED


@pytest.mark.parametrize("name,oracle,depths", [
    ("cantor", CANTOR_ROOT, range(1, 13)),
    ("halfquarter", HALFQUARTER_ROOT, range(1, 13)),
    ("period2", PERIOD2_ROOT, range(2, 15, 2)),
])
def test_affine_oracle_inside_every_enclosure(systems, name, oracle, depths):
    for n in depths:
        enc = dimension_enclosure(systems[name], n, 1e-12, xi_samples=0)
        assert enc.h_lo - enc.tol <= oracle <= enc.h_hi + enc.tol, n


def test_prefix_periodic_uses_tail_sums(cantor):
    s = load_system(config("prefix-periodic"))
    assert partition_sum(s, 6, 0.7, offset=1) == partition_sum(cantor, 6, 0.7)
    # the ratio-1/4 prefix stage does not change the dimension
    enc = dimension_enclosure(s, 6, 1e-12, xi_samples=0)
    assert enc.contains(CANTOR_ROOT)


def test_perturbed_enclosure_invariants(perturbed):
    prev = None
    for n in (6, 8, 10, 12):
        enc = dimension_enclosure(perturbed, n, 1e-12, xi_samples=500)
        assert 0 < enc.h_lo <= enc.h_hi
        assert enc.width <= enc.width_bound + 2 * enc.tol
        assert 1.0 <= enc.xi_emp <= perturbed.xi**3
        assert enc.emp_width < enc.width_bound
        if prev is not None:
            assert enc.midpoint == pytest.approx(prev.midpoint, abs=0.02)
        prev = enc
    d = enc.as_dict()
    assert {"h_lo", "h_hi", "depth", "xi", "certified_width_bound", "xi_emp", "tol"} <= d.keys()


def test_enclosure_arguments(cantor):
    with pytest.raises(InputError):
        dimension_enclosure(cantor, 0)
    with pytest.raises(InputError):
        dimension_enclosure(cantor, 5, tol=0.0)


def test_loose_constants_fail_to_bracket(logistic):
    with pytest.raises(NumericError, match="doublings"):
        dimension_enclosure(logistic, 10, xi_samples=0)


# ----------------------------------------------------------------------
# corollary


def test_corollary_affine(cantor, halfquarter):
    for s in (cantor, halfquarter):
        enc = dimension_enclosure(s, 10, xi_samples=0)
        rep = corollary_check(s, 10, enc)
        assert rep.ok
        for t, total, lo, hi in rep.rows:
            assert total == pytest.approx(1.0, abs=1e-10)
            assert lo == hi == 1.0


def test_corollary_perturbed(perturbed):
    enc = dimension_enclosure(perturbed, 10, xi_samples=0)
    rep = corollary_check(perturbed, 10, enc)
    assert rep.ok
    t, total, lo, hi = rep.rows[2]
    assert t == enc.midpoint and lo < total < hi
