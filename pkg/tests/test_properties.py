"""Randomized invariants over the sample systems (each suite >= 1000 cases)."""

from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

import props
from ccdim import partition_sum, pressure_bracket

ALL = ["cantor", "halfquarter", "period2", "perturbed", "logistic"]
AUTONOMOUS = ["cantor", "halfquarter", "perturbed", "logistic"]
MEASURE = ["cantor", "halfquarter", "perturbed", "period2"]
# measure enclosures and box bounds rest on the autonomous form of
# quasi-multiplicativity, see test_system for the periodic counterexample
MEASURE_BOUNDS = ["cantor", "halfquarter", "perturbed"]

SUITES = [
    (props.nesting_and_disjointness, ALL),
    (props.size_bounds, ALL),
    (props.child_lower_bound, ALL),
    (props.quasi_multiplicativity, AUTONOMOUS),
    (props.derivative_vs_diameter, ALL),
    (props.branch_derivative_range, ALL),
    (props.zero_exponent_counts, ALL),
    (props.convex_decreasing, ALL),
    (props.corollary_band, MEASURE),
    (props.nu_in_enclosure, MEASURE_BOUNDS),
    (props.moran_covers, MEASURE),
    (props.ball_counts, MEASURE),
    (props.box_count_bound, MEASURE_BOUNDS),
]
CASES = [(fn, name) for fn, names in SUITES for name in names]


def _assert(result: props.Result) -> None:
    assert result.cases >= 1000, result.line()
    assert result.violations == 0, result.line()


@pytest.mark.parametrize("suite,name", CASES, ids=[f"{f.__name__}-{n}" for f, n in CASES])
def test_suite(suite, name, systems):
    _assert(suite(systems[name], name))


def test_quasi_multiplicativity_shifted_stages(period2):
    _assert(props.quasi_multiplicativity(period2, "period2", shifted=True))


@pytest.mark.parametrize("name", MEASURE)
def test_nu_identities(name, systems):
    for result in props.nu_identities(systems[name], name):
        _assert(result)


# ----------------------------------------------------------------------
# hypothesis-driven invariants

words = st.lists(st.integers(1, 2), min_size=1, max_size=14)
systems_st = st.sampled_from(ALL)


@given(systems_st, words, st.integers(1, 2))
def test_child_nests_in_parent(systems, name, sigma, j):
    s = systems[name]
    parent = s.basic_interval(sigma)
    child = s.basic_interval(sigma + [j])
    assert parent.lo - 1e-15 <= child.lo < child.hi <= parent.hi + 1e-15


@given(systems_st, words)
def test_diameter_within_expansion_bounds(systems, name, sigma):
    s = systems[name]
    d = s.basic_interval(sigma).diam
    n = len(sigma)
    assert s.constants.B ** -n * (1 - 1e-12) - 1e-15 <= d <= s.constants.b ** -n * (1 + 1e-12) + 1e-15


@given(systems_st, st.integers(1, 10), st.floats(0, 3))
def test_bracket_is_ordered_with_fixed_width(systems, name, n, t):
    s = systems[name]
    br = pressure_bracket(s, n, t)
    assert br.L <= br.U
    assert br.U - br.L == pytest.approx(6 * t * math.log(s.xi) / n, rel=1e-12, abs=1e-15)


@given(systems_st, st.integers(1, 10), st.floats(0, 2), st.floats(1e-3, 1))
def test_strict_decrease_in_t(systems, name, n, t, dt):
    s = systems[name]
    f = partition_sum(s, n, t) / n
    g = partition_sum(s, n, t + dt) / n
    assert g < f
    assert g <= f - dt * math.log(s.constants.b) + 1e-12
