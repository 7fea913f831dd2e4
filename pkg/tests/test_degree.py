import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtoec.degree import (
    C_SLACK,
    DegreePolicy,
    brute_force_optimal_degree,
    closed_form_degree,
    expected_symbols_bound,
    feedback_budget,
    meets_reveal_floor,
    optimal_degree,
    revealing_probability,
    truncation_target,
)


def enumerate_p(k, r, d):
    """Fraction of d-subsets of range(k) with exactly one index >= r."""
    hits = total = 0
    for sub in itertools.combinations(range(k), d):
        total += 1
        hits += sum(i >= r for i in sub) == 1
    return Fraction(hits, total)


def test_optimal_degree_examples():
    assert optimal_degree(100, 0) == 1
    assert optimal_degree(100, 99) == 100
    assert optimal_degree(10, 5) == 2


def test_optimal_degree_range():
    with pytest.raises(ValueError):
        optimal_degree(10, 10)
    with pytest.raises(ValueError):
        optimal_degree(10, -1)


def test_revealing_probability_examples():
    for k in (1, 5, 40):
        assert revealing_probability(k, 0, 1) == 1
    assert revealing_probability(4, 2, 2, exact=True) == Fraction(2, 3)
    assert revealing_probability(5, 1, 4) == 0
    with pytest.raises(ValueError):
        revealing_probability(5, 1, 6)


@pytest.mark.parametrize("k", range(1, 9))
def test_revealing_probability_matches_enumeration(k):
    for r in range(k):
        for d in range(1, k + 1):
            assert revealing_probability(k, r, d, exact=True) == enumerate_p(k, r, d)


def test_revealing_probability_monte_carlo():
    rng = np.random.default_rng(7)
    k, r, d, n = 60, 40, 3, 20000
    p = revealing_probability(k, r, d)
    hits = sum((rng.choice(k, d, replace=False) >= r).sum() == 1 for _ in range(n))
    se = math.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) <= 3 * se


def test_brute_force_examples():
    assert brute_force_optimal_degree(100, 0) == 1
    assert brute_force_optimal_degree(50, 25) == optimal_degree(50, 25)
    assert brute_force_optimal_degree(10, 9) == 10
    assert revealing_probability(10, 9, 10) == 1


def test_tie_goes_to_smaller_degree():
    # k - r = 2 divides k + 1 = 4: degrees 1 and 2 reveal equally often.
    assert revealing_probability(3, 1, 1, exact=True) == revealing_probability(3, 1, 2, exact=True)
    assert optimal_degree(3, 1) == brute_force_optimal_degree(3, 1) == 1
    assert closed_form_degree(3, 1) == 2


def test_closed_form_is_largest_maximizer():
    for k in range(2, 60):
        for r in range(k):
            d = closed_form_degree(k, r)
            best = max(revealing_probability(k, r, x, exact=True) for x in range(1, k + 1))
            assert revealing_probability(k, r, d, exact=True) == best
            if d < k:
                assert revealing_probability(k, r, d + 1, exact=True) < best
            assert optimal_degree(k, r) == d - ((k + 1) % (k - r) == 0 and r < k - 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 300).flatmap(lambda k: st.tuples(st.just(k), st.integers(0, k - 1))))
def test_oracle_equivalence_and_floor(kr):
    k, r = kr
    assert brute_force_optimal_degree(k, r) == optimal_degree(k, r)
    assert meets_reveal_floor(k, r)
    assert revealing_probability(k, r, optimal_degree(k, r)) >= 1 / math.e


@pytest.mark.parametrize("k", [2, 17, 100, 299])
def test_degree_monotone(k):
    ds = [optimal_degree(k, r) for r in range(k)]
    assert ds[0] == 1
    assert all(a <= b for a, b in zip(ds, ds[1:]))


@pytest.mark.parametrize("gamma", [0.05, 0.1, 0.2, 0.3, 0.45])
def test_single_step_schedule_above_min_block_length(gamma):
    k0 = math.ceil(4 / gamma**2)
    for k in (k0, k0 + 1, k0 + 37, 2 * k0):
        target = truncation_target(k, gamma)
        ds = [optimal_degree(k, r) for r in range(target)]
        assert all(b - a in (0, 1) for a, b in zip(ds, ds[1:]))


def test_expected_symbols_bound():
    assert expected_symbols_bound(1000, 0.1) == pytest.approx(2000 - 100 * math.e + C_SLACK)
    assert expected_symbols_bound(1000, 1 / math.e) == pytest.approx(1000 + C_SLACK)
    assert C_SLACK == pytest.approx(4 * math.e + 1)
    with pytest.raises(ValueError):
        expected_symbols_bound(0, 0.1)
    with pytest.raises(ValueError):
        expected_symbols_bound(100, 0.5)


def test_feedback_budget_k100():
    # target = 90; brute-force degrees over r = 0..89 take the values 1..9
    values = {brute_force_optimal_degree(100, r) for r in range(90)}
    assert truncation_target(100, 0.1) == 90
    assert feedback_budget(100, 0.1) == len(values) == 9
    with pytest.raises(ValueError):
        feedback_budget(100, 0.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3000), st.floats(0.01, 0.49))
def test_feedback_budget_cap(k, gamma):
    assert feedback_budget(k, gamma) <= math.floor(2 / gamma) + 1


def test_policy():
    pol = DegreePolicy.create(1125, 0.1)
    assert pol.target == 1013
    assert pol.degree(0) == 1
    assert pol.max_degree == optimal_degree(1125, 1012) == 9
    assert len(pol.transitions) == pol.max_degree - 1
    assert list(pol.transitions) == sorted(set(pol.transitions))
    assert pol.max_degree <= 2 / 0.1
    assert pol.degree(5000) == pol.max_degree
    assert pol.feedback_budget == feedback_budget(1125, 0.1)


def test_policy_rejects_small_blocks():
    with pytest.raises(ValueError, match="4/gamma"):
        DegreePolicy.create(100, 0.1)
    DegreePolicy.create(400, 0.1)
