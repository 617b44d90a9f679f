"""Exact rational results: gap chain, expectations, DP oracle, discounting."""

import math
from fractions import Fraction

import pytest

from joinpolicy import exact
from joinpolicy.engine import TieBreak
from joinpolicy.errors import (HorizonTooLarge, NotErgodic, StateExplosion,
                               TruncationInsufficient)
from joinpolicy.model import SourcePair


def enum_greedy_expectation(pair, n):
    """Independent oracle: exhaustive expectation over label realizations.

    Walks every reachable count-vector state of the greedy policy
    (prefer-R ties) and sums matched-pair gains weighted by exact label
    probabilities.  Shares no code with the gap-chain identity.
    """
    r, s = pair.r.probs, pair.s.probs
    memo = {}

    def rec(k, nr, ns):
        if k == n:
            return Fraction(0)
        key = (nr, ns)
        if key in memo:
            return memo[key]
        gamma_r = sum((c * si for c, si in zip(nr, s)), Fraction(0))
        gamma_s = sum((c * ri for c, ri in zip(ns, r)), Fraction(0))
        total = Fraction(0)
        if gamma_s >= gamma_r:     # read R; ties prefer R
            for i, ri in enumerate(r):
                if ri:
                    nxt = nr[:i] + (nr[i] + 1,) + nr[i + 1:]
                    total += ri * (ns[i] + rec(k + 1, nxt, ns))
        else:
            for i, si in enumerate(s):
                if si:
                    nxt = ns[:i] + (ns[i] + 1,) + ns[i + 1:]
                    total += si * (nr[i] + rec(k + 1, nr, nxt))
        memo[key] = total
        return total

    zero = (0,) * pair.support
    return rec(0, zero, zero)


def test_enumeration_oracle_agrees_with_chain(coin_pair, pair_factory):
    for n in range(1, 9):
        assert exact.greedy_expectation(coin_pair, n) == \
            enum_greedy_expectation(coin_pair, n)
    for seed in range(3):
        pair = pair_factory(seed)
        for n in range(1, 6):
            assert exact.greedy_expectation(pair, n) == \
                enum_greedy_expectation(pair, n)


def test_frozen_spot_values(coin_pair):
    assert exact.greedy_expectation(coin_pair, 2) == Fraction(1, 2)
    assert exact.greedy_expectation(coin_pair, 3) == Fraction(5, 4)
    assert exact.alternating_expectation(coin_pair, 3) == 1
    assert exact.alternating_expectation(coin_pair, 100) == \
        Fraction(50 * 50, 2)


def test_chain_states_and_structure(coin_pair):
    chain = exact.build_delta_chain(coin_pair)
    assert set(chain.states) == {Fraction(0), Fraction(1), Fraction(1, 2)}
    assert chain.is_ergodic()
    # rows are probability distributions
    for row in chain.rows:
        assert sum((q for _, q in row), Fraction(0)) == 1
        assert all(q > 0 for _, q in row)


def test_chain_long_run_abs_gap(coin_pair):
    """E|Delta_k| approaches the stationary value 3/8."""
    chain = exact.build_delta_chain(coin_pair)
    series = chain.abs_gap_series(80)
    assert abs(float(series[-1]) - 0.375) < 1e-12


def test_chain_rows_stochastic_on_random_pairs(pair_factory):
    for pair in pair_factory(31, count=10):
        chain = exact.build_delta_chain(pair)
        for row in chain.rows:
            assert sum((q for _, q in row), Fraction(0)) == 1
        assert all(abs(st) <= pair.moments.gamma for st in chain.states)


def test_chain_json_schema(coin_pair):
    doc = exact.build_delta_chain(coin_pair).to_json_dict()
    assert doc["schema_version"] == 1
    assert doc["states"] == ["0", "1", "1/2"]
    assert all(set(e) == {"from", "to", "prob"} for e in doc["edges"])


def test_chain_rejects_path_dependent_tie(coin_pair):
    with pytest.raises(ValueError):
        exact.build_delta_chain(coin_pair, TieBreak("alternate_from_r"))


def test_state_cap_enforced(coin_pair):
    with pytest.raises(StateExplosion):
        exact.build_delta_chain(coin_pair, state_cap=2)


def test_closed_form_matches_chain(coin_pair):
    series = exact.greedy_expectation_series(coin_pair, 200)
    for n in range(1, 201):
        assert abs(float(series[n]) - exact.eval_closed_form_example(n)) < 1e-9
    assert exact.eval_closed_form_example(1) == pytest.approx(0.0, abs=1e-12)
    assert exact.eval_closed_form_example(2) == pytest.approx(0.5, abs=1e-12)


def test_dp_equals_greedy_and_dominates_nonadaptive(pair_factory):
    for pair in pair_factory(1, count=5):
        for h in range(1, 7):
            dp = exact.dp_optimal_value(pair, h)
            assert dp == exact.greedy_expectation(pair, h)
            values = exact.enumerate_nonadaptive_values(pair, h)
            assert len(values) == 2 ** h
            assert dp >= max(v for _, v in values)


def test_nonadaptive_alternating_entry(coin_pair):
    values = dict(exact.enumerate_nonadaptive_values(coin_pair, 4))
    assert values["1010"] == exact.alternating_expectation(coin_pair, 4)
    with pytest.raises(HorizonTooLarge):
        exact.enumerate_nonadaptive_values(coin_pair, 17)


def test_gap_limit_and_parity(coin_pair):
    assert exact.expectation_gap_limit(coin_pair) == Fraction(1, 16)
    odd, even = exact.parity_limits(coin_pair)
    assert odd == Fraction(-1, 16)
    assert even == Fraction(3, 16)


def test_parity_limits_reject_degenerate(uniform_pair):
    with pytest.raises(NotErgodic):
        exact.parity_limits(uniform_pair)


def test_remark44_k_values(coin_pair, uniform_pair):
    assert exact.remark44_k(coin_pair) == 1
    assert exact.remark44_k(uniform_pair) == 0


def test_sandwich_holds_exactly(coin_pair):
    k = exact.remark44_k(coin_pair)
    series = exact.greedy_expectation_series(coin_pair, 300)
    for n in range(100, 301):
        assert exact.alternating_expectation(coin_pair, n) <= series[n]
        assert series[n] <= exact.alternating_expectation(coin_pair, n + k)


def test_discounted_half_against_direct_series(coin_pair):
    """Direct rational summation oracle for lambda = 1/2."""
    lam = Fraction(1, 2)
    series = exact.greedy_expectation_series(coin_pair, 201)
    nu_g_direct = sum(lam ** (n - 1) * (series[n] - series[n - 1])
                      for n in range(1, 201))
    alt = [exact.alternating_expectation(coin_pair, n) for n in range(201)]
    nu_a_direct = sum(lam ** (n - 1) * (alt[n] - alt[n - 1])
                      for n in range(1, 201))
    dv = exact.discounted_values(coin_pair, 0.5, 200)
    assert dv.nu_greedy == pytest.approx(float(nu_g_direct), abs=1e-12)
    assert dv.nu_alternating == pytest.approx(float(nu_a_direct), abs=1e-12)
    assert dv.tail_bound < 1e-12


def test_discounted_gap_near_one(coin_pair):
    """(1 - lambda)(nu_G - nu_A) approaches the gap limit 1/16 as lambda -> 1."""
    dv = exact.discounted_values(coin_pair, 0.99, 4000)
    scaled_gap = (1 - 0.99) * (dv.nu_greedy - dv.nu_alternating)
    assert abs(scaled_gap - 1 / 16) < 0.05 * (1 / 16)


def test_discounted_truncation_guard(coin_pair):
    with pytest.raises(TruncationInsufficient):
        exact.discounted_values(coin_pair, 0.99, 50)


def test_prefer_s_tie_changes_chain(coin_pair):
    chain = exact.build_delta_chain(coin_pair, TieBreak("prefer_s"))
    assert Fraction(-1, 2) in chain.states
