"""Policy simulation engine: state updates, kernels, traces, batches."""

import numpy as np
import pytest

from joinpolicy.engine import (PolicySpec, ReadState, TieBreak,
                               alternating_matches, coupled_batch,
                               greedy_batch, run_coupled, run_policy,
                               stopping_time)
from joinpolicy.engine.state import R, S, choose, step
from joinpolicy.errors import LabelOutOfRange, TraceTooShort
from joinpolicy.model import pair_label_streams
from joinpolicy.seeds import replication_rng

ALL_POLICIES = [
    PolicySpec.alternating(),
    PolicySpec.greedy(),
    PolicySpec.greedy(TieBreak("prefer_s")),
    PolicySpec.greedy(TieBreak("alternate_from_r")),
    PolicySpec.greedy(TieBreak("random", 0.3)),
    PolicySpec.greedy_offset(0.25),
    PolicySpec.bernoulli(0.3),
    PolicySpec.restorative(0.5, 0.2, 0.8),
]


def reference_run(pair, policy, n, seed):
    """Slow reference: the readable choose/step state machine.

    Consumes the same pregenerated label and uniform streams as the kernel,
    so it must agree epoch for epoch.
    """
    rng = replication_rng(seed, 0)
    labels_r, labels_s = pair_label_streams(pair, n, rng)
    coin_u = rng.random(n)
    tie_u = rng.random(n)
    state = ReadState(pair.support)
    rows = []
    for k in range(n):
        # feed the pregenerated uniforms through a stub generator
        class _Stub:
            def __init__(self, u):
                self.u = u

            def random(self):
                return self.u

        uses_coin = policy.variant in ("bernoulli", "restorative")
        c = choose(policy, state, _Stub(coin_u[k] if uses_coin else tie_u[k]))
        label = labels_r[state.r_count] if c == R else labels_s[state.s_count]
        step(state, c, int(label), pair.x_r, pair.x_s)
        rows.append((c, int(label), state.r_count, state.matches,
                     state.gamma_r, state.gamma_s))
    return rows


@pytest.mark.parametrize("policy", ALL_POLICIES,
                         ids=lambda p: f"{p.variant}-{p.tie.mode}")
def test_kernel_matches_reference_state_machine(coin_pair, policy):
    n, seed = 300, 2024
    trace = run_policy(coin_pair, policy, n, seed)
    ref = reference_run(coin_pair, policy, n, seed)
    for k, (c, label, r, m, gr, gs) in enumerate(ref):
        assert trace.choice[k] == c
        assert trace.label[k] == label
        assert trace.r[k] == r
        assert trace.m[k] == m
        assert abs(trace.gamma_r[k] - gr) < 1e-12
        assert abs(trace.gamma_s[k] - gs) < 1e-12


def test_kernel_matches_reference_on_random_pairs(pair_factory):
    for seed, pair in enumerate(pair_factory(7, count=5)):
        trace = run_policy(pair, PolicySpec.greedy(), 200, seed)
        ref = reference_run(pair, PolicySpec.greedy(), 200, seed)
        assert trace.m[-1] == ref[-1][3]
        assert trace.r[-1] == ref[-1][2]


def test_step_match_count_equals_recomputation(pair_factory):
    rng = np.random.default_rng(5)
    for case in range(50):
        pair = pair_factory(case)
        state = ReadState(pair.support)
        for _ in range(100):
            c = R if rng.random() < 0.5 else S
            dist = pair.r_probs if c == R else pair.s_probs
            label = int(rng.choice(pair.support, p=dist))
            step(state, c, label, pair.x_r, pair.x_s)
        assert state.matches == state.recompute_matches()


def test_step_rejects_bad_label(coin_pair):
    with pytest.raises(LabelOutOfRange):
        step(ReadState(coin_pair.support), R, 5, coin_pair.x_r, coin_pair.x_s)


def test_greedy_gap_bounded_by_gamma(pair_factory):
    """|Gamma_R[R_G(n)] - Gamma_S[S_G(n)]| <= gamma on every greedy path."""
    for seed in range(10):
        pair = pair_factory(seed)
        gamma = float(pair.moments.gamma)
        trace = run_policy(pair, PolicySpec.greedy(), 2000, seed)
        gap = trace.gamma_r - trace.gamma_s
        assert np.max(np.abs(gap)) <= gamma + 1e-9


def test_selection_count_sandwich(pair_factory):
    """Greedy selection counts satisfy the score-comparison sandwich.

    For every epoch n and threshold x: Gamma_R[ceil x] < Gamma_S[n - ceil x]
    - gamma forces R_G(n) > x, and R_G(n) > x forces Gamma_R[floor x] <=
    Gamma_S[n - floor x] + gamma.
    """
    pair = pair_factory(3)
    gamma = float(pair.moments.gamma)
    n = 200
    trace = run_policy(pair, PolicySpec.greedy(), n, 11)
    cum_r = np.concatenate(([0.0], np.cumsum(pair.x_r[trace.label[trace.choice == 1]])))
    cum_s = np.concatenate(([0.0], np.cumsum(pair.x_s[trace.label[trace.choice == 0]])))
    # extend the partial sums far enough to index any m <= n
    need_r = n + 1 - len(cum_r)
    need_s = n + 1 - len(cum_s)
    rng = replication_rng(999, 0)
    if need_r > 0:
        extra = pair.x_r[np.searchsorted(np.cumsum(pair.r_probs), rng.random(need_r), side="right")]
        cum_r = np.concatenate((cum_r, cum_r[-1] + np.cumsum(extra)))
    if need_s > 0:
        extra = pair.x_s[np.searchsorted(np.cumsum(pair.s_probs), rng.random(need_s), side="right")]
        cum_s = np.concatenate((cum_s, cum_s[-1] + np.cumsum(extra)))
    for k in range(1, n + 1):
        r_k = int(trace.r[k - 1])
        for x in range(0, k + 1):
            if cum_r[x] < cum_s[k - x] - gamma - 1e-12:
                assert r_k > x
            if r_k > x:
                assert cum_r[x] <= cum_s[k - x] + gamma + 1e-12


def test_alternating_counts(coin_pair):
    trace = run_policy(coin_pair, PolicySpec.alternating(), 100, 0)
    epochs = np.arange(1, 101)
    assert np.array_equal(trace.r, (epochs + 1) // 2)   # R(2n) = n, R first


def test_replay_determinism(coin_pair):
    a = run_policy(coin_pair, PolicySpec.greedy(), 500, 77)
    b = run_policy(coin_pair, PolicySpec.greedy(), 500, 77)
    assert np.array_equal(a.m, b.m)
    assert np.array_equal(a.choice, b.choice)
    c = run_policy(coin_pair, PolicySpec.greedy(), 500, 78)
    assert not np.array_equal(a.m, c.m)


def test_restorative_ratio_tracks_alpha(coin_pair):
    policy = PolicySpec.restorative(0.5, 0.1, 0.9)
    trace = run_policy(coin_pair, policy, 5000, 3)
    ratio = trace.r[-1] / 5000
    assert abs(ratio - 0.5) < 0.05


def test_greedy_offset_shifts_gap(coin_pair):
    """With offset delta the invariant gap band becomes [-gamma+d, gamma+d]-ish."""
    delta = 0.25
    trace = run_policy(coin_pair, PolicySpec.greedy_offset(delta), 2000, 5)
    gap = trace.gamma_r - trace.gamma_s
    gamma = float(coin_pair.moments.gamma)
    assert np.max(np.abs(gap)) <= gamma + delta + 1e-9


def test_stopping_time_basics(coin_pair):
    trace = run_policy(coin_pair, PolicySpec.greedy(), 100, 9)
    t_n, a_n = stopping_time(trace, 100)
    assert 1 <= t_n <= 100
    # at T_n one source has just exceeded the half-quota or T_n = n
    r_t = int(trace.r[t_n - 1])
    s_t = t_n - r_t
    assert a_n == (r_t == 50)
    with pytest.raises(TraceTooShort):
        stopping_time(trace, 101)


def test_stopping_time_on_alternating_like_path(coin_pair):
    """A greedy path that never leaves the alternating band gives T_n = n."""
    n = 10
    trace = run_policy(coin_pair, PolicySpec.alternating(), n, 1)
    t_n, a_n = stopping_time(trace, n)
    assert t_n == n and a_n


def test_coupled_shares_label_streams(coin_pair):
    ct = run_coupled(coin_pair, 400, 13)
    # greedy and alternating consume prefixes of the same per-source streams
    g, a = ct.greedy, ct.alternating
    rg, ra = int(g.r[-1]), int(a.r[-1])
    assert np.array_equal(g.label[g.choice == 1][:min(rg, ra)],
                          a.label[a.choice == 1][:min(rg, ra)])
    assert np.array_equal(ct.d, g.m - a.m)
    # independently recompute both match counts from the streams
    for trace in (g, a):
        r_labels = trace.label[trace.choice == 1]
        s_labels = trace.label[trace.choice == 0]
        nr = np.bincount(r_labels, minlength=coin_pair.support)
        ns = np.bincount(s_labels, minlength=coin_pair.support)
        assert trace.m[-1] == np.dot(nr, ns)


def test_coupled_diagnostics_match_single_run(coin_pair):
    """The vectorized T_k/A_k series agrees with stopping_time per prefix."""
    ct = run_coupled(coin_pair, 150, 21)
    for k in (10, 37, 88, 150):
        t_k, a_k = stopping_time(ct.greedy, k)
        assert ct.t[k - 1] == t_k
        assert bool(ct.a[k - 1]) == a_k


def test_batches_are_deterministic_and_threaded(coin_pair):
    a = greedy_batch(coin_pair, 500, 40, 123, threads=1)
    b = greedy_batch(coin_pair, 500, 40, 123, threads=4)
    for key in a:
        assert np.array_equal(a[key], b[key]), key
    c = coupled_batch(coin_pair, 500, 20, 5, threads=1)
    d = coupled_batch(coin_pair, 500, 20, 5, threads=4)
    for key in c:
        assert np.array_equal(c[key], d[key]), key


def test_batch_summaries_match_state_machine(coin_pair):
    """Each batch replication's summary agrees with the readable state machine
    run on the identical pregenerated streams."""
    n, reps = 300, 5
    batch = greedy_batch(coin_pair, n, reps, 42)
    policy = PolicySpec.greedy()
    for i in range(reps):
        rng = replication_rng(42, i)
        labels_r, labels_s = pair_label_streams(coin_pair, n, rng)
        state = ReadState(coin_pair.support)
        for k in range(n):
            gap = state.gamma_r - state.gamma_s
            c = R if gap < 0 else (S if gap > 0 else R)  # prefer_r tie
            label = labels_r[state.r_count] if c == R else labels_s[state.s_count]
            step(state, c, int(label), coin_pair.x_r, coin_pair.x_s)
        assert batch["r_final"][i] == state.r_count
        assert batch["m_final"][i] == state.matches


def test_alternating_matches_agrees_with_kernel(coin_pair):
    m = alternating_matches(coin_pair, 400, 10, 17)
    for i in range(10):
        rng = replication_rng(17, i)
        labels_r, labels_s = pair_label_streams(coin_pair, 400, rng)
        nr = np.bincount(labels_r[:200], minlength=2)
        ns = np.bincount(labels_s[:200], minlength=2)
        assert m[i] == np.dot(nr, ns)
