"""Named verification suites: exact certificates and Monte Carlo limit checks.

Each suite returns a list of result rows: dicts with metric, value, target,
tolerance, mode and a pass flag.  Modes: 'abs' (|value - target| <= tol),
'rel' (<= tol * |target|), 'le' (value <= target), 'bool' (value truthy).
The CLI ``verify`` command and the acceptance test module both run these.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np

from . import exact, stats
from .engine import (PolicySpec, alternating_matches, coupled_batch,
                     greedy_batch, policy_batch)
from .model import LabelDistribution, SourcePair, illustrative_pair

# fraction of coupled paths at n = 1e4 on which both signs of M_G - M_A
# appear; pilots at 10^3 and 10^4 replications both observed a fraction of
# 1.0, so this majority threshold carries ample slack
BOTH_SIGNS_THRESHOLD = 0.75

SUITE_NAMES = ["thm2.1", "thm3.2", "cor3.3", "eq3.9", "thm4.1", "eq4.1",
               "rem4.2", "rem4.4", "thm4.2", "lem4.1", "lem4.3", "signs"]


def row(metric: str, value, target, tolerance, mode: str) -> dict:
    value_f = float(value)
    target_f = float(target)
    if mode == "abs":
        passed = abs(value_f - target_f) <= tolerance
    elif mode == "rel":
        passed = abs(value_f - target_f) <= tolerance * abs(target_f)
    elif mode == "le":
        passed = value_f <= target_f
    elif mode == "bool":
        passed = bool(value)
    else:
        raise ValueError(f"unknown row mode {mode!r}")
    return {"metric": metric, "value": value_f, "target": target_f,
            "tolerance": float(tolerance), "mode": mode, "pass": bool(passed)}


def random_rational_pair(rnd: random.Random, max_support: int = 4,
                         max_weight: int = 8) -> SourcePair:
    """A random exact pair with support <= max_support and mu > 0."""
    while True:
        size = rnd.randint(2, max_support)
        r_w = [rnd.randint(0, max_weight) for _ in range(size)]
        s_w = [rnd.randint(0, max_weight) for _ in range(size)]
        if sum(r_w) == 0 or sum(s_w) == 0:
            continue
        r = LabelDistribution(tuple(Fraction(w, sum(r_w)) for w in r_w))
        s = LabelDistribution(tuple(Fraction(w, sum(s_w)) for w in s_w))
        if sum(a * b for a, b in zip(r.probs, s.probs)) > 0:
            return SourcePair(r, s)


def suite_thm21(seed: int = 0, n_pairs: int = 20, horizon: int = 8) -> List[dict]:
    """Greedy optimality certificate on random rational pairs.

    For every pair and horizon: dp value equals the greedy chain value
    exactly, and dominates every nonadaptive read sequence.
    """
    rnd = random.Random(seed)
    rows = []
    for i in range(n_pairs):
        pair = random_rational_pair(rnd)
        ok = True
        for h in range(1, horizon + 1):
            dp = exact.dp_optimal_value(pair, h)
            greedy = exact.greedy_expectation(pair, h)
            if dp != greedy:
                ok = False
                break
            best_nonadaptive = max(v for _, v in
                                   exact.enumerate_nonadaptive_values(pair, h))
            if dp < best_nonadaptive:
                ok = False
                break
        rows.append(row(f"thm2.1/pair{i}: dp == greedy >= nonadaptive, h<=8",
                        ok, 1, 0, "bool"))
    return rows


def suite_eq41(pair: SourcePair, n_small: int = 7, n_closed: int = 200) -> List[dict]:
    """Internal consistency of the gap-chain expectation identity."""
    rows = []
    ok = all(exact.dp_optimal_value(pair, h) == exact.greedy_expectation(pair, h)
             for h in range(1, n_small + 1))
    rows.append(row(f"eq4.1/chain value == dp value, n<={n_small}", ok, 1, 0, "bool"))
    if _is_illustrative(pair):
        series = exact.greedy_expectation_series(pair, n_closed)
        worst = max(abs(float(series[n]) - exact.eval_closed_form_example(n))
                    for n in range(1, n_closed + 1))
        rows.append(row(f"eq4.1/max |chain - closed form|, n<={n_closed}",
                        worst, 0.0, 1e-9, "abs"))
    return rows


def _is_illustrative(pair: SourcePair) -> bool:
    ref = illustrative_pair()
    return pair.r.probs == ref.r.probs and pair.s.probs == ref.s.probs


def suite_thm41(pair: SourcePair, n: int = 2000) -> List[dict]:
    """Expectation gap per epoch against its exact limit."""
    limit = exact.expectation_gap_limit(pair)
    series_g = exact.greedy_expectation_series(pair, n + 1)
    gap_per_n = (series_g[n] - exact.alternating_expectation(pair, n)) / n
    rows = [row(f"thm4.1/(E M_G - E M_A)/n at n={n}",
                float(gap_per_n), float(limit), 0.01, "rel")]
    inc = exact.increment_gap_series(pair, n)
    parity_avg = (inc[n] + inc[n - 1]) / 2
    rows.append(row(f"thm4.1/parity-averaged increment gap at n={n}",
                    float(parity_avg), float(limit), 1e-6, "abs"))
    return rows


def suite_rem42(pair: SourcePair, n: int = 2000) -> List[dict]:
    """Parity limits of the per-epoch expectation gap increment."""
    odd_limit, even_limit = exact.parity_limits(pair)
    inc = exact.increment_gap_series(pair, n)
    n_even = n if n % 2 == 0 else n - 1
    n_odd = n - 1 if n % 2 == 0 else n
    return [
        row(f"rem4.2/increment gap along odd n at n={n_odd}",
            float(inc[n_odd]), float(odd_limit), 1e-6, "abs"),
        row(f"rem4.2/increment gap along even n at n={n_even}",
            float(inc[n_even]), float(even_limit), 1e-6, "abs"),
    ]


def suite_rem44(pair: SourcePair, n_lo: int = 100, n_hi: int = 2000) -> List[dict]:
    """Exact sandwich E M_A(n) <= E M_G(n) <= E M_A(n + k)."""
    k = exact.remark44_k(pair)
    series_g = exact.greedy_expectation_series(pair, n_hi)
    ok = all(
        exact.alternating_expectation(pair, n) <= series_g[n]
        <= exact.alternating_expectation(pair, n + k)
        for n in range(n_lo, n_hi + 1))
    return [row(f"rem4.4/sandwich with k={k}, n in [{n_lo},{n_hi}]",
                ok, 1, 0, "bool")]


def suite_thm32(pair: SourcePair, seed: int, n: int = 10_000,
                reps: int = 10_000, threads: int = 1,
                batch: Optional[dict] = None) -> List[dict]:
    """CLT for the greedy selection count."""
    if batch is None:
        batch = greedy_batch(pair, n, reps, seed, threads=threads)
    m = pair.moments.as_floats()
    x = (batch["r_final"] - n / 2.0) / math.sqrt(n)
    var = float(np.var(x, ddof=1))
    ks = stats.ks_distance(x, lambda t: stats.normal_cdf(t, m.sigma_rg2))
    return [
        row(f"thm3.2/var (R_G - n/2)/sqrt(n), n={n}, reps={reps}",
            var, m.sigma_rg2, 0.05, "rel"),
        row("thm3.2/KS vs normal", ks, 0.02, 0.0, "le"),
    ]


def suite_cor33(pair: SourcePair, seed: int, n: int = 10_000,
                reps: int = 10_000, threads: int = 1,
                batch: Optional[dict] = None) -> List[dict]:
    """Common CLT for the match count under greedy and alternating."""
    if batch is None:
        batch = greedy_batch(pair, n, reps, seed, threads=threads)
    m = pair.moments.as_floats()
    target = 2.0 * (m.sigma_r2 + m.sigma_s2)
    rows = []
    for name, m_final in (
            ("greedy", batch["m_final"]),
            ("alternating", alternating_matches(pair, n, reps, seed + 1))):
        x = stats.standardize_matches(m_final, n, m.mu, 0.5)
        var = float(np.var(x, ddof=1))
        ks = stats.ks_distance(x, lambda t: stats.normal_cdf(t, target))
        rows.append(row(f"cor3.3/{name} var of standardized M(n)",
                        var, target, 0.10, "rel"))
        rows.append(row(f"cor3.3/{name} KS vs normal", ks, 0.02, 0.0, "le"))
    return rows


def suite_eq39(pair: SourcePair, seed: int, alpha: float = 0.3,
               n: int = 10_000, reps: int = 10_000, threads: int = 1) -> List[dict]:
    """Bernoulli-sampling CLT variance, including the off-half penalty."""
    m = pair.moments.as_floats()
    batch = policy_batch(pair, PolicySpec.bernoulli(alpha), n, reps, seed,
                         threads=threads)
    x = stats.standardize_matches(batch["m_final"], n, m.mu, alpha)
    var = float(np.var(x, ddof=1))
    target = stats.clt_variance_target(pair.moments, alpha, "bernoulli")
    return [row(f"eq3.9/bernoulli(alpha={alpha}) var of standardized M(n)",
                var, target, 0.10, "rel")]


def suite_lem41(pair: SourcePair, seed: int, n: int = 10_000,
                reps: int = 10_000, threads: int = 1,
                batch: Optional[dict] = None) -> List[dict]:
    """Folded-normal limit of the commitment stopping time."""
    if batch is None:
        batch = greedy_batch(pair, n, reps, seed, threads=threads)
    m = pair.moments.as_floats()
    x = (n - batch["t_n"]) / (2.0 * math.sqrt(n))
    ks = stats.ks_distance(x, lambda t: stats.folded_normal_cdf(t, m.sigma_rg2))
    return [row(f"lem4.1/KS of (n - T_n)/(2 sqrt n) vs folded normal, n={n}",
                ks, 0.03, 0.0, "le")]


def suite_lem43(pair: SourcePair, seed: int, n: int = 10_000,
                reps: int = 10_000, threads: int = 1,
                t_grid=(1.0, 4.0, 9.0, 16.0),
                batch: Optional[dict] = None) -> List[dict]:
    """Exponential tail certification for the greedy selection count."""
    if batch is None:
        batch = greedy_batch(pair, n, reps, seed, threads=threads)
    checks = stats.hoeffding_certify(batch["r_final"], n, pair.moments, t_grid)
    return [row(f"lem4.3/exceedance UCB at t={c.t:g}",
                c.upper_confidence, c.bound, 0.0, "le") for c in checks]


def suite_thm42(pair: SourcePair, seed: int, n: int = 10_000,
                reps: int = 10_000, threads: int = 1,
                batch: Optional[dict] = None) -> List[dict]:
    """Scale-mixture limit of the coupled match-count difference."""
    if batch is None:
        batch = coupled_batch(pair, n, reps, seed, threads=threads)
    x = batch["d_final"] / float(n) ** 1.25
    ks = stats.ks_distance(x, lambda t: stats.mixture_cdf(t, pair.moments))
    return [row(f"thm4.2/KS of (M_G - M_A)/n^(5/4) vs mixture, n={n}",
                ks, 0.05, 0.0, "le")]


def suite_signs(pair: SourcePair, seed: int, n: int = 10_000,
                reps: int = 1000, threads: int = 1,
                batch: Optional[dict] = None) -> List[dict]:
    """Sample-path lead changes between greedy and alternating."""
    if batch is None:
        batch = coupled_batch(pair, n, reps, seed, threads=threads)
    report = stats.sign_change_stats(batch, n)
    first = row("signs/fraction of paths where both signs of M_G - M_A occur",
                report.frac_paths_with_both_signs >= BOTH_SIGNS_THRESHOLD,
                1, 0, "bool")
    first["value"] = report.frac_paths_with_both_signs
    first["target"] = BOTH_SIGNS_THRESHOLD
    rows = [first]
    degenerate = SourcePair.from_weights(["1/2", "1/2"], ["1/2", "1/2"])
    deg = coupled_batch(degenerate, min(n, 2000), min(reps, 100), seed + 7,
                        threads=threads)
    all_zero = bool(np.all(deg["max_abs_d"] == 0))
    rows.append(row("signs/degenerate uniform-identical pair has D_n == 0",
                    all_zero, 1, 0, "bool"))
    return rows


def run_suite(name: str, pair: SourcePair, seed: int, threads: int = 1,
              sizes: Optional[Dict] = None) -> List[dict]:
    """Dispatch one named suite with optional size overrides."""
    sizes = sizes or {}
    n = int(sizes.get("n_epochs", 10_000))
    reps = int(sizes.get("replications", 10_000))
    if name == "thm2.1":
        return suite_thm21(seed, n_pairs=int(sizes.get("n_pairs", 20)),
                           horizon=int(sizes.get("horizon", 8)))
    if name == "thm3.2":
        return suite_thm32(pair, seed, n, reps, threads)
    if name == "cor3.3":
        return suite_cor33(pair, seed, n, reps, threads)
    if name == "eq3.9":
        return suite_eq39(pair, seed, n=n, reps=reps, threads=threads)
    if name == "thm4.1":
        return suite_thm41(pair, n=int(sizes.get("n_exact", 2000)))
    if name == "eq4.1":
        return suite_eq41(pair)
    if name == "rem4.2":
        return suite_rem42(pair, n=int(sizes.get("n_exact", 2000)))
    if name == "rem4.4":
        return suite_rem44(pair, n_hi=int(sizes.get("n_exact", 2000)))
    if name == "thm4.2":
        return suite_thm42(pair, seed, n, reps, threads)
    if name == "lem4.1":
        return suite_lem41(pair, seed, n, reps, threads)
    if name == "lem4.3":
        return suite_lem43(pair, seed, n, reps, threads)
    if name == "signs":
        return suite_signs(pair, seed, n, int(sizes.get("sign_replications", 1000)),
                           threads)
    raise ValueError(f"unknown suite {name!r}")
