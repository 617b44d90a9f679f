"""Run policies over sampled label streams and collect traces and diagnostics.

Single runs return full per-epoch traces.  The *_batch helpers fan a run
out over replications with per-replication counter-based seeds and return
only the per-replication summaries the limit-theorem checks need, keeping
memory flat at large replication counts.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import TraceTooShort
from ..model import SourcePair, pair_label_streams
from ..seeds import replication_rng
from . import kernels
from .state import PREFER_R, PolicySpec, TieBreak

TRACE_COLUMNS = ["epoch", "choice", "label", "R", "S", "M", "gammaR", "gammaS"]
COUPLED_COLUMNS = TRACE_COLUMNS + ["Delta", "Tn", "An", "Gn", "D"]


@dataclass
class Trace:
    """Per-epoch record of one policy run."""

    policy: PolicySpec
    seed: int
    choice: np.ndarray   # 1 = R, 0 = S
    label: np.ndarray
    r: np.ndarray        # R(n)
    m: np.ndarray        # M(n)
    gamma_r: np.ndarray
    gamma_s: np.ndarray

    @property
    def n(self) -> int:
        return len(self.choice)

    @property
    def s(self) -> np.ndarray:
        return np.arange(1, self.n + 1) - self.r

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            s = self.s
            for k in range(self.n):
                w.writerow([k + 1, "R" if self.choice[k] else "S",
                            int(self.label[k]), int(self.r[k]), int(s[k]),
                            int(self.m[k]),
                            repr(float(self.gamma_r[k])), repr(float(self.gamma_s[k]))])


@dataclass
class CoupledTrace:
    """Greedy and alternating run on shared label streams, with diagnostics.

    delta[k]  score gap Gamma_R - Gamma_S along the greedy path
    d[k]      M_G(k) - M_A(k)
    t[k]      stopping time T_k (first greedy read the alternating policy
              would not have made by epoch k, capped at k)
    a[k]      indicator of {R_G(T_k) = ceil(k/2)}
    g[k]      signed score-gap diagnostic G_k
    """

    seed: int
    labels_r: np.ndarray
    labels_s: np.ndarray
    greedy: Trace
    alternating: Trace
    delta: np.ndarray
    d: np.ndarray
    t: np.ndarray
    a: np.ndarray
    g: np.ndarray

    @property
    def n(self) -> int:
        return self.greedy.n

    def to_csv(self, path) -> None:
        """Greedy-path columns plus the coupled diagnostics."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COUPLED_COLUMNS)
            gt = self.greedy
            s = gt.s
            for k in range(self.n):
                w.writerow([k + 1, "R" if gt.choice[k] else "S",
                            int(gt.label[k]), int(gt.r[k]), int(s[k]),
                            int(gt.m[k]),
                            repr(float(gt.gamma_r[k])), repr(float(gt.gamma_s[k])),
                            repr(float(self.delta[k])), int(self.t[k]),
                            int(self.a[k]), repr(float(self.g[k])),
                            int(self.d[k])])


def _alloc(n: int):
    return (np.empty(n, dtype=np.int8), np.empty(n, dtype=np.int64),
            np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64),
            np.empty(n, dtype=np.float64), np.empty(n, dtype=np.float64))


def run_policy(pair: SourcePair, policy: PolicySpec, n_epochs: int, seed: int) -> Trace:
    """Run one policy for n_epochs reads; deterministic given the seed."""
    if n_epochs < 1:
        raise ValueError("n_epochs must be >= 1")
    rng = replication_rng(seed, 0)
    labels_r, labels_s = pair_label_streams(pair, n_epochs, rng)
    coin_u = rng.random(n_epochs)
    tie_u = rng.random(n_epochs)
    choice, label, r, m, gr, gs = _alloc(n_epochs)
    kernels.policy_run(policy.code, policy.delta, policy.alpha,
                       policy.alpha1, policy.alpha2,
                       policy.tie.code, policy.tie.p,
                       labels_r, labels_s, pair.x_r, pair.x_s, coin_u, tie_u,
                       choice, label, r, m, gr, gs)
    return Trace(policy, seed, choice, label, r, m, gr, gs)


def stopping_time(trace: Trace, n: int):
    """T_n and the indicator A_n = {R_G(T_n) = ceil(n/2)} for a greedy trace.

    T_n = min(n, inf{k >= 1 : R_G(k+1) or S_G(k+1) reaches ceil(n/2) + 1}).
    """
    if trace.n < n:
        raise TraceTooShort(f"trace has {trace.n} epochs, need {n}")
    half = (n + 1) // 2
    quota = half + 1
    r = trace.r[:n]
    s = np.arange(1, n + 1) - r
    sentinel = n + 2
    e_r = int(np.searchsorted(r, quota, side="left")) + 1
    e_s = int(np.searchsorted(s, quota, side="left")) + 1
    if e_r > n:
        e_r = sentinel
    if e_s > n:
        e_s = sentinel
    t_n = min(n, min(e_r, e_s) - 1)
    a_n = bool(r[t_n - 1] == half)
    return t_n, a_n


def _coupled_diagnostics(pair, labels_r, labels_s, rg, mg, ma, gr, gs):
    """Vectorized T_k, A_k, G_k, D_k, Delta_k series for a coupled run."""
    n = len(rg)
    epochs = np.arange(1, n + 1)
    sg = epochs - rg
    delta = gr - gs
    d = mg - ma

    half = (epochs + 1) // 2          # ceil(k/2)
    quota = half + 1
    max_q = int(quota[-1])
    sentinel = n + 2
    # first epoch at which the greedy R (resp. S) count reaches m, 1-based
    first_r = np.searchsorted(rg, np.arange(1, max_q + 1), side="left") + 1
    first_s = np.searchsorted(sg, np.arange(1, max_q + 1), side="left") + 1
    first_r = np.where(first_r > n, sentinel, first_r)
    first_s = np.where(first_s > n, sentinel, first_s)
    trigger = np.minimum(first_r[quota - 1], first_s[quota - 1]) - 1
    t = np.minimum(epochs, trigger)
    a = rg[t - 1] == half

    # partial-sum lookups Gamma_R[m], Gamma_S[m] with Gamma[0] = 0
    cum_r = np.concatenate(([0.0], np.cumsum(pair.x_r[labels_r])))
    cum_s = np.concatenate(([0.0], np.cumsum(pair.x_s[labels_s])))
    floor_half = epochs // 2
    on_a = (cum_r[rg] - cum_r[floor_half]) - (cum_s[floor_half] - cum_s[sg])
    on_ac = (cum_s[sg] - cum_s[floor_half]) - (cum_r[floor_half] - cum_r[rg])
    g = 0.5 * np.where(a, on_a, on_ac)
    return delta, d, t, a, g


def run_coupled(pair: SourcePair, n_epochs: int, seed: int,
                tie: TieBreak = PREFER_R) -> CoupledTrace:
    """Run greedy and alternating coupled on shared per-source label streams."""
    if n_epochs < 2:
        raise ValueError("n_epochs must be >= 2")
    rng = replication_rng(seed, 0)
    labels_r, labels_s = pair_label_streams(pair, n_epochs, rng)
    tie_u = rng.random(n_epochs)
    choice_g, _, rg, mg, gr, gs = _alloc(n_epochs)
    ma = np.empty(n_epochs, dtype=np.int64)
    kernels.coupled_run(tie.code, tie.p, labels_r, labels_s,
                        pair.x_r, pair.x_s, tie_u,
                        choice_g, rg, mg, ma, gr, gs)
    epochs = np.arange(1, n_epochs + 1)
    sg = epochs - rg
    label_g = np.where(choice_g == 1, labels_r[np.maximum(rg - 1, 0)],
                       labels_s[np.maximum(sg - 1, 0)])
    greedy = Trace(PolicySpec.greedy(tie), seed, choice_g, label_g, rg, mg, gr, gs)

    # reconstruct the alternating trace from the same streams
    a_choice = (epochs % 2 == 1).astype(np.int8)
    a_r = (epochs + 1) // 2
    a_s = epochs - a_r
    a_label = np.where(a_choice == 1, labels_r[np.maximum(a_r - 1, 0)],
                       labels_s[np.maximum(a_s - 1, 0)])
    cum_r = np.concatenate(([0.0], np.cumsum(pair.x_r[labels_r])))
    cum_s = np.concatenate(([0.0], np.cumsum(pair.x_s[labels_s])))
    alternating = Trace(PolicySpec.alternating(), seed, a_choice, a_label,
                        a_r, ma, cum_r[a_r], cum_s[a_s])

    delta, d, t, a, g = _coupled_diagnostics(pair, labels_r, labels_s,
                                             rg, mg, ma, gr, gs)
    return CoupledTrace(seed, labels_r, labels_s, greedy, alternating,
                        delta, d, t, a, g)


def _map_replications(worker, reps: int, threads: int):
    if threads <= 1:
        for i in range(reps):
            worker(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(worker, range(reps)))


def greedy_batch(pair: SourcePair, n: int, reps: int, master_seed: int,
                 delta: float = 0.0, tie: TieBreak = PREFER_R,
                 threads: int = 1) -> dict:
    """Replicated greedy(-offset) runs; per-replication final summaries.

    Returns arrays (length reps): r_final, m_final, t_n, a_n.
    """
    policy = (PolicySpec.greedy(tie) if delta == 0.0
              else PolicySpec.greedy_offset(delta, tie))
    r_final = np.empty(reps, dtype=np.int64)
    m_final = np.empty(reps, dtype=np.int64)
    t_n = np.empty(reps, dtype=np.int64)
    a_n = np.empty(reps, dtype=bool)

    def worker(i):
        rng = replication_rng(master_seed, i)
        labels_r, labels_s = pair_label_streams(pair, n, rng)
        coin_u = rng.random(n)
        tie_u = rng.random(n)
        choice, label, r, m, gr, gs = _alloc(n)
        kernels.policy_run(policy.code, policy.delta, policy.alpha,
                           policy.alpha1, policy.alpha2,
                           policy.tie.code, policy.tie.p,
                           labels_r, labels_s, pair.x_r, pair.x_s,
                           coin_u, tie_u, choice, label, r, m, gr, gs)
        trace = Trace(policy, master_seed, choice, label, r, m, gr, gs)
        r_final[i] = r[-1]
        m_final[i] = m[-1]
        t_n[i], a_n[i] = stopping_time(trace, n)

    _map_replications(worker, reps, threads)
    return {"r_final": r_final, "m_final": m_final, "t_n": t_n, "a_n": a_n}


def policy_batch(pair: SourcePair, policy: PolicySpec, n: int, reps: int,
                 master_seed: int, threads: int = 1) -> dict:
    """Replicated runs of an arbitrary policy; final R(n) and M(n) only."""
    r_final = np.empty(reps, dtype=np.int64)
    m_final = np.empty(reps, dtype=np.int64)

    def worker(i):
        rng = replication_rng(master_seed, i)
        labels_r, labels_s = pair_label_streams(pair, n, rng)
        coin_u = rng.random(n)
        tie_u = rng.random(n)
        choice, label, r, m, gr, gs = _alloc(n)
        kernels.policy_run(policy.code, policy.delta, policy.alpha,
                           policy.alpha1, policy.alpha2,
                           policy.tie.code, policy.tie.p,
                           labels_r, labels_s, pair.x_r, pair.x_s,
                           coin_u, tie_u, choice, label, r, m, gr, gs)
        r_final[i] = r[-1]
        m_final[i] = m[-1]

    _map_replications(worker, reps, threads)
    return {"r_final": r_final, "m_final": m_final}


def coupled_batch(pair: SourcePair, n: int, reps: int, master_seed: int,
                  tie: TieBreak = PREFER_R, threads: int = 1) -> dict:
    """Replicated coupled runs with per-path sign diagnostics.

    Returns arrays (length reps): d_final, g_n, t_n, a_n, sign_changes,
    frac_neg, max_abs_d, has_pos, has_neg.
    """
    out = {
        "d_final": np.empty(reps, dtype=np.int64),
        "g_n": np.empty(reps, dtype=np.float64),
        "t_n": np.empty(reps, dtype=np.int64),
        "a_n": np.empty(reps, dtype=bool),
        "sign_changes": np.empty(reps, dtype=np.int64),
        "frac_neg": np.empty(reps, dtype=np.float64),
        "max_abs_d": np.empty(reps, dtype=np.int64),
        "has_pos": np.empty(reps, dtype=bool),
        "has_neg": np.empty(reps, dtype=bool),
    }

    def worker(i):
        rng = replication_rng(master_seed, i)
        labels_r, labels_s = pair_label_streams(pair, n, rng)
        tie_u = rng.random(n)
        choice_g, _, rg, mg, gr, gs = _alloc(n)
        ma = np.empty(n, dtype=np.int64)
        kernels.coupled_run(tie.code, tie.p, labels_r, labels_s,
                            pair.x_r, pair.x_s, tie_u,
                            choice_g, rg, mg, ma, gr, gs)
        d = mg - ma
        out["d_final"][i] = d[-1]
        epochs = np.arange(1, n + 1)
        sg = epochs - rg
        half = (n + 1) // 2
        quota = half + 1
        sentinel = n + 2
        e_r = int(np.searchsorted(rg, quota, side="left")) + 1
        e_s = int(np.searchsorted(sg, quota, side="left")) + 1
        e_r = sentinel if e_r > n else e_r
        e_s = sentinel if e_s > n else e_s
        t_n = min(n, min(e_r, e_s) - 1)
        a_n = bool(rg[t_n - 1] == half)
        out["t_n"][i] = t_n
        out["a_n"][i] = a_n
        cum_r = np.concatenate(([0.0], np.cumsum(pair.x_r[labels_r])))
        cum_s = np.concatenate(([0.0], np.cumsum(pair.x_s[labels_s])))
        fh = n // 2
        if a_n:
            g2 = (cum_r[rg[-1]] - cum_r[fh]) - (cum_s[fh] - cum_s[sg[-1]])
        else:
            g2 = (cum_s[sg[-1]] - cum_s[fh]) - (cum_r[fh] - cum_r[rg[-1]])
        out["g_n"][i] = 0.5 * g2
        sign = np.sign(d)
        nz = sign[sign != 0]
        out["sign_changes"][i] = int(np.count_nonzero(np.diff(nz))) if nz.size else 0
        out["frac_neg"][i] = float(np.mean(d < 0))
        out["max_abs_d"][i] = int(np.max(np.abs(d)))
        out["has_pos"][i] = bool(np.any(d > 0))
        out["has_neg"][i] = bool(np.any(d < 0))

    _map_replications(worker, reps, threads)
    return out


def alternating_matches(pair: SourcePair, n: int, reps: int, master_seed: int) -> np.ndarray:
    """Final M_A(n) over replications, computed by direct count-vector dot."""
    m = np.empty(reps, dtype=np.int64)
    k = pair.support
    for i in range(reps):
        rng = replication_rng(master_seed, i)
        labels_r, labels_s = pair_label_streams(pair, n, rng)
        nr = np.bincount(labels_r[:(n + 1) // 2], minlength=k)
        ns = np.bincount(labels_s[:n // 2], minlength=k)
        m[i] = np.dot(nr, ns)
    return m
