"""Exact rational computation of policy expectations and optimality certificates.

Everything here works in ``fractions.Fraction``.  The central object is the
embedded chain of the greedy score gap

    Delta_n = Gamma_R[R_G(n)] - Gamma_S[S_G(n)],

a bounded Markov chain on rational values in [-gamma, gamma] (for a
memoryless tie rule).  Evolving its per-step law gives the exact greedy
expectation through

    E M_G(n) = (1/2) sum_{k=1}^{n-1} E|Delta_k| + n(n-1) mu / 4,

while a finite-horizon dynamic program over the accumulated-score state
(xi_1, xi_2) provides the independent optimality oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

from .engine.state import PREFER_R, TieBreak
from .errors import (HorizonTooLarge, NotErgodic, StateExplosion,
                     TruncationInsufficient)
from .model import SourcePair, parse_weight

DEFAULT_STATE_CAP = 100_000


def _require_memoryless(tie: TieBreak) -> None:
    if not tie.memoryless:
        raise ValueError(
            "the exact layer requires a tie rule that is a function of the "
            "current score gap only (prefer_r, prefer_s, or random)")


def _tie_mix(tie: TieBreak) -> Tuple[Fraction, Fraction]:
    """(probability of reading R, of reading S) at a score tie."""
    if tie.mode == "prefer_r":
        return Fraction(1), Fraction(0)
    if tie.mode == "prefer_s":
        return Fraction(0), Fraction(1)
    p = parse_weight(tie.p)
    return p, 1 - p


def _transition(pair: SourcePair, tie: TieBreak, delta: Fraction
                ) -> List[Tuple[Fraction, Fraction]]:
    """Outgoing (next_delta, probability) pairs from one gap value.

    Gap below zero means the opposite score Gamma_S is larger, so greedy
    reads R and the gap gains the score s_i of the drawn label; above zero
    it reads S; at zero the tie rule mixes the two rows.
    """
    r, s = pair.r.probs, pair.s.probs
    out: Dict[Fraction, Fraction] = {}

    def add_r_row(weight: Fraction):
        for ri, si in zip(r, s):
            if ri > 0:
                nxt = delta + si
                out[nxt] = out.get(nxt, Fraction(0)) + weight * ri

    def add_s_row(weight: Fraction):
        for ri, si in zip(r, s):
            if si > 0:
                nxt = delta - ri
                out[nxt] = out.get(nxt, Fraction(0)) + weight * si

    if delta < 0:
        add_r_row(Fraction(1))
    elif delta > 0:
        add_s_row(Fraction(1))
    else:
        p_r, p_s = _tie_mix(tie)
        if p_r > 0:
            add_r_row(p_r)
        if p_s > 0:
            add_s_row(p_s)
    return sorted(out.items())


@dataclass
class DeltaChain:
    """The embedded score-gap chain: states, rational transition rows, laws."""

    pair: SourcePair
    tie: TieBreak
    states: List[Fraction]                       # distinct gap values
    rows: List[List[Tuple[int, Fraction]]]       # state index -> [(j, prob)]

    @property
    def initial_index(self) -> int:
        return self.states.index(Fraction(0))

    def distributions(self, n: int):
        """Yield the law pi_k of Delta_k for k = 0..n as index->prob dicts."""
        pi = {self.initial_index: Fraction(1)}
        yield pi
        for _ in range(n):
            nxt: Dict[int, Fraction] = {}
            for i, p in pi.items():
                for j, q in self.rows[i]:
                    nxt[j] = nxt.get(j, Fraction(0)) + p * q
            pi = nxt
            yield pi

    def abs_gap_series(self, n: int) -> List[Fraction]:
        """E|Delta_k| for k = 0..n."""
        out = []
        for pi in self.distributions(n):
            out.append(sum((p * abs(self.states[i]) for i, p in pi.items()),
                           Fraction(0)))
        return out

    def recurrent_classes(self) -> List[List[int]]:
        """Strongly connected components with no outgoing edges."""
        sccs = _strongly_connected_components(
            len(self.states), [[j for j, _ in row] for row in self.rows])
        recurrent = []
        for comp in sccs:
            comp_set = set(comp)
            closed = all(j in comp_set for i in comp for j, _ in self.rows[i])
            if closed:
                recurrent.append(sorted(comp))
        return recurrent

    def is_ergodic(self) -> bool:
        """Single recurrent class and aperiodicity within it."""
        classes = self.recurrent_classes()
        if len(classes) != 1:
            return False
        return _period(classes[0], self.rows) == 1

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "tie": self.tie.mode,
            "gamma": str(self.pair.moments.gamma),
            "initial": "0",
            "states": [str(d) for d in self.states],
            "edges": [
                {"from": str(self.states[i]), "to": str(self.states[j]),
                 "prob": str(q)}
                for i, row in enumerate(self.rows) for j, q in row
            ],
        }


def _strongly_connected_components(n: int, adj: List[List[int]]) -> List[List[int]]:
    """Iterative Tarjan."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: List[int] = []
    comps: List[List[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for k in range(pi, len(adj[v])):
                w = adj[v][k]
                if index[w] == -1:
                    work[-1] = (v, k + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
            if work:
                u, _ = work[-1]
                low[u] = min(low[u], low[v])
    return comps


def _period(comp: List[int], rows) -> int:
    """gcd of cycle lengths within one closed communicating class."""
    comp_set = set(comp)
    level = {comp[0]: 0}
    queue = [comp[0]]
    g = 0
    while queue:
        v = queue.pop()
        for j, _ in rows[v]:
            if j not in comp_set:
                continue
            if j in level:
                g = math.gcd(g, level[v] + 1 - level[j])
            else:
                level[j] = level[v] + 1
                queue.append(j)
    return abs(g) if g else 0


def build_delta_chain(pair: SourcePair, tie: TieBreak = PREFER_R,
                      state_cap: int = DEFAULT_STATE_CAP) -> DeltaChain:
    """Enumerate the gap chain reachable from Delta = 0, closed under steps.

    Raises StateExplosion when the reachable set exceeds state_cap, which
    signals that the pair needs the Monte Carlo path instead.
    """
    _require_memoryless(tie)
    gamma = pair.moments.gamma
    zero = Fraction(0)
    states = [zero]
    seen = {zero: 0}
    rows: List[List[Tuple[int, Fraction]]] = []
    frontier = [zero]
    while frontier:
        nxt_frontier = []
        for d in frontier:
            row = []
            for nd, q in _transition(pair, tie, d):
                if abs(nd) > gamma:
                    raise AssertionError("gap escaped [-gamma, gamma]")
                if nd not in seen:
                    if len(states) >= state_cap:
                        raise StateExplosion(
                            f"gap chain exceeds {state_cap} states")
                    seen[nd] = len(states)
                    states.append(nd)
                    nxt_frontier.append(nd)
                row.append((seen[nd], q))
            rows.append(row)
        frontier = nxt_frontier
    return DeltaChain(pair, tie, states, rows)


def _abs_gap_series_direct(pair: SourcePair, tie: TieBreak, n: int,
                           state_cap: int) -> List[Fraction]:
    """E|Delta_k| for k = 0..n by direct evolution of the gap law.

    Avoids closing the full chain, so it also serves pairs whose reachable
    set is infinite, as long as the law's support stays under state_cap
    within n steps.
    """
    _require_memoryless(tie)
    pi: Dict[Fraction, Fraction] = {Fraction(0): Fraction(1)}
    out = [Fraction(0)]
    for _ in range(n):
        nxt: Dict[Fraction, Fraction] = {}
        for d, p in pi.items():
            for nd, q in _transition(pair, tie, d):
                nxt[nd] = nxt.get(nd, Fraction(0)) + p * q
        if len(nxt) > state_cap:
            raise StateExplosion(f"gap law support exceeds {state_cap}")
        pi = nxt
        out.append(sum((p * abs(d) for d, p in pi.items()), Fraction(0)))
    return out


def alternating_expectation(pair: SourcePair, n: int) -> Fraction:
    """E M_A(n) = ceil(n/2) * floor(n/2) * mu."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return Fraction((n + 1) // 2) * (n // 2) * pair.moments.mu


def greedy_expectation_series(pair: SourcePair, n_max: int,
                              tie: TieBreak = PREFER_R,
                              state_cap: int = DEFAULT_STATE_CAP) -> List[Fraction]:
    """Exact E M_G(n) for n = 0..n_max."""
    abs_gaps = _abs_gap_series_direct(pair, tie, max(n_max - 1, 0), state_cap)
    mu = pair.moments.mu
    out = [Fraction(0)]
    acc = Fraction(0)
    for n in range(1, n_max + 1):
        acc += abs_gaps[n - 1]
        out.append(acc / 2 + Fraction(n * (n - 1)) * mu / 4)
    return out


def greedy_expectation(pair: SourcePair, n: int, tie: TieBreak = PREFER_R,
                       state_cap: int = DEFAULT_STATE_CAP) -> Fraction:
    """Exact E M_G(n) via the gap-chain identity."""
    return greedy_expectation_series(pair, n, tie, state_cap)[n]


# closed form for the fair-coin / two-headed-coin example
def eval_closed_form_example(n: int) -> float:
    """Float value of the known closed form for the coin example's E M_G(n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    beta = math.pi - math.atan(math.sqrt(7.0))
    rt7 = math.sqrt(7.0)
    osc = (3.0 * math.sin((n - 1) * beta)
           + 16.0 * math.sin((n - 3) * beta)
           - 9.0 * rt7 * math.cos((n - 1) * beta))
    return n * n / 8.0 + n / 16.0 - 7.0 / 64.0 + osc / (2.0 ** ((n + 11) / 2.0) * rt7)


def dp_optimal_value(pair: SourcePair, horizon: int,
                     state_cap: int = 500_000) -> Fraction:
    """Optimal expected matches over all policies, by backward induction.

    State is the pair of accumulated scores (xi_1, xi_2); reading R earns
    xi_2 and moves xi_1 by the score of the drawn label, symmetrically for
    S.  Memoized on (epochs remaining, xi_1, xi_2); the greedy certificate
    is exact equality with ``greedy_expectation``.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    r, s = pair.r.probs, pair.s.probs
    r_inc = [(si, ri) for ri, si in zip(r, s) if ri > 0]   # (score gain, prob)
    s_inc = [(ri, si) for ri, si in zip(r, s) if si > 0]
    memo: Dict[Tuple[int, Fraction, Fraction], Fraction] = {}

    def value(rem: int, x1: Fraction, x2: Fraction) -> Fraction:
        if rem == 0:
            return Fraction(0)
        key = (rem, x1, x2)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if len(memo) >= state_cap:
            raise StateExplosion(f"DP state graph exceeds {state_cap} entries")
        take_r = x2 + sum((p * value(rem - 1, x1 + inc, x2) for inc, p in r_inc),
                          Fraction(0))
        take_s = x1 + sum((p * value(rem - 1, x1, x2 + inc) for inc, p in s_inc),
                          Fraction(0))
        best = max(take_r, take_s)
        memo[key] = best
        return best

    return value(horizon, Fraction(0), Fraction(0))


def enumerate_nonadaptive_values(pair: SourcePair, horizon: int
                                 ) -> List[Tuple[str, Fraction]]:
    """Exact expected matches for every fixed 0/1 read sequence.

    For a nonadaptive sequence the value is R(h) * S(h) * mu by
    independence of the two label streams.
    """
    if horizon > 16:
        raise HorizonTooLarge("nonadaptive enumeration capped at horizon 16")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    mu = pair.moments.mu
    out = []
    for bits in range(1 << horizon):
        seq = format(bits, f"0{horizon}b") if horizon else ""
        r_count = seq.count("1")
        out.append((seq, Fraction(r_count * (horizon - r_count)) * mu))
    return out


def expectation_gap_limit(pair: SourcePair) -> Fraction:
    """Limit of (E M_G(n) - E M_A(n)) / n: (sigma_R^2 + sigma_S^2) / (8 mu)."""
    m = pair.moments
    return (m.sigma_r2 + m.sigma_s2) / (8 * m.mu)


def remark44_k(pair: SourcePair) -> int:
    """Ceiling of (sigma_R^2 + sigma_S^2) / (4 mu^2); 0 for the zero-gap pair."""
    m = pair.moments
    ratio = (m.sigma_r2 + m.sigma_s2) / (4 * m.mu * m.mu)
    if ratio == 0:
        return 0
    return -((-ratio.numerator) // ratio.denominator)


def increment_gap_series(pair: SourcePair, n_max: int,
                         tie: TieBreak = PREFER_R,
                         state_cap: int = DEFAULT_STATE_CAP) -> List[Fraction]:
    """d(n) = E(M_G(n+1) - M_G(n)) - E(M_A(n+1) - M_A(n)) for n = 0..n_max.

    Converges along parities to the two limits of ``parity_limits`` when
    the gap chain is ergodic, and its parity average converges to the
    overall gap limit geometrically.
    """
    abs_gaps = _abs_gap_series_direct(pair, tie, n_max, state_cap)
    mu = pair.moments.mu
    out = []
    for n in range(n_max + 1):
        d_g = abs_gaps[n] / 2 + Fraction(n) * mu / 2
        d_a = Fraction((n + 1) // 2) * mu   # ceil(n/2) * mu
        out.append(d_g - d_a)
    return out


def parity_limits(pair: SourcePair, tie: TieBreak = PREFER_R,
                  check_n: int = 400,
                  state_cap: int = DEFAULT_STATE_CAP
                  ) -> Tuple[Fraction, Fraction]:
    """(odd, even) limits of the per-epoch expectation gap increment.

    odd limit  = gap_limit - mu/4, even limit = gap_limit + mu/4.
    Requires the gap chain to be ergodic; this is checked, not assumed,
    and the chain-computed increments are confirmed to approach the limits
    along each parity.
    """
    m = pair.moments
    if m.sigma_r2 + m.sigma_s2 == 0:
        raise NotErgodic("identical uniform pair: the gap sequence is degenerate")
    chain = build_delta_chain(pair, tie, state_cap)
    if not chain.is_ergodic():
        raise NotErgodic("gap chain is not a single aperiodic recurrent class")
    gap = expectation_gap_limit(pair)
    odd_limit = gap - m.mu / 4
    even_limit = gap + m.mu / 4
    series = increment_gap_series(pair, check_n, tie, state_cap)
    for parity, limit in ((1, odd_limit), (0, even_limit)):
        idx = check_n - 1 if (check_n % 2) != parity else check_n
        if abs(float(series[idx] - limit)) > 1e-9:
            raise NotErgodic(
                f"parity-{parity} increments have not converged by n={check_n}")
    return odd_limit, even_limit


@dataclass(frozen=True)
class DiscountedValues:
    nu_alternating: float
    nu_greedy: float
    tail_bound: float


def discounted_values(pair: SourcePair, lam: float, truncation_n: int,
                      tie: TieBreak = PREFER_R, precision: float = 1e-6,
                      state_cap: int = DEFAULT_STATE_CAP) -> DiscountedValues:
    """Discounted incremental-match values nu_A (closed form) and nu_G (series).

    nu = sum_{n>=1} lam^{n-1} E(M(n) - M(n-1)).  The greedy series is
    truncated at truncation_n; the reported tail bound uses the crude
    per-step bound gamma/2 + (n-1) mu / 2 on the greedy increment.
    """
    if not 0 <= lam < 1:
        raise ValueError("lambda must lie in [0, 1)")
    m = pair.moments
    lam_f = parse_weight(lam)
    nu_a = float(lam_f * m.mu / ((1 - lam_f) ** 2 * (1 + lam_f))) if lam_f else 0.0
    if lam_f == 0:
        return DiscountedValues(0.0, 0.0, 0.0)
    abs_gaps = _abs_gap_series_direct(pair, tie, truncation_n - 1, state_cap)
    mu = float(m.mu)
    lamf = float(lam_f)
    nu_g = 0.0
    w = 1.0
    for n in range(1, truncation_n + 1):
        inc = float(abs_gaps[n - 1]) / 2.0 + (n - 1) * mu / 2.0
        nu_g += w * inc
        w *= lamf
    # tail: sum_{n>N} lam^{n-1} (gamma/2 + (n-1) mu/2)
    q = lamf
    qn = q ** truncation_n
    tail = (float(m.gamma) / 2.0) * qn / (1 - q) \
        + (mu / 2.0) * qn * (truncation_n * (1 - q) + q) / (1 - q) ** 2
    if tail > precision:
        raise TruncationInsufficient(
            f"tail bound {tail:.3e} exceeds requested precision {precision:.3e}")
    return DiscountedValues(nu_a, nu_g, tail)
