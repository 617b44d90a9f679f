"""Policy specifications and the per-epoch read state.

The state machine here is the readable reference implementation: one
``step`` per record, match count maintained incrementally.  The fast
kernels in ``kernels.py`` follow exactly the same update rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import LabelOutOfRange

R, S = 1, 0  # source codes, matching the paper-facing convention C(n)=1 for R

# tie-break modes for the greedy comparison
TIE_PREFER_R = 0
TIE_PREFER_S = 1
TIE_ALTERNATE_FROM_R = 2
TIE_RANDOM = 3

_TIE_NAMES = {
    "prefer_r": TIE_PREFER_R,
    "prefer_s": TIE_PREFER_S,
    "alternate_from_r": TIE_ALTERNATE_FROM_R,
    "random": TIE_RANDOM,
}


@dataclass(frozen=True)
class TieBreak:
    """What greedy does when the two accumulated scores are equal.

    ``random`` picks R with probability p; the other modes ignore p.
    Only prefer_r / prefer_s / random are memoryless in the score gap and
    therefore admissible in the exact chain layer.
    """

    mode: str = "prefer_r"
    p: float = 1.0

    def __post_init__(self):
        if self.mode not in _TIE_NAMES:
            raise ValueError(f"unknown tie mode {self.mode!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("tie probability must be in [0, 1]")

    @property
    def code(self) -> int:
        return _TIE_NAMES[self.mode]

    @property
    def memoryless(self) -> bool:
        return self.mode != "alternate_from_r"


PREFER_R = TieBreak("prefer_r")
PREFER_S = TieBreak("prefer_s")


@dataclass(frozen=True)
class PolicySpec:
    """One of the five reading policies.

    alternating            R on odd epochs (C(n) = n mod 2, R first)
    greedy                 read the source whose opposite score is larger
    greedy_offset          greedy with the comparison shifted by delta
    bernoulli              independent alpha-coin each epoch
    restorative            alpha1-coin when the R-ratio is at/above alpha,
                           alpha2-coin otherwise (alpha1 < alpha < alpha2);
                           first read is from R
    """

    variant: str
    tie: TieBreak = PREFER_R
    delta: float = 0.0
    alpha: float = 0.5
    alpha1: float = 0.0
    alpha2: float = 1.0

    def __post_init__(self):
        if self.variant not in ("alternating", "greedy", "greedy_offset",
                                "bernoulli", "restorative"):
            raise ValueError(f"unknown policy variant {self.variant!r}")
        if self.variant == "bernoulli" and not 0.0 < self.alpha < 1.0:
            raise ValueError("bernoulli alpha must lie in (0, 1)")
        if self.variant == "restorative":
            if not 0.0 < self.alpha1 < self.alpha < self.alpha2 < 1.0:
                raise ValueError("restorative needs 0 < alpha1 < alpha < alpha2 < 1")

    @classmethod
    def alternating(cls):
        return cls("alternating")

    @classmethod
    def greedy(cls, tie: TieBreak = PREFER_R):
        return cls("greedy", tie=tie)

    @classmethod
    def greedy_offset(cls, delta: float, tie: TieBreak = PREFER_R):
        return cls("greedy_offset", tie=tie, delta=float(delta))

    @classmethod
    def bernoulli(cls, alpha: float):
        return cls("bernoulli", alpha=float(alpha))

    @classmethod
    def restorative(cls, alpha: float, alpha1: float, alpha2: float):
        return cls("restorative", alpha=float(alpha),
                   alpha1=float(alpha1), alpha2=float(alpha2))

    @property
    def code(self) -> int:
        return {"alternating": 0, "greedy": 1, "greedy_offset": 1,
                "bernoulli": 2, "restorative": 3}[self.variant]


@dataclass
class ReadState:
    """Counts and accumulated scores after n reads.

    matches is maintained incrementally and always equals the dot product
    of the two label-count vectors.
    """

    support: int
    n: int = 0
    r_count: int = 0
    s_count: int = 0
    gamma_r: float = 0.0
    gamma_s: float = 0.0
    matches: int = 0
    n_r: np.ndarray = field(default=None)
    n_s: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_r is None:
            self.n_r = np.zeros(self.support, dtype=np.int64)
        if self.n_s is None:
            self.n_s = np.zeros(self.support, dtype=np.int64)

    def recompute_matches(self) -> int:
        """Brute-force M(n) from the count vectors (oracle for the step rule)."""
        return int(np.dot(self.n_r, self.n_s))


def step(state: ReadState, choice: int, label: int,
         x_r: np.ndarray, x_s: np.ndarray) -> ReadState:
    """Consume one record: update counts, scores and the match count in place.

    Reading source R with label i gains n_s[i] new matches and adds the
    score x_r[i] = s_i to gamma_r; the S case is symmetric.
    """
    if not 0 <= label < state.support:
        raise LabelOutOfRange(f"label {label} outside support {state.support}")
    if choice == R:
        state.matches += int(state.n_s[label])
        state.n_r[label] += 1
        state.gamma_r += x_r[label]
        state.r_count += 1
    else:
        state.matches += int(state.n_r[label])
        state.n_s[label] += 1
        state.gamma_s += x_s[label]
        state.s_count += 1
    state.n += 1
    return state


def choose(policy: PolicySpec, state: ReadState, rng: np.random.Generator) -> int:
    """Pick the source for epoch n+1 under the given policy."""
    nxt = state.n + 1
    if policy.variant == "alternating":
        return R if nxt % 2 == 1 else S
    if policy.variant in ("greedy", "greedy_offset"):
        lhs, rhs = state.gamma_s, state.gamma_r + policy.delta
        if lhs > rhs:
            return R
        if lhs < rhs:
            return S
        return _break_tie(policy.tie, nxt, rng)
    if policy.variant == "bernoulli":
        return R if rng.random() < policy.alpha else S
    # restorative
    if state.n == 0:
        return R
    a = policy.alpha1 if state.r_count >= policy.alpha * state.n else policy.alpha2
    return R if rng.random() < a else S


def _break_tie(tie: TieBreak, next_epoch: int, rng) -> int:
    if tie.mode == "prefer_r":
        return R
    if tie.mode == "prefer_s":
        return S
    if tie.mode == "alternate_from_r":
        return R if next_epoch % 2 == 1 else S
    return R if rng.random() < tie.p else S
