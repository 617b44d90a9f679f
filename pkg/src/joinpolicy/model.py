"""Label sources: distributions, derived moment constants, and sampling.

The two sources emit i.i.d. integer labels.  Everything downstream (exact
chain computations, Monte Carlo, reference CDFs) is driven by five constants
derived from the pair of label distributions:

    mu        expected per-pair match probability, sum_i r_i * s_i
    sigma_r2  variance of the score s_{label} of a single R-read
    sigma_s2  variance of the score r_{label} of a single S-read
    gamma     largest single-label weight across both sources
    sigma_rg2 asymptotic variance of the greedy selection count,
              (sigma_r2 + sigma_s2) / (8 mu^2)

Distributions are stored as exact fractions and converted to floats at a
single point (``as_floats``), so the exact module can demand exact equality
while the simulation module works in float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .errors import InvalidDistribution, ZeroOverlap

WeightLike = Union[int, float, str, Fraction]

FLOAT_SUM_TOL = 1e-12


def parse_weight(token: WeightLike) -> Fraction:
    """Parse a weight into an exact fraction.

    Accepts "1/2" style fractions, decimal strings ("0.25" becomes 1/4 by
    its literal denominator), ints, Fractions, and floats (converted via
    their shortest decimal repr, not their binary expansion).
    """
    if isinstance(token, Fraction):
        return token
    if isinstance(token, int):
        return Fraction(token)
    if isinstance(token, float):
        return Fraction(repr(token))
    if isinstance(token, str):
        try:
            return Fraction(token)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidDistribution(f"cannot parse weight {token!r}") from exc
    raise InvalidDistribution(f"unsupported weight type {type(token)!r}")


@dataclass(frozen=True)
class LabelDistribution:
    """A finite label distribution held as exact fractions.

    Invariants: all weights nonnegative, at least one positive, and the
    weights sum to exactly one.
    """

    probs: tuple

    def __post_init__(self):
        if len(self.probs) == 0:
            raise InvalidDistribution("empty weight sequence")
        if any(p < 0 for p in self.probs):
            raise InvalidDistribution("negative weight")
        total = sum(self.probs, Fraction(0))
        if total != 1:
            raise InvalidDistribution(f"weights sum to {total}, expected 1")

    @classmethod
    def from_weights(cls, weights: Sequence[WeightLike]) -> "LabelDistribution":
        return cls(tuple(parse_weight(w) for w in weights))

    @classmethod
    def from_floats(cls, weights: Sequence[float]) -> "LabelDistribution":
        """Build from floats, renormalizing away drift up to FLOAT_SUM_TOL."""
        fracs = [parse_weight(float(w)) for w in weights]
        total = sum(fracs, Fraction(0))
        if abs(float(total) - 1.0) > FLOAT_SUM_TOL:
            raise InvalidDistribution(f"float weights sum to {float(total)}")
        return cls(tuple(f / total for f in fracs))

    def __len__(self) -> int:
        return len(self.probs)

    def padded(self, size: int) -> "LabelDistribution":
        if size < len(self.probs):
            raise ValueError("cannot pad to a smaller support")
        return LabelDistribution(self.probs + (Fraction(0),) * (size - len(self.probs)))

    def as_floats(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs], dtype=np.float64)


@dataclass(frozen=True)
class Moments:
    """The five derived constants; exact Fractions when inputs are exact."""

    mu: Fraction
    sigma_r2: Fraction
    sigma_s2: Fraction
    gamma: Fraction
    sigma_rg2: Fraction

    def as_floats(self) -> "Moments":
        return Moments(*(float(v) for v in
                         (self.mu, self.sigma_r2, self.sigma_s2,
                          self.gamma, self.sigma_rg2)))

    @property
    def sigma_sum2(self):
        return self.sigma_r2 + self.sigma_s2


def derive_moments(r: LabelDistribution, s: LabelDistribution) -> Moments:
    """Compute mu, sigma_r2, sigma_s2, gamma, sigma_rg2 by their defining sums.

    Raises ZeroOverlap when the supports are disjoint (mu = 0), which the
    greedy analysis excludes.
    """
    if len(r) != len(s):
        raise InvalidDistribution("distributions must share a support length")
    mu = sum((ri * si for ri, si in zip(r.probs, s.probs)), Fraction(0))
    if mu == 0:
        raise ZeroOverlap("r . s = 0: no common label between the sources")
    sigma_r2 = sum((ri * si * si for ri, si in zip(r.probs, s.probs)), Fraction(0)) - mu * mu
    sigma_s2 = sum((si * ri * ri for ri, si in zip(r.probs, s.probs)), Fraction(0)) - mu * mu
    gamma = max(max(r.probs), max(s.probs))
    sigma_rg2 = (sigma_r2 + sigma_s2) / (8 * mu * mu)
    return Moments(mu, sigma_r2, sigma_s2, gamma, sigma_rg2)


class SourcePair:
    """The two label sources, padded to a common support, plus their moments.

    Immutable after construction; safe to share across workers.
    """

    def __init__(self, r: LabelDistribution, s: LabelDistribution):
        size = max(len(r), len(s))
        self.r = r.padded(size)
        self.s = s.padded(size)
        self.moments = derive_moments(self.r, self.s)
        # float views used by the simulation engine
        self.r_probs = self.r.as_floats()
        self.s_probs = self.s.as_floats()
        # score of a single read: an R-read with label i is worth s_i
        # against a fresh S-record, and vice versa
        self.x_r = self.s_probs
        self.x_s = self.r_probs
        self._r_cum = np.cumsum(self.r_probs)
        self._s_cum = np.cumsum(self.s_probs)

    @property
    def support(self) -> int:
        return len(self.r)

    @classmethod
    def from_weights(cls, r_weights, s_weights) -> "SourcePair":
        return cls(LabelDistribution.from_weights(r_weights),
                   LabelDistribution.from_weights(s_weights))

    @classmethod
    def from_dict(cls, data: dict) -> "SourcePair":
        try:
            r_weights, s_weights = data["r"], data["s"]
        except KeyError as exc:
            raise InvalidDistribution("pair definition needs 'r' and 's' arrays") from exc
        return cls.from_weights(r_weights, s_weights)

    @classmethod
    def from_json(cls, path) -> "SourcePair":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def swapped(self) -> "SourcePair":
        return SourcePair(self.s, self.r)

    def __repr__(self):
        return f"SourcePair(r={[str(p) for p in self.r.probs]}, s={[str(p) for p in self.s.probs]})"


def illustrative_pair() -> SourcePair:
    """Fair coin vs. two-headed coin; the running worked example."""
    return SourcePair.from_weights(["1/2", "1/2"], ["1", "0"])


def sample_label(dist: LabelDistribution, rng: np.random.Generator) -> int:
    """Draw one label index; deterministic given the generator state."""
    cum = np.cumsum(dist.as_floats())
    return int(np.searchsorted(cum, rng.random(), side="right"))


def sample_labels(cum_probs: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` label indices from a precomputed cumulative weight array."""
    u = rng.random(size)
    return np.searchsorted(cum_probs, u, side="right").astype(np.int64)


def pair_label_streams(pair: SourcePair, n: int, rng: np.random.Generator):
    """One label stream per source, each long enough for n total reads.

    Drawn in a fixed order (R first) so a run is reproducible from its seed.
    """
    labels_r = sample_labels(pair._r_cum, n, rng)
    labels_s = sample_labels(pair._s_cum, n, rng)
    return labels_r, labels_s
