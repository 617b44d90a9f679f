"""joinpolicy: simulation and exact analysis of sequential join-sampling policies.

Two sources emit i.i.d. labeled records; a reading policy chooses which
source supplies the next record, trying to maximize the number of equal-label
pairs among everything read so far.  The package provides:

- ``model``: label distributions (exact rationals) and derived constants
- ``engine``: fast simulation of alternating / greedy / Bernoulli /
  restorative policies, with coupled greedy-vs-alternating runs
- ``exact``: rational-arithmetic score-gap chain, expectations, a dynamic
  programming optimality oracle, and discounted values
- ``stats``: reference CDFs (normal, folded normal, normal scale mixture)
  and Monte Carlo estimators for the limit-theorem checks
- ``verify``: named suites tying exact targets to Monte Carlo estimates
- ``cli``: the ``joinpolicy`` command-line runner
"""

from .engine import (CoupledTrace, PolicySpec, Trace, TieBreak, run_coupled,
                     run_policy)
from .errors import JoinPolicyError
from .model import LabelDistribution, Moments, SourcePair, illustrative_pair
from .seeds import seed_stream

__version__ = "0.1.0"

__all__ = [
    "CoupledTrace", "JoinPolicyError", "LabelDistribution", "Moments",
    "PolicySpec", "SourcePair", "TieBreak", "Trace", "illustrative_pair",
    "run_coupled", "run_policy", "seed_stream", "__version__",
]
