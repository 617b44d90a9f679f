from .kernels import USING_NUMBA
from .run import (CoupledTrace, Trace, alternating_matches, coupled_batch,
                  greedy_batch, policy_batch, run_coupled, run_policy,
                  stopping_time)
from .state import (PREFER_R, PREFER_S, PolicySpec, ReadState, TieBreak,
                    choose, step)

__all__ = [
    "USING_NUMBA", "CoupledTrace", "Trace", "alternating_matches",
    "coupled_batch", "greedy_batch", "policy_batch", "run_coupled",
    "run_policy", "stopping_time", "PREFER_R", "PREFER_S", "PolicySpec",
    "ReadState", "TieBreak", "choose", "step",
]
