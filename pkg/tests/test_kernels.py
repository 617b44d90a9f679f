"""Compiled kernels and the pure-Python fallback must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np

from joinpolicy.engine import kernels
from joinpolicy.model import illustrative_pair, pair_label_streams
from joinpolicy.seeds import replication_rng

_PROBE = """
import json
import numpy as np
from joinpolicy.engine import USING_NUMBA, run_policy, run_coupled, PolicySpec, TieBreak
from joinpolicy.model import illustrative_pair

pair = illustrative_pair()
out = {"numba": USING_NUMBA}
for name, policy in [
        ("greedy", PolicySpec.greedy()),
        ("greedy_rand", PolicySpec.greedy(TieBreak("random", 0.4))),
        ("bernoulli", PolicySpec.bernoulli(0.3)),
        ("restorative", PolicySpec.restorative(0.5, 0.2, 0.8)),
        ("alternating", PolicySpec.alternating())]:
    t = run_policy(pair, policy, 400, 31)
    out[name] = [t.m.tolist(), t.r.tolist(),
                 [repr(x) for x in t.gamma_r.tolist()],
                 [repr(x) for x in t.gamma_s.tolist()]]
ct = run_coupled(pair, 400, 77)
out["coupled"] = [ct.d.tolist(), ct.t.tolist(), [repr(x) for x in ct.g.tolist()]]
print(json.dumps(out, sort_keys=True))
"""


def _probe(no_numba: bool) -> tuple:
    env = dict(os.environ)
    env["JOINPOLICY_NO_NUMBA"] = "1" if no_numba else "0"
    proc = subprocess.run([sys.executable, "-c", _PROBE], env=env,
                          capture_output=True, text=True, check=True)
    import json
    doc = json.loads(proc.stdout)
    flag = doc.pop("numba")
    return flag, doc


def test_fallback_is_bit_identical():
    numba_flag, with_numba = _probe(no_numba=False)
    fallback_flag, without = _probe(no_numba=True)
    assert not fallback_flag
    assert with_numba == without
    # sanity: the default environment here actually exercises the JIT path
    if "JOINPOLICY_NO_NUMBA" not in os.environ:
        assert numba_flag


def test_impl_functions_directly():
    """The raw _impl functions run uncompiled and match the dispatched ones."""
    pair = illustrative_pair()
    n = 300
    rng = replication_rng(5, 0)
    labels_r, labels_s = pair_label_streams(pair, n, rng)
    coin_u = rng.random(n)
    tie_u = rng.random(n)

    def alloc():
        return (np.empty(n, dtype=np.int8), np.empty(n, dtype=np.int64),
                np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64),
                np.empty(n, dtype=np.float64), np.empty(n, dtype=np.float64))

    a = alloc()
    kernels.policy_run(1, 0.0, 0.5, 0.0, 1.0, 0, 1.0, labels_r, labels_s,
                       pair.x_r, pair.x_s, coin_u, tie_u, *a)
    b = alloc()
    kernels._policy_run_impl(1, 0.0, 0.5, 0.0, 1.0, 0, 1.0, labels_r, labels_s,
                             pair.x_r, pair.x_s, coin_u, tie_u, *b)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
