"""Benchmark: numba-compiled kernels vs the pure-Python fallback.

Run with the package installed:

    python benchmarks/bench_kernels.py

The fallback is selected per process via JOINPOLICY_NO_NUMBA=1, so this
script re-executes itself once with the flag set and compares wall times
for the single-policy and the coupled kernels.
"""

import os
import subprocess
import sys
import time


def bench() -> None:
    from joinpolicy.engine import (USING_NUMBA, PolicySpec, greedy_batch,
                                   coupled_batch, run_policy)
    from joinpolicy.model import illustrative_pair

    pair = illustrative_pair()
    label = "numba kernels" if USING_NUMBA else "pure-Python fallback"

    # warm-up triggers JIT compilation so it is not billed to the timings
    run_policy(pair, PolicySpec.greedy(), 100, 0)
    coupled_batch(pair, 100, 1, 0)

    n, reps = 10_000, 200
    t0 = time.perf_counter()
    greedy_batch(pair, n, reps, 123)
    t_policy = time.perf_counter() - t0

    t0 = time.perf_counter()
    coupled_batch(pair, n, reps, 123)
    t_coupled = time.perf_counter() - t0

    epochs = n * reps
    print(f"{label}:")
    print(f"  greedy batch   ({reps} x {n} epochs): {t_policy:8.3f} s "
          f"({epochs / t_policy / 1e6:7.2f} M epochs/s)")
    print(f"  coupled batch  ({reps} x {n} epochs): {t_coupled:8.3f} s "
          f"({epochs / t_coupled / 1e6:7.2f} M epochs/s)")


def main() -> None:
    if os.environ.get("_BENCH_CHILD"):
        bench()
        return
    bench()
    sys.stdout.flush()   # keep parent/child output ordered when piped
    env = dict(os.environ, JOINPOLICY_NO_NUMBA="1", _BENCH_CHILD="1")
    subprocess.run([sys.executable, os.path.abspath(__file__)], env=env,
                   check=True)


if __name__ == "__main__":
    main()
