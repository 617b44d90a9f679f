"""Batch experiment runner: ``joinpolicy <command> --config <path>``.

Commands
    simulate   run one policy for several replications, write per-epoch traces
    exact      rational results: gap chain, expectations, constants
    verify     run named verification suites, write pass/fail result rows
    compare    coupled greedy-vs-alternating runs with path diagnostics

Every invocation creates a fresh ``run-NNNN`` directory under the output
root (prior runs are never touched) holding ``results.json`` plus, per
command, ``traces/*.csv`` and ``chain.json``.  Result files are
byte-identical across reruns of the same config and seed, except for
wall-time fields.

Thread count precedence: ``--threads`` flag, then the JOINPOLICY_THREADS
environment variable, then the config, then 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import exact, verify
from .engine import PolicySpec, TieBreak, run_coupled, run_policy
from .errors import ConfigInvalid, JoinPolicyError
from .model import SourcePair
from .seeds import seed_stream
from .stats import sign_change_stats
from .verify import SUITE_NAMES, row

RESULTS_SCHEMA_VERSION = 1
COMMANDS = ("simulate", "exact", "verify", "compare")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config root must be a JSON object")
    return cfg


def _pair_from_config(cfg: dict, config_dir: Path) -> SourcePair:
    if "pair" in cfg:
        return SourcePair.from_dict(cfg["pair"])
    if "pair_file" in cfg:
        return SourcePair.from_json(config_dir / cfg["pair_file"])
    raise ConfigInvalid("config needs 'pair' (inline) or 'pair_file'")


def _positive_int(cfg: dict, key: str, default: int, minimum: int = 1) -> int:
    value = cfg.get(key, default)
    if not isinstance(value, int) or value < minimum:
        raise ConfigInvalid(f"'{key}' must be an integer >= {minimum}")
    return value


def _resolve_seed(cfg: dict, args) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if not isinstance(seed, int) or not -(2 ** 63) <= seed < 2 ** 64:
        raise ConfigInvalid("'seed' must be a 64-bit integer")
    return seed


def _resolve_threads(cfg: dict, args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("JOINPOLICY_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigInvalid("JOINPOLICY_THREADS must be an integer") from exc
    return _positive_int(cfg, "threads", 1)


def _tie_from_config(cfg: dict) -> TieBreak:
    tie = cfg.get("tie", {})
    if isinstance(tie, str):
        tie = {"mode": tie}
    return TieBreak(tie.get("mode", "prefer_r"), float(tie.get("p", 1.0)))


def _policy_from_config(cfg: dict) -> PolicySpec:
    spec = cfg.get("policy", {"variant": "greedy"})
    if isinstance(spec, str):
        spec = {"variant": spec}
    variant = spec.get("variant", "greedy")
    tie = _tie_from_config(spec)
    try:
        if variant == "alternating":
            return PolicySpec.alternating()
        if variant == "greedy":
            return PolicySpec.greedy(tie)
        if variant == "greedy_offset":
            return PolicySpec.greedy_offset(float(spec["delta"]), tie)
        if variant == "bernoulli":
            return PolicySpec.bernoulli(float(spec["alpha"]))
        if variant == "restorative":
            return PolicySpec.restorative(float(spec["alpha"]),
                                          float(spec["alpha1"]),
                                          float(spec["alpha2"]))
    except (KeyError, ValueError) as exc:
        raise ConfigInvalid(f"invalid policy spec: {exc}") from exc
    raise ConfigInvalid(f"unknown policy variant {variant!r}")


def _new_run_dir(out_root: Path) -> Path:
    """Next free run-NNNN directory; prior runs are never reused or modified."""
    out_root.mkdir(parents=True, exist_ok=True)
    i = 1
    while True:
        candidate = out_root / f"run-{i:04d}"
        try:
            candidate.mkdir()
            return candidate
        except FileExistsError:
            i += 1


def _write_results(run_dir: Path, command: str, cfg: dict, seed: int,
                   rows: list, extra: dict = None) -> None:
    doc = {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "experiment_id": cfg.get("experiment_id", "unnamed"),
        "command": command,
        "parameters": {k: v for k, v in cfg.items() if k != "out"},
        "seed": seed,
        "results": rows,
    }
    if extra:
        doc.update(extra)
    with open(run_dir / "results.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _frac_str(x: Fraction) -> str:
    return str(x)


def cmd_simulate(cfg: dict, pair: SourcePair, seed: int, threads: int,
                 run_dir: Path) -> list:
    policy = _policy_from_config(cfg)
    n = _positive_int(cfg, "n_epochs", 1000)
    reps = _positive_int(cfg, "replications", 1)
    traces_dir = run_dir / "traces"
    traces_dir.mkdir()
    rows = []
    for i in range(reps):
        t0 = time.perf_counter()
        trace = run_policy(pair, policy, n, seed_stream(seed, i))
        trace.to_csv(traces_dir / f"trace-{i:04d}.csv")
        wall = time.perf_counter() - t0
        for metric, value in (
                (f"simulate/rep{i}/final M(n)", int(trace.m[-1])),
                (f"simulate/rep{i}/final R(n)", int(trace.r[-1])),
                (f"simulate/rep{i}/final Gamma_R - Gamma_S",
                 float(trace.gamma_r[-1] - trace.gamma_s[-1]))):
            r = row(metric, value, value, 0.0, "abs")
            r["wall_time_s"] = wall
            rows.append(r)
    return rows


def cmd_exact(cfg: dict, pair: SourcePair, seed: int, threads: int,
              run_dir: Path) -> list:
    tie = _tie_from_config(cfg)
    n = _positive_int(cfg, "n", 3)
    rows = []

    t0 = time.perf_counter()
    chain = exact.build_delta_chain(pair, tie)
    with open(run_dir / "chain.json", "w") as fh:
        json.dump(chain.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    m_g = exact.greedy_expectation(pair, n, tie)
    m_a = exact.alternating_expectation(pair, n)
    gap_limit = exact.expectation_gap_limit(pair)
    moments = pair.moments
    wall = time.perf_counter() - t0

    exact_values = {
        f"E M_G({n})": _frac_str(m_g),
        f"E M_A({n})": _frac_str(m_a),
        "mu": _frac_str(moments.mu),
        "sigma_r2": _frac_str(moments.sigma_r2),
        "sigma_s2": _frac_str(moments.sigma_s2),
        "gamma": _frac_str(moments.gamma),
        "sigma_rg2": _frac_str(moments.sigma_rg2),
        "gap_limit": _frac_str(gap_limit),
        "remark44_k": exact.remark44_k(pair),
        "chain_states": len(chain.states),
        "chain_ergodic": chain.is_ergodic(),
    }
    if "lambda" in cfg:
        dv = exact.discounted_values(pair, float(cfg["lambda"]),
                                     _positive_int(cfg, "truncation_n", 2000),
                                     tie)
        exact_values["nu_alternating"] = dv.nu_alternating
        exact_values["nu_greedy"] = dv.nu_greedy
        exact_values["nu_greedy_tail_bound"] = dv.tail_bound
    for metric, value in ((f"exact/E M_G({n})", float(m_g)),
                          (f"exact/E M_A({n})", float(m_a)),
                          ("exact/gap limit", float(gap_limit))):
        r = row(metric, value, value, 0.0, "abs")
        r["wall_time_s"] = wall
        rows.append(r)
    return rows, {"exact": exact_values}


def cmd_verify(cfg: dict, pair: SourcePair, seed: int, threads: int,
               run_dir: Path) -> list:
    suites = cfg.get("suites", "all")
    if suites == "all":
        suites = list(SUITE_NAMES)
    if not isinstance(suites, list) or not suites:
        raise ConfigInvalid("'suites' must be 'all' or a nonempty list")
    unknown = [s for s in suites if s not in SUITE_NAMES]
    if unknown:
        raise ConfigInvalid(f"unknown suites: {unknown}; known: {SUITE_NAMES}")
    sizes = cfg.get("sizes", {})
    rows = []
    for name in suites:
        t0 = time.perf_counter()
        suite_rows = verify.run_suite(name, pair, seed, threads, sizes)
        wall = time.perf_counter() - t0
        for r in suite_rows:
            r["suite"] = name
            r["wall_time_s"] = wall
            rows.append(r)
    return rows


def cmd_compare(cfg: dict, pair: SourcePair, seed: int, threads: int,
                run_dir: Path) -> list:
    n = _positive_int(cfg, "n_epochs", 1000, minimum=2)
    reps = _positive_int(cfg, "replications", 1)
    tie = _tie_from_config(cfg)
    traces_dir = run_dir / "traces"
    traces_dir.mkdir()
    rows = []
    d_final = np.empty(reps, dtype=np.int64)
    for i in range(reps):
        t0 = time.perf_counter()
        coupled = run_coupled(pair, n, seed_stream(seed, i), tie)
        coupled.to_csv(traces_dir / f"coupled-{i:04d}.csv")
        wall = time.perf_counter() - t0
        d_final[i] = coupled.d[-1]
        r = row(f"compare/rep{i}/final M_G - M_A", int(coupled.d[-1]),
                int(coupled.d[-1]), 0.0, "abs")
        r["wall_time_s"] = wall
        rows.append(r)
    r = row("compare/mean final M_G - M_A", float(np.mean(d_final)),
            float(np.mean(d_final)), 0.0, "abs")
    r["wall_time_s"] = 0.0
    rows.append(r)
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="joinpolicy",
        description="Simulation and exact analysis of join reading policies.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides the config)")
        p.add_argument("--out", default=None,
                       help="output root (overrides the config; default 'results')")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (overrides JOINPOLICY_THREADS and config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _load_config(args.config)
    experiment_id = cfg.get("experiment_id", "unnamed")
    try:
        pair = _pair_from_config(cfg, Path(args.config).resolve().parent)
        seed = _resolve_seed(cfg, args)
        threads = _resolve_threads(cfg, args)
        out_root = Path(args.out if args.out is not None
                        else cfg.get("out", "results"))
        run_dir = _new_run_dir(out_root)
        extra = None
        if args.command == "simulate":
            rows = cmd_simulate(cfg, pair, seed, threads, run_dir)
        elif args.command == "exact":
            rows, extra = cmd_exact(cfg, pair, seed, threads, run_dir)
        elif args.command == "verify":
            rows = cmd_verify(cfg, pair, seed, threads, run_dir)
        else:
            rows = cmd_compare(cfg, pair, seed, threads, run_dir)
        _write_results(run_dir, args.command, cfg, seed, rows, extra)
    except JoinPolicyError as exc:
        print(f"joinpolicy: [{experiment_id}] {exc}", file=sys.stderr)
        return 2
    all_pass = all(r["pass"] for r in rows)
    for r in rows:
        status = "PASS" if r["pass"] else "FAIL"
        print(f"{status}  {r['metric']}: value={r['value']:.6g} "
              f"target={r['target']:.6g} tol={r['tolerance']:g} ({r['mode']})")
    print(f"results: {run_dir / 'results.json'}")
    return 0 if all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
