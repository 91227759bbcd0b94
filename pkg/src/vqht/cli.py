"""Command-line entry point.

    vqht run <config>        execute a scenario, write CSV + manifest
    vqht validate <config>   check a config without computing anything
    vqht oracle <query> ...  direct closed-form/oracle evaluations

Exit codes: 0 success, 2 configuration/usage error, 3 the scenario ran
but at least one optimization failed to converge (results are still
written).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .config import parse_config
from .exceptions import (ConfigError, ConvergenceError, UsageError,
                         ValidationError, VqhtError)
from .oracles import (chernoff_bound, diamond_phase_flip, diamond_unitary,
                      schmidt_values, trace_distance, uhlmann_fidelity,
                      von_neumann_entropy)
from .qsim import haar_random_unitary
from .scenarios import execute
from .serialize import load_matrix, save_matrix

_CONFIG_ERRORS = (ConfigError, UsageError, ValidationError)


def format_value(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _json_safe(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return [_json_safe(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    return value


def write_manifest(path, config, summary, warnings_list, wall_time,
                   error=None):
    manifest = {
        "version": __version__,
        "scenario": config.scenario,
        "seed": config.seed,
        "config": config.echo(),
        "wall_time_s": round(wall_time, 3),
        "summary": _json_safe(summary),
        "warnings": list(warnings_list),
    }
    if error is not None:
        manifest["error"] = error
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(args):
    config = parse_config(args.config)
    out_dir = config.output
    os.makedirs(out_dir, exist_ok=True)
    start = time.monotonic()
    try:
        result = execute(config)
    except ConvergenceError as exc:
        write_manifest(os.path.join(out_dir, "manifest.json"), config, {},
                       [str(exc)], time.monotonic() - start, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 3
    wall = time.monotonic() - start
    write_csv(os.path.join(out_dir, "results.csv"), result.header,
              result.rows)
    for name, record in result.probes.items():
        save_matrix(os.path.join(out_dir, name), record.array,
                    kind=record.kind, dims=record.dims, meta=record.meta)
    write_manifest(os.path.join(out_dir, "manifest.json"), config,
                   result.summary, result.warnings, wall)
    print(f"{config.scenario}: {len(result.rows)} rows -> "
          f"{os.path.join(out_dir, 'results.csv')}")
    if not result.converged:
        print("warning: non-convergence reported; see manifest",
              file=sys.stderr)
        return 3
    return 0


def cmd_validate(args):
    config = parse_config(args.config)
    print(f"ok: scenario {config.scenario}, seed {config.seed}, "
          f"output {config.output}")
    return 0


def _load_state(path):
    record = load_matrix(path)
    arr = record.array
    if arr.shape[0] != arr.shape[1]:
        raise UsageError(f"{path}: state file must hold a square matrix")
    return arr


def _print_kv(pairs):
    for key, value in pairs:
        print(f"{key} = {format_value(value)}")


def cmd_oracle(args):
    if args.query == "diamond-phase-flip":
        _print_kv([("diamond_distance", diamond_phase_flip(args.p))])
    elif args.query == "diamond-unitary":
        if args.file:
            u = load_matrix(args.file).array
        else:
            u = haar_random_unitary(args.dim, args.haar_seed)
        _print_kv([("diamond_distance", diamond_unitary(u))])
    elif args.query == "tmsv":
        from .engine import probe_state
        from .fock import reduce_modes
        from .scenarios import _illumination_problem, tmsv_theta
        shell = _illumination_problem(1e-3, 1.0, args.ns, args.cutoff)
        state = probe_state(shell, tmsv_theta(args.ns), "fock")
        values = schmidt_values(state, [0], top_k=args.top_k)
        pairs = [(f"schmidt_{i + 1}", v) for i, v in enumerate(values)]
        pairs.append(("entropy",
                      von_neumann_entropy(reduce_modes(state, [1]))))
        _print_kv(pairs)
    elif args.query == "trace-distance":
        _print_kv([("trace_distance",
                    trace_distance(_load_state(args.a), _load_state(args.b)))])
    elif args.query == "chernoff":
        res = chernoff_bound(_load_state(args.a), _load_state(args.b))
        _print_kv([("q", res.bound), ("s_opt", res.s_opt),
                   ("exponent", -math.log(res.bound) if res.bound > 0
                    else math.inf)])
    elif args.query == "fidelity":
        _print_kv([("fidelity",
                    uhlmann_fidelity(_load_state(args.a),
                                     _load_state(args.b)))])
    else:
        raise UsageError(f"unknown oracle query {args.query!r}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vqht",
        description="Variational discrimination of quantum processes: "
                    "config-driven experiments and direct oracle queries.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config", help="path to an INI config file")
    p_run.set_defaults(fn=cmd_run)

    p_val = sub.add_parser("validate", help="validate a config and exit")
    p_val.add_argument("config")
    p_val.set_defaults(fn=cmd_validate)

    p_or = sub.add_parser("oracle", help="direct oracle evaluations")
    q = p_or.add_subparsers(dest="query", required=True)

    q_pf = q.add_parser("diamond-phase-flip")
    q_pf.add_argument("p", type=float)

    q_du = q.add_parser("diamond-unitary")
    q_du.add_argument("--file", help="matrix container holding the unitary")
    q_du.add_argument("--haar-seed", type=int, default=0)
    q_du.add_argument("--dim", type=int, default=4)

    q_tm = q.add_parser("tmsv")
    q_tm.add_argument("--ns", type=float, default=0.1)
    q_tm.add_argument("--cutoff", type=int, default=20)
    q_tm.add_argument("--top-k", type=int, default=5)

    for name in ("trace-distance", "chernoff", "fidelity"):
        q_two = q.add_parser(name)
        q_two.add_argument("a")
        q_two.add_argument("b")

    p_or.set_defaults(fn=cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
