"""Command-line entry point.

Four subcommands wire the library end to end: ``simulate`` writes
trajectory files, ``fit`` recovers an edge set from trajectory files,
``experiment`` reproduces the benchmark scenarios, ``theory`` evaluates
the guarantee constants for a model file.  Every run writes a
``metadata.json`` carrying all parameters, seeds and the package
version, which suffices to reproduce the outputs exactly.  Text output
is newline-terminated with period decimal separators regardless of
locale.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .metrics import ExperimentReport, ExperimentSpec, run_experiment
from .model import (
    CapacityError,
    InvalidModelError,
    MAX_AMALGAMATION_NODES,
    analyze_chain,
    make_m1,
    make_m2,
    model_from_json_dict,
    model_to_json_dict,
)
from .select import select_structure
from .simulate import replicate, trajectory_from_json, trajectory_to_json
from .solver import SolverConfig
from .stats import extract, stats_to_json_dict, total_jumps
from .theory import UndefinedBoundError, theory_report_json

__all__ = ["main"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(f"not serializable: {type(x)}")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _write_json(path: str, obj) -> None:
    text = json.dumps(_sanitize(obj), indent=2, sort_keys=True, default=_json_default)
    _write_text(path, text + "\n")


def _write_metadata(out_dir: str, command: str, params: dict) -> None:
    meta = {
        "package": "ctbnlasso",
        "version": __version__,
        "command": command,
        "rng": "philox",
        "params": params,
    }
    _write_json(os.path.join(out_dir, "metadata.json"), meta)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        grid_size=args.grid_size,
        lambda_min_ratio=args.lambda_min_ratio,
        max_iter=args.max_iter,
        tol=args.tol,
    )


def _add_solver_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--grid-size", type=int, default=100, help="penalty grid size")
    sub.add_argument("--lambda-min-ratio", type=float, default=1e-3)
    sub.add_argument("--max-iter", type=int, default=5000)
    sub.add_argument("--tol", type=float, default=1e-8)


def _add_generator_flags(sub: argparse.ArgumentParser, with_model_file: bool) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--m1", action="store_true", help="chain benchmark model")
    group.add_argument("--m2", action="store_true", help="dense-head benchmark model")
    if with_model_file:
        group.add_argument("--model", help="model JSON file")
    sub.add_argument("--d", type=int, help="number of nodes")


def _load_model(parser, args):
    if getattr(args, "model", None):
        try:
            with open(args.model, encoding="utf-8") as fh:
                return model_from_json_dict(json.load(fh))
        except FileNotFoundError:
            parser.error(f"--model: file not found: {args.model}")
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            parser.error(f"--model: invalid model file: {exc}")
    if args.d is None:
        parser.error("--d is required with --m1/--m2")
    if args.m1 and args.d < 2:
        parser.error("--d must be at least 2 for --m1")
    if args.m2 and args.d < 5:
        parser.error("--d must be at least 5 for --m2")
    maker = make_m1 if args.m1 else make_m2
    return maker(args.d, args.seed)


def _cmd_simulate(parser, args) -> int:
    os.makedirs(args.out, exist_ok=True)
    model = _load_model(parser, args)
    trajectories = replicate(model, args.start, args.T, args.reps, args.seed)
    _write_json(os.path.join(args.out, "model.json"), model_to_json_dict(model))
    for k, traj in enumerate(trajectories):
        _write_text(
            os.path.join(args.out, f"traj_{k:03d}.json"), trajectory_to_json(traj) + "\n"
        )
    _write_metadata(
        args.out,
        "simulate",
        {
            "generator": "m1" if args.m1 else ("m2" if args.m2 else "file"),
            "model_file": getattr(args, "model", None),
            "d": model.d,
            "T": args.T,
            "reps": args.reps,
            "seed": args.seed,
            "start": args.start,
        },
    )
    return 0


def _paths_csv(paths) -> str:
    lines = ["w,s,lambda,objective,nnz,kkt_gap"]
    for key in sorted(paths):
        lp = paths[key]
        nnz = lp.nnz()
        for i in range(len(lp)):
            lines.append(
                f"{key.w},{key.s},{_fmt(lp.lambdas[i])},{_fmt(lp.objectives[i])},"
                f"{int(nnz[i])},{_fmt(lp.kkt_gaps[i])}"
            )
    return "\n".join(lines) + "\n"


def _cmd_fit(parser, args) -> int:
    os.makedirs(args.out, exist_ok=True)
    cfg = _solver_config(args)
    for traj_path in args.trajectories:
        try:
            with open(traj_path, encoding="utf-8") as fh:
                traj = trajectory_from_json(fh.read())
        except FileNotFoundError:
            print(f"error: trajectory file not found: {traj_path}", file=sys.stderr)
            return 1
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            print(f"error: corrupt trajectory {traj_path}: {exc}", file=sys.stderr)
            return 1
        stats = extract(traj)
        result, paths = select_structure(stats, cfg, keep_paths=True)
        stem = os.path.splitext(os.path.basename(traj_path))[0]
        report = {
            "d": result.d,
            "n_jumps": result.n_jumps,
            "triples": [ts.to_json_dict() for ts in result.triples],
            "edges": sorted([list(e) for e in result.edges]),
        }
        _write_json(os.path.join(args.out, f"{stem}.selection.json"), report)
        edge_lines = "".join(f"{u} {w}\n" for u, w in sorted(result.edges))
        _write_text(os.path.join(args.out, f"{stem}.edges.txt"), edge_lines)
        if args.dump_paths:
            _write_text(os.path.join(args.out, f"{stem}.paths.csv"), _paths_csv(paths))
        if args.dump_stats:
            _write_json(os.path.join(args.out, f"{stem}.stats.json"), stats_to_json_dict(stats))
    _write_metadata(
        args.out,
        "fit",
        {
            "trajectories": list(args.trajectories),
            "grid_size": args.grid_size,
            "lambda_min_ratio": args.lambda_min_ratio,
            "max_iter": args.max_iter,
            "tol": args.tol,
            "bic_jump_count": "total jumps of the process",
        },
    )
    return 0


def _reps_csv(report: ExperimentReport) -> str:
    spec = report.spec
    lines = ["model,d,T,rep,power,fdr,md,undirected_power,error"]
    errors = dict(report.failures)
    for rep, sc in enumerate(report.scores):
        if sc is None:
            lines.append(f"{spec.model},{spec.d},{_fmt(spec.T)},{rep},,,,,{errors.get(rep, '')}")
        else:
            lines.append(
                f"{spec.model},{spec.d},{_fmt(spec.T)},{rep},{_fmt(sc.power)},"
                f"{_fmt(sc.fdr)},{sc.md},{_fmt(sc.undirected_power)},"
            )
    return "\n".join(lines) + "\n"


def _summary_csv(report: ExperimentReport) -> str:
    spec = report.spec
    header = "model,d,T,reps,failures,power,fdr,md,undirected_power"
    row = (
        f"{spec.model},{spec.d},{_fmt(spec.T)},{spec.n_reps},{report.n_failures},"
        f"{_fmt(report.mean_power)},{_fmt(report.mean_fdr)},{_fmt(report.mean_md)},"
        f"{_fmt(report.mean_undirected_power)}"
    )
    return header + "\n" + row + "\n"


def _cmd_experiment(parser, args) -> int:
    os.makedirs(args.out, exist_ok=True)
    spec = ExperimentSpec(
        model="m1" if args.m1 else "m2", d=args.d, T=args.T, n_reps=args.reps, seed=args.seed
    )
    report = run_experiment(spec, _solver_config(args), jobs=args.threads)
    _write_text(os.path.join(args.out, "reps.csv"), _reps_csv(report))
    _write_text(os.path.join(args.out, "summary.csv"), _summary_csv(report))
    _write_metadata(
        args.out,
        "experiment",
        {
            "model": spec.model,
            "d": spec.d,
            "T": spec.T,
            "reps": spec.n_reps,
            "seed": spec.seed,
            "threads": args.threads,
            "start": "stationary",
            "grid_size": args.grid_size,
            "lambda_min_ratio": args.lambda_min_ratio,
            "max_iter": args.max_iter,
            "tol": args.tol,
            "bic_jump_count": "total jumps of the process",
        },
    )
    print(
        f"{spec.model} d={spec.d} T={spec.T}: power={report.mean_power:.3f} "
        f"fdr={report.mean_fdr:.3f} md={report.mean_md:.2f} "
        f"undirected={report.mean_undirected_power:.3f} failures={report.n_failures}"
    )
    return 0


def _cmd_theory(parser, args) -> int:
    if args.xi <= 1:
        parser.error("--xi must exceed 1")
    if not 0 < args.epsilon < 1:
        parser.error("--epsilon must lie in (0, 1)")
    try:
        with open(args.model, encoding="utf-8") as fh:
            model = model_from_json_dict(json.load(fh))
    except FileNotFoundError:
        print(f"error: model file not found: {args.model}", file=sys.stderr)
        return 1
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: invalid model file: {exc}", file=sys.stderr)
        return 1
    if model.beta is None:
        print(
            "error: unsupported model: the guarantee constants need the "
            "coefficient matrix ('beta') in the model file",
            file=sys.stderr,
        )
        return 1
    if model.d > MAX_AMALGAMATION_NODES:
        print(
            f"error: chain analysis enumerates all 2^d joint states and is "
            f"capped at d <= {MAX_AMALGAMATION_NODES}; got d = {model.d}",
            file=sys.stderr,
        )
        return 1
    os.makedirs(args.out, exist_ok=True)
    try:
        analysis = analyze_chain(model)
        report = theory_report_json(model, analysis, args.xi, args.epsilon, args.T)
    except (InvalidModelError, CapacityError, UndefinedBoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_json(os.path.join(args.out, "theory.json"), report)
    _write_metadata(
        args.out,
        "theory",
        {"model_file": args.model, "xi": args.xi, "epsilon": args.epsilon, "T": args.T},
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctbn-lasso",
        description="Structure learning for binary CTBNs via L1-penalized likelihood",
    )
    parser.add_argument("--version", action="version", version=f"ctbn-lasso {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="sample trajectories")
    _add_generator_flags(p_sim, with_model_file=True)
    p_sim.add_argument("--T", type=float, required=True, help="horizon")
    p_sim.add_argument("--reps", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--start", default="stationary", help='"stationary" or a 0/1 string')
    p_sim.add_argument("--out", required=True, help="output directory")

    p_fit = sub.add_parser("fit", help="recover edges from trajectory files")
    p_fit.add_argument("trajectories", nargs="+", help="trajectory JSON files")
    _add_solver_flags(p_fit)
    p_fit.add_argument("--dump-paths", action="store_true", help="write per-triple path CSVs")
    p_fit.add_argument("--dump-stats", action="store_true", help="write sufficient statistics")
    p_fit.add_argument("--out", required=True)

    p_exp = sub.add_parser("experiment", help="benchmark scenario with replications")
    _add_generator_flags(p_exp, with_model_file=False)
    p_exp.add_argument("--T", type=float, required=True)
    p_exp.add_argument("--reps", type=int, required=True)
    p_exp.add_argument("--seed", type=int, default=0)
    p_exp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    _add_solver_flags(p_exp)
    p_exp.add_argument("--out", required=True)

    p_th = sub.add_parser("theory", help="guarantee constants for a model file")
    p_th.add_argument("--model", required=True, help="model JSON file (with beta)")
    p_th.add_argument("--xi", type=float, default=2.0)
    p_th.add_argument("--epsilon", type=float, default=0.05)
    p_th.add_argument("--T", type=float, default=None)
    p_th.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        if args.reps < 1:
            parser.error("--reps must be at least 1")
        if args.T <= 0:
            parser.error("--T must be positive")
        start = args.start
        if start != "stationary":
            if not set(start) <= {"0", "1"}:
                parser.error('--start must be "stationary" or a 0/1 string')
            start = np.array([int(ch) for ch in start], dtype=np.int8)
            args.start = start
        try:
            return _cmd_simulate(parser, args)
        except (InvalidModelError, CapacityError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    if args.command == "fit":
        try:
            return _cmd_fit(parser, args)
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    if args.command == "experiment":
        if args.reps < 1:
            parser.error("--reps must be at least 1")
        if args.d is None:
            parser.error("--d is required")
        if args.m1 and args.d < 2:
            parser.error("--d must be at least 2 for --m1")
        if args.m2 and args.d < 5:
            parser.error("--d must be at least 5 for --m2")
        try:
            return _cmd_experiment(parser, args)
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    if args.command == "theory":
        return _cmd_theory(parser, args)
    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
