"""Command-line front end.

Subcommands:

* ``solve``        debias a rating file; writes bias.csv, ratings.csv,
                   trace.json, manifest.json
* ``eval``         compare the mean baseline and one solve per damping
                   factor against a ground-truth file; writes report.json,
                   per-bin CSV tables, per-method rating CSVs
* ``synth``        generate a planted instance; writes ratings.csv,
                   truth.csv, planted_bias.csv
* ``oracle-check`` cross-check the iterative solver against the dense
                   linear solution; writes oracle.json

Exit codes: 0 success, 2 stopped at max iterations without converging,
3 oracle check inapplicable because clamping fired, 1 any other error.
Identical command lines over identical inputs produce byte-identical CSV
outputs; every run ends by atomically writing a manifest that records how
to reproduce it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .evaluate import build_report
from .graph import RatingGraph, RatingScale
from .ingest import (
    MOVIELENS_FORMAT,
    DelimitedFormat,
    IngestError,
    ingest_ground_truth,
    ingest_ratings,
    write_ratings_csv,
    write_scores_csv,
)
from .oracle import build_dense, residual_linf, solve_linear
from .solver import SolverConfig, iterations_needed, solve
from .synth import generate_planted

__all__ = ["RunManifest", "build_parser", "main"]


@dataclass
class RunManifest:
    """Everything needed to rerun a command, plus how the run went.

    Rerunning with the recorded command, params, and inputs reproduces the
    same output files byte for byte; only the timing fields differ.
    """

    command: str
    outdir: str
    inputs: dict
    params: dict
    version: str = __version__
    outputs: list[str] = field(default_factory=list)
    results: dict = field(default_factory=dict)
    started_at: str = ""
    finished_at: str = ""
    wall_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "version": self.version,
            "outdir": self.outdir,
            "inputs": self.inputs,
            "params": self.params,
            "outputs": self.outputs,
            "results": self.results,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "wall_seconds": self.wall_seconds,
        }


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_json(path: Path, payload) -> None:
    # Write-then-rename so a crash never leaves a truncated file behind.
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=False)
        handle.write("\n")
    os.replace(tmp, path)


def _finish(manifest: RunManifest, outdir: Path, started: float) -> None:
    manifest.finished_at = _now_iso()
    manifest.wall_seconds = round(time.monotonic() - started, 6)
    manifest.outputs.append("manifest.json")
    _write_json(outdir / "manifest.json", manifest.to_dict())


def _parse_scale(text: str) -> RatingScale:
    lo, _, hi = text.partition(":")
    try:
        return RatingScale(float(lo), float(hi))
    except ValueError as exc:
        raise ValueError(f"bad scale {text!r}: {exc}") from None


def _parse_pair(text: str, what: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ValueError(f"bad {what} {text!r}; expected lo:hi")
    try:
        return float(lo), float(hi)
    except ValueError:
        raise ValueError(f"bad {what} {text!r}; expected lo:hi") from None


def _seed_bias(spec: str, graph: RatingGraph):
    if spec == "zeros":
        return None
    if spec.startswith("const:"):
        try:
            value = float(spec.removeprefix("const:"))
        except ValueError:
            raise ValueError(f"bad --seed-bias {spec!r}") from None
        return np.full(graph.num_users, value, dtype=np.float64)
    if spec.startswith("file:"):
        seeds = ingest_ground_truth(spec.removeprefix("file:"))
        unknown = seeds.unmatched(graph.user_ids)
        if unknown:
            raise ValueError(
                f"seed bias file names users absent from the graph: "
                f"{unknown[:5]}"
            )
        vector = np.zeros(graph.num_users, dtype=np.float64)
        for user_id, value in seeds.values.items():
            vector[graph.user_index[user_id]] = value
        return vector
    raise ValueError(
        f"bad --seed-bias {spec!r}; expected zeros, const:<c>, or file:<path>"
    )


def _alpha_overrides(path: str | None, graph: RatingGraph) -> dict[int, float] | None:
    if path is None:
        return None
    table = ingest_ground_truth(path)
    unknown = table.unmatched(graph.user_ids)
    if unknown:
        raise ValueError(
            f"alpha override file names users absent from the graph: "
            f"{unknown[:5]}"
        )
    return {graph.user_index[uid]: value for uid, value in table.values.items()}


def _ingest(args) -> RatingGraph:
    return ingest_ratings(
        args.ratings,
        fmt=DelimitedFormat(args.delimiter),
        scale=_parse_scale(args.scale),
        duplicate_policy=args.duplicates,
    )


def _solver_params(config: SolverConfig, extra: dict | None = None) -> dict:
    params = {
        "alpha": config.alpha,
        "epsilon": config.epsilon,
        "max_iterations": config.max_iterations,
    }
    if extra:
        params.update(extra)
    return params


def _trace_json(result) -> list[dict]:
    return [
        {
            "iter": s.iteration,
            "l1_bias_delta": s.l1_bias_delta,
            "linf_bias_delta": s.linf_bias_delta,
            "l1_rating_delta": s.l1_rating_delta,
        }
        for s in result.trace
    ]


def _alpha_tag(alpha: float) -> str:
    return f"{alpha:g}"


def cmd_solve(args) -> int:
    started = time.monotonic()
    started_at = _now_iso()
    # Validate parameters and read inputs before creating any output.
    base = SolverConfig(
        alpha=args.alpha, epsilon=args.epsilon, max_iterations=args.max_iters
    )
    graph = _ingest(args)
    overrides = _alpha_overrides(args.alpha_overrides, graph)
    config = SolverConfig(
        alpha=base.alpha,
        epsilon=base.epsilon,
        max_iterations=base.max_iterations,
        alpha_overrides=overrides,
    )
    initial = _seed_bias(args.seed_bias, graph)

    result = solve(graph, config, initial_bias=initial, threads=args.threads)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_scores_csv(
        outdir / "bias.csv",
        ("user_id", "bias"),
        zip(graph.user_ids, result.bias),
    )
    write_scores_csv(
        outdir / "ratings.csv",
        ("item_id", "true_rating"),
        zip(graph.item_ids, result.rating),
    )
    _write_json(outdir / "trace.json", _trace_json(result))

    code = 0 if result.converged else 2
    manifest = RunManifest(
        command="solve",
        outdir=str(outdir),
        inputs={
            "ratings": str(args.ratings),
            "alpha_overrides": args.alpha_overrides,
        },
        params=_solver_params(
            config,
            {
                "scale": args.scale,
                "delimiter": args.delimiter,
                "duplicates": args.duplicates,
                "seed_bias": args.seed_bias,
                "threads": args.threads,
            },
        ),
        outputs=["bias.csv", "ratings.csv", "trace.json"],
        results={
            "converged": result.converged,
            "iterations": result.iterations,
            "clamped": result.clamped,
            "users": graph.num_users,
            "items": graph.num_items,
            "edges": graph.num_edges,
            "exit_code": code,
        },
        started_at=started_at,
    )
    _finish(manifest, outdir, started)
    if not result.converged:
        print(
            f"did not converge within {config.max_iterations} iterations",
            file=sys.stderr,
        )
    return code


def cmd_eval(args) -> int:
    started = time.monotonic()
    started_at = _now_iso()
    alphas = args.alpha if args.alpha else [0.99]
    configs = [
        SolverConfig(alpha=a, epsilon=args.epsilon, max_iterations=args.max_iters)
        for a in alphas
    ]
    graph = _ingest(args)
    truth = ingest_ground_truth(
        args.truth, scale=_parse_scale(args.truth_scale)
    )

    methods = []
    outputs: list[str] = []
    convergence: dict[str, dict] = {}
    means = graph.item_means()
    methods.append(
        (build_report(graph, means, truth, label="mean"), "mean", means, None)
    )
    for config in configs:
        result = solve(graph, config, threads=args.threads)
        label = f"debias(α={_alpha_tag(config.alpha)})"
        report = build_report(
            graph, result.rating, truth, label=label, bias=result.bias
        )
        tag = f"alpha_{_alpha_tag(config.alpha)}"
        methods.append((report, tag, result.rating, result.bias))
        convergence[tag] = {
            "converged": result.converged,
            "iterations": result.iterations,
            "clamped": result.clamped,
        }

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for report, tag, rating, _bias in methods:
        ratings_name = f"ratings_{tag}.csv"
        write_scores_csv(
            outdir / ratings_name,
            ("item_id", "true_rating"),
            zip(graph.item_ids, rating),
        )
        bins_name = f"bins_{tag}.csv"
        with open(outdir / bins_name, "w", encoding="utf-8", newline="") as fh:
            fh.write("bin,metric,value\n")
            for metric, table in (
                ("bindev", report.bindev),
                ("relbindev", report.relbindev),
                ("mse", report.mse_per_bin),
                ("rank_error", report.rank_error_per_bin),
            ):
                for bin_index in sorted(table):
                    fh.write(f"{bin_index},{metric},{table[bin_index]:.9f}\n")
        outputs.extend([ratings_name, bins_name])

    payload = {
        "methods": [report.to_dict() for report, *_ in methods],
        "unmatched_truth_items": len(truth.unmatched(graph.item_ids)),
    }
    _write_json(outdir / "report.json", payload)
    outputs.append("report.json")

    manifest = RunManifest(
        command="eval",
        outdir=str(outdir),
        inputs={"ratings": str(args.ratings), "truth": str(args.truth)},
        params={
            "alphas": alphas,
            "epsilon": args.epsilon,
            "max_iterations": [c.max_iterations for c in configs],
            "scale": args.scale,
            "truth_scale": args.truth_scale,
            "delimiter": args.delimiter,
            "duplicates": args.duplicates,
            "threads": args.threads,
        },
        outputs=outputs,
        results={"solves": convergence, "common_items": methods[0][0].common_items},
        started_at=started_at,
    )
    _finish(manifest, outdir, started)
    return 0


def cmd_synth(args) -> int:
    started = time.monotonic()
    started_at = _now_iso()
    instance = generate_planted(
        args.users,
        args.items,
        args.density,
        bias_range=_parse_pair(args.bias_range, "bias range"),
        quality_range=_parse_pair(args.quality_range, "quality range"),
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_ratings_csv(instance.graph, outdir / "ratings.csv")
    write_scores_csv(
        outdir / "truth.csv",
        ("item_id", "true_rating"),
        zip(instance.graph.item_ids, instance.true_rating),
    )
    write_scores_csv(
        outdir / "planted_bias.csv",
        ("user_id", "bias"),
        zip(instance.graph.user_ids, instance.true_bias),
    )
    manifest = RunManifest(
        command="synth",
        outdir=str(outdir),
        inputs={},
        params={
            "users": args.users,
            "items": args.items,
            "density": args.density,
            "bias_range": args.bias_range,
            "quality_range": args.quality_range,
            "noise_sigma": args.noise_sigma,
            "seed": args.seed,
        },
        outputs=["ratings.csv", "truth.csv", "planted_bias.csv"],
        results={"edges": instance.graph.num_edges},
        started_at=started_at,
    )
    _finish(manifest, outdir, started)
    return 0


def cmd_oracle_check(args) -> int:
    started = time.monotonic()
    started_at = _now_iso()
    if not args.tolerance > 0.0:
        raise ValueError(f"tolerance must be positive, got {args.tolerance}")
    graph = _ingest(args)
    system = build_dense(graph, args.alpha)

    # Run the iterative side well past the comparison tolerance: stopping at
    # L1 delta eps leaves at most alpha/(1-alpha)*eps distance to the fixed
    # point, so eps = tol*(1-alpha)/10 keeps iteration error negligible.
    epsilon = max(args.tolerance * (1.0 - args.alpha) / 10.0, 1e-15)
    config = SolverConfig(alpha=args.alpha, epsilon=epsilon)
    result = solve(graph, config, threads=args.threads)

    status = "ok"
    code = 0
    max_bias_diff = None
    max_rating_diff = None
    residual = None
    if result.clamped:
        status, code = "clamped", 3
    elif not result.converged:
        status, code = "non-converged", 2
    else:
        oracle_bias, oracle_rating = solve_linear(system)
        residual = residual_linf(system, oracle_bias, oracle_rating)
        max_bias_diff = float(np.max(np.abs(result.bias - oracle_bias)))
        max_rating_diff = float(np.max(np.abs(result.rating - oracle_rating)))
        if max(max_bias_diff, max_rating_diff) > args.tolerance:
            status, code = "mismatch", 1

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(
        outdir / "oracle.json",
        {
            "status": status,
            "alpha": args.alpha,
            "tolerance": args.tolerance,
            "max_bias_diff": max_bias_diff,
            "max_rating_diff": max_rating_diff,
            "oracle_residual_linf": residual,
            "iterations": result.iterations,
            "clamped": result.clamped,
        },
    )
    manifest = RunManifest(
        command="oracle-check",
        outdir=str(outdir),
        inputs={"ratings": str(args.ratings)},
        params={
            "alpha": args.alpha,
            "tolerance": args.tolerance,
            "epsilon": epsilon,
            "scale": args.scale,
            "delimiter": args.delimiter,
            "duplicates": args.duplicates,
            "threads": args.threads,
        },
        outputs=["oracle.json"],
        results={"status": status, "exit_code": code},
        started_at=started_at,
    )
    _finish(manifest, outdir, started)
    if status != "ok":
        print(f"oracle check: {status}", file=sys.stderr)
    return code


class _Parser(argparse.ArgumentParser):
    # Usage errors exit 1; the default of 2 would collide with the
    # "stopped without converging" status.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ratings", required=True, help="rating file to ingest")
    parser.add_argument(
        "--scale",
        default="1:5",
        metavar="LO:HI",
        help="raw rating scale mapped linearly onto [0,1] (default 1:5; "
        "ignored for canonical user_id,item_id,weight CSV input)",
    )
    parser.add_argument(
        "--delimiter",
        default=MOVIELENS_FORMAT.delimiter,
        help='field separator for raw rating files (default "::")',
    )
    parser.add_argument(
        "--duplicates",
        choices=("strict", "keep_first"),
        default="strict",
        help="how to treat repeated (user,item) ratings (default strict)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="solver threads; any value gives bit-identical results",
    )
    parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="truerating",
        description="Remove per-user bias from bipartite rating graphs.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute per-user bias and true ratings")
    _add_input_flags(p)
    p.add_argument("--alpha", type=float, default=0.99, help="damping factor")
    p.add_argument(
        "--alpha-overrides",
        metavar="FILE",
        help="CSV of user_id,alpha rows; each value in [0, alpha]",
    )
    p.add_argument("--epsilon", type=float, default=1e-6,
                   help="L1 stopping threshold on bias change")
    p.add_argument(
        "--max-iters",
        type=int,
        default=None,
        help="iteration cap (default: iterations_needed(alpha, epsilon))",
    )
    p.add_argument(
        "--seed-bias",
        default="zeros",
        help="initial bias: zeros, const:<c>, or file:<user_id,bias CSV>",
    )
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser(
        "eval", help="score the mean baseline and solver against ground truth"
    )
    _add_input_flags(p)
    p.add_argument("--truth", required=True, help="item_id,score CSV")
    p.add_argument(
        "--truth-scale",
        default="0:1",
        metavar="LO:HI",
        help="raw scale of truth scores (default 0:1)",
    )
    p.add_argument(
        "--alpha",
        type=float,
        action="append",
        help="damping factor; repeat for several methods (default 0.99)",
    )
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a planted synthetic instance")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--items", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--bias-range", default="-0.25:0.25", metavar="LO:HI")
    p.add_argument("--quality-range", default="0.25:0.75", metavar="LO:HI")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser(
        "oracle-check",
        help="compare the iterative solve against the dense linear solution",
    )
    _add_input_flags(p)
    p.add_argument("--alpha", type=float, default=0.99)
    p.add_argument("--tolerance", type=float, default=1e-8,
                   help="max allowed L-infinity difference")
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    try:
        return args.func(args)
    except (IngestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
