"""Command-line entry point: run experiments, infer parameters, inspect results.

Subcommands:
  run       play a configured experiment, write traces.csv and summary.csv
  infer     extract per-query (theta, kappa) configs from a click log
  report    print the final-regret table of a finished run
  diagnose  dump a sampler chain trace and its acceptance rates

Errors exit nonzero with a single greppable line on stderr:
"pbm-lab: <config-error|input-error|runtime-error>: <reason>".
"""

from __future__ import annotations

import argparse
import csv
import importlib.resources
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from .core import ClickStats, make_rng
from .experiment import (ExperimentConfig, aggregate_traces, load_traces,
                         persist_traces, run_experiment, timing_report,
                         write_summary)
from .inference import LogParseError, filter_click_logs, infer_params_per_query, parse_click_log
from .sampler import MhConfig, mh_sample

__all__ = ["main"]

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class CliError(Exception):
    def __init__(self, category: str, message: str, code: int):
        super().__init__(message)
        self.category = category
        self.code = code


def _config_error(message: str) -> CliError:
    return CliError("config-error", message, EXIT_CONFIG)


def _input_error(message: str) -> CliError:
    return CliError("input-error", message, EXIT_RUNTIME)


def resolve_config_path(name: str) -> Path:
    """Find a config by filesystem path first, then among the bundled ones."""
    path = Path(name)
    if path.exists():
        return path
    bundled = importlib.resources.files("pbm_lab").joinpath("configs", name)
    if bundled.is_file():
        return Path(str(bundled))
    raise _config_error(f"config not found: {name} (not a file, not a bundled config)")


def parse_set_expr(expr: str) -> tuple[list, object]:
    """Split one --set KEY=VALUE into a key path and a JSON-decoded value."""
    key, sep, raw = expr.partition("=")
    if not sep or not key:
        raise _config_error(f"--set expects KEY=VALUE, got {expr!r}")
    path: list = []
    for part in key.split("."):
        match = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_-]*)((?:\[\d+\])*)", part)
        if not match:
            raise _config_error(f"bad --set key {key!r}")
        path.append(match.group(1))
        path.extend(int(idx) for idx in re.findall(r"\[(\d+)\]", match.group(2)))
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings are allowed unquoted
    return path, value


def apply_override(data, path: list, value, expr: str) -> None:
    target = data
    for step in path[:-1]:
        try:
            target = target[step]
        except (KeyError, IndexError, TypeError):
            raise _config_error(f"--set {expr!r}: no such entry {step!r}") from None
    last = path[-1]
    if isinstance(target, list):
        if not isinstance(last, int) or not (0 <= last < len(target)):
            raise _config_error(f"--set {expr!r}: index {last!r} out of range")
    elif not isinstance(target, dict):
        raise _config_error(f"--set {expr!r}: cannot descend into {type(target).__name__}")
    target[last] = value


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise _config_error(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise _config_error(f"cannot read {path}: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("PBM_LAB_OUT") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _overrides(args) -> list:
    return [parse_set_expr(expr) + (expr,) for expr in (args.set or [])]


def cmd_run(args) -> int:
    raw = _load_json(resolve_config_path(args.config))
    for path, value, expr in _overrides(args):
        apply_override(raw, path, value, expr)
    if args.seed is not None:
        raw["base_seed"] = args.seed
    try:
        config = ExperimentConfig.from_dict(raw)
    except ValueError as exc:
        raise _config_error(f"{args.config}: {exc}") from exc

    result = run_experiment(config, parallelism=args.parallelism)
    out = _out_dir(args)
    persist_traces(result.traces, out / "traces.csv")
    summary = aggregate_traces(result.traces)
    write_summary(summary, out / "summary.csv")

    if not args.quiet:
        print(f"wrote {out / 'traces.csv'} and {out / 'summary.csv'}")
        final_t = config.checkpoints[-1]
        print(f"{'policy':<32} {'mean regret @T':>16} {'ms/trial':>10}")
        timing = {row["policy"]: row for row in timing_report(result)}
        for row in summary:
            if row["t"] == final_t:
                ms = timing[row["policy"]]["ms_per_trial"]
                print(f"{row['policy']:<32} {row['mean']:>16.2f} {ms:>10.3f}")
    return EXIT_OK


def cmd_infer(args) -> int:
    log_path = Path(args.config)
    if not log_path.exists():
        raise _config_error(f"log file not found: {log_path}")
    options = {"min_displays": 1000, "min_ads": 5, "positions": 3}
    for path, value, expr in _overrides(args):
        if len(path) != 1 or path[0] not in options:
            raise _config_error(f"--set {expr!r}: infer accepts {sorted(options)}")
        options[path[0]] = int(value)

    try:
        matrices = filter_click_logs(parse_click_log(log_path),
                                     min_displays=options["min_displays"],
                                     min_ads=options["min_ads"],
                                     n_positions=options["positions"])
    except LogParseError as exc:
        raise _config_error(f"{log_path}: {exc}") from exc

    if not matrices:
        print("warning: no query passed the filtering thresholds", file=sys.stderr)
        return EXIT_OK

    out = _out_dir(args)
    inferred = infer_params_per_query(matrices)
    summary_path = out / "inference_summary.csv"
    with open(summary_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        kappa_cols = [f"kappa{pos + 1}" for pos in range(options["positions"])]
        writer.writerow(["query", "n_ads", "theta_min", "theta_max", *kappa_cols])
        for query, (params, ads) in inferred.items():
            params.save(out / f"params_query_{query}.json")
            writer.writerow([query, len(ads),
                             f"{params.theta.min():.3f}", f"{params.theta.max():.3f}",
                             *[f"{k:.3f}" for k in params.kappa]])
    if not args.quiet:
        print(f"{len(inferred)} queries kept; params and {summary_path.name} in {out}")
        print(f"{'query':<12} {'n_ads':>5} {'theta_min':>10} {'theta_max':>10}  kappa")
        for query, (params, ads) in inferred.items():
            kappas = ", ".join(f"{k:.3f}" for k in params.kappa)
            print(f"{query:<12} {len(ads):>5} {params.theta.min():>10.3f} "
                  f"{params.theta.max():>10.3f}  [{kappas}]")
    return EXIT_OK


def cmd_report(args) -> int:
    trace_path = Path(args.config) if args.config else _out_dir(args) / "traces.csv"
    if not trace_path.exists():
        raise _input_error(f"traces file not found: {trace_path}")
    try:
        traces = load_traces(trace_path)
    except ValueError as exc:
        raise _input_error(str(exc)) from exc
    if not traces:
        raise _input_error(f"{trace_path} contains no traces")

    rows = aggregate_traces(traces)
    final_t = max(row["t"] for row in rows)
    runs_per_policy: dict = {}
    for trace in traces:
        runs_per_policy[trace.policy] = runs_per_policy.get(trace.policy, 0) + 1
    print(f"final cumulative regret at t={final_t}")
    print(f"{'policy':<32} {'runs':>5} {'mean':>12} {'std':>12} {'max':>12}")
    for row in rows:
        if row["t"] == final_t:
            print(f"{row['policy']:<32} {runs_per_policy[row['policy']]:>5} "
                  f"{row['mean']:>12.2f} {row['std']:>12.2f} {row['max']:>12.2f}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    options = {"n_items": 10, "n_positions": 5, "c": 100.0, "t": 1, "sweeps": 1000}
    for path, value, expr in _overrides(args):
        if len(path) != 1 or path[0] not in options:
            raise _config_error(f"--set {expr!r}: diagnose accepts {sorted(options)}")
        options[path[0]] = value

    if args.config:
        snapshot = _load_json(Path(args.config))
        try:
            stats = ClickStats.from_counts(np.asarray(snapshot["S"]), np.asarray(snapshot["F"]))
        except (KeyError, ValueError) as exc:
            raise _config_error(f"{args.config}: bad stats snapshot: {exc}") from exc
    else:
        stats = ClickStats(int(options["n_items"]), int(options["n_positions"]))

    config = MhConfig(c=float(options["c"]), m=int(options["sweeps"]), warm_start=False)
    record: list = []
    rng = make_rng(args.seed if args.seed is not None else 0)
    mh_sample(stats, config, int(options["t"]), rng, record=record)

    out = _out_dir(args)
    chain_path = out / "chain.csv"
    with open(chain_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "coordinate", "value", "accepted"])
        for step in record:
            writer.writerow([step.iteration, step.coordinate,
                             f"{step.value:.17g}", int(step.accepted)])

    accepted: dict = {}
    for step in record:
        hits, total = accepted.get(step.coordinate, (0, 0))
        accepted[step.coordinate] = (hits + int(step.accepted), total + 1)
    overall = sum(h for h, _ in accepted.values()) / max(len(record), 1)
    if not args.quiet:
        print(f"wrote {chain_path} ({len(record)} steps)")
        print(f"overall acceptance rate: {overall:.3f}")
        for coord in sorted(accepted, key=lambda c: (c.split('[')[0], c)):
            hits, total = accepted[coord]
            print(f"  {coord:<12} {hits / total:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbm-lab",
        description="Position-based-model bandit laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config: bool):
        p.add_argument("--config", required=needs_config,
                       help="config file (bundled name or path); the click-log "
                            "path for infer, a stats snapshot for diagnose")
        p.add_argument("--out", help="output directory (default: $PBM_LAB_OUT or .)")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--parallelism", type=int, default=1,
                       help="worker processes for run replications")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry, e.g. policies[0].c=1000")
        p.add_argument("--quiet", action="store_true", help="suppress tables")

    p_run = sub.add_parser("run", help="run a replicated experiment")
    add_common(p_run, needs_config=True)
    p_run.set_defaults(func=cmd_run)

    p_infer = sub.add_parser("infer", help="extract per-query params from a click log")
    add_common(p_infer, needs_config=True)
    p_infer.set_defaults(func=cmd_infer)

    p_report = sub.add_parser("report", help="summarize a finished run")
    add_common(p_report, needs_config=False)
    p_report.set_defaults(func=cmd_report)

    p_diag = sub.add_parser("diagnose", help="dump a sampler chain trace")
    add_common(p_diag, needs_config=False)
    p_diag.set_defaults(func=cmd_diagnose)
    return parser


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"pbm-lab: {exc.category}: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        print(f"pbm-lab: runtime-error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
