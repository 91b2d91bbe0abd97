"""Command-line front end.

Exit codes: 0 on success, 1 when a run or artifact operation fails, 2 for
unusable arguments or configurations (argparse uses 2 for usage errors, and
``validate-config`` mirrors that for semantic problems so scripts can tell
"bad request" from "failed while working").
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import exports, metrics, report, runner
from .checkpointing import CheckpointError, load_tree
from .config import (
    ConfigError,
    apply_overrides,
    config_from_dict,
    load_config_file,
    validate_study_config,
)
from .world import world_from_tree

__all__ = ["main"]

OUT_ENV_VAR = "PRODTRADE_OUT"


def _parse_seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def _config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="JSON config file to start from")
    parser.add_argument("--study", choices=["individuation", "regularity", "generational"])
    parser.add_argument("--size", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--steps", type=int, dest="steps_per_epoch")
    parser.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    parser.add_argument("--events", action="store_true", help="keep the per-action event log")
    parser.add_argument(
        "--training-stats", action="store_true", help="keep per-model training statistics"
    )
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="PATH=VALUE",
        dest="overrides",
        help="dotted config override, e.g. replacement.waves=3",
    )


def _build_config_dict(args) -> dict:
    data = load_config_file(args.config) if args.config else {}
    for key in ("study", "size", "epochs", "steps_per_epoch", "checkpoint_every"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if args.events:
        data["keep_event_log"] = True
    if args.training_stats:
        data["training_stats"] = True
    return apply_overrides(data, args.overrides)


def _run_one(payload: tuple[dict, int, str, bool, bool]) -> dict:
    data, seed, out_root, force, progress = payload
    config = config_from_dict(data)
    return runner.run_study(config, seed, out_root, force=force, progress=progress)


def _cmd_run(args) -> int:
    data = _build_config_dict(args)
    config_from_dict(data)  # fail fast before any directory work
    seeds = _parse_seeds(args.seeds)
    out_root = args.out or os.environ.get(OUT_ENV_VAR) or "runs"
    progress = not args.quiet and args.jobs == 1
    jobs = [(data, seed, out_root, args.force, progress) for seed in seeds]
    if args.jobs == 1:
        summaries = [_run_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_run_one, jobs))
    for summary in summaries:
        print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_resume(args) -> int:
    summary = runner.resume_run(args.run_dir, total_epochs=args.epochs, progress=not args.quiet)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_probe(args) -> int:
    checkpoint = Path(args.run_dir) / runner.CHECKPOINT_FILE
    if not checkpoint.exists():
        raise runner.RunError(f"{args.run_dir} has no {runner.CHECKPOINT_FILE}")
    tree = load_tree(checkpoint)
    config = config_from_dict(tree["config"])
    world = world_from_tree(tree, config)
    rng = None
    if args.sample:
        rng = np.random.Generator(np.random.PCG64(args.sample_seed))
    reports = metrics.probe_market(
        world.market.actor, world.population.probe_sets, sample=args.sample, rng=rng
    )
    payload = {
        "run_id": runner.run_dir_name(config, world.seed),
        "epoch": world.epoch,
        "sampled": bool(args.sample),
        "probes": [
            {
                "group": "all" if r.group is None else r.group.color,
                "n": r.n,
                "frac_wood_pred": r.frac_wood_pred,
                "expected_skill_accuracy": r.expected_skill_accuracy,
                "skill_match": r.skill_match,
                "stereotype_match": r.stereotype_match,
            }
            for r in reports
        ],
    }
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_export(args) -> int:
    payload, series = runner.load_run_series(args.run_dir)
    if args.game == "market":
        data = exports.export_market_game(payload, series, args.timepoint)
    else:
        data = exports.export_agent_game(payload, series, args.timepoint)
    out = args.out or str(Path(args.run_dir) / f"export_{args.game}_{args.timepoint}.json")
    exports.write_export(data, out)
    print(out)
    return 0


def _cmd_validate_config(args) -> int:
    data = _build_config_dict(args)
    try:
        config = config_from_dict(data)
    except ConfigError as err:
        print(f"invalid: {err}", file=sys.stderr)
        return 2
    problems = validate_study_config(config)
    if problems:
        for problem in problems:
            print(f"invalid: {problem}", file=sys.stderr)
        return 2
    print("ok")
    return 0


def _cmd_report(args) -> int:
    paths = report.render_report(args.run_dir, args.out)
    for path in paths:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prodtrade",
        description="Produce-and-trade economies with learning agents and an identity-reading market",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one study across one or more seeds")
    _config_flags(p)
    p.add_argument("--seeds", default="0", help="e.g. 0 or 1..5 or 0,2,4")
    p.add_argument("--out", help=f"output root (default ${OUT_ENV_VAR} or ./runs)")
    p.add_argument("--force", action="store_true", help="overwrite existing run directories")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("resume", help="continue an interrupted run, or extend a finished one")
    p.add_argument("run_dir")
    p.add_argument("--epochs", type=int, help="new total epoch count (single-phase studies)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_resume)

    p = sub.add_parser("probe", help="evaluate held-out identity codes against a checkpoint")
    p.add_argument("run_dir")
    p.add_argument(
        "--sample",
        action="store_true",
        help="draw predictions from the action distribution instead of argmax",
    )
    p.add_argument("--sample-seed", type=int, default=0, help="rng seed for --sample")
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("export", help="write a browser-game snapshot from a finished run")
    p.add_argument("run_dir")
    p.add_argument("--game", choices=["market", "agent"], required=True)
    p.add_argument("--timepoint", required=True, help="a recorded boundary, e.g. initial or wave5")
    p.add_argument("--out", help="output file (default inside the run directory)")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("validate-config", help="check a configuration without running it")
    _config_flags(p)
    p.set_defaults(func=_cmd_validate_config)

    p = sub.add_parser("report", help="render figures from a run's metrics table")
    p.add_argument("run_dir")
    p.add_argument("--out", help="directory for figures (default: the run directory)")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (runner.RunError, exports.ExportError, CheckpointError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
