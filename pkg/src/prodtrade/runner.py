"""Run orchestration: phase plans, artifact files, checkpoints, resume.

A run directory is self-describing.  ``config.json`` freezes the exact
configuration and seed, ``manifest.csv`` lists every roster entry ever
minted, ``metrics.csv`` is the tidy per-epoch table, ``series.bin`` holds the
raw per-slot counters the table is derived from, ``checkpoint.bin`` restores
the full world (models, optimizer moments, generator states), and
``summary.json`` reports trailing-window aggregates.

Resuming loads the checkpoint, replays nothing, and continues the epoch loop
with the exact generator states the interrupted run would have used, so an
interrupted-then-resumed run produces byte-identical metrics to an unbroken
one.  For single-phase studies ``resume`` can also extend a completed run to
a larger total epoch count.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import shutil
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import metrics
from .checkpointing import load_tree, save_tree
from .config import StudyConfig, config_from_dict, config_to_dict, scheme_for_study
from .population import GroupLabel, write_manifest
from .world import EpochLog, WorldState, world_from_tree, world_to_tree

__all__ = [
    "Phase",
    "RunError",
    "phase_plan",
    "plan_epochs",
    "run_study",
    "resume_run",
    "run_dir_name",
    "load_run_series",
]

CHECKPOINT_FILE = "checkpoint.bin"
SERIES_FILE = "series.bin"
CONFIG_FILE = "config.json"
METRICS_FILE = "metrics.csv"
MANIFEST_FILE = "manifest.csv"
SUMMARY_FILE = "summary.json"
EVENTS_FILE = "events.csv"
TRAINING_STATS_FILE = "training_stats.csv"

EVENT_COLUMNS = [
    "epoch", "step", "agent_id", "action", "success",
    "agent_reward", "market_reward", "wood_delta", "stone_delta", "prediction",
]
TRAINING_STAT_COLUMNS = [
    "epoch", "model_id", "transitions", "clip_term", "value_term", "entropy", "mean_ratio",
]


class RunError(RuntimeError):
    """Raised for unusable run directories or inconsistent artifacts."""


@dataclasses.dataclass(frozen=True)
class Phase:
    """A block of contiguous epochs, with optional turnover before it."""

    name: str
    epochs: int
    wave_before: Optional[int] = None
    market_swap_before: bool = False
    boundary_after: Optional[str] = None


def phase_plan(config: StudyConfig) -> list[Phase]:
    """The full epoch schedule of a run, derived from its configuration."""
    if config.study in ("individuation", "regularity"):
        return [Phase("training", config.epochs, boundary_after="final")]
    schedule = config.replacement
    plan = [Phase("founding", config.epochs, boundary_after="initial")]
    for wave in range(1, schedule.waves + 1):
        plan.append(
            Phase(
                f"wave{wave}",
                schedule.epochs_between_waves,
                wave_before=wave,
                boundary_after=f"wave{wave}",
            )
        )
    if schedule.replace_market_after and schedule.post_market_epochs > 0:
        plan.append(
            Phase(
                "post_market",
                schedule.post_market_epochs,
                market_swap_before=True,
                boundary_after="final",
            )
        )
    return plan


def plan_epochs(plan: list[Phase]) -> int:
    return sum(p.epochs for p in plan)


def run_dir_name(config: StudyConfig, seed: int) -> str:
    return f"{config.study}_s{config.size}_seed{seed}"


# -- the raw per-epoch series ------------------------------------------------------


class SeriesAccumulator:
    """Everything measured during a run, slot-aligned and append-only.

    The tidy metrics table is a pure function of this series plus the roster
    metadata, so it can be regenerated (or extended after a resume) without
    touching model state.
    """

    def __init__(self, probe_groups: list[int], probe_mix: list[float], probe_n: list[int]):
        self.probe_groups = probe_groups
        self.probe_mix = probe_mix
        self.probe_n = probe_n
        self.occupant: list[np.ndarray] = []
        self.attempts: list[np.ndarray] = []
        self.pred_match: list[np.ndarray] = []
        self.coins: list[np.ndarray] = []
        self.market_events: list[int] = []
        self.market_reward: list[float] = []
        self.probe_frac_wood: list[np.ndarray] = []
        self.probe_expected: list[np.ndarray] = []
        self.probe_skill_match: list[np.ndarray] = []
        self.probe_stereotype: list[np.ndarray] = []

    @classmethod
    def start(cls, world: WorldState) -> "SeriesAccumulator":
        sets = world.population.probe_sets
        return cls(
            [-1 if ps.group is None else int(ps.group) for ps in sets],
            [ps.truth_mix for ps in sets],
            [len(ps.probes) for ps in sets],
        )

    def __len__(self) -> int:
        return len(self.attempts)

    def append_epoch(
        self, world: WorldState, log: EpochLog, reports: list[metrics.ProbeReport]
    ) -> None:
        ordinals = np.array([int(r.agent_id[1:]) for r in world.slots], dtype=np.int32)
        self.occupant.append(ordinals)
        self.attempts.append(log.attempts.astype(np.int32))
        self.pred_match.append(log.pred_skill_match.astype(np.int32))
        self.coins.append(log.coins.astype(np.float64))
        self.market_events.append(int(log.market_events))
        self.market_reward.append(float(log.market_reward))
        self.probe_frac_wood.append(np.array([r.frac_wood_pred for r in reports]))
        self.probe_expected.append(np.array([r.expected_skill_accuracy for r in reports]))
        self.probe_skill_match.append(np.array([r.skill_match for r in reports]))
        self.probe_stereotype.append(
            np.array(
                [np.nan if r.stereotype_match is None else r.stereotype_match for r in reports]
            )
        )

    def to_tree(self, world: WorldState) -> dict:
        records = world.population.records
        return {
            "kind": "series",
            "epochs": len(self),
            "boundaries": dict(world.boundaries),
            "record_ids": [r.agent_id for r in records],
            "record_group": np.array(
                [-1 if r.group is None else int(r.group) for r in records], dtype=np.int64
            ),
            "record_skill": np.array([int(r.skill) for r in records], dtype=np.int64),
            "record_wave": np.array([r.wave for r in records], dtype=np.int64),
            "probe_groups": np.array(self.probe_groups, dtype=np.int64),
            "probe_mix": np.array(self.probe_mix, dtype=np.float64),
            "probe_n": np.array(self.probe_n, dtype=np.int64),
            "occupant": np.stack(self.occupant),
            "attempts": np.stack(self.attempts),
            "pred_match": np.stack(self.pred_match),
            "coins": np.stack(self.coins),
            "market_events": np.array(self.market_events, dtype=np.int64),
            "market_reward": np.array(self.market_reward, dtype=np.float64),
            "probe_frac_wood": np.stack(self.probe_frac_wood),
            "probe_expected": np.stack(self.probe_expected),
            "probe_skill_match": np.stack(self.probe_skill_match),
            "probe_stereotype": np.stack(self.probe_stereotype),
        }

    @classmethod
    def from_tree(cls, tree: dict) -> "SeriesAccumulator":
        acc = cls(
            [int(g) for g in tree["probe_groups"]],
            [float(m) for m in tree["probe_mix"]],
            [int(n) for n in tree["probe_n"]],
        )
        for key, target in [
            ("occupant", acc.occupant),
            ("attempts", acc.attempts),
            ("pred_match", acc.pred_match),
            ("coins", acc.coins),
            ("probe_frac_wood", acc.probe_frac_wood),
            ("probe_expected", acc.probe_expected),
            ("probe_skill_match", acc.probe_skill_match),
            ("probe_stereotype", acc.probe_stereotype),
        ]:
            target.extend(tree[key])
        acc.market_events.extend(int(v) for v in tree["market_events"])
        acc.market_reward.extend(float(v) for v in tree["market_reward"])
        return acc

    # -- derived tables -----------------------------------------------------------

    def probe_reports_at(self, epoch: int) -> list[metrics.ProbeReport]:
        reports = []
        for k, group_value in enumerate(self.probe_groups):
            group = None if group_value == -1 else GroupLabel(group_value)
            stereotype = float(self.probe_stereotype[epoch][k])
            reports.append(
                metrics.ProbeReport(
                    group,
                    self.probe_n[k],
                    float(self.probe_frac_wood[epoch][k]),
                    float(self.probe_expected[epoch][k]),
                    float(self.probe_skill_match[epoch][k]),
                    None if np.isnan(stereotype) else stereotype,
                )
            )
        return reports

    def rows_by_epoch(self, world: WorldState, config: StudyConfig) -> list[list[metrics.MeasureRow]]:
        records = world.population.records
        group_of = np.array(
            [-1 if r.group is None else int(r.group) for r in records], dtype=np.int64
        )
        skill_of = np.array([int(r.skill) for r in records], dtype=np.int64)
        wave_of = np.array([r.wave for r in records], dtype=np.int64)
        scheme = scheme_for_study(config.study)
        with_replacement = config.study == "generational"
        out = []
        for e in range(len(self)):
            occ = self.occupant[e]
            out.append(
                metrics.epoch_rows(
                    self.attempts[e],
                    self.pred_match[e],
                    self.coins[e],
                    group_of[occ],
                    skill_of[occ],
                    wave_of[occ],
                    scheme,
                    with_replacement,
                    self.probe_reports_at(e),
                    self.market_events[e],
                    self.market_reward[e],
                )
            )
        return out


# -- artifacts ---------------------------------------------------------------------


def _write_config_file(run_dir: Path, config: StudyConfig, seed: int, status: str) -> None:
    payload = {
        "schema_version": 1,
        "run_id": run_dir_name(config, seed),
        "seed": seed,
        "status": status,
        "config": config_to_dict(config),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    (run_dir / CONFIG_FILE).write_text(text + "\n")


def _append_events(path: Path, log: EpochLog) -> None:
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(EVENT_COLUMNS)
        for ev in log.events or []:
            writer.writerow(
                [
                    ev.epoch, ev.step, ev.agent_id, int(ev.kind), int(ev.success),
                    repr(float(ev.agent_reward)), repr(float(ev.market_reward)),
                    ev.wood_delta, ev.stone_delta,
                    "" if ev.prediction is None else int(ev.prediction),
                ]
            )


def _append_training_stats(path: Path, log: EpochLog) -> None:
    new = not path.exists()
    rows = []
    for agent_id, stats in zip(log.agent_ids, log.agent_train_stats or []):
        rows.append((agent_id, stats))
    if log.market_train_stats is not None:
        rows.append(("market", log.market_train_stats))
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(TRAINING_STAT_COLUMNS)
        for model_id, s in rows:
            writer.writerow(
                [
                    log.epoch, model_id, s.steps,
                    repr(float(s.clip_term)), repr(float(s.value_term)),
                    repr(float(s.entropy)), repr(float(s.mean_ratio)),
                ]
            )


def _save_state(run_dir: Path, world: WorldState, series: SeriesAccumulator,
                config: StudyConfig) -> None:
    save_tree(run_dir / CHECKPOINT_FILE, world_to_tree(world, config_to_dict(config)))
    save_tree(run_dir / SERIES_FILE, series.to_tree(world))


def _window_summary(rows_by_epoch: list[list[metrics.MeasureRow]], window: int) -> dict:
    """Denominator-weighted aggregates over the trailing ``window`` epochs."""
    tail = rows_by_epoch[-window:]
    sums: dict[str, list[float]] = {}
    for rows in tail:
        for row in rows:
            key = f"{row.group}/{row.role}/{row.measure}"
            acc = sums.setdefault(key, [0.0, 0])
            if row.value is not None and row.n > 0:
                acc[0] += row.value * row.n
                acc[1] += row.n
    out = {}
    for key in sorted(sums):
        total, n = sums[key]
        out[key] = {"value": (total / n) if n else None, "n": int(n)}
    return out


def _finalize(run_dir: Path, world: WorldState, series: SeriesAccumulator,
              config: StudyConfig, seed: int) -> dict:
    run_id = run_dir_name(config, seed)
    _save_state(run_dir, world, series, config)
    write_manifest(world.population.records, run_dir / MANIFEST_FILE)
    rows_by_epoch = series.rows_by_epoch(world, config)
    metrics.write_tidy_csv(
        run_dir / METRICS_FILE, run_id, config.study, scheme_for_study(config.study),
        config.size, seed, rows_by_epoch,
    )
    summary = {
        "schema_version": 1,
        "run_id": run_id,
        "study": config.study,
        "scheme": scheme_for_study(config.study),
        "size": config.size,
        "seed": seed,
        "epochs_completed": world.epoch,
        "boundaries": dict(world.boundaries),
        "waves_applied": world.wave,
        "market_generation": world.market_generation,
        "window": config.eval_window,
        "final": _window_summary(rows_by_epoch, config.eval_window),
    }
    text = json.dumps(summary, indent=2, sort_keys=True)
    (run_dir / SUMMARY_FILE).write_text(text + "\n")
    _write_config_file(run_dir, config, seed, status="complete")
    return summary


# -- the epoch loop ----------------------------------------------------------------


def _execute(
    run_dir: Path,
    world: WorldState,
    series: SeriesAccumulator,
    config: StudyConfig,
    seed: int,
    progress: bool,
) -> dict:
    plan = phase_plan(config)
    total = plan_epochs(plan)
    run_id = run_dir_name(config, seed)
    stride = max(1, total // 20)
    events_path = run_dir / EVENTS_FILE
    stats_path = run_dir / TRAINING_STATS_FILE

    def note(text: str) -> None:
        if progress:
            print(f"[{run_id}] {text}", file=sys.stderr, flush=True)

    cursor = 0
    for phase in plan:
        phase_start, phase_end = cursor, cursor + phase.epochs
        cursor = phase_end
        if world.epoch >= phase_end:
            continue
        if world.epoch <= phase_start:
            if phase.wave_before is not None and world.wave < phase.wave_before:
                retired = world.apply_wave(phase.wave_before)
                note(f"wave {phase.wave_before}: replaced {len(retired)} agents")
            if phase.market_swap_before and world.market_generation == 0:
                world.replace_market()
                note("market maker replaced")
        for _ in range(max(world.epoch, phase_start), phase_end):
            log = world.run_epoch(train=True, collect_events=config.keep_event_log)
            reports = metrics.probe_market(world.market.actor, world.population.probe_sets)
            series.append_epoch(world, log, reports)
            if config.keep_event_log:
                _append_events(events_path, log)
            if config.training_stats:
                _append_training_stats(stats_path, log)
            if config.checkpoint_every and world.epoch % config.checkpoint_every == 0:
                _save_state(run_dir, world, series, config)
            if world.epoch % stride == 0 or world.epoch == total:
                note(f"epoch {world.epoch}/{total} ({phase.name})")
        if phase.boundary_after:
            world.boundaries[phase.boundary_after] = world.epoch
    return _finalize(run_dir, world, series, config, seed)


def run_study(
    config: StudyConfig,
    seed: int,
    out_root,
    force: bool = False,
    progress: bool = True,
) -> dict:
    """Run one configured study to completion, writing all artifacts."""
    run_dir = Path(out_root) / run_dir_name(config, seed)
    if run_dir.exists():
        if not force:
            raise RunError(
                f"{run_dir} already exists; pass force to overwrite it"
            )
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True)
    _write_config_file(run_dir, config, seed, status="running")
    world = WorldState(config, seed)
    write_manifest(world.population.records, run_dir / MANIFEST_FILE)
    series = SeriesAccumulator.start(world)
    return _execute(run_dir, world, series, config, seed, progress)


def resume_run(run_dir, total_epochs: Optional[int] = None, progress: bool = True) -> dict:
    """Continue an interrupted run, or extend a single-phase run's epoch count."""
    run_dir = Path(run_dir)
    config_path = run_dir / CONFIG_FILE
    if not config_path.exists():
        raise RunError(f"{run_dir} has no {CONFIG_FILE}; not a run directory")
    payload = json.loads(config_path.read_text())
    config = config_from_dict(payload["config"])
    seed = payload["seed"]
    checkpoint_path = run_dir / CHECKPOINT_FILE
    if not checkpoint_path.exists():
        raise RunError(
            f"{run_dir} has no {CHECKPOINT_FILE}; enable checkpoint_every to make "
            "runs resumable before completion"
        )
    world = world_from_tree(load_tree(checkpoint_path), config)
    series = SeriesAccumulator.from_tree(load_tree(run_dir / SERIES_FILE))
    if len(series) != world.epoch:
        raise RunError(
            f"checkpoint is at epoch {world.epoch} but the series holds "
            f"{len(series)} epochs; artifacts are inconsistent"
        )
    if total_epochs is not None:
        if config.study == "generational":
            raise RunError("generational runs follow a fixed phase plan; epochs cannot be changed")
        if total_epochs < world.epoch:
            raise RunError(
                f"cannot shrink a run: {world.epoch} epochs already done, asked for {total_epochs}"
            )
        config = dataclasses.replace(config, epochs=total_epochs)
    return _execute(run_dir, world, series, config, seed, progress)


def load_run_series(run_dir) -> tuple[dict, dict]:
    """Load (config payload, series tree) for export and reporting."""
    run_dir = Path(run_dir)
    config_path = run_dir / CONFIG_FILE
    series_path = run_dir / SERIES_FILE
    if not config_path.exists() or not series_path.exists():
        raise RunError(f"{run_dir} is missing {CONFIG_FILE} or {SERIES_FILE}")
    return json.loads(config_path.read_text()), load_tree(series_path)
