"""Run configuration: schema, validation, file loading, and overrides.

A study config fully determines a run up to its seed.  Three study kinds are
supported: ``individuation`` (ungrouped random codes), ``regularity``
(grouped codes with skill-correlated composition), and ``generational``
(grouped codes plus staged cohort replacement and a late market-maker swap).
Configs load from JSON files and accept dotted ``key=value`` overrides from
the command line.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .population import PopulationError, allocate_group_sizes, validate_population_size
from .ppo import TrainerConfig

__all__ = [
    "ConfigError",
    "ReplacementSchedule",
    "StudyConfig",
    "STUDY_KINDS",
    "scheme_for_study",
    "config_to_dict",
    "config_from_dict",
    "load_config_file",
    "apply_overrides",
    "validate_study_config",
]

STUDY_KINDS = ("individuation", "regularity", "generational")


class ConfigError(ValueError):
    """A configuration that cannot produce a valid run."""


@dataclass
class ReplacementSchedule:
    """Generational turnover plan.

    Each wave retires ``fraction`` of every group's founding members
    (uniformly at random among survivors) and mints an even newcomer cohort of
    half choppers, half miners.  After the final wave the market maker can be
    swapped for a freshly initialized one and trained for
    ``post_market_epochs`` more.
    """

    waves: int = 5
    fraction: float = 0.2
    epochs_between_waves: int = 100
    replace_market_after: bool = True
    post_market_epochs: int = 200

    def __post_init__(self):
        if self.waves < 1:
            raise ConfigError(f"replacement.waves must be at least 1; got {self.waves}")
        if not 0.0 < self.fraction <= 1.0:
            raise ConfigError(f"replacement.fraction must lie in (0, 1]; got {self.fraction}")
        if self.epochs_between_waves < 1:
            raise ConfigError("replacement.epochs_between_waves must be at least 1")
        if self.post_market_epochs < 0:
            raise ConfigError("replacement.post_market_epochs must be non-negative")


@dataclass
class StudyConfig:
    """Everything that shapes a run except the seed."""

    study: str = "individuation"
    size: int = 30
    epochs: int = 200  # training epochs; for generational runs, the pre-wave phase
    steps_per_epoch: int = 200
    flag_threshold: float = 1.0
    probes_per_group: int = 10
    eval_window: int = 10  # trailing epochs aggregated at a timepoint boundary
    agent_game_epochs: int = 200  # series length exported for the agent game
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    replacement: ReplacementSchedule = field(default_factory=ReplacementSchedule)
    keep_event_log: bool = False
    training_stats: bool = False
    checkpoint_every: Optional[int] = None

    def __post_init__(self):
        problems = validate_study_config(self)
        if problems:
            raise ConfigError("; ".join(problems))


def scheme_for_study(study: str) -> str:
    return "random" if study == "individuation" else "correlated"


def validate_study_config(config: StudyConfig) -> list[str]:
    """All reasons a config is unusable (empty when valid)."""
    problems: list[str] = []
    if config.study not in STUDY_KINDS:
        problems.append(f"study must be one of {STUDY_KINDS}; got {config.study!r}")
    try:
        validate_population_size(config.size)
    except PopulationError as err:
        problems.append(str(err))
    if config.epochs < 1:
        problems.append(f"epochs must be at least 1; got {config.epochs}")
    if config.steps_per_epoch < 1:
        problems.append(f"steps_per_epoch must be at least 1; got {config.steps_per_epoch}")
    if config.probes_per_group < 2 or config.probes_per_group % 2 != 0:
        problems.append(
            f"probes_per_group must be a positive even number; got {config.probes_per_group}"
        )
    if config.eval_window < 1:
        problems.append(f"eval_window must be at least 1; got {config.eval_window}")
    if config.agent_game_epochs < 1:
        problems.append(f"agent_game_epochs must be at least 1; got {config.agent_game_epochs}")
    if config.checkpoint_every is not None and config.checkpoint_every < 1:
        problems.append("checkpoint_every must be at least 1 when set")
    if config.study == "generational" and not problems:
        for group_size in allocate_group_sizes(config.size):
            wave_quota = group_size * config.replacement.fraction
            if abs(wave_quota - round(wave_quota)) > 1e-9:
                problems.append(
                    f"replacement fraction {config.replacement.fraction} of a group of "
                    f"{group_size} is not a whole number of agents"
                )
                break
            if round(wave_quota) % 2 != 0:
                problems.append(
                    f"each wave would replace {round(wave_quota)} agents per group; "
                    "cohorts must be even to split choppers and miners"
                )
                break
            if round(wave_quota) * config.replacement.waves > group_size:
                problems.append(
                    f"{config.replacement.waves} waves of {round(wave_quota)} exceed "
                    f"the {group_size} founding members of a group"
                )
                break
    return problems


def config_to_dict(config: StudyConfig) -> dict:
    out = dataclasses.asdict(config)
    return out


def config_from_dict(data: dict) -> StudyConfig:
    """Build a config from plain dicts, rejecting unknown keys by name."""
    data = dict(data)
    known = {f.name for f in dataclasses.fields(StudyConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "trainer" in data and isinstance(data["trainer"], dict):
        try:
            data["trainer"] = TrainerConfig(**data["trainer"])
        except (TypeError, ValueError) as err:
            raise ConfigError(f"trainer: {err}") from None
    if "replacement" in data and isinstance(data["replacement"], dict):
        try:
            data["replacement"] = ReplacementSchedule(**data["replacement"])
        except TypeError as err:
            raise ConfigError(f"replacement: {err}") from None
    try:
        return StudyConfig(**data)
    except TypeError as err:
        raise ConfigError(str(err)) from None


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file is not valid JSON: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _parse_scalar(text: str):
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("null", "none"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply dotted ``key=value`` strings onto a config dict."""
    out = json.loads(json.dumps(data))  # deep copy, JSON types only
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value; got {item!r}")
        key, _, raw = item.partition("=")
        parts = key.strip().split(".")
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into {part!r} in override {item!r}")
        node[parts[-1]] = _parse_scalar(raw.strip())
    return out
