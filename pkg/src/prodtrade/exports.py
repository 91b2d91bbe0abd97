"""Frozen JSON snapshots that drive the two browser games.

Both exports are pure functions of a finished run's artifacts, keyed by a
named timepoint (a recorded phase boundary).  The market game gets one entry
per roster slot: how often that agent came to market during the trailing
evaluation window (normalized to a sampling weight) and which resource it
tended to offer.  The agent game gets a per-epoch series of how often the
market named a minority agent's actual skill, for each of the two producer
skills, over the trailing window that a game session replays.

Identity codes never leave the simulation; exported agents carry fresh
12-digit tags drawn from a seeded permutation so that tags are stable across
re-exports of the same run but carry no information about groups or skills.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .env import ActionKind, Skill
from .population import GroupLabel
from .rng import derive_seed_sequence

__all__ = [
    "ExportError",
    "SCHEMA_VERSION",
    "available_timepoints",
    "export_market_game",
    "export_agent_game",
    "write_export",
]

SCHEMA_VERSION = 1
TAG_BITS = 12
TAG_SPACE = 1 << TAG_BITS

_SELL_W = int(ActionKind.SELL_WOOD)
_SELL_S = int(ActionKind.SELL_STONE)


class ExportError(ValueError):
    """Raised when a run lacks the history a game export needs."""


def available_timepoints(series: dict) -> list[str]:
    return sorted(series["boundaries"], key=lambda k: series["boundaries"][k])


def _boundary_epoch(series: dict, timepoint: str) -> int:
    boundaries = series["boundaries"]
    if timepoint not in boundaries:
        raise ExportError(
            f"timepoint {timepoint!r} not recorded; available: "
            f"{', '.join(available_timepoints(series)) or 'none'}"
        )
    return int(boundaries[timepoint])


def _tag_table(seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(derive_seed_sequence(seed, "export")))
    return rng.permutation(TAG_SPACE)


def _color_name(group_value: int) -> str:
    return "gray" if group_value == -1 else GroupLabel(group_value).color


def export_market_game(config_payload: dict, series: dict, timepoint: str) -> dict:
    """Sampling weights and offer tendencies for the market prediction game."""
    boundary = _boundary_epoch(series, timepoint)
    window = int(config_payload["config"]["eval_window"])
    if boundary < window:
        raise ExportError(
            f"timepoint {timepoint!r} ends at epoch {boundary}, inside the "
            f"{window}-epoch evaluation window"
        )
    lo, hi = boundary - window, boundary
    occupant = series["occupant"][lo:hi]
    if not (occupant == occupant[-1]).all():
        raise ExportError(
            f"roster changed inside the evaluation window before {timepoint!r}"
        )
    attempts = series["attempts"][lo:hi]
    wood = attempts[:, :, _SELL_W].sum(axis=0)
    stone = attempts[:, :, _SELL_S].sum(axis=0)
    offers = wood + stone
    total = int(offers.sum())
    n_slots = len(offers)
    weights = offers / total if total > 0 else np.full(n_slots, 1.0 / n_slots)

    tags = _tag_table(int(config_payload["seed"]))
    groups = series["record_group"]
    agents = []
    for slot in range(n_slots):
        ordinal = int(occupant[-1][slot])
        wood_prob = float(wood[slot] / offers[slot]) if offers[slot] > 0 else 0.5
        agents.append(
            {
                "id12": format(int(tags[ordinal % TAG_SPACE]), "012b"),
                "color": _color_name(int(groups[ordinal])),
                "approach_weight": float(weights[slot]),
                "wood_prob": wood_prob,
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "game": "market",
        "run_id": config_payload["run_id"],
        "timepoint": timepoint,
        "window_epochs": [lo, hi],
        "agents": agents,
    }


def export_agent_game(config_payload: dict, series: dict, timepoint: str) -> dict:
    """Per-epoch market reception of skill-minority agents, one series per skill.

    Epochs with no minority sale events carry the last defined value forward
    (starting from chance at one half), so a game session always has a usable
    probability for every trial.
    """
    boundary = _boundary_epoch(series, timepoint)
    length = int(config_payload["config"]["agent_game_epochs"])
    if boundary < length:
        raise ExportError(
            f"timepoint {timepoint!r} ends at epoch {boundary}; the agent game "
            f"replays {length} epochs of history"
        )
    lo, hi = boundary - length, boundary

    groups = series["record_group"]
    skills = series["record_skill"]
    majority_of_group = {
        int(g): int(g.majority_skill) for g in GroupLabel
    }
    epochs = []
    last = {int(Skill.CHOPPER): 0.5, int(Skill.MINER): 0.5}
    for e in range(lo, hi):
        occ = series["occupant"][e]
        occ_group = groups[occ]
        occ_skill = skills[occ]
        attempts = series["attempts"][e]
        matches = series["pred_match"][e]
        for skill, name in ((int(Skill.CHOPPER), "wood"), (int(Skill.MINER), "stone")):
            mask = np.zeros(len(occ), dtype=bool)
            for g, maj in majority_of_group.items():
                if maj == int(Skill.BUILDER) or maj == skill:
                    continue
                mask |= (occ_group == g) & (occ_skill == skill)
            offers = int((attempts[mask, _SELL_W] + attempts[mask, _SELL_S]).sum())
            if offers > 0:
                last[skill] = float(matches[mask].sum() / offers)
            epochs.append(
                {
                    "epoch": e - lo + 1,
                    "skill": name,
                    "skill_consistent_prob": last[skill],
                    "n_events": offers,
                }
            )
    return {
        "schema_version": SCHEMA_VERSION,
        "game": "agent",
        "run_id": config_payload["run_id"],
        "timepoint": timepoint,
        "window_epochs": [lo, hi],
        "epochs": epochs,
    }


def write_export(payload: dict, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
