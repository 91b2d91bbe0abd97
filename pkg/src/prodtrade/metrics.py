"""Per-epoch measures, probe evaluation, and the tidy long-format table.

All behavioral ratios are counted over attempts (action choices), pooled
within a cell: a cell is one (group, role) pair, where roles split members
into founders of the group's majority skill, founders of the other two
producer skills (minority), builders, and replacement-cohort members.  Cells
that have no denominator in an epoch are written with an empty value and a
zero count rather than silently dropped or zeroed.

Probe evaluation is a pure forward pass over held-out identity codes: it
never stores transitions or touches parameters, so probing cannot perturb a
run.  The skill-consistency score against a truth mix is computed analytically
(mix-weighted accuracy of the argmax predictions), which makes the
chance-level identity exact: at a half/half mix no prediction pattern can
score anything but one half.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import nets
from .env import ActionKind, Resource, Skill
from .population import GroupLabel, ProbeSet

__all__ = [
    "GROUP_ALL",
    "ROLE_POPULATION",
    "ROLE_BASELINE",
    "ROLE_MAJORITY",
    "ROLE_MINORITY",
    "ROLE_BUILDER",
    "ROLE_REPLACEMENT",
    "ROLE_PROBE",
    "ROLE_MARKET",
    "TIDY_COLUMNS",
    "ProbeReport",
    "probe_market",
    "MeasureRow",
    "epoch_rows",
    "write_tidy_csv",
    "epoch_centered",
]

GROUP_ALL = "all"
ROLE_POPULATION = "population"
ROLE_BASELINE = "baseline"
ROLE_MAJORITY = "majority"
ROLE_MINORITY = "minority"
ROLE_BUILDER = "builder"
ROLE_REPLACEMENT = "replacement"
ROLE_PROBE = "probe"
ROLE_MARKET = "market"

TIDY_COLUMNS = [
    "run_id",
    "study",
    "scheme",
    "size",
    "seed",
    "epoch",
    "epoch_c",
    "group",
    "role",
    "measure",
    "value",
    "n",
]

_CHOP = int(ActionKind.CHOP_WOOD)
_MINE = int(ActionKind.MINE_STONE)
_SELL_W = int(ActionKind.SELL_WOOD)
_SELL_S = int(ActionKind.SELL_STONE)


def epoch_centered(epoch: int) -> float:
    """Epoch rescaled in units of 100 with the zero point at epoch 100."""
    return (epoch - 100) / 100.0


# -- probes ---------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    """Argmax predictions of the market maker over one held-out probe set."""

    group: Optional[GroupLabel]
    n: int
    frac_wood_pred: float
    expected_skill_accuracy: float  # mix-weighted accuracy; exactly 1/2 at a 1/2 mix
    skill_match: float  # agreement with the probes' assigned hypothetical skills
    stereotype_match: Optional[float]  # agreement with the group's signature resource


def probe_market(
    market_actor: nets.MlpParams,
    probe_sets: list[ProbeSet],
    sample: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> list[ProbeReport]:
    """Evaluate held-out codes without any parameter or buffer side effects.

    Predictions are argmax by default, so the reported proportions are a
    deterministic property of the model.  With ``sample=True`` predictions are
    instead drawn from the action distribution (pass the rng), measuring the
    behavioral rather than modal response.
    """
    if sample and rng is None:
        raise ValueError("sampled probes need an rng")
    reports = []
    for ps in probe_sets:
        codes = np.stack([p.code.as_obs for p in ps.probes])
        probs = nets.forward(market_actor, codes)
        if sample:
            preds = (rng.random(len(probs)) >= probs[:, 0]).astype(np.int64)
        else:
            preds = np.argmax(probs, axis=1)  # 0 wood, 1 stone; ties go to wood
        frac_wood = float(np.mean(preds == 0))
        mix = ps.truth_mix
        expected = mix * frac_wood + (1.0 - mix) * (1.0 - frac_wood)
        assigned = np.array([0 if p.skill == Skill.CHOPPER else 1 for p in ps.probes])
        skill_match = float(np.mean(preds == assigned))
        stereotype: Optional[float] = None
        if ps.group is not None and ps.group.majority_skill != Skill.BUILDER:
            signature = 0 if ps.group.majority_skill == Skill.CHOPPER else 1
            stereotype = float(np.mean(preds == signature))
        reports.append(
            ProbeReport(ps.group, len(ps.probes), frac_wood, expected, skill_match, stereotype)
        )
    return reports


# -- per-epoch cells --------------------------------------------------------------


@dataclass(frozen=True)
class MeasureRow:
    group: str
    role: str
    measure: str
    value: Optional[float]  # None when the cell is undefined this epoch
    n: int


def _ratio(numerator: float, denominator: float) -> tuple[Optional[float], int]:
    if denominator <= 0:
        return None, 0
    return float(numerator) / float(denominator), int(denominator)


def _mean(values: np.ndarray) -> tuple[Optional[float], int]:
    if len(values) == 0:
        return None, 0
    return float(values.mean()), int(len(values))


def _member_rows(
    group_name: str,
    role: str,
    mask: np.ndarray,
    attempts: np.ndarray,
    pred_match: np.ndarray,
    coins: np.ndarray,
    skilled_res: np.ndarray,
    signature_res: Optional[int],
    include_stereotype: bool,
) -> list[MeasureRow]:
    """The five member measures for one cell; builders yield undefined ratios."""
    rows = []
    sub = attempts[mask]
    sub_skill = skilled_res[mask]
    producer = sub_skill >= 0  # wood- or stone-skilled members only

    extract_att = sub[:, _CHOP] + sub[:, _MINE]
    skilled_extract = np.where(sub_skill == int(Resource.WOOD), sub[:, _CHOP], sub[:, _MINE])
    value, n = _ratio(skilled_extract[producer].sum(), extract_att[producer].sum())
    rows.append(MeasureRow(group_name, role, "skilled_extraction_ratio", value, n))

    sale_att = sub[:, _SELL_W] + sub[:, _SELL_S]
    skilled_sale = np.where(sub_skill == int(Resource.WOOD), sub[:, _SELL_W], sub[:, _SELL_S])
    value, n = _ratio(skilled_sale[producer].sum(), sale_att[producer].sum())
    rows.append(MeasureRow(group_name, role, "skilled_sale_ratio", value, n))

    if include_stereotype:
        if signature_res is None:
            rows.append(MeasureRow(group_name, role, "stereotype_sale_ratio", None, 0))
        else:
            sig_col = _SELL_W if signature_res == int(Resource.WOOD) else _SELL_S
            value, n = _ratio(sub[:, sig_col].sum(), sale_att.sum())
            rows.append(MeasureRow(group_name, role, "stereotype_sale_ratio", value, n))

    value, n = _ratio(pred_match[mask][producer].sum(), sale_att[producer].sum())
    rows.append(MeasureRow(group_name, role, "market_skill_prediction_ratio", value, n))

    value, n = _mean(coins[mask])
    rows.append(MeasureRow(group_name, role, "mean_reward", value, n))
    return rows


def epoch_rows(
    attempts: np.ndarray,
    pred_match: np.ndarray,
    coins: np.ndarray,
    group_idx: np.ndarray,  # per slot: -1 ungrouped, else GroupLabel value
    skill_idx: np.ndarray,  # per slot: Skill value
    wave_idx: np.ndarray,  # per slot: 0 founders, else introducing wave
    scheme: str,
    with_replacement_roles: bool,
    probe_reports: list[ProbeReport],
    market_events: int,
    market_reward: float,
) -> list[MeasureRow]:
    """All cells for one epoch; the cell set is constant for a given study."""
    skilled_res = np.full(len(skill_idx), -1, dtype=np.int64)
    skilled_res[skill_idx == int(Skill.CHOPPER)] = int(Resource.WOOD)
    skilled_res[skill_idx == int(Skill.MINER)] = int(Resource.STONE)
    is_builder = skill_idx == int(Skill.BUILDER)
    rows: list[MeasureRow] = []

    if scheme == "random":
        baseline = ~is_builder
        rows += _member_rows(
            GROUP_ALL, ROLE_BASELINE, baseline, attempts, pred_match, coins,
            skilled_res, None, include_stereotype=False,
        )
        value, n = _mean(coins[is_builder])
        rows.append(MeasureRow(GROUP_ALL, ROLE_BUILDER, "mean_reward", value, n))
    else:
        for group in GroupLabel:
            gmask = group_idx == int(group)
            gname = group.color
            majority_skill = group.majority_skill
            signature: Optional[int] = None
            if majority_skill == Skill.CHOPPER:
                signature = int(Resource.WOOD)
            elif majority_skill == Skill.MINER:
                signature = int(Resource.STONE)

            founders = gmask & (wave_idx == 0)
            majority = founders & (skill_idx == int(majority_skill))
            minority = founders & ~is_builder & (skill_idx != int(majority_skill))
            builders = founders & is_builder & (skill_idx != int(majority_skill))
            if majority_skill == Skill.BUILDER:
                builders = np.zeros_like(founders)  # builders are the majority here

            # group-level rows: raw market signal and pooled ratios
            offers_w = attempts[gmask, _SELL_W].sum()
            offers_s = attempts[gmask, _SELL_S].sum()
            rows.append(
                MeasureRow(gname, ROLE_POPULATION, "raw_signal_wood", float(offers_w),
                           int(offers_w + offers_s))
            )
            rows.append(
                MeasureRow(gname, ROLE_POPULATION, "raw_signal_stone", float(offers_s),
                           int(offers_w + offers_s))
            )
            if signature is None:
                rows.append(MeasureRow(gname, ROLE_POPULATION, "stereotype_sale_ratio", None, 0))
            else:
                sig = offers_w if signature == int(Resource.WOOD) else offers_s
                value, n = _ratio(sig, offers_w + offers_s)
                rows.append(MeasureRow(gname, ROLE_POPULATION, "stereotype_sale_ratio", value, n))
            gproducer = gmask & ~is_builder
            value, n = _ratio(
                pred_match[gproducer].sum(),
                (attempts[gproducer, _SELL_W] + attempts[gproducer, _SELL_S]).sum(),
            )
            rows.append(
                MeasureRow(gname, ROLE_POPULATION, "market_skill_prediction_ratio", value, n)
            )

            rows += _member_rows(
                gname, ROLE_MAJORITY, majority, attempts, pred_match, coins,
                skilled_res, signature, include_stereotype=True,
            )
            rows += _member_rows(
                gname, ROLE_MINORITY, minority, attempts, pred_match, coins,
                skilled_res, signature, include_stereotype=True,
            )
            value, n = _mean(coins[builders])
            rows.append(MeasureRow(gname, ROLE_BUILDER, "mean_reward", value, n))
            if with_replacement_roles:
                newcomers = gmask & (wave_idx > 0)
                rows += _member_rows(
                    gname, ROLE_REPLACEMENT, newcomers, attempts, pred_match, coins,
                    skilled_res, signature, include_stereotype=True,
                )

    # whole-population rows
    producers = ~is_builder
    sale_att = attempts[:, _SELL_W] + attempts[:, _SELL_S]
    value, n = _ratio(pred_match[producers].sum(), sale_att[producers].sum())
    rows.append(MeasureRow(GROUP_ALL, ROLE_POPULATION, "market_skill_prediction_ratio", value, n))
    value, n = _mean(coins)
    rows.append(MeasureRow(GROUP_ALL, ROLE_POPULATION, "mean_reward", value, n))
    value, n = _ratio(market_reward, market_events) if market_events else (None, 0)
    rows.append(MeasureRow(GROUP_ALL, ROLE_MARKET, "market_mean_reward", value, n))

    # probes
    for report in probe_reports:
        gname = GROUP_ALL if report.group is None else report.group.color
        rows.append(
            MeasureRow(gname, ROLE_PROBE, "probe_expected_skill_accuracy",
                       report.expected_skill_accuracy, report.n)
        )
        rows.append(
            MeasureRow(gname, ROLE_PROBE, "probe_skill_match", report.skill_match, report.n)
        )
        if scheme != "random":
            rows.append(
                MeasureRow(gname, ROLE_PROBE, "probe_stereotype_proportion",
                           report.stereotype_match, report.n if report.stereotype_match is not None else 0)
            )
    return rows


def write_tidy_csv(
    path,
    run_id: str,
    study: str,
    scheme: str,
    size: int,
    seed: int,
    rows_by_epoch: list[list[MeasureRow]],
) -> None:
    """One CSV row per (epoch, cell, measure); undefined cells keep empty values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIDY_COLUMNS)
        for epoch, rows in enumerate(rows_by_epoch):
            for row in rows:
                writer.writerow(
                    [
                        run_id,
                        study,
                        scheme,
                        size,
                        seed,
                        epoch,
                        repr(epoch_centered(epoch)),
                        row.group,
                        row.role,
                        row.measure,
                        "" if row.value is None else repr(float(row.value)),
                        row.n,
                    ]
                )
