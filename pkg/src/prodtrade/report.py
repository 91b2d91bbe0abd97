"""Render a run's tidy metrics table into a small set of figures.

Everything here reads finished artifacts (``metrics.csv`` plus
``summary.json``) and writes PNG files; nothing touches simulation state.
Group names double as line colors so that purple, yellow, and cyan rosters
look the same everywhere.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_report"]

_GROUP_COLORS = {
    "purple": "tab:purple",
    "yellow": "goldenrod",
    "cyan": "tab:cyan",
    "all": "black",
}
_ROLE_STYLES = {
    "population": "-",
    "baseline": "-",
    "majority": "-",
    "minority": "--",
    "builder": ":",
    "replacement": "-.",
    "probe": "-",
    "market": "-",
}


def _load_table(metrics_path: Path) -> dict[tuple[str, str, str], tuple[list[int], list[float]]]:
    table: dict[tuple[str, str, str], tuple[list[int], list[float]]] = defaultdict(
        lambda: ([], [])
    )
    with open(metrics_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["value"] == "":
                continue
            epochs, values = table[(row["group"], row["role"], row["measure"])]
            epochs.append(int(row["epoch"]))
            values.append(float(row["value"]))
    return table


def _mark_boundaries(ax, boundaries: dict[str, int]) -> None:
    for name, epoch in boundaries.items():
        if name == "final":
            continue
        ax.axvline(epoch, color="gray", lw=0.8, alpha=0.6)
        ax.annotate(name, (epoch, 1.0), xycoords=("data", "axes fraction"),
                    fontsize=7, rotation=90, va="top", ha="right", color="gray")


def _plot_measure(ax, table, measure: str, cells: list[tuple[str, str]], boundaries) -> None:
    for group, role in cells:
        epochs, values = table.get((group, role, measure), ([], []))
        if not epochs:
            continue
        label = f"{group} {role}" if group != "all" else role
        ax.plot(epochs, values, _ROLE_STYLES.get(role, "-"),
                color=_GROUP_COLORS.get(group, "tab:gray"), label=label, lw=1.2)
    _mark_boundaries(ax, boundaries)
    ax.set_xlabel("epoch")
    ax.set_title(measure)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=7)


def render_report(run_dir, out_dir=None) -> list[Path]:
    """Write the standard figures for one run; returns the created paths."""
    run_dir = Path(run_dir)
    out_dir = run_dir if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = _load_table(run_dir / "metrics.csv")
    summary = json.loads((run_dir / "summary.json").read_text())
    scheme = summary["scheme"]
    boundaries = summary.get("boundaries", {})
    groups = ["purple", "yellow", "cyan"] if scheme == "correlated" else []
    written: list[Path] = []

    def save(fig, name: str) -> None:
        path = out_dir / name
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    cells = [("all", "population")] + [(g, "population") for g in groups]
    _plot_measure(ax, table, "market_skill_prediction_ratio", cells, boundaries)
    ax.axhline(0.5, color="gray", lw=0.8, ls="--")
    ax.set_ylim(0, 1)
    save(fig, "market_accuracy.png")

    fig, axes = plt.subplots(1, 2 if scheme == "correlated" else 1,
                             figsize=(11 if scheme == "correlated" else 7, 4), squeeze=False)
    probe_cells = [(g, "probe") for g in groups] or [("all", "probe")]
    _plot_measure(axes[0][0], table, "probe_expected_skill_accuracy", probe_cells, boundaries)
    axes[0][0].axhline(0.5, color="gray", lw=0.8, ls="--")
    axes[0][0].set_ylim(0, 1)
    if scheme == "correlated":
        _plot_measure(axes[0][1], table, "probe_stereotype_proportion", probe_cells, boundaries)
        axes[0][1].axhline(0.5, color="gray", lw=0.8, ls="--")
        axes[0][1].set_ylim(0, 1)
    save(fig, "probe_accuracy.png")

    fig, ax = plt.subplots(figsize=(7, 4))
    if scheme == "correlated":
        cells = [(g, r) for g in groups for r in ("majority", "minority", "replacement")]
    else:
        cells = [("all", "baseline")]
    _plot_measure(ax, table, "skilled_sale_ratio", cells, boundaries)
    ax.axhline(0.5, color="gray", lw=0.8, ls="--")
    ax.set_ylim(0, 1)
    save(fig, "sale_behavior.png")

    fig, axes = plt.subplots(1, 2, figsize=(11, 4), squeeze=False)
    if scheme == "correlated":
        cells = [(g, r) for g in groups for r in ("majority", "minority", "builder", "replacement")]
    else:
        cells = [("all", "baseline"), ("all", "builder")]
    _plot_measure(axes[0][0], table, "mean_reward", cells, boundaries)
    _plot_measure(axes[0][1], table, "market_mean_reward", [("all", "market")], boundaries)
    save(fig, "rewards.png")

    if scheme == "correlated":
        fig, ax = plt.subplots(figsize=(7, 4))
        for group in groups:
            for measure, style in (("raw_signal_wood", "-"), ("raw_signal_stone", "--")):
                epochs, values = table.get((group, "population", measure), ([], []))
                if epochs:
                    ax.plot(epochs, values, style, color=_GROUP_COLORS[group],
                            label=f"{group} {measure.rsplit('_', 1)[1]}", lw=1.2)
        _mark_boundaries(ax, boundaries)
        ax.set_xlabel("epoch")
        ax.set_title("sale offers per epoch by resource")
        ax.legend(fontsize=7)
        save(fig, "market_signal.png")

    return written
