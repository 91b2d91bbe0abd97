"""Game-snapshot export tests: fixed schemas, windowed statistics, stable tags."""

import json

import numpy as np
import pytest

from prodtrade import exports, runner
from prodtrade.config import StudyConfig
from prodtrade.env import ActionKind, Skill
from prodtrade.exports import ExportError, export_agent_game, export_market_game

SELL_W = int(ActionKind.SELL_WOOD)
SELL_S = int(ActionKind.SELL_STONE)

MARKET_KEYS = {"schema_version", "game", "run_id", "timepoint", "window_epochs", "agents"}
AGENT_KEYS = {"schema_version", "game", "run_id", "timepoint", "window_epochs", "epochs"}


def payload_for(run_id="reg_s12_seed0", seed=0, eval_window=2, agent_game_epochs=3):
    return {
        "run_id": run_id,
        "seed": seed,
        "config": {"eval_window": eval_window, "agent_game_epochs": agent_game_epochs},
    }


def market_series(window_attempts, boundary=4, n_slots=2, roster_change=False):
    """Four recorded epochs; ``window_attempts`` fills the last two."""
    attempts = np.zeros((boundary, n_slots, 7), dtype=np.int64)
    for e, per_slot in window_attempts.items():
        for slot, (w, s) in per_slot.items():
            attempts[e, slot, SELL_W] = w
            attempts[e, slot, SELL_S] = s
    occupant = np.tile(np.arange(n_slots), (boundary, 1))
    if roster_change:
        occupant[boundary - 2, 0] = n_slots  # different occupant one epoch earlier
    return {
        "boundaries": {"final": boundary},
        "occupant": occupant,
        "attempts": attempts,
        "pred_match": np.zeros((boundary, n_slots)),
        "record_group": np.array([0, 1, 2]),
        "record_skill": np.array([int(Skill.CHOPPER)] * 3),
    }


class TestMarketGame:
    def test_offer_statistics_and_schema(self):
        series = market_series({2: {0: (20, 5)}, 3: {0: (10, 5)}})
        out = export_market_game(payload_for(), series, "final")
        assert set(out) == MARKET_KEYS
        assert out["game"] == "market" and out["schema_version"] == 1
        assert out["window_epochs"] == [2, 4]
        a0, a1 = out["agents"]
        assert set(a0) == {"id12", "color", "approach_weight", "wood_prob"}
        assert a0["wood_prob"] == pytest.approx(30 / 40)
        assert a0["approach_weight"] == 1.0
        # an agent that never came to market: zero weight, chance-level offer
        assert a1["approach_weight"] == 0.0
        assert a1["wood_prob"] == 0.5
        assert a0["color"] == "purple" and a1["color"] == "yellow"

    def test_weights_normalize_and_tags_are_unique(self):
        series = market_series({3: {0: (3, 1), 1: (0, 9)}})
        out = export_market_game(payload_for(), series, "final")
        weights = [a["approach_weight"] for a in out["agents"]]
        assert sum(weights) == pytest.approx(1.0, abs=1e-9)
        tags = [a["id12"] for a in out["agents"]]
        assert len(set(tags)) == len(tags)
        assert all(len(t) == 12 and set(t) <= {"0", "1"} for t in tags)

    def test_quiet_window_falls_back_to_uniform_weights(self):
        out = export_market_game(payload_for(), market_series({}), "final")
        assert [a["approach_weight"] for a in out["agents"]] == [0.5, 0.5]

    def test_tags_are_seed_stable_but_differ_across_seeds(self):
        series = market_series({3: {0: (3, 1)}})
        a = export_market_game(payload_for(seed=5), series, "final")
        b = export_market_game(payload_for(seed=5), series, "final")
        c = export_market_game(payload_for(seed=6), series, "final")
        assert a == b
        assert [x["id12"] for x in a["agents"]] != [x["id12"] for x in c["agents"]]

    def test_unknown_timepoint_lists_the_recorded_ones(self):
        with pytest.raises(ExportError, match="final"):
            export_market_game(payload_for(), market_series({}), "wave3")

    def test_window_must_fit_before_the_boundary(self):
        with pytest.raises(ExportError, match="window"):
            export_market_game(payload_for(eval_window=5), market_series({}), "final")

    def test_roster_change_inside_window_is_rejected(self):
        series = market_series({}, n_slots=2, roster_change=True)
        series["record_group"] = np.array([0, 1, 2])
        with pytest.raises(ExportError, match="roster"):
            export_market_game(payload_for(), series, "final")


def agent_series():
    """Records: purple chopper, purple miner, yellow chopper, cyan builder."""
    record_group = np.array([0, 0, 1, 2])
    record_skill = np.array(
        [int(Skill.CHOPPER), int(Skill.MINER), int(Skill.CHOPPER), int(Skill.BUILDER)]
    )
    boundary = 4
    attempts = np.zeros((boundary, 4, 7), dtype=np.int64)
    pred_match = np.zeros((boundary, 4))
    # epoch 1: the stone-minority (purple miner) makes 50 offers, 40 matched
    attempts[1, 1, SELL_S] = 50
    pred_match[1, 1] = 40
    # epoch 2: the wood-minority (yellow chopper) makes 10 offers, 5 matched;
    # the purple majority chopper's sales must not contaminate either series
    attempts[2, 2, SELL_W] = 10
    pred_match[2, 2] = 5
    attempts[2, 0, SELL_W] = 99
    pred_match[2, 0] = 99
    # epoch 3: stone-minority again, 4 offers, 1 matched
    attempts[3, 1, SELL_W] = 2
    attempts[3, 1, SELL_S] = 2
    pred_match[3, 1] = 1
    return {
        "boundaries": {"final": boundary},
        "occupant": np.tile(np.arange(4), (boundary, 1)),
        "attempts": attempts,
        "pred_match": pred_match,
        "record_group": record_group,
        "record_skill": record_skill,
    }


class TestAgentGame:
    def test_minority_series_with_forward_fill(self):
        out = export_agent_game(payload_for(), agent_series(), "final")
        assert set(out) == AGENT_KEYS
        assert out["game"] == "agent"
        rows = {(r["epoch"], r["skill"]): r for r in out["epochs"]}
        assert len(rows) == 6  # 3 epochs x 2 skills
        assert all(set(r) == {"epoch", "skill", "skill_consistent_prob", "n_events"}
                   for r in out["epochs"])
        # wood minority saw no events in epoch 1: chance prior carried in
        assert rows[(1, "wood")] == {"epoch": 1, "skill": "wood",
                                     "skill_consistent_prob": 0.5, "n_events": 0}
        assert rows[(1, "stone")]["skill_consistent_prob"] == pytest.approx(40 / 50)
        assert rows[(1, "stone")]["n_events"] == 50
        # majority sales (99 matched offers) do not leak into the wood series
        assert rows[(2, "wood")]["skill_consistent_prob"] == pytest.approx(5 / 10)
        assert rows[(2, "stone")] == {"epoch": 2, "skill": "stone",
                                      "skill_consistent_prob": 40 / 50, "n_events": 0}
        assert rows[(3, "stone")]["skill_consistent_prob"] == pytest.approx(1 / 4)
        assert rows[(3, "wood")]["skill_consistent_prob"] == pytest.approx(5 / 10)

    def test_history_must_cover_the_replay_length(self):
        with pytest.raises(ExportError, match="replays"):
            export_agent_game(payload_for(agent_game_epochs=10), agent_series(), "final")


@pytest.fixture(scope="module")
def real_run(tmp_path_factory):
    cfg = StudyConfig(
        study="regularity", size=12, epochs=4, steps_per_epoch=40,
        eval_window=2, agent_game_epochs=3,
    )
    out = tmp_path_factory.mktemp("xrun")
    runner.run_study(cfg, 1, out_root=out, progress=False)
    return out / runner.run_dir_name(cfg, 1)


class TestOnRealRun:
    def test_both_games_export_and_reexport_identically(self, real_run, tmp_path):
        payload, series = runner.load_run_series(real_run)
        assert exports.available_timepoints(series) == ["final"]
        market = export_market_game(payload, series, "final")
        agent = export_agent_game(payload, series, "final")
        assert sum(a["approach_weight"] for a in market["agents"]) == pytest.approx(1.0)
        assert len({a["id12"] for a in market["agents"]}) == len(market["agents"])
        assert {a["color"] for a in market["agents"]} <= {"purple", "yellow", "cyan"}
        assert len(agent["epochs"]) == 2 * 3
        for path, data in ((tmp_path / "m.json", market), (tmp_path / "a.json", agent)):
            exports.write_export(data, path)
            first = path.read_bytes()
            assert first.endswith(b"\n")
            assert json.loads(first) == data
            exports.write_export(data, path)
            assert path.read_bytes() == first
