"""Simulation core: one world of producer agents plus a market maker.

Within an epoch every agent acts once per step in a freshly shuffled order;
parameters stay frozen while transitions accumulate, and every model (each
agent and the market maker) trains exactly once at the epoch boundary on its
own transitions, so all policies learn simultaneously between epochs, never
within one.  Inventories and coins reset at the start of each epoch.

The market maker observes nothing but the seller's 16-digit identity code,
one transition per offered sale, rewarded +1 for a prediction that completes
a sale, -1 for a mismatch, and -0.3 for a correct call against short stock.

Generational turnover swaps retiring founders out of their slots: the
newcomer takes the slot with a fresh identity code, a fresh model, and an
empty inventory, while the departed agent's model is dropped and never acts
again.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import nets, ppo
from .config import StudyConfig, scheme_for_study
from .env import (
    ActionEvent,
    ActionKind,
    AgentState,
    MarketPrediction,
    N_AGENT_ACTIONS,
    N_MARKET_ACTIONS,
    Resource,
    Skill,
    attempt_build,
    attempt_buy,
    attempt_extract,
    observe_agent,
    resolve_sale,
    skilled_resource,
)
from .population import (
    AgentRecord,
    CODE_LENGTH,
    GroupLabel,
    IdentityCode,
    Population,
    ProbeCode,
    ProbeSet,
    build_population,
)
from .rng import RunStreams

__all__ = ["EpochLog", "WorldState", "world_to_tree", "world_from_tree"]

AGENT_OBS_DIM = 6
_SELL_KINDS = (int(ActionKind.SELL_WOOD), int(ActionKind.SELL_STONE))


@dataclass
class EpochLog:
    """Per-epoch counters sufficient for every published measure.

    ``attempts`` counts action choices (offers equal sell attempts);
    ``successes`` counts completed outcomes (buys always complete);
    ``pred_skill_match`` counts market predictions that named the seller's
    skilled resource, and stays zero for builders, who have none.
    """

    epoch: int
    agent_ids: list[str]
    attempts: np.ndarray  # (n_slots, n_actions) int64
    successes: np.ndarray  # (n_slots, n_actions) int64
    pred_skill_match: np.ndarray  # (n_slots,) int64
    coins: np.ndarray  # (n_slots,) float64, epoch-end balance
    market_events: int
    market_reward: float
    agent_train_stats: Optional[list[ppo.TrainStats]] = None
    market_train_stats: Optional[ppo.TrainStats] = None
    events: Optional[list[ActionEvent]] = None


class WorldState:
    """All mutable state of one run between epochs."""

    def __init__(self, config: StudyConfig, seed: int):
        self.config = config
        self.seed = seed
        self.streams = RunStreams(seed)
        scheme = scheme_for_study(config.study)
        self.population = build_population(
            scheme, config.size, self.streams.population, config.probes_per_group
        )
        self.slots: list[AgentRecord] = list(self.population.records)
        self.agents: list[AgentState] = [
            AgentState(r.agent_id, r.skill, r.code) for r in self.slots
        ]
        self.models: list[ppo.ModelPair] = [
            ppo.ModelPair.create(r.agent_id, AGENT_OBS_DIM, N_AGENT_ACTIONS, self.streams.init)
            for r in self.slots
        ]
        self.market = ppo.ModelPair.create(
            "market0", CODE_LENGTH, N_MARKET_ACTIONS, self.streams.init
        )
        self.market_generation = 0
        self.epoch = 0
        self.wave = 0
        self.boundaries: dict[str, int] = {}
        self._refresh_slot_caches()

    # -- slot-aligned caches -------------------------------------------------

    def _refresh_slot_caches(self) -> None:
        self.code_obs = np.stack([r.code.as_obs for r in self.slots])
        self.skilled_res = np.array(
            [
                -1 if skilled_resource(r.skill) is None else int(skilled_resource(r.skill))
                for r in self.slots
            ],
            dtype=np.int64,
        )
        self._actor_fleet = nets.stack_fleet([m.actor for m in self.models])

    def refresh_after_training(self) -> None:
        self._actor_fleet = nets.stack_fleet([m.actor for m in self.models])

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    def roster_view(self) -> dict[str, np.ndarray]:
        """Slot-aligned metadata arrays for metric aggregation."""
        group = np.array(
            [-1 if r.group is None else int(r.group) for r in self.slots], dtype=np.int64
        )
        skill = np.array([int(r.skill) for r in self.slots], dtype=np.int64)
        wave = np.array([r.wave for r in self.slots], dtype=np.int64)
        return {"group": group, "skill": skill, "wave": wave}

    # -- one epoch -----------------------------------------------------------

    def run_epoch(self, train: bool = True, collect_events: bool = False) -> EpochLog:
        config = self.config
        n, T = self.n_slots, config.steps_per_epoch
        threshold = config.flag_threshold
        env_rng = self.streams.env
        agents = self.agents

        for agent in agents:
            agent.reset_inventory()

        obs_buf = np.empty((n, T, AGENT_OBS_DIM))
        action_buf = np.empty((n, T), dtype=np.int64)
        logp_buf = np.empty((n, T))
        reward_buf = np.empty((n, T))
        attempts = np.zeros((n, N_AGENT_ACTIONS), dtype=np.int64)
        successes = np.zeros((n, N_AGENT_ACTIONS), dtype=np.int64)
        pred_skill_match = np.zeros(n, dtype=np.int64)
        market_slots: list[int] = []
        market_actions: list[int] = []
        market_logps: list[float] = []
        market_rewards: list[float] = []
        events: Optional[list[ActionEvent]] = [] if collect_events else None

        obs_now = np.empty((n, AGENT_OBS_DIM))
        success_now = np.empty(n, dtype=np.int64)
        all_slots = np.arange(n)

        for step in range(T):
            order = self.streams.order.permutation(n)
            for i in range(n):
                obs_now[i] = observe_agent(agents[i], threshold)
            probs = nets.fleet_forward(self._actor_fleet, obs_now)
            uniforms = self.streams.agent_policy.random(n)
            acts, logps = nets.sample_rows(probs, uniforms)
            obs_buf[:, step] = obs_now
            action_buf[:, step] = acts
            logp_buf[:, step] = logps

            sellers = [i for i in order if acts[i] in _SELL_KINDS]
            if sellers:
                seller_idx = np.array(sellers)
                m_probs = nets.forward(self.market.actor, self.code_obs[seller_idx])
                m_uniforms = self.streams.market_policy.random(len(sellers))
                m_acts, m_logps = nets.sample_rows(m_probs, m_uniforms)
            sell_ptr = 0

            for i in order:
                agent = agents[i]
                act = int(acts[i])
                coins_before = agent.coins
                wood_before, stone_before = agent.wood, agent.stone
                prediction = None
                if act == ActionKind.CHOP_WOOD:
                    ok = attempt_extract(agent, Resource.WOOD, env_rng)
                elif act == ActionKind.MINE_STONE:
                    ok = attempt_extract(agent, Resource.STONE, env_rng)
                elif act == ActionKind.BUILD:
                    ok = attempt_build(agent, env_rng)
                elif act in _SELL_KINDS:
                    offered = Resource.WOOD if act == ActionKind.SELL_WOOD else Resource.STONE
                    prediction = MarketPrediction(int(m_acts[sell_ptr]))
                    outcome = resolve_sale(agent, offered, prediction)
                    ok = outcome.completed
                    market_slots.append(i)
                    market_actions.append(int(prediction))
                    market_logps.append(float(m_logps[sell_ptr]))
                    market_rewards.append(outcome.market_reward)
                    if int(prediction) == self.skilled_res[i]:
                        pred_skill_match[i] += 1
                    sell_ptr += 1
                elif act == ActionKind.BUY_WOOD:
                    attempt_buy(agent, Resource.WOOD)
                    ok = True
                else:
                    attempt_buy(agent, Resource.STONE)
                    ok = True
                reward_buf[i, step] = agent.coins - coins_before
                success_now[i] = ok
                if events is not None:
                    events.append(
                        ActionEvent(
                            epoch=self.epoch,
                            step=step,
                            agent_id=agent.agent_id,
                            kind=ActionKind(act),
                            success=bool(ok),
                            agent_reward=agent.coins - coins_before,
                            market_reward=market_rewards[-1] if prediction is not None else 0.0,
                            wood_delta=agent.wood - wood_before,
                            stone_delta=agent.stone - stone_before,
                            prediction=prediction,
                        )
                    )
            np.add.at(attempts, (all_slots, acts), 1)
            np.add.at(successes, (all_slots, acts), success_now)

        coins = np.array([a.coins for a in agents])
        log = EpochLog(
            epoch=self.epoch,
            agent_ids=[r.agent_id for r in self.slots],
            attempts=attempts,
            successes=successes,
            pred_skill_match=pred_skill_match,
            coins=coins,
            market_events=len(market_slots),
            market_reward=float(sum(market_rewards)),
            events=events,
        )
        if train:
            log.agent_train_stats, log.market_train_stats = self._train_all(
                obs_buf, action_buf, logp_buf, reward_buf,
                market_slots, market_actions, market_logps, market_rewards,
            )
            self.refresh_after_training()
        self.epoch += 1
        return log

    def _train_all(self, obs_buf, action_buf, logp_buf, reward_buf,
                   market_slots, market_actions, market_logps, market_rewards):
        trainer = self.config.trainer
        agent_stats = []
        for i, pair in enumerate(self.models):
            obs_i = np.ascontiguousarray(obs_buf[i])
            values = nets.forward(pair.critic, obs_i)
            batch = ppo.Batch(obs_i, action_buf[i], logp_buf[i], reward_buf[i], values)
            agent_stats.append(ppo.train_on_epoch(pair, batch, trainer))
        market_stats = None
        if market_slots:
            m_obs = self.code_obs[np.array(market_slots)]
            m_actions = np.array(market_actions, dtype=np.int64)
            m_logps = np.array(market_logps)
            m_rewards = np.array(market_rewards)
            m_values = nets.forward(self.market.critic, m_obs)
            batch = ppo.Batch(m_obs, m_actions, m_logps, m_rewards, m_values)
            market_stats = ppo.train_on_epoch(self.market, batch, trainer)
        return agent_stats, market_stats

    # -- generational turnover -------------------------------------------------

    def apply_wave(self, wave_index: int) -> list[str]:
        """Retire one wave of founders per group; returns retired agent ids.

        The wave quota is a fixed fraction of each group's founding size, so
        the configured number of waves retires every founder exactly.
        Selection is uniform among surviving founders; newcomers take the
        vacated slots with fresh codes, models, and inventories.
        """
        schedule = self.config.replacement
        retired: list[str] = []
        for group in GroupLabel:
            founders = [s for s, r in enumerate(self.slots) if r.group == group and r.wave == 0]
            group_founding_size = sum(
                1 for r in self.population.records if r.group == group and r.wave == 0
            )
            quota = round(group_founding_size * schedule.fraction)
            if quota > len(founders):
                raise ValueError(
                    f"wave {wave_index} needs {quota} retirements in {group.color} "
                    f"but only {len(founders)} founders remain"
                )
            pick = self.streams.population.choice(len(founders), size=quota, replace=False)
            chosen_slots = sorted(founders[k] for k in pick)
            cohort = self.population.make_replacement_cohort(
                group, quota, wave_index, self.streams.population
            )
            for slot, record in zip(chosen_slots, cohort):
                retired.append(self.slots[slot].agent_id)
                self.slots[slot] = record
                self.agents[slot] = AgentState(record.agent_id, record.skill, record.code)
                self.models[slot] = ppo.ModelPair.create(
                    record.agent_id, AGENT_OBS_DIM, N_AGENT_ACTIONS, self.streams.init
                )
        self.wave = wave_index
        self._refresh_slot_caches()
        return retired

    def replace_market(self) -> None:
        """Swap in a freshly initialized market maker; the old one is dropped."""
        self.market_generation += 1
        self.market = ppo.ModelPair.create(
            f"market{self.market_generation}", CODE_LENGTH, N_MARKET_ACTIONS, self.streams.init
        )


# -- checkpoint serialization --------------------------------------------------


def _params_tree(params: nets.MlpParams) -> dict:
    return {"head": params.head, "weights": list(params.weights), "biases": list(params.biases)}


def _params_from_tree(tree: dict) -> nets.MlpParams:
    return nets.MlpParams(list(tree["weights"]), list(tree["biases"]), tree["head"])


def _adam_tree(state: nets.AdamState) -> dict:
    return {
        "mw": list(state.m_weights),
        "mb": list(state.m_biases),
        "vw": list(state.v_weights),
        "vb": list(state.v_biases),
        "step": state.step,
    }


def _adam_from_tree(tree: dict) -> nets.AdamState:
    return nets.AdamState(
        list(tree["mw"]), list(tree["mb"]), list(tree["vw"]), list(tree["vb"]), tree["step"]
    )


def _pair_tree(pair: ppo.ModelPair) -> dict:
    return {
        "id": pair.model_id,
        "actor": _params_tree(pair.actor),
        "critic": _params_tree(pair.critic),
        "adam_actor": _adam_tree(pair.adam_actor),
        "adam_critic": _adam_tree(pair.adam_critic),
    }


def _pair_from_tree(tree: dict) -> ppo.ModelPair:
    return ppo.ModelPair(
        tree["id"],
        _params_from_tree(tree["actor"]),
        _params_from_tree(tree["critic"]),
        _adam_from_tree(tree["adam_actor"]),
        _adam_from_tree(tree["adam_critic"]),
    )


def _group_key(group: Optional[GroupLabel]) -> str:
    return "all" if group is None else f"g{int(group)}"


def _group_from_key(key: str) -> Optional[GroupLabel]:
    return None if key == "all" else GroupLabel(int(key[1:]))


def world_to_tree(world: WorldState, config_dict: dict) -> dict:
    """Full state snapshot at an epoch boundary (buffers are always empty)."""
    pop = world.population
    return {
        "kind": "world",
        "config": config_dict,
        "seed": world.seed,
        "epoch": world.epoch,
        "wave": world.wave,
        "market_generation": world.market_generation,
        "boundaries": dict(world.boundaries),
        "records": [
            {
                "id": r.agent_id,
                "code": r.code.as_string,
                "skill": int(r.skill),
                "group": -1 if r.group is None else int(r.group),
                "wave": r.wave,
            }
            for r in pop.records
        ],
        "slot_ids": [r.agent_id for r in world.slots],
        "next_ordinal": pop._next_id,
        "used_suffixes": {
            _group_key(g): sorted(int(v) for v in used)
            for g, used in sorted(pop._used_suffixes.items(), key=lambda kv: _group_key(kv[0]))
        },
        "probe_sets": [
            {
                "group": -1 if ps.group is None else int(ps.group),
                "mix": ps.truth_mix,
                "codes": [p.code.as_string for p in ps.probes],
                "skills": [int(p.skill) for p in ps.probes],
            }
            for ps in pop.probe_sets
        ],
        "models": {r.agent_id: _pair_tree(m) for r, m in zip(world.slots, world.models)},
        "market": _pair_tree(world.market),
        "rng": world.streams.get_state(),
    }


def world_from_tree(tree: dict, config: StudyConfig) -> WorldState:
    """Reconstruct a world exactly; continuing it reproduces an unbroken run."""
    world = WorldState.__new__(WorldState)
    world.config = config
    world.seed = tree["seed"]
    world.epoch = tree["epoch"]
    world.wave = tree["wave"]
    world.market_generation = tree["market_generation"]
    world.boundaries = dict(tree["boundaries"])

    pop = Population(scheme_for_study(config.study))
    for row in tree["records"]:
        group = None if row["group"] == -1 else GroupLabel(row["group"])
        pop.records.append(
            AgentRecord(
                row["id"], IdentityCode.from_string(row["code"]), Skill(row["skill"]), group,
                row["wave"],
            )
        )
    pop._next_id = tree["next_ordinal"]
    pop._used_suffixes = {
        _group_from_key(key): set(values) for key, values in tree["used_suffixes"].items()
    }
    for ps in tree["probe_sets"]:
        group = None if ps["group"] == -1 else GroupLabel(ps["group"])
        probes = [
            ProbeCode(IdentityCode.from_string(code), Skill(skill))
            for code, skill in zip(ps["codes"], ps["skills"])
        ]
        pop.probe_sets.append(ProbeSet(group, probes, ps["mix"]))
    world.population = pop

    by_id = {r.agent_id: r for r in pop.records}
    world.slots = [by_id[agent_id] for agent_id in tree["slot_ids"]]
    world.agents = [AgentState(r.agent_id, r.skill, r.code) for r in world.slots]
    world.models = [_pair_from_tree(tree["models"][r.agent_id]) for r in world.slots]
    world.market = _pair_from_tree(tree["market"])
    world.streams = RunStreams.from_state(tree["rng"])
    world._refresh_slot_caches()
    return world
