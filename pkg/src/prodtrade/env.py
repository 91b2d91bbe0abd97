"""Core economy: specializations, inventories, and market-mediated trades.

Every agent owns a private inventory of wood, stone, and coins.  Independent
actions (chopping, mining, building) succeed with a probability set by the
agent's specialization.  Trades are mediated by a market maker who sees only
the seller's identity code and must predict which resource is on offer; a
sale completes only when the prediction matches the offer and the seller
holds enough stock.  Coins double as the reward signal: an agent's reward on
a step equals its coin delta, and the market maker is rewarded for correct
predictions that complete a sale.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "Resource",
    "Skill",
    "ActionKind",
    "MarketPrediction",
    "AgentState",
    "TransactionOutcome",
    "ActionEvent",
    "N_AGENT_ACTIONS",
    "N_MARKET_ACTIONS",
    "AGENT_OBS_DIM",
    "SKILL_SUCCESS",
    "BUILD_REWARD",
    "SALE_REWARD",
    "SALE_UNITS",
    "BUY_COST",
    "MARKET_HIT_REWARD",
    "MARKET_MISS_PENALTY",
    "MARKET_SHORT_PENALTY",
    "OBS_FLAG_THRESHOLD",
    "observe_agent",
    "extract_success_prob",
    "attempt_extract",
    "attempt_build",
    "attempt_buy",
    "resolve_sale",
    "skilled_resource",
    "prediction_for",
]


class Resource(enum.IntEnum):
    WOOD = 0
    STONE = 1


class Skill(enum.IntEnum):
    """Specialization of a producer agent."""

    CHOPPER = 0
    MINER = 1
    BUILDER = 2


class ActionKind(enum.IntEnum):
    """The seven agent actions, in the fixed order used by policy heads."""

    CHOP_WOOD = 0
    MINE_STONE = 1
    BUILD = 2
    SELL_WOOD = 3
    SELL_STONE = 4
    BUY_WOOD = 5
    BUY_STONE = 6


class MarketPrediction(enum.IntEnum):
    """Market-maker actions, aligned with ``Resource`` values."""

    PREDICT_WOOD = 0
    PREDICT_STONE = 1


N_AGENT_ACTIONS = len(ActionKind)
N_MARKET_ACTIONS = len(MarketPrediction)
AGENT_OBS_DIM = 6

# success probability of (chop, mine, build) per specialization
SKILL_SUCCESS: dict[Skill, tuple[float, float, float]] = {
    Skill.CHOPPER: (0.75, 0.25, 0.05),
    Skill.MINER: (0.25, 0.75, 0.05),
    Skill.BUILDER: (0.10, 0.10, 0.95),
}

BUILD_REWARD = 15.0
SALE_REWARD = 1.0
SALE_UNITS = 2  # units surrendered by a completed sale; also the stock minimum
BUY_COST = 2.0
MARKET_HIT_REWARD = 1.0
MARKET_MISS_PENALTY = -1.0
MARKET_SHORT_PENALTY = -0.3  # correct prediction, seller held fewer than SALE_UNITS
OBS_FLAG_THRESHOLD = 1.0  # flags require strictly more than this many units/coins

SELL_ACTION_FOR = {
    Resource.WOOD: ActionKind.SELL_WOOD,
    Resource.STONE: ActionKind.SELL_STONE,
}


def skilled_resource(skill: Skill) -> Optional[Resource]:
    """Resource a specialization extracts best, or None for builders."""
    if skill == Skill.CHOPPER:
        return Resource.WOOD
    if skill == Skill.MINER:
        return Resource.STONE
    return None


def prediction_for(resource: Resource) -> MarketPrediction:
    return MarketPrediction(int(resource))


@dataclass
class AgentState:
    """Mutable per-agent inventory and identity handle.

    ``identity`` is opaque to this module; the market side consumes it through
    the population layer.  Counts stay non-negative by construction; coins may
    go negative because purchases are not price-floored.
    """

    agent_id: str
    skill: Skill
    identity: object = None
    wood: int = 0
    stone: int = 0
    coins: float = 0.0

    def reset_inventory(self) -> None:
        self.wood = 0
        self.stone = 0
        self.coins = 0.0

    def stock(self, resource: Resource) -> int:
        return self.wood if resource == Resource.WOOD else self.stone

    def add_stock(self, resource: Resource, amount: int) -> None:
        if resource == Resource.WOOD:
            self.wood += amount
        else:
            self.stone += amount


@dataclass(frozen=True)
class TransactionOutcome:
    """Result of one offered sale."""

    coordinated: bool  # market predicted the offered resource
    completed: bool  # resources and coin actually moved
    insufficient: bool  # coordinated but seller held fewer than SALE_UNITS
    agent_reward: float
    market_reward: float


@dataclass(frozen=True)
class ActionEvent:
    """One agent-step ledger row, sufficient to replay all accounting."""

    epoch: int
    step: int
    agent_id: str
    kind: ActionKind
    success: bool
    agent_reward: float
    market_reward: float
    wood_delta: int
    stone_delta: int
    prediction: Optional[MarketPrediction] = None


def observe_agent(agent: AgentState, flag_threshold: float = OBS_FLAG_THRESHOLD) -> np.ndarray:
    """Six-dimensional private observation.

    Raw wood, stone, and coin counts followed by three indicator flags that
    turn on when the respective count strictly exceeds ``flag_threshold``.
    """
    return np.array(
        [
            float(agent.wood),
            float(agent.stone),
            float(agent.coins),
            1.0 if agent.wood > flag_threshold else 0.0,
            1.0 if agent.stone > flag_threshold else 0.0,
            1.0 if agent.coins > flag_threshold else 0.0,
        ],
        dtype=np.float64,
    )


def extract_success_prob(skill: Skill, kind: ActionKind) -> float:
    """Success probability of an independent action for a specialization."""
    chop, mine, build = SKILL_SUCCESS[skill]
    if kind == ActionKind.CHOP_WOOD:
        return chop
    if kind == ActionKind.MINE_STONE:
        return mine
    if kind == ActionKind.BUILD:
        return build
    raise ValueError(f"not an independent action: {kind!r}")


def attempt_extract(agent: AgentState, resource: Resource, rng: np.random.Generator) -> bool:
    """Try to gather one unit of ``resource``; returns True on success."""
    kind = ActionKind.CHOP_WOOD if resource == Resource.WOOD else ActionKind.MINE_STONE
    if rng.random() < extract_success_prob(agent.skill, kind):
        agent.add_stock(resource, 1)
        return True
    return False


def attempt_build(agent: AgentState, rng: np.random.Generator) -> bool:
    """Try to build: needs one wood and one stone plus a successful skill roll.

    The roll is drawn only when materials are available, so short attempts do
    not consume randomness.  On success one unit of each material is spent and
    the agent earns ``BUILD_REWARD`` coins.
    """
    if agent.wood < 1 or agent.stone < 1:
        return False
    if rng.random() < extract_success_prob(agent.skill, ActionKind.BUILD):
        agent.wood -= 1
        agent.stone -= 1
        agent.coins += BUILD_REWARD
        return True
    return False


def attempt_buy(agent: AgentState, resource: Resource) -> None:
    """Buy one unit of ``resource`` for ``BUY_COST`` coins.

    Always succeeds; coins may go negative.
    """
    agent.coins -= BUY_COST
    agent.add_stock(resource, 1)


def resolve_sale(
    agent: AgentState, offered: Resource, prediction: MarketPrediction
) -> TransactionOutcome:
    """Resolve one offered sale against the market maker's prediction.

    A sale completes only when the prediction matches the offer and the
    seller holds at least ``SALE_UNITS`` of it; the seller then surrenders
    ``SALE_UNITS`` units for ``SALE_REWARD`` coins and the market maker earns
    ``MARKET_HIT_REWARD``.  A matching prediction against short stock costs
    the market maker ``MARKET_SHORT_PENALTY``; a mismatch costs it
    ``MARKET_MISS_PENALTY``.  Failed sales leave the seller untouched.
    """
    coordinated = int(prediction) == int(offered)
    if not coordinated:
        return TransactionOutcome(False, False, False, 0.0, MARKET_MISS_PENALTY)
    if agent.stock(offered) < SALE_UNITS:
        return TransactionOutcome(True, False, True, 0.0, MARKET_SHORT_PENALTY)
    agent.add_stock(offered, -SALE_UNITS)
    agent.coins += SALE_REWARD
    return TransactionOutcome(True, True, False, SALE_REWARD, MARKET_HIT_REWARD)
