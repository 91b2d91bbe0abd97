"""Clipped-surrogate policy optimization over the hand-written networks.

Each model pair (softmax actor, linear critic) trains once per epoch on its
own on-policy rollout: discounted reward-to-go targets, advantages against
the values recorded at sampling time, and several passes (full-batch by
default, minibatched when configured) of the clipped surrogate objective

    mean_t min(r_t A_t, clip(r_t, 1-eps, 1+eps) A_t)
        - c_v * mean_t (V(s_t) - R_t)^2  + c_e * mean_t H(pi(s_t))

maximized via separate Adam updates for actor and critic (the value
coefficient is folded into the critic's gradient).  Gradients are assembled
by hand as upstream derivatives with respect to the heads' outputs and pushed
through :func:`prodtrade.nets.backward`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import nets
from .nets import AdamState, MlpParams

__all__ = [
    "TrainerConfig",
    "RolloutBuffer",
    "Batch",
    "LossReport",
    "TrainStats",
    "ModelPair",
    "discounted_returns",
    "compute_advantages",
    "ppo_loss",
    "ppo_gradients",
    "train_on_epoch",
]

ADV_NORM_EPS = 1e-8


@dataclass
class TrainerConfig:
    """Optimization constants shared by every model in a run."""

    gamma: float = 0.9
    clip_eps: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    actor_lr: float = 1e-3
    critic_lr: float = 5e-4
    update_passes: int = 4
    minibatch_size: Optional[int] = None
    normalize_advantages: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1]; got {self.gamma}")
        if self.clip_eps <= 0.0:
            raise ValueError(f"clip_eps must be positive; got {self.clip_eps}")
        if self.actor_lr <= 0.0 or self.critic_lr <= 0.0:
            raise ValueError("learning rates must be positive")
        if self.update_passes < 1:
            raise ValueError(f"update_passes must be at least 1; got {self.update_passes}")
        if self.minibatch_size is not None and self.minibatch_size < 1:
            raise ValueError(f"minibatch_size must be at least 1; got {self.minibatch_size}")
        if self.value_coef < 0.0 or self.entropy_coef < 0.0:
            raise ValueError("loss coefficients must be non-negative")


@dataclass
class Batch:
    """One epoch of transitions for a single model, as flat arrays."""

    obs: np.ndarray  # (T, obs_dim)
    actions: np.ndarray  # (T,) int
    logps: np.ndarray  # (T,) behavior log-probabilities at sampling time
    rewards: np.ndarray  # (T,)
    values: np.ndarray  # (T,) critic values at sampling time

    def __len__(self) -> int:
        return len(self.actions)

    def as_batch(self) -> "Batch":
        return self


class RolloutBuffer:
    """Append-only transition store, cleared after each training epoch."""

    def __init__(self):
        self._obs: list[np.ndarray] = []
        self._actions: list[int] = []
        self._logps: list[float] = []
        self._rewards: list[float] = []
        self._values: list[float] = []

    def store(
        self, obs: np.ndarray, action: int, logp: float, reward: float, value: float
    ) -> None:
        if not (math.isfinite(logp) and math.isfinite(reward) and math.isfinite(value)):
            raise ValueError("non-finite transition rejected by rollout buffer")
        self._obs.append(obs)
        self._actions.append(int(action))
        self._logps.append(float(logp))
        self._rewards.append(float(reward))
        self._values.append(float(value))

    def __len__(self) -> int:
        return len(self._actions)

    def clear(self) -> None:
        self._obs.clear()
        self._actions.clear()
        self._logps.clear()
        self._rewards.clear()
        self._values.clear()

    def as_batch(self) -> Batch:
        return Batch(
            np.asarray(self._obs, dtype=np.float64),
            np.asarray(self._actions, dtype=np.int64),
            np.asarray(self._logps, dtype=np.float64),
            np.asarray(self._rewards, dtype=np.float64),
            np.asarray(self._values, dtype=np.float64),
        )


@dataclass(frozen=True)
class LossReport:
    """Objective components evaluated on one pass (unweighted terms)."""

    total: float  # clip - c_v * value + c_e * entropy
    clip_term: float
    value_term: float
    entropy: float
    mean_ratio: float


@dataclass(frozen=True)
class TrainStats:
    """Per-model, per-epoch training summary (components from the last pass)."""

    steps: int
    clip_term: float
    value_term: float
    entropy: float
    mean_ratio: float


@dataclass
class ModelPair:
    """An actor/critic pair with their optimizer states."""

    model_id: str
    actor: MlpParams
    critic: MlpParams
    adam_actor: AdamState
    adam_critic: AdamState

    @classmethod
    def create(
        cls, model_id: str, n_in: int, n_actions: int, rng: np.random.Generator
    ) -> "ModelPair":
        actor = nets.init_params(n_in, n_actions, "softmax", rng)
        critic = nets.init_params(n_in, 1, "linear", rng)
        return cls(model_id, actor, critic, nets.init_adam(actor), nets.init_adam(critic))


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """Reward-to-go within one episode, bootstrapping zero past the end."""
    returns = np.empty(len(rewards), dtype=np.float64)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        returns[t] = acc
    return returns


def compute_advantages(
    returns: np.ndarray, values: np.ndarray, normalize: bool
) -> np.ndarray:
    """Advantages against sampling-time values, optionally standardized.

    Standardization is skipped for fewer than two transitions, where it would
    erase the only learning signal.
    """
    adv = returns - values
    if normalize and len(adv) >= 2:
        adv = (adv - adv.mean()) / (adv.std() + ADV_NORM_EPS)
    return adv


def _surrogate_terms(
    actor: MlpParams, batch: Batch, advantages: np.ndarray, config: TrainerConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple]:
    probs, acts = nets.forward_cached(actor, batch.obs)
    idx = np.arange(len(batch))
    p_taken = probs[idx, batch.actions]
    ratios = np.exp(np.log(np.maximum(p_taken, 1e-300)) - batch.logps)
    clipped = np.clip(ratios, 1.0 - config.clip_eps, 1.0 + config.clip_eps)
    surr1 = ratios * advantages
    surr2 = clipped * advantages
    return probs, ratios, np.minimum(surr1, surr2), (acts, idx, p_taken, surr1, surr2)


def ppo_loss(
    actor: MlpParams,
    critic: MlpParams,
    batch: Batch,
    advantages: np.ndarray,
    returns: np.ndarray,
    config: TrainerConfig,
) -> LossReport:
    """Evaluate the objective components without touching any parameters."""
    probs, ratios, surrogate, _ = _surrogate_terms(actor, batch, advantages, config)
    clip_term = float(surrogate.mean())
    values = nets.forward(critic, batch.obs)
    value_term = float(np.square(values - returns).mean())
    entropy = float(nets.entropies(probs).mean())
    total = clip_term - config.value_coef * value_term + config.entropy_coef * entropy
    return LossReport(total, clip_term, value_term, entropy, float(ratios.mean()))


def ppo_gradients(
    actor: MlpParams,
    critic: MlpParams,
    batch: Batch,
    advantages: np.ndarray,
    returns: np.ndarray,
    config: TrainerConfig,
) -> tuple[nets.Gradients, nets.Gradients, LossReport]:
    """Hand-assembled gradients of the negated objective for one pass.

    The actor upstream combines the clipped-surrogate derivative (which only
    flows where the unclipped branch is active) with the entropy bonus, both
    expressed with respect to the action probabilities; the critic upstream
    carries the value coefficient.
    """
    T = len(batch)
    probs, ratios, surrogate, extras = _surrogate_terms(actor, batch, advantages, config)
    actor_cache, idx, p_taken, surr1, surr2 = extras

    # d/dp of mean min(surr1, surr2): through the unclipped ratio only where
    # it attains the min (ties included)
    unclipped_active = surr1 <= surr2
    up_obj = np.zeros_like(probs)
    up_obj[idx, batch.actions] = np.where(
        unclipped_active, advantages * ratios / np.maximum(p_taken, 1e-300), 0.0
    ) / T
    # entropy bonus: dH/dp = -(log p + 1)
    up_obj += config.entropy_coef * (-(np.log(np.maximum(probs, 1e-300)) + 1.0)) / T
    actor_grads = nets.backward(actor, batch.obs, -up_obj, cache=(probs, actor_cache))

    values, critic_acts = nets.forward_cached(critic, batch.obs)
    value_err = values - returns
    critic_up = config.value_coef * 2.0 * value_err / T
    critic_grads = nets.backward(critic, batch.obs, critic_up, cache=(values, critic_acts))

    clip_term = float(surrogate.mean())
    value_term = float(np.square(value_err).mean())
    entropy = float(nets.entropies(probs).mean())
    total = clip_term - config.value_coef * value_term + config.entropy_coef * entropy
    report = LossReport(total, clip_term, value_term, entropy, float(ratios.mean()))
    return actor_grads, critic_grads, report


def _slice_batch(batch: Batch, lo: int, hi: int) -> Batch:
    return Batch(
        batch.obs[lo:hi],
        batch.actions[lo:hi],
        batch.logps[lo:hi],
        batch.rewards[lo:hi],
        batch.values[lo:hi],
    )


def train_on_epoch(
    model: ModelPair,
    data: Union[RolloutBuffer, Batch],
    config: TrainerConfig,
) -> Optional[TrainStats]:
    """Run the configured number of update passes on one epoch of data.

    Advantage targets are fixed from sampling-time values before the first
    pass, standardized over the whole buffer.  Each pass walks the buffer in
    contiguous minibatches of ``config.minibatch_size`` transitions (the whole
    buffer when None), taking one Adam step per minibatch, so the number of
    optimizer steps grows with the amount of experience collected.  Chunk
    boundaries are fixed by position, keeping training bit-reproducible
    without a shuffling RNG.  A rollout buffer is cleared afterwards so
    transitions never leak across epochs.  Returns None (and changes nothing)
    on an empty epoch.
    """
    if len(data) == 0:
        return None
    batch = data.as_batch()
    T = len(batch)
    returns = discounted_returns(batch.rewards, config.gamma)
    advantages = compute_advantages(returns, batch.values, config.normalize_advantages)
    chunk = T if config.minibatch_size is None else min(config.minibatch_size, T)
    bounds = [(lo, min(lo + chunk, T)) for lo in range(0, T, chunk)]
    last_pass: list[tuple[int, LossReport]] = []
    for p in range(config.update_passes):
        for lo, hi in bounds:
            actor_grads, critic_grads, report = ppo_gradients(
                model.actor,
                model.critic,
                _slice_batch(batch, lo, hi),
                advantages[lo:hi],
                returns[lo:hi],
                config,
            )
            nets.adam_step(model.actor, actor_grads, model.adam_actor, config.actor_lr)
            nets.adam_step(model.critic, critic_grads, model.adam_critic, config.critic_lr)
            if p == config.update_passes - 1:
                last_pass.append((hi - lo, report))
    if isinstance(data, RolloutBuffer):
        data.clear()
    # per-step weighting makes the single-chunk case match a plain full batch
    weights = np.array([n for n, _ in last_pass], dtype=np.float64)
    weights /= weights.sum()
    agg = [
        float(np.dot(weights, [getattr(r, name) for _, r in last_pass]))
        for name in ("clip_term", "value_term", "entropy", "mean_ratio")
    ]
    return TrainStats(T, agg[0], agg[1], agg[2], agg[3])
