"""Shared test oracles and drivers, implemented independently of the package.

The gradient checker perturbs parameters one coordinate at a time with
central finite differences; the returns oracle is the quadratic-time sum; the
accounting oracle replays coin/inventory deltas straight from event records.
None of these reuse the package's analytic code paths.
"""

from __future__ import annotations

import numpy as np

from prodtrade import nets, ppo

FD_STEP = 1e-5


def finite_difference(f, arr: np.ndarray, index: tuple, h: float = FD_STEP) -> float:
    """Central-difference derivative of scalar f with respect to arr[index]."""
    original = arr[index]
    arr[index] = original + h
    up = f()
    arr[index] = original - h
    down = f()
    arr[index] = original
    return (up - down) / (2.0 * h)


def relative_error(analytic: float, numeric: float) -> float:
    scale = max(abs(analytic), abs(numeric), 1e-4)
    return abs(analytic - numeric) / scale


def check_param_gradients(
    params: nets.MlpParams,
    x: np.ndarray,
    upstream: np.ndarray,
    rng: np.random.Generator,
    coords_per_tensor: int = 6,
    tol: float = 1e-4,
) -> int:
    """Compare backward() against finite differences of L = sum(out * upstream).

    Returns the number of coordinates checked; raises AssertionError on the
    first mismatch.
    """

    def loss() -> float:
        out = nets.forward(params, x)
        if params.head == "softmax":
            return float((out * upstream).sum())
        return float((np.atleast_1d(out) * upstream).sum())

    grads = nets.backward(params, x, upstream)
    checked = 0
    for tensor, grad in (
        *zip(params.weights, grads.weights),
        *zip(params.biases, grads.biases),
    ):
        flat_size = tensor.size
        k = min(coords_per_tensor, flat_size)
        picks = rng.choice(flat_size, size=k, replace=False)
        for flat in picks:
            index = np.unravel_index(flat, tensor.shape)
            numeric = finite_difference(loss, tensor, index)
            analytic = grad[index]
            err = relative_error(analytic, numeric)
            assert err < tol, (
                f"gradient mismatch at {tensor.shape}{index}: "
                f"analytic={analytic:.3e} numeric={numeric:.3e} err={err:.2e}"
            )
            checked += 1
    return checked


def brute_force_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """Quadratic-time discounted reward-to-go."""
    T = len(rewards)
    out = np.zeros(T)
    for t in range(T):
        for k in range(t, T):
            out[t] += gamma ** (k - t) * rewards[k]
    return out


def replay_accounting(events) -> dict[str, dict[str, float]]:
    """Recompute per-agent inventories and coins purely from event records."""
    ledger: dict[str, dict[str, float]] = {}
    for ev in events:
        row = ledger.setdefault(ev.agent_id, {"wood": 0, "stone": 0, "coins": 0.0})
        row["wood"] += ev.wood_delta
        row["stone"] += ev.stone_delta
        row["coins"] += ev.agent_reward
        assert row["wood"] >= 0 and row["stone"] >= 0, "negative stock in replay"
    return ledger


def run_bandit(
    seed: int,
    epochs: int = 200,
    steps_per_epoch: int = 32,
    rewards: tuple[float, float] = (1.0, 0.0),
) -> float:
    """Train one model pair on a two-armed bandit; returns final P(best arm).

    The observation is a constant zero scalar, so the task isolates the
    optimizer and surrogate logic from any representation learning.
    """
    rng = np.random.default_rng(seed)
    pair = ppo.ModelPair.create("bandit", 1, 2, rng)
    config = ppo.TrainerConfig()
    obs = np.zeros(1)
    buffer = ppo.RolloutBuffer()
    for _ in range(epochs):
        for _ in range(steps_per_epoch):
            probs = nets.forward(pair.actor, obs)
            action, logp = nets.sample_action(probs, rng)
            value = float(nets.forward(pair.critic, obs))
            buffer.store(obs.copy(), action, logp, rewards[action], value)
        ppo.train_on_epoch(pair, buffer, config)
    final = nets.forward(pair.actor, obs)
    best = int(np.argmax(rewards))
    return float(final[best])
