"""Small tanh policy/value networks with hand-derived gradients.

The architecture is fixed for every model in a run: input, three tanh layers
of 64, 128, and 64 units, and either a softmax head over a discrete action
set (actors) or a single linear unit (critics).  Forward, backward, and the
Adam update are written directly against float64 numpy arrays; the backward
pass takes the gradient of the loss with respect to the head *output*
(action probabilities or the scalar value) and propagates it through the
softmax Jacobian and the tanh stack by hand, summing over the batch.

Everything here is deterministic given a generator: identical seeds give
bit-identical initializations, and forward/backward/update involve no
randomness at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "HIDDEN_SIZES",
    "NumericsError",
    "MlpParams",
    "Gradients",
    "AdamState",
    "FleetParams",
    "init_params",
    "forward",
    "forward_cached",
    "backward",
    "init_adam",
    "adam_step",
    "sample_action",
    "sample_rows",
    "log_probs",
    "entropies",
    "stack_fleet",
    "fleet_forward",
    "params_nbytes",
]

HIDDEN_SIZES = (64, 128, 64)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_TINY = 1e-300  # log() guard for probabilities that underflowed to zero


class NumericsError(FloatingPointError):
    """Raised when a forward/backward/update produces non-finite numbers."""


@dataclass
class MlpParams:
    """Weights and biases of one network; ``weights[l]`` maps layer l input to output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str  # "softmax" or "linear"

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_out(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.head
        )


@dataclass
class Gradients:
    """Parameter-shaped gradient accumulators (summed over the batch)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    m_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_weights: list[np.ndarray]
    v_biases: list[np.ndarray]
    step: int = 0


def init_params(
    n_in: int,
    n_out: int,
    head: str,
    rng: np.random.Generator,
    hidden: Sequence[int] = HIDDEN_SIZES,
) -> MlpParams:
    """Uniform fan-in initialization: W ~ U(-1/sqrt(fan_in), +), zero biases."""
    if head not in ("softmax", "linear"):
        raise ValueError(f"unknown head: {head!r}")
    if head == "linear" and n_out != 1:
        raise ValueError("linear heads emit a single value unit")
    sizes = [n_in, *hidden, n_out]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpParams(weights, biases, head)


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def forward_cached(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched forward returning output and per-layer activations for backward.

    The cache holds the input followed by each tanh layer's output; the head
    output itself is the first element of the returned pair (probabilities for
    softmax heads, an (T,) value vector for linear heads).
    """
    batch, _ = _as_batch(x)
    activations = [batch]
    h = batch
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.tanh(h @ w + b)
        activations.append(h)
    z = h @ params.weights[-1] + params.biases[-1]
    if params.head == "softmax":
        out = _softmax_rows(z)
    else:
        out = z[:, 0]
    return out, activations


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Head output: probability rows (softmax) or values (linear).

    A single observation yields a 1-D probability vector or a scalar.
    """
    single = np.asarray(x).ndim == 1
    out, _ = forward_cached(params, x)
    if single:
        return out[0] if params.head == "linear" else out[0, :]
    return out


def backward(
    params: MlpParams,
    x: np.ndarray,
    upstream: np.ndarray,
    cache: Optional[tuple[np.ndarray, list[np.ndarray]]] = None,
) -> Gradients:
    """Gradient of sum_t L_t with respect to every weight and bias.

    ``upstream`` is dL/d(head output): shape (T, n_actions) against the
    probability rows for softmax heads, or (T,) against the values for linear
    heads.  Batch contributions are summed.  Passing the (output, activations)
    pair returned by :func:`forward_cached` skips recomputing the forward pass.
    """
    if not np.isfinite(upstream).all():
        raise NumericsError("non-finite upstream gradient")
    if cache is None:
        cache = forward_cached(params, x)
    out, activations = cache
    if params.head == "softmax":
        probs = out
        upstream = np.asarray(upstream, dtype=np.float64)
        inner = (upstream * probs).sum(axis=1, keepdims=True)
        delta = probs * (upstream - inner)  # softmax Jacobian applied in place
    else:
        delta = np.asarray(upstream, dtype=np.float64).reshape(-1, 1)

    grad_w = [np.empty_like(w) for w in params.weights]
    grad_b = [np.empty_like(b) for b in params.biases]
    for layer in range(len(params.weights) - 1, -1, -1):
        h_in = activations[layer]
        grad_w[layer] = h_in.T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T) * (1.0 - h_in * h_in)
    if not np.isfinite(grad_w[0]).all():
        raise NumericsError("non-finite gradient in backward pass")
    return Gradients(grad_w, grad_b)


def init_adam(params: MlpParams) -> AdamState:
    return AdamState(
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
        step=0,
    )


def adam_step(
    params: MlpParams,
    grads: Gradients,
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> None:
    """One in-place Adam update; raises on non-finite gradients."""
    for g in grads.weights + grads.biases:
        if not np.isfinite(g).all():
            raise NumericsError("non-finite gradient passed to Adam")
    state.step += 1
    correct1 = 1.0 - beta1**state.step
    correct2 = 1.0 - beta2**state.step
    for target, grad, m, v in (
        *zip(params.weights, grads.weights, state.m_weights, state.v_weights),
        *zip(params.biases, grads.biases, state.m_biases, state.v_biases),
    ):
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * np.square(grad)
        target -= lr * (m / correct1) / (np.sqrt(v / correct2) + eps)


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> tuple[int, float]:
    """Draw an action index by inverse CDF; returns (action, log-probability)."""
    u = rng.random()
    action = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    action = min(action, len(probs) - 1)  # guard the u ~ 1.0 edge under rounding
    return action, float(np.log(max(probs[action], _TINY)))


def sample_rows(probs: np.ndarray, uniforms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse-CDF sampling, one uniform per probability row.

    Follows the same convention as :func:`sample_action`, so feeding the same
    uniforms reproduces its draws exactly.
    """
    cdf = np.cumsum(probs, axis=1)
    actions = (uniforms[:, None] >= cdf).sum(axis=1)
    np.minimum(actions, probs.shape[1] - 1, out=actions)
    picked = probs[np.arange(len(actions)), actions]
    return actions, np.log(np.maximum(picked, _TINY))


def log_probs(probs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    picked = probs[np.arange(len(actions)), actions]
    return np.log(np.maximum(picked, _TINY))


def entropies(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy of each probability row (natural log)."""
    safe = np.maximum(probs, _TINY)
    return -(probs * np.log(safe)).sum(axis=1)


@dataclass
class FleetParams:
    """Per-layer weight stacks for stepping many same-shaped nets at once."""

    weights: list[np.ndarray]  # each (n_models, fan_in, fan_out)
    biases: list[np.ndarray]  # each (n_models, fan_out)
    head: str


def stack_fleet(params_list: Sequence[MlpParams]) -> FleetParams:
    head = params_list[0].head
    n_layers = len(params_list[0].weights)
    weights = [np.stack([p.weights[l] for p in params_list]) for l in range(n_layers)]
    biases = [np.stack([p.biases[l] for p in params_list]) for l in range(n_layers)]
    return FleetParams(weights, biases, head)


def fleet_forward(fleet: FleetParams, x: np.ndarray) -> np.ndarray:
    """Forward each model on its own observation row: x is (n_models, n_in).

    Matches :func:`forward` to float precision because both reduce to the
    same dot products; returns (n_models, n_out) probability rows or
    (n_models,) values.
    """
    h = x[:, None, :]
    for w, b in zip(fleet.weights[:-1], fleet.biases[:-1]):
        h = np.tanh(np.matmul(h, w) + b[:, None, :])
    z = np.matmul(h, fleet.weights[-1])[:, 0, :] + fleet.biases[-1]
    if fleet.head == "softmax":
        return _softmax_rows(z)
    return z[:, 0]


def params_nbytes(params: MlpParams) -> int:
    return sum(w.nbytes for w in params.weights) + sum(b.nbytes for b in params.biases)
