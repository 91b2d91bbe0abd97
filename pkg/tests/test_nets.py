"""Network forward/backward/update checks against independent oracles.

The backward pass is validated coordinate-by-coordinate against central
finite differences of the forward pass; Adam against its closed-form first
step; sampling against frequency counts and a shared-uniform equivalence.
"""

import numpy as np
import pytest

import support
from prodtrade import nets


def random_net(rng, head, n_in=None, n_out=None, hidden=None):
    n_in = n_in or int(rng.integers(2, 8))
    if n_out is None:
        n_out = 1 if head == "linear" else int(rng.integers(2, 6))
    hidden = hidden or tuple(int(rng.integers(3, 9)) for _ in range(3))
    return nets.init_params(n_in, n_out, head, rng, hidden=hidden)


class TestForward:
    def test_shapes_full_architecture(self):
        rng = np.random.default_rng(0)
        actor = nets.init_params(6, 7, "softmax", rng)
        critic = nets.init_params(6, 1, "linear", rng)
        assert [w.shape for w in actor.weights] == [(6, 64), (64, 128), (128, 64), (64, 7)]
        assert [w.shape for w in critic.weights] == [(6, 64), (64, 128), (128, 64), (64, 1)]
        x = rng.standard_normal(6)
        probs = nets.forward(actor, x)
        assert probs.shape == (7,)
        value = nets.forward(critic, x)
        assert np.isscalar(value) or value.shape == ()
        batch = rng.standard_normal((11, 6))
        assert nets.forward(actor, batch).shape == (11, 7)
        assert nets.forward(critic, batch).shape == (11,)

    def test_probabilities_normalized_and_positive(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            net = random_net(rng, "softmax")
            x = rng.standard_normal((5, net.n_in)) * 3
            probs = nets.forward(net, x)
            np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
            assert (probs > 0).all()

    def test_logit_shift_invariance(self):
        rng = np.random.default_rng(2)
        net = random_net(rng, "softmax")
        x = rng.standard_normal(net.n_in)
        before = nets.forward(net, x)
        net.biases[-1] += 123.456  # uniform logit shift
        after = nets.forward(net, x)
        np.testing.assert_allclose(before, after, atol=1e-9)

    def test_zero_weights_give_uniform_and_zero(self):
        rng = np.random.default_rng(3)
        actor = nets.init_params(6, 7, "softmax", rng)
        critic = nets.init_params(6, 1, "linear", rng)
        for net in (actor, critic):
            for w in net.weights:
                w[:] = 0.0
        x = rng.standard_normal(6)
        np.testing.assert_array_equal(nets.forward(actor, x), np.full(7, 1 / 7))
        assert nets.forward(critic, x) == 0.0

    def test_forward_deterministic(self):
        rng = np.random.default_rng(4)
        net = random_net(rng, "softmax")
        x = rng.standard_normal((3, net.n_in))
        a = nets.forward(net, x)
        b = nets.forward(net, x)
        assert a.tobytes() == b.tobytes()


class TestInit:
    def test_fan_in_bounds_and_zero_biases(self):
        rng = np.random.default_rng(5)
        net = nets.init_params(6, 7, "softmax", rng)
        sizes = [6, 64, 128, 64]
        for w, b, fan_in in zip(net.weights, net.biases, sizes):
            assert np.abs(w).max() <= 1.0 / np.sqrt(fan_in)
            assert np.abs(w).max() > 0.5 / np.sqrt(fan_in)  # not degenerate
            np.testing.assert_array_equal(b, 0.0)

    def test_same_seed_bit_identical(self):
        a = nets.init_params(6, 7, "softmax", np.random.default_rng(99))
        b = nets.init_params(6, 7, "softmax", np.random.default_rng(99))
        for wa, wb in zip(a.weights, b.weights):
            assert wa.tobytes() == wb.tobytes()

    def test_bad_head_rejected(self):
        with pytest.raises(ValueError):
            nets.init_params(6, 7, "sigmoid", np.random.default_rng(0))


class TestGradientsAgainstFiniteDifferences:
    def test_random_cases_both_heads(self):
        rng = np.random.default_rng(10)
        checked = 0
        for case in range(30):
            for head in ("softmax", "linear"):
                net = random_net(rng, head)
                batch = int(rng.integers(1, 5))
                x = rng.standard_normal((batch, net.n_in))
                if head == "softmax":
                    upstream = rng.standard_normal((batch, net.n_out))
                else:
                    upstream = rng.standard_normal(batch)
                checked += support.check_param_gradients(net, x, upstream, rng)
        assert checked >= 100

    def test_full_architecture_spot_checks(self):
        rng = np.random.default_rng(11)
        actor = nets.init_params(16, 2, "softmax", rng)
        x = (rng.random((3, 16)) > 0.5).astype(float)
        upstream = rng.standard_normal((3, 2))
        support.check_param_gradients(actor, x, upstream, rng, coords_per_tensor=4)
        critic = nets.init_params(6, 1, "linear", rng)
        xc = rng.standard_normal((4, 6))
        support.check_param_gradients(critic, xc, rng.standard_normal(4), rng, 4)

    def test_log_prob_gradient(self):
        # upstream for sum_t log p(a_t): 1/p at the taken action
        rng = np.random.default_rng(12)
        net = random_net(rng, "softmax")
        T = 3
        x = rng.standard_normal((T, net.n_in))
        actions = rng.integers(0, net.n_out, T)

        def loss():
            p = nets.forward(net, x)
            return float(np.log(p[np.arange(T), actions]).sum())

        probs = nets.forward(net, x)
        upstream = np.zeros_like(probs)
        upstream[np.arange(T), actions] = 1.0 / probs[np.arange(T), actions]
        grads = nets.backward(net, x, upstream)
        for tensor, grad in zip(net.weights, grads.weights):
            for flat in rng.choice(tensor.size, size=min(6, tensor.size), replace=False):
                idx = np.unravel_index(flat, tensor.shape)
                numeric = support.finite_difference(loss, tensor, idx)
                assert support.relative_error(grad[idx], numeric) < 1e-4

    def test_entropy_gradient(self):
        # upstream for sum_t H_t: -(log p + 1)
        rng = np.random.default_rng(13)
        net = random_net(rng, "softmax")
        x = rng.standard_normal((4, net.n_in))

        def loss():
            p = nets.forward(net, x)
            return float(-(p * np.log(p)).sum())

        probs = nets.forward(net, x)
        upstream = -(np.log(probs) + 1.0)
        grads = nets.backward(net, x, upstream)
        for tensor, grad in zip(net.weights, grads.weights):
            for flat in rng.choice(tensor.size, size=min(6, tensor.size), replace=False):
                idx = np.unravel_index(flat, tensor.shape)
                numeric = support.finite_difference(loss, tensor, idx)
                assert support.relative_error(grad[idx], numeric) < 1e-4

    def test_batch_gradient_is_sum_of_singles(self):
        rng = np.random.default_rng(14)
        net = random_net(rng, "softmax")
        x = rng.standard_normal((3, net.n_in))
        upstream = rng.standard_normal((3, net.n_out))
        both = nets.backward(net, x, upstream)
        acc = [np.zeros_like(w) for w in net.weights]
        for t in range(3):
            single = nets.backward(net, x[t : t + 1], upstream[t : t + 1])
            for a, g in zip(acc, single.weights):
                a += g
        for a, g in zip(acc, both.weights):
            np.testing.assert_allclose(a, g, atol=1e-12)

    def test_non_finite_upstream_raises(self):
        rng = np.random.default_rng(15)
        net = random_net(rng, "linear")
        x = rng.standard_normal((2, net.n_in))
        with pytest.raises(nets.NumericsError):
            nets.backward(net, x, np.array([np.inf, 1.0]))


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        rng = np.random.default_rng(20)
        net = random_net(rng, "linear")
        state = nets.init_adam(net)
        before = [w.copy() for w in net.weights]
        zero = nets.Gradients(
            [np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases]
        )
        nets.adam_step(net, zero, state, lr=1e-3)
        assert state.step == 1
        for w0, w1 in zip(before, net.weights):
            assert w0.tobytes() == w1.tobytes()

    def test_first_step_closed_form(self):
        # with fresh moments the first update is -lr * g / (|g| + eps)
        rng = np.random.default_rng(21)
        net = random_net(rng, "linear")
        state = nets.init_adam(net)
        grads = nets.Gradients(
            [rng.standard_normal(w.shape) for w in net.weights],
            [rng.standard_normal(b.shape) for b in net.biases],
        )
        before = [w.copy() for w in net.weights]
        lr = 1e-3
        nets.adam_step(net, grads, state, lr=lr)
        for w0, w1, g in zip(before, net.weights, grads.weights):
            expected = w0 - lr * g / (np.abs(g) + nets.ADAM_EPS)
            np.testing.assert_allclose(w1, expected, atol=1e-12)

    def test_step_counter_increments(self):
        rng = np.random.default_rng(22)
        net = random_net(rng, "linear")
        state = nets.init_adam(net)
        zero = nets.Gradients(
            [np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases]
        )
        for expected in (1, 2, 3):
            nets.adam_step(net, zero, state, lr=1e-3)
            assert state.step == expected

    def test_non_finite_gradient_rejected(self):
        rng = np.random.default_rng(23)
        net = random_net(rng, "linear")
        state = nets.init_adam(net)
        bad = nets.Gradients(
            [np.full_like(w, np.nan) for w in net.weights],
            [np.zeros_like(b) for b in net.biases],
        )
        with pytest.raises(nets.NumericsError):
            nets.adam_step(net, bad, state, lr=1e-3)


class _ScriptedRng:
    """Minimal stand-in yielding a scripted sequence of uniforms."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


class TestSampling:
    def test_degenerate_distributions(self):
        rng = np.random.default_rng(30)
        assert nets.sample_action(np.array([1.0, 0.0, 0.0]), rng)[0] == 0
        assert nets.sample_action(np.array([0.0, 0.0, 1.0]), rng)[0] == 2

    def test_frequencies(self):
        rng = np.random.default_rng(31)
        probs = np.array([0.75, 0.25])
        draws = [nets.sample_action(probs, rng)[0] for _ in range(20_000)]
        assert abs(np.mean(draws) - 0.25) < 0.01

    def test_logp_matches_distribution(self):
        rng = np.random.default_rng(32)
        probs = np.array([0.2, 0.5, 0.3])
        for _ in range(50):
            action, logp = nets.sample_action(probs, rng)
            assert logp == pytest.approx(np.log(probs[action]))

    def test_rows_match_single_sampler(self):
        rng = np.random.default_rng(33)
        probs = rng.dirichlet(np.ones(7), size=40)
        uniforms = rng.random(40)
        actions_v, logps_v = nets.sample_rows(probs, uniforms)
        for t in range(40):
            action, logp = nets.sample_action(probs[t], _ScriptedRng([uniforms[t]]))
            assert action == actions_v[t]
            assert logp == pytest.approx(logps_v[t], abs=1e-12)

    def test_extreme_uniform_stays_in_range(self):
        probs = np.array([0.5, 0.5])
        actions, _ = nets.sample_rows(probs[None, :], np.array([0.9999999999999999]))
        assert actions[0] in (0, 1)


class TestFleet:
    def test_fleet_matches_individual_forward(self):
        rng = np.random.default_rng(40)
        for head, n_in, n_out in (("softmax", 6, 7), ("linear", 6, 1), ("softmax", 16, 2)):
            models = [nets.init_params(n_in, n_out, head, rng) for _ in range(9)]
            fleet = nets.stack_fleet(models)
            x = rng.standard_normal((9, n_in))
            batched = nets.fleet_forward(fleet, x)
            for i, model in enumerate(models):
                single = nets.forward(model, x[i])
                np.testing.assert_allclose(batched[i], single, atol=1e-12)
