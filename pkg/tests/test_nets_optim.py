import numpy as np
import pytest

from implicitvi.numerics import (
    AdamState,
    Layer,
    Mlp,
    Node,
    adam_step,
    backward,
    child_rng,
    gaussian_sample,
    make_rng,
)
from implicitvi.numerics import autodiff as ad


def identity_layer(dim):
    return Layer(weight=Node(np.eye(dim)), bias=Node(np.zeros(dim)), activation="identity")


class TestMlp:
    def test_zero_weights_give_zero_output(self):
        net = Mlp.create([3, 4, 2], make_rng(0))
        net.set_param_values([np.zeros_like(v) for v in net.param_values()])
        out = net.apply_const(np.array([1.0, -2.0, 3.0]))
        np.testing.assert_array_equal(out, np.zeros(2))

    def test_identity_layer_passes_input_through(self):
        net = Mlp([identity_layer(3)])
        x = np.array([0.1, -0.2, 0.3])
        np.testing.assert_allclose(net.apply_const(x), x)

    def test_hand_evaluated_two_layer_net(self):
        # 1 -> 1 -> 1: w1=1, b1=0, tanh, w2=2, b2=1, input 0.5
        net = Mlp(
            [
                Layer(Node(np.array([[1.0]])), Node(np.zeros(1)), "tanh"),
                Layer(Node(np.array([[2.0]])), Node(np.ones(1)), "identity"),
            ]
        )
        out = net.apply_const(np.array([0.5]))
        assert out.item() == pytest.approx(2 * np.tanh(0.5) + 1, abs=1e-12)
        assert out.item() == pytest.approx(1.924234, abs=1e-6)

    def test_dimension_mismatch_raises(self):
        net = Mlp.create([3, 4, 2], make_rng(0))
        with pytest.raises(ValueError, match="features"):
            net.apply_const(np.ones((5, 4)))

    def test_non_chaining_layers_raise(self):
        with pytest.raises(ValueError, match="chain"):
            Mlp(
                [
                    Layer(Node(np.zeros((4, 3))), Node(np.zeros(4)), "tanh"),
                    Layer(Node(np.zeros((2, 5))), Node(np.zeros(2)), "identity"),
                ]
            )

    def test_glorot_init_bounds_and_zero_bias(self):
        net = Mlp.create([10, 64, 2], make_rng(1))
        w0 = net.layers[0].weight.value
        limit = np.sqrt(6.0 / (10 + 64))
        assert np.all(np.abs(w0) <= limit)
        assert np.all(net.layers[0].bias.value == 0)

    def test_roundtrip_serialization(self):
        net = Mlp.create([3, 5, 2], make_rng(2), hidden_activation="relu")
        clone = Mlp.from_dict(net.to_dict())
        x = make_rng(3).standard_normal((4, 3))
        np.testing.assert_array_equal(net.apply_const(x), clone.apply_const(x))


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        p = Node(np.array([1.0, 2.0]), name="p")
        state = AdamState()
        adam_step(state, [p], grads=[np.zeros(2)])
        np.testing.assert_array_equal(p.value, [1.0, 2.0])
        assert state.step_count == 1

    def test_first_step_moves_by_lr_times_sign(self):
        # bias-corrected first step: lr * g / (|g| + eps) ~ lr * sign(g)
        p = Node(np.array([0.0, 0.0, 0.0]), name="p")
        state = AdamState(lr=1e-3)
        g = np.array([0.5, -3.0, 1e-4])
        adam_step(state, [p], grads=[g])
        np.testing.assert_allclose(p.value, -1e-3 * np.sign(g), rtol=1e-3)

    def test_nonfinite_gradient_names_parameter(self):
        p = Node(np.zeros(2), name="gen.layer0.weight")
        with pytest.raises(FloatingPointError, match="gen.layer0.weight"):
            adam_step(AdamState(), [p], grads=[np.array([np.nan, 0.0])])

    def test_bit_identical_trajectories_for_identical_seeds(self):
        def run():
            rng = make_rng(11)
            net = Mlp.create([2, 8, 1], make_rng(12))
            state = AdamState(lr=1e-2)
            for _ in range(20):
                x = rng.standard_normal((16, 2))
                loss = ad.sum(ad.pow(net.apply(x), 2))
                backward(loss)
                adam_step(state, net.params())
            return net.param_values()

        a, b = run(), run()
        for va, vb in zip(a, b):
            np.testing.assert_array_equal(va, vb)

    def test_uses_accumulated_adjoints_by_default(self):
        p = Node(np.array([2.0]), name="p")
        loss = ad.sum(p * p)
        backward(loss)
        adam_step(AdamState(lr=0.1), [p])
        assert p.value.item() < 2.0
        # adjoints cleared after the step
        np.testing.assert_array_equal(p.grad, np.zeros(1))


class TestRng:
    def test_zero_std_returns_mean(self):
        rng = make_rng(0)
        out = gaussian_sample(rng, 5, np.array([1.0, -2.0]), 0.0)
        np.testing.assert_array_equal(out, np.tile([1.0, -2.0], (5, 1)))

    def test_negative_std_raises(self):
        with pytest.raises(ValueError):
            gaussian_sample(make_rng(0), 1, np.zeros(1), -0.1)

    def test_fixed_seed_reproducible_stream(self):
        a = gaussian_sample(make_rng(42), 10, np.zeros(3), 1.0)
        b = gaussian_sample(make_rng(42), 10, np.zeros(3), 1.0)
        np.testing.assert_array_equal(a, b)

    def test_child_streams_are_stable_and_distinct(self):
        a = child_rng(5, 1).standard_normal(4)
        b = child_rng(5, 1).standard_normal(4)
        c = child_rng(5, 2).standard_normal(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_standard_normal_moments(self):
        draws = gaussian_sample(make_rng(123), 1_000_000, np.zeros(1), 1.0)
        assert abs(draws.mean()) < 0.005
        assert abs(draws.var() - 1.0) < 0.01
