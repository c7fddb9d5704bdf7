import numpy as np
import pytest

from rpmixer.model import (ModelConfig, build_ablation, build_model,
                           path_decompose)
from rpmixer.tensor import SeededRng, ShapeError, randn
from rpmixer.training import AdamW, mse_loss

from conftest import finite_difference_grad, random_f64, rel_err


def tiny_config(**kwargs):
    defaults = dict(n=4, t_past=8, t_future=4, n_block=2, seed=3,
                    dtype="float64")
    defaults.update(kwargs)
    return ModelConfig(**defaults)


def zero_trainable(model):
    for _, p, _ in model.parameters():
        p[...] = 0


class TestConfig:
    def test_n_rand_rounding(self):
        assert ModelConfig(n=716).n_rand == 27
        assert ModelConfig(n=1).n_rand == 1
        assert ModelConfig(n=4, m_neuron=0.01).n_rand == 1
        assert ModelConfig(n=100, m_neuron=1.0).n_rand == 10
        # round-half-up: 2.5 -> 3
        assert ModelConfig(n=25, m_neuron=0.5).n_rand == 3

    def test_validate(self):
        with pytest.raises(ValueError):
            ModelConfig(n=0).validate()
        with pytest.raises(ValueError):
            ModelConfig(n=4, n_block=0).validate()


class TestBlockForward:
    def test_identity_with_zero_weights(self, rng):
        model = build_model(tiny_config())
        zero_trainable(model)
        x = random_f64(rng, (4, 8))
        for block in model.blocks:
            y, _ = block.forward(x)
            assert np.array_equal(y, x)

    def test_definition_check(self, rng):
        model = build_model(tiny_config(n_block=1))
        block = model.blocks[0]
        x = random_f64(rng, (4, 8))
        y, cache = block.forward(x)
        m = cache["m"]  # F_temp(x) + x
        # re-run the spatial branch independently on m
        from rpmixer.layers import linear_forward, random_projection_forward
        from rpmixer.tensor import relu, transpose
        s = transpose(linear_forward(
            block.spatial_out,
            relu(random_projection_forward(block.spatial_proj,
                                           relu(transpose(m))))))
        assert np.max(np.abs((y - m) - s)) < 1e-6

    def test_shape_preserved(self, rng):
        for n, t in [(1, 1), (3, 5), (8, 12)]:
            cfg = ModelConfig(n=n, t_past=t, t_future=2, n_block=1, seed=1)
            model = build_model(cfg)
            x = randn(rng, (2, n, t))
            y, _ = model.blocks[0].forward(x)
            assert y.shape == x.shape

    def test_block_backward_finite_difference(self, rng):
        model = build_model(tiny_config(n_block=1))
        block = model.blocks[0]
        x = random_f64(rng, (2, 4, 8))
        up = random_f64(rng, (2, 4, 8))

        model.zero_grad()
        y, cache = block.forward(x)
        g_in = block.backward(cache, up)

        def loss():
            out, _ = block.forward(x)
            return float(np.sum(out * up))

        assert rel_err(g_in, finite_difference_grad(loss, x)) < 1e-4
        for name, p, g in block.parameters("b"):
            assert rel_err(g, finite_difference_grad(loss, p)) < 1e-4, name

    def test_post_activation_block_backward(self, rng):
        model = build_model(tiny_config(n_block=1, pre_activation=False))
        block = model.blocks[0]
        # zero-init biases leave intermediates exactly on ReLU kinks where a
        # whole projection row is negative; random biases break the ties
        for name, p, _ in block.parameters("b"):
            if "bias" in name or name.endswith(("b_real", "b_imag")):
                p[...] = 0.1 * random_f64(rng, p.shape)
        x = random_f64(rng, (2, 4, 8)) + 0.05
        up = random_f64(rng, (2, 4, 8))

        model.zero_grad()
        y, cache = block.forward(x)
        g_in = block.backward(cache, up)

        def loss():
            out, _ = block.forward(x)
            return float(np.sum(out * up))

        assert rel_err(g_in, finite_difference_grad(loss, x)) < 1e-4
        for name, p, g in block.parameters("b"):
            assert rel_err(g, finite_difference_grad(loss, p)) < 1e-4, name

    def test_post_activation_output_nonnegative(self, rng):
        model = build_model(tiny_config(pre_activation=False))
        y, _ = model.blocks[0].forward(random_f64(rng, (4, 8)))
        assert np.all(y >= 0)


class TestModelForward:
    def test_output_shape(self, rng):
        model = build_model(tiny_config())
        x = random_f64(rng, (5, 4, 8))
        assert model.forward(x).shape == (5, 4, 4)

    def test_zero_weights_identity_through_blocks(self, rng):
        model = build_model(tiny_config(n_block=1))
        zero_trainable(model)
        # hand-set an output layer selecting the first t_future columns
        model.output.weight[...] = np.eye(4, 8)
        x = random_f64(rng, (4, 8))
        assert np.max(np.abs(model.forward(x) - x[:, :4])) < 1e-12

    def test_doubling_linearity_of_identity_path(self, rng):
        model = build_model(tiny_config())
        zero_trainable(model)
        w = random_f64(rng, model.output.weight.shape)
        model.output.weight[...] = w
        x = random_f64(rng, (4, 8))
        assert np.max(np.abs(model.forward(2 * x) - 2 * model.forward(x))) < 1e-10

    def test_shape_mismatch(self, rng):
        model = build_model(tiny_config())
        with pytest.raises(ShapeError):
            model.forward(random_f64(rng, (3, 9)))


class TestModelBackward:
    def test_zero_upstream(self, rng):
        model = build_model(tiny_config())
        x = random_f64(rng, (2, 4, 8))
        caches = []
        y = model.forward(x, caches)
        model.zero_grad()
        g = model.backward(caches, np.zeros_like(y))
        assert not np.any(g)
        for _, _, grad in model.parameters():
            assert not np.any(grad)

    def test_whole_model_gradcheck(self, rng):
        model = build_model(tiny_config())
        x = random_f64(rng, (2, 4, 8))
        target = random_f64(rng, (2, 4, 4))

        model.zero_grad()
        model.forward_backward(x, lambda p: (mse_loss(p, target)[1], None))

        def loss():
            return mse_loss(model.forward(x), target)[0]

        for name, p, g in model.parameters():
            assert rel_err(g, finite_difference_grad(loss, p)) < 1e-4, name

    def test_stale_cache_rejected(self, rng):
        model = build_model(tiny_config())
        with pytest.raises(ValueError):
            model.backward([], random_f64(rng, (2, 4, 4)))

    def test_projection_untouched_by_step(self, rng):
        model = build_model(tiny_config(dtype="float32"))
        before = [b.spatial_proj.weight.copy() for b in model.blocks]
        x = randn(rng, (2, 4, 8))
        target = randn(rng, (2, 4, 4))
        opt = AdamW()
        for _ in range(3):
            model.zero_grad()
            model.forward_backward(x, lambda p: (mse_loss(p, target)[1], None))
            opt.step(model.parameters())
        for b, w in zip(model.blocks, before):
            assert np.array_equal(b.spatial_proj.weight, w)


class TestPathDecompose:
    def test_three_block_identity(self, rng):
        model = build_model(tiny_config(n_block=3))
        x = random_f64(rng, (2, 4, 8))
        y0, contribs, y = path_decompose(model, x)
        assert len(contribs) == 3
        total = y0 + contribs[0] + contribs[1] + contribs[2]
        assert rel_err(total, model.forward(x)) < 1e-10

    def test_zero_weights_all_contributions_zero(self, rng):
        model = build_model(tiny_config(n_block=3))
        zero_trainable(model)
        w = random_f64(rng, model.output.weight.shape)
        model.output.weight[...] = w
        x = random_f64(rng, (4, 8))
        y0, contribs, y = path_decompose(model, x)
        for c in contribs:
            assert np.max(np.abs(c)) < 1e-12
        assert np.max(np.abs(y - y0)) < 1e-12

    def test_remove_readd_recombination(self, rng):
        model = build_model(tiny_config(n_block=3))
        x = random_f64(rng, (1, 4, 8))
        y0, contribs, y = path_decompose(model, x)
        full = y0 + sum(contribs)
        for k in range(3):
            without = full - contribs[k]
            assert rel_err(without + contribs[k], y) < 1e-10

    def test_post_activation_rejected(self, rng):
        model = build_model(tiny_config(pre_activation=False))
        with pytest.raises(ValueError):
            path_decompose(model, random_f64(rng, (4, 8)))


class TestBuildAblation:
    def test_default_flags_full_model(self):
        from rpmixer.layers import ComplexLinearLayer, RandomProjectionLayer
        model = build_model(tiny_config())
        assert isinstance(model.blocks[0].temporal, ComplexLinearLayer)
        assert isinstance(model.blocks[0].spatial_proj, RandomProjectionLayer)
        assert model.blocks[0].pre_activation

    def test_trainable_projection_changes_after_step(self, rng):
        model = build_ablation(tiny_config(dtype="float32"),
                               random_projection=False)
        before = model.blocks[0].spatial_proj.weight.copy()
        x = randn(rng, (4, 4, 8))
        target = randn(rng, (4, 4, 4))
        opt = AdamW()
        model.zero_grad()
        model.forward_backward(x, lambda p: (mse_loss(p, target)[1], None))
        opt.step(model.parameters())
        assert np.any(model.blocks[0].spatial_proj.weight != before)

    def test_time_domain_ablation_uses_plain_linear(self):
        from rpmixer.layers import LinearLayer
        model = build_ablation(tiny_config(), frequency_domain=False)
        assert isinstance(model.blocks[0].temporal, LinearLayer)
        assert model.blocks[0].temporal.weight.shape == (8, 8)

    def test_distinct_projection_per_block(self):
        model = build_model(tiny_config(n_block=3))
        w0 = model.blocks[0].spatial_proj.weight
        w1 = model.blocks[1].spatial_proj.weight
        assert np.any(w0 != w1)


class TestDeterminism:
    def test_same_seed_bit_identical(self):
        a = build_model(tiny_config(dtype="float32"))
        b = build_model(tiny_config(dtype="float32"))
        for (na, pa), (nb, pb) in zip(a.state_arrays(), b.state_arrays()):
            assert na == nb
            assert np.array_equal(pa, pb)

    def test_state_roundtrip(self, rng):
        model = build_model(tiny_config(dtype="float32"))
        state = model.get_state()
        other = build_model(tiny_config(seed=99, dtype="float32"))
        other.set_state(state)
        x = randn(rng, (2, 4, 8))
        assert np.array_equal(model.forward(x), other.forward(x))
