import numpy as np
import pytest

from implicitvi.models import (
    ExponentialSpec,
    GaussianSpec,
    ImplicitPosterior,
    exact_posterior,
    exponential_logpdf,
    gaussian_logpdf,
    linear_gaussian_model,
    obs_features,
    sprinkler_mean,
    sprinkler_model,
)
from implicitvi.numerics import Node, backward, make_rng
from implicitvi.numerics import autodiff as ad

LOG_2PI = np.log(2 * np.pi)


class TestGaussian:
    def test_standard_normal_at_zero(self):
        spec = GaussianSpec(np.zeros(1), np.ones(1))
        assert gaussian_logpdf(spec, np.zeros(1)).item() == pytest.approx(-0.918939, abs=1e-6)

    def test_standard_normal_at_one(self):
        spec = GaussianSpec(np.zeros(1), np.ones(1))
        assert gaussian_logpdf(spec, np.ones(1)).item() == pytest.approx(-1.418939, abs=1e-6)

    def test_two_dim_sums_components(self):
        spec = GaussianSpec(np.zeros(2), np.ones(2))
        assert gaussian_logpdf(spec, np.zeros(2)).item() == pytest.approx(-LOG_2PI, abs=1e-12)

    def test_dimension_mismatch_raises(self):
        spec = GaussianSpec(np.zeros(2), np.ones(2))
        with pytest.raises(ValueError):
            gaussian_logpdf(spec, np.zeros(3))

    def test_nonpositive_std_rejected(self):
        with pytest.raises(ValueError):
            GaussianSpec(np.zeros(1), np.zeros(1))


class TestExponential:
    def test_at_origin_mean_one(self):
        assert exponential_logpdf(ExponentialSpec(1.0), 0.0).item() == 0.0

    def test_at_mean(self):
        assert exponential_logpdf(ExponentialSpec(3.0), 3.0).item() == pytest.approx(
            -np.log(3) - 1, abs=1e-12
        )
        assert exponential_logpdf(ExponentialSpec(3.0), 3.0).item() == pytest.approx(
            -2.098612, abs=1e-6
        )

    def test_negative_support(self):
        assert exponential_logpdf(ExponentialSpec(2.0), -1.0).item() == -np.inf

    def test_nonpositive_mean_rejected(self):
        with pytest.raises(ValueError):
            ExponentialSpec(0.0)

    @pytest.mark.parametrize("mean", [0.5, 1.0, 4.0])
    def test_density_integrates_to_one(self, mean):
        # trapezoid quadrature over [0, 50 * mean]
        xs = np.linspace(0.0, 50.0 * mean, 200_001)
        dens = np.exp(exponential_logpdf(ExponentialSpec(mean), xs))
        assert np.trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-6)


class TestSprinkler:
    def test_mean_at_origin(self):
        assert sprinkler_mean(np.zeros(2)).item() == 3.0

    def test_negative_latents_clamp(self):
        assert sprinkler_mean(np.array([-5.0, -7.0])).item() == 3.0

    def test_direct_substitution(self):
        assert sprinkler_mean(np.array([1.0, 2.0])).item() == 12.0

    def test_mean_gradient_uses_relu_cube_rule(self):
        z = Node(np.array([[1.5, -0.5]]))
        backward(ad.sum(sprinkler_mean(z)))
        np.testing.assert_allclose(z.grad, [[3 * 1.5**2, 0.0]])

    def test_joint_logpdf_at_origin(self):
        model = sprinkler_model(1.0)
        got = model.joint_logpdf(np.array([0.0]), np.zeros((1, 2)))
        assert got.item() == pytest.approx(-LOG_2PI - np.log(3), abs=1e-12)
        assert got.item() == pytest.approx(-2.936489, abs=1e-6)

    def test_prior_sample_moments(self):
        model = sprinkler_model(1.0)
        zs = model.prior_sample(make_rng(0), 1_000_000)
        assert np.abs(zs.mean(axis=0)).max() < 0.005

    def test_observation_support_nonnegative(self):
        model = sprinkler_model(1.0)
        xs, _ = model.joint_sample(make_rng(1), 10_000)
        assert np.all(xs >= 0)

    def test_joint_density_normalizes_for_fixed_x(self):
        # p(x) = integral over z of exp(joint) should be finite and positive
        model = sprinkler_model(1.0)
        grid = np.linspace(-4, 4, 401)
        z1, z2 = np.meshgrid(grid, grid, indexing="ij")
        zs = np.stack([z1.ravel(), z2.ravel()], axis=1)
        for x in (0.0, 8.0):
            vals = np.exp(model.joint_logpdf(np.full(zs.shape[0], x), zs)).reshape(401, 401)
            inner = np.trapezoid(vals, grid, axis=1)
            px = np.trapezoid(inner, grid)
            assert np.isfinite(px) and px > 0

    def test_joint_z_score_matches_closed_form(self):
        model = sprinkler_model(1.0)
        zs = np.array([[0.8, -0.3], [1.5, 2.0]])
        xs = np.array([2.0, 10.0])
        got = model.joint_z_score(xs, zs)
        m = 3 + np.maximum(zs, 0) ** 3 @ np.ones(2)
        dm = 3 * np.maximum(zs, 0) ** 2
        expected = -zs + dm * (-1 / m + xs / m**2)[:, None]
        np.testing.assert_allclose(got, expected, atol=1e-12)


class TestLinearGaussian:
    def test_documented_posterior(self):
        post = exact_posterior(np.array([1.0, 1.0]), 1.0, 3.0)
        np.testing.assert_allclose(post.mean, [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(post.cov, np.array([[2, -1], [-1, 2]]) / 3, atol=1e-12)

    def test_zero_observation_symmetric(self):
        post = exact_posterior(np.array([1.0, 1.0]), 1.0, 0.0)
        np.testing.assert_allclose(post.mean, [0.0, 0.0], atol=1e-12)

    def test_uninformative_likelihood_returns_prior(self):
        post = exact_posterior(np.array([0.0, 0.0]), 1.0, 5.0)
        np.testing.assert_allclose(post.mean, np.zeros(2), atol=1e-12)
        np.testing.assert_allclose(post.cov, np.eye(2), atol=1e-12)

    def test_grid_normalized_joint_matches_closed_form(self):
        """exp(joint) normalized on a 200x200 grid vs the conjugate density
        (<= 1e-3 total variation)."""
        a, sigma, x = np.array([1.0, 1.0]), 1.0, 3.0
        model = linear_gaussian_model(a, sigma)
        post = exact_posterior(a, sigma, x)
        grid = np.linspace(-4, 4, 200)
        cell = (grid[1] - grid[0]) ** 2
        z1, z2 = np.meshgrid(grid, grid, indexing="ij")
        zs = np.stack([z1.ravel(), z2.ravel()], axis=1)
        joint = np.exp(model.joint_logpdf(np.full(zs.shape[0], x), zs))
        joint /= joint.sum() * cell
        exact = np.exp(post.logpdf(zs))
        exact /= exact.sum() * cell
        tv = 0.5 * np.abs(joint - exact).sum() * cell
        assert tv <= 1e-3

    def test_joint_z_score_matches_closed_form(self):
        a, sigma = np.array([1.0, -0.5]), 0.7
        model = linear_gaussian_model(a, sigma)
        zs = np.array([[0.3, 1.2], [-1.0, 0.4]])
        xs = np.array([1.0, -2.0])
        got = model.joint_z_score(xs, zs)
        expected = -zs + np.outer((xs - zs @ a) / sigma**2, a)
        np.testing.assert_allclose(got, expected, atol=1e-12)


class TestExplainingAway:
    def test_posterior_correlation_more_negative_at_large_x(self):
        model = sprinkler_model(1.0)
        grid = np.linspace(-4, 4, 200)
        z1, z2 = np.meshgrid(grid, grid, indexing="ij")
        zs = np.stack([z1.ravel(), z2.ravel()], axis=1)

        def grid_corr(x):
            logp = model.joint_logpdf(np.full(zs.shape[0], x), zs)
            w = np.exp(logp - logp.max())
            w /= w.sum()
            mu = w @ zs
            diff = zs - mu
            cov = (w[:, None] * diff).T @ diff
            return cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1])

        assert grid_corr(50.0) < grid_corr(0.0)


class TestImplicitPosterior:
    def test_zero_weight_generator_outputs_bias(self):
        q = ImplicitPosterior.create(2, make_rng(0), noise_dim=4, hidden=(8,))
        values = q.generator.param_values()
        values = [np.zeros_like(v) for v in values]
        values[-1] = np.array([0.7, -0.2])  # final bias
        q.generator.set_param_values(values)
        zs = q.sample(np.array([1.0, 2.0, 3.0]), make_rng(1))
        np.testing.assert_allclose(zs, np.tile([0.7, -0.2], (3, 1)))

    def test_fixed_seed_reproducible(self):
        q = ImplicitPosterior.create(2, make_rng(0))
        a = q.sample(np.zeros(5), make_rng(9))
        b = q.sample(np.zeros(5), make_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_gradient_of_mean_output_wrt_final_bias_is_one(self):
        q = ImplicitPosterior.create(1, make_rng(2), noise_dim=3, hidden=(6,))
        eps = make_rng(3).standard_normal((32, 3))
        out = ad.mean(q.sample_node(np.zeros(32), eps))
        backward(out)
        final_bias = q.generator.layers[-1].bias
        np.testing.assert_allclose(final_bias.grad, [1.0], atol=1e-12)

    def test_sampling_chunks_agree(self):
        # identical chunking is bit-identical; different chunk sizes may
        # differ by BLAS blocking at the last ulp
        q = ImplicitPosterior.create(2, make_rng(4))
        xs = np.linspace(0, 5, 1000)
        a = q.sample(xs, make_rng(5), chunk=64)
        b = q.sample(xs, make_rng(5), chunk=1000)
        c = q.sample(xs, make_rng(5), chunk=64)
        np.testing.assert_array_equal(a, c)
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_obs_features_signed_log_channel():
    feats = obs_features(np.array([0.0, 50.0, -2.0]))
    assert feats.shape == (3, 1)
    np.testing.assert_allclose(feats[:, 0], [0.0, np.log(51.0), -np.log(3.0)])
