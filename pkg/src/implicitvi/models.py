"""Probability building blocks and the two benchmark latent-variable models.

Both models have a 2-D latent and a scalar observation:

* ``sprinkler_model``: z ~ N(0, sigma^2 I), x ~ Exponential with mean
  ``3 + max(0, z1)^3 + max(0, z2)^3``. Either latent taking a large value can
  explain a large x, so conditioning induces anti-correlation between the
  a-priori independent latents (explaining away).
* ``linear_gaussian_model``: z ~ N(0, I), x ~ N(a . z, sigma_obs^2), whose
  posterior is Gaussian in closed form and serves as an exact oracle.

Log-densities are written with the lifted autodiff operations, so they accept
plain arrays (returning arrays) or tape nodes (returning nodes); the score
with respect to z is then available by a backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .numerics import autodiff as ad
from .numerics import Mlp, Node, Rng, backward

LOG_2PI = float(np.log(2.0 * np.pi))

# Observations enter every conditioned network as sign(x) * log1p(|x|) only:
# a raw-x channel at x = 50 drives tanh layers deep into saturation and halts
# learning exactly where the sprinkler posterior is hardest.
OBS_FEATURE_DIM = 1


def obs_features(xs) -> np.ndarray:
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    return np.stack([np.sign(xs) * np.log1p(np.abs(xs))], axis=-1)


# ---------------------------------------------------------------------------
# elementary distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianSpec:
    """Diagonal Gaussian with elementwise positive std."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=np.float64)))
        object.__setattr__(self, "std", np.atleast_1d(np.asarray(self.std, dtype=np.float64)))
        if self.mean.shape != self.std.shape:
            raise ValueError("mean and std must have the same shape")
        if not np.all(self.std > 0):
            raise ValueError("std must be positive elementwise")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal((n, self.dim))


def gaussian_logpdf(spec: GaussianSpec, z):
    """Per-sample log N(z; mean, diag(std^2)); z is (d,) or (B, d)."""
    zv = ad.value_of(z)
    if zv.shape[-1] != spec.dim:
        raise ValueError(f"z has dimension {zv.shape[-1]}, spec has {spec.dim}")
    u = ad.div(ad.sub(z, spec.mean), spec.std)
    quad = ad.sum(ad.mul(u, u), axis=-1)
    const = -0.5 * spec.dim * LOG_2PI - float(np.sum(np.log(spec.std)))
    return ad.add(ad.mul(quad, -0.5), const)


@dataclass(frozen=True)
class ExponentialSpec:
    """Exponential distribution parameterised by its MEAN (density e^{-x/m}/m)."""

    mean: float

    def __post_init__(self):
        if not self.mean > 0:
            raise ValueError(f"mean must be positive, got {self.mean}")

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        return rng.exponential(scale=self.mean, size=n)


def exponential_logpdf(spec: ExponentialSpec, x):
    """log density -log(mean) - x/mean for x >= 0, -inf below the support."""
    x = np.asarray(x, dtype=np.float64)
    out = -np.log(spec.mean) - x / spec.mean
    return np.where(x >= 0, out, -np.inf)


def _exponential_logpdf_lifted(mean_node, x_const):
    # tape path: mean may be graph-connected, x is observed data (>= 0)
    return ad.sub(ad.neg(ad.log(mean_node)), ad.div(x_const, mean_node))


@dataclass(frozen=True)
class MvnSpec:
    """Full-covariance Gaussian used for conjugate posterior oracles."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def logpdf(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        prec = np.linalg.inv(self.cov)
        diff = z - self.mean
        quad = np.einsum("bi,ij,bj->b", diff, prec, diff)
        _, logdet = np.linalg.slogdet(self.cov)
        return -0.5 * (self.dim * LOG_2PI + logdet + quad)

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        chol = np.linalg.cholesky(self.cov)
        return self.mean + rng.standard_normal((n, self.dim)) @ chol.T

    def correlation(self) -> float:
        return float(self.cov[0, 1] / np.sqrt(self.cov[0, 0] * self.cov[1, 1]))


# ---------------------------------------------------------------------------
# latent-variable models
# ---------------------------------------------------------------------------

@dataclass
class LatentVariableModel:
    """Prior and likelihood as samplers, with optional explicit log-densities.

    Samplers are always available; the density callbacks may be None, which
    models an implicit distribution (exact sampling, intractable density).
    The joint log-density exists iff both component densities are explicit.
    """

    latent_dim: int
    obs_dim: int
    prior_sample: Callable[[Rng, int], np.ndarray]
    likelihood_sample: Callable[[Rng, np.ndarray], np.ndarray]
    prior_logpdf: Optional[Callable] = None
    likelihood_logpdf: Optional[Callable] = None

    @property
    def explicit_prior(self) -> bool:
        return self.prior_logpdf is not None

    @property
    def explicit_likelihood(self) -> bool:
        return self.likelihood_logpdf is not None

    def joint_logpdf(self, xs, zs):
        """Per-sample log p(x, z); requires both densities to be explicit."""
        if not (self.explicit_prior and self.explicit_likelihood):
            raise ValueError("joint log-density needs explicit prior and likelihood")
        return ad.add(self.prior_logpdf(zs), self.likelihood_logpdf(xs, zs))

    def joint_z_score(self, xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
        """d log p(x, z) / dz per sample, computed by a backward pass."""
        leaf = Node(np.atleast_2d(np.asarray(zs, dtype=np.float64)), name="z")
        total = ad.sum(self.joint_logpdf(xs, leaf))
        backward(total)
        return np.array(leaf.grad, copy=True)

    def likelihood_z_score(self, xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
        """d log p(x | z) / dz per sample; needs only the explicit likelihood."""
        if not self.explicit_likelihood:
            raise ValueError("likelihood score needs an explicit likelihood")
        leaf = Node(np.atleast_2d(np.asarray(zs, dtype=np.float64)), name="z")
        total = ad.sum(self.likelihood_logpdf(xs, leaf))
        backward(total)
        return np.array(leaf.grad, copy=True)

    def joint_sample(self, rng: Rng, n: int) -> tuple[np.ndarray, np.ndarray]:
        zs = self.prior_sample(rng, n)
        xs = self.likelihood_sample(rng, zs)
        return xs, zs

    def without_prior_density(self) -> "LatentVariableModel":
        """View with an implicit prior (sampler only)."""
        return LatentVariableModel(
            latent_dim=self.latent_dim,
            obs_dim=self.obs_dim,
            prior_sample=self.prior_sample,
            likelihood_sample=self.likelihood_sample,
            prior_logpdf=None,
            likelihood_logpdf=self.likelihood_logpdf,
        )

    def without_densities(self) -> "LatentVariableModel":
        """Fully implicit view: samplers only."""
        return LatentVariableModel(
            latent_dim=self.latent_dim,
            obs_dim=self.obs_dim,
            prior_sample=self.prior_sample,
            likelihood_sample=self.likelihood_sample,
        )


def sprinkler_mean(z):
    """Observation mean 3 + max(0, z1)^3 + max(0, z2)^3; tape-differentiable.

    The derivative of max(0, z)^3 is 3 max(0, z)^2 (zero at z = 0).
    """
    zv = ad.value_of(z)
    if zv.ndim == 1:
        z1, z2 = z[0], z[1]
    else:
        z1, z2 = z[:, 0], z[:, 1]
    return ad.add(ad.add(ad.pow(ad.relu(z1), 3), ad.pow(ad.relu(z2), 3)), 3.0)


def sprinkler_model(sigma_prior: float = 1.0) -> LatentVariableModel:
    if not sigma_prior > 0:
        raise ValueError("sigma_prior must be positive")
    prior = GaussianSpec(np.zeros(2), np.full(2, float(sigma_prior)))

    def sample_prior(rng: Rng, n: int) -> np.ndarray:
        return prior.sample(rng, n)

    def sample_likelihood(rng: Rng, zs: np.ndarray) -> np.ndarray:
        means = ad.value_of(sprinkler_mean(np.atleast_2d(zs)))
        return rng.exponential(scale=means)

    def loglik(xs, zs):
        m = sprinkler_mean(zs)
        if isinstance(zs, Node):
            return _exponential_logpdf_lifted(m, np.asarray(xs, dtype=np.float64))
        xs = np.asarray(xs, dtype=np.float64)
        return np.where(xs >= 0, -np.log(m) - xs / m, -np.inf)

    return LatentVariableModel(
        latent_dim=2,
        obs_dim=1,
        prior_sample=sample_prior,
        likelihood_sample=sample_likelihood,
        prior_logpdf=lambda zs: gaussian_logpdf(prior, zs),
        likelihood_logpdf=loglik,
    )


def linear_gaussian_model(a, sigma_obs: float = 1.0) -> LatentVariableModel:
    if not sigma_obs > 0:
        raise ValueError("sigma_obs must be positive")
    a = np.asarray(a, dtype=np.float64)
    d = a.shape[0]
    prior = GaussianSpec(np.zeros(d), np.ones(d))
    var = sigma_obs**2
    const = -0.5 * (LOG_2PI + np.log(var))

    def sample_prior(rng: Rng, n: int) -> np.ndarray:
        return prior.sample(rng, n)

    def sample_likelihood(rng: Rng, zs: np.ndarray) -> np.ndarray:
        zs = np.atleast_2d(zs)
        return zs @ a + sigma_obs * rng.standard_normal(zs.shape[0])

    def loglik(xs, zs):
        resid = ad.sub(np.asarray(xs, dtype=np.float64), ad.matmul(zs, a))
        return ad.add(ad.mul(ad.mul(resid, resid), -0.5 / var), const)

    return LatentVariableModel(
        latent_dim=d,
        obs_dim=1,
        prior_sample=sample_prior,
        likelihood_sample=sample_likelihood,
        prior_logpdf=lambda zs: gaussian_logpdf(prior, zs),
        likelihood_logpdf=loglik,
    )


def exact_posterior(a, sigma_obs: float, x: float) -> MvnSpec:
    """Conjugate posterior of the linear-Gaussian model: N(mean, cov) with
    precision I + a a^T / sigma_obs^2."""
    a = np.asarray(a, dtype=np.float64)
    precision = np.eye(a.shape[0]) + np.outer(a, a) / sigma_obs**2
    cov = np.linalg.inv(precision)
    mean = cov @ a * (float(x) / sigma_obs**2)
    return MvnSpec(mean=mean, cov=cov)


# ---------------------------------------------------------------------------
# implicit posterior
# ---------------------------------------------------------------------------

@dataclass
class ImplicitPosterior:
    """Reparametrised sampler z = g(x, eps), eps ~ N(0, I_noise_dim).

    The distribution is defined only through this sampler; posterior samples
    never involve a density evaluation.
    """

    generator: Mlp
    noise_dim: int
    latent_dim: int

    @classmethod
    def create(
        cls,
        latent_dim: int,
        rng: Rng,
        noise_dim: int = 8,
        hidden: tuple[int, ...] = (64, 64),
    ) -> "ImplicitPosterior":
        sizes = [OBS_FEATURE_DIM + noise_dim, *hidden, latent_dim]
        gen = Mlp.create(sizes, rng, hidden_activation="tanh", name="gen")
        return cls(generator=gen, noise_dim=noise_dim, latent_dim=latent_dim)

    def _inputs(self, xs, eps) -> np.ndarray:
        feats = obs_features(xs)
        if feats.shape[0] != eps.shape[0]:
            raise ValueError("xs and eps batch sizes differ")
        return np.concatenate([feats, eps], axis=1)

    def sample(self, xs, rng: Rng, chunk: int = 65536) -> np.ndarray:
        """Posterior samples for observations `xs`, one per row; pure numpy.

        Noise is drawn in one call so the output does not depend on `chunk`,
        which only bounds the working-set size of the network forward pass.
        """
        xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
        eps = rng.standard_normal((xs.shape[0], self.noise_dim))
        out = np.empty((xs.shape[0], self.latent_dim))
        for start in range(0, xs.shape[0], chunk):
            stop = min(start + chunk, xs.shape[0])
            out[start:stop] = self.generator.apply_const(
                self._inputs(xs[start:stop], eps[start:stop])
            )
        return out

    def sample_node(self, xs, eps: np.ndarray) -> Node:
        """Graph-connected samples for the given noise; differentiable in the
        generator parameters."""
        return self.generator.apply(self._inputs(xs, eps))

    def params(self) -> list[Node]:
        return self.generator.params()
