"""Denoising autoencoders as score estimators.

A denoiser trained to undo additive Gaussian noise of scale sigma recovers,
at its optimum, the score of the noise-corrupted data distribution:

    (u(z) - z) / sigma^2  ~  d log q(z) / dz   as sigma -> 0.

Conditioning on the observation x makes this the score of q(z | x). Two such
denoisers, one over data-posterior pairs and one over model-joint pairs, give
the z-gradient of the joint log-ratio as a difference of scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .models import OBS_FEATURE_DIM, obs_features
from .numerics import autodiff as ad
from .numerics import AdamState, Mlp, Node, Rng, adam_step, backward, zero_grad


@dataclass
class DenoiserNet:
    """Network mapping a noisy latent (and optionally x) back to a clean latent.

    The reconstruction is residual, u(z, x) = z + net(z, x): near the optimum
    the inner network carries only the small displacement sigma^2 * score, so
    it can be fitted to the precision the 1/sigma^2 score amplification
    demands.
    """

    net: Mlp
    latent_dim: int
    conditioned_on_x: bool = True

    def __post_init__(self):
        if self.net.output_dim != self.latent_dim:
            raise ValueError("denoiser output dimension must equal the latent dimension")

    @classmethod
    def create(
        cls,
        latent_dim: int,
        rng: Rng,
        hidden: tuple[int, ...] = (64, 64),
        conditioned_on_x: bool = True,
        name: str = "denoiser",
    ) -> "DenoiserNet":
        in_dim = latent_dim + (OBS_FEATURE_DIM if conditioned_on_x else 0)
        net = Mlp.create([in_dim, *hidden, latent_dim], rng, hidden_activation="tanh", name=name)
        return cls(net=net, latent_dim=latent_dim, conditioned_on_x=conditioned_on_x)

    def _inputs(self, zs, xs):
        if not self.conditioned_on_x:
            return zs
        feats = obs_features(xs)
        if feats.shape[0] != ad.value_of(zs).shape[0]:
            raise ValueError("xs and zs batch sizes differ")
        return ad.concat([zs, feats], axis=1)

    def apply(self, zs, xs=None):
        return ad.add(self.net.apply(self._inputs(zs, xs)), zs)

    def apply_const(self, zs, xs=None):
        return ad.add(self.net.apply_const(self._inputs(zs, xs)), zs)

    def params(self) -> list[Node]:
        return self.net.params()


@dataclass
class NoiseConfig:
    """Noise scale with optional geometric annealing down to a floor."""

    sigma: float = 0.1
    anneal: float = 1.0
    sigma_min: Optional[float] = None

    def __post_init__(self):
        if self.sigma_min is None:
            self.sigma_min = self.sigma
        if not 0 < self.sigma_min <= self.sigma:
            raise ValueError("need sigma >= sigma_min > 0")
        if not 0 < self.anneal <= 1.0:
            raise ValueError("anneal factor must lie in (0, 1]")

    def at_step(self, step: int) -> float:
        return max(self.sigma * self.anneal**step, self.sigma_min)


def denoiser_loss(
    denoiser: DenoiserNet, zs, xs, rng: Rng, sigma: float, antithetic: bool = True
) -> Node:
    """Mean squared reconstruction ||u(z + eta, x) - z||^2, eta ~ N(0, sigma^2 I).

    Fresh noise per call. For the identity denoiser the expected value is
    latent_dim * sigma^2. With `antithetic` each draw is paired with its
    negation, an unbiased estimator of the same expectation whose gradient
    noise loses the term linear in eta; this matters because score extraction
    amplifies denoiser error by 1/sigma^2.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    zs = np.atleast_2d(np.asarray(zs, dtype=np.float64))
    eta = sigma * rng.standard_normal(zs.shape)
    corruptions = (zs + eta, zs - eta) if antithetic else (zs + eta,)
    total = None
    for noisy in corruptions:
        diff = ad.sub(denoiser.apply(noisy, xs), zs)
        term = ad.mean(ad.sum(ad.mul(diff, diff), axis=1))
        total = term if total is None else ad.add(total, term)
    return ad.div(total, float(len(corruptions)))


def score_from_denoiser(denoiser: DenoiserNet, zs, xs, sigma: float) -> np.ndarray:
    """Score estimate (u(z, x) - z) / sigma^2 at the given (clean) latents."""
    zs = np.atleast_2d(np.asarray(zs, dtype=np.float64))
    recon = np.atleast_2d(np.asarray(denoiser.apply_const(zs, xs)))
    return (recon - zs) / sigma**2


def fit_denoiser(
    denoiser: DenoiserNet,
    sample_batch: Callable[[Rng], tuple],
    steps: int,
    rng: Rng,
    sigma: float,
    learning_rate: float = 1e-3,
) -> DenoiserNet:
    """`steps` Adam steps on fresh (zs, xs) batches; optimizer moments are
    local to the call, mirroring the discriminator fitting contract."""
    params = denoiser.params()
    state = AdamState(lr=learning_rate)
    for step in range(steps):
        zs, xs = sample_batch(rng)
        loss = denoiser_loss(denoiser, zs, xs, rng, sigma)
        if not np.isfinite(loss.value):
            raise FloatingPointError(f"non-finite denoiser loss at inner step {step}")
        zero_grad(params)
        backward(loss)
        adam_step(state, params)
    return denoiser


def joint_scores_from_denoisers(
    u_q: DenoiserNet, u_p: DenoiserNet, xs, zs, sigma: float
) -> np.ndarray:
    """z-component score difference score_p(z|x) - score_q(z|x).

    `u_q` is trained on (x, z) pairs from data times approximate posterior,
    `u_p` on pairs from the model joint, both with noise on z only. The
    difference estimates minus the z-gradient of the joint log-ratio, the
    kernel of the generator update in joint-contrastive denoising VI.
    """
    return score_from_denoiser(u_p, zs, xs, sigma) - score_from_denoiser(u_q, zs, xs, sigma)
