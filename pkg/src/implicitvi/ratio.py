"""Adversarial log density-ratio estimation via logistic regression.

A ``RatioNet`` outputs a single unconstrained real, interpreted directly as a
log-ratio. Training minimises a logistic loss built from the softplus pair
``sp(t) = log(1 + e^t)`` and ``sm(t) = t - sp(t)``:

* prior-contrastive: samples from the prior p(z) against samples from the
  approximate posterior q(z|x), each paired with the same observation x; the
  minimiser converges to log[q(z|x) / p(z)].
* joint-contrastive: (x, z) pairs from the data-times-posterior joint against
  pairs from the model joint; the minimiser converges to
  log[q(z|x) p_D(x) / p(x, z)].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .models import OBS_FEATURE_DIM, GaussianSpec, gaussian_logpdf, obs_features
from .numerics import autodiff as ad
from .numerics import AdamState, Mlp, Node, Rng, adam_step, backward, zero_grad


@dataclass
class RatioNet:
    """Discriminator network returning a scalar log-ratio per (x, z) pair.

    With ``ensemble_weight`` > 0 the output is net(x, z) + weight * log p(x|z),
    so the network only has to learn the residual on top of the known
    likelihood; this requires the explicit likelihood hook.
    """

    net: Mlp
    conditioned_on_obs: bool = True
    ensemble_weight: float = 0.0
    log_likelihood: Optional[Callable] = None

    def __post_init__(self):
        if not 0.0 <= self.ensemble_weight <= 1.0:
            raise ValueError("ensemble_weight must lie in [0, 1]")
        if self.ensemble_weight > 0 and self.log_likelihood is None:
            raise ValueError("ensemble_weight > 0 requires an explicit likelihood hook")
        if self.net.output_dim != 1:
            raise ValueError("ratio network must have a single output")

    @classmethod
    def create(
        cls,
        latent_dim: int,
        rng: Rng,
        hidden: tuple[int, ...] = (64, 64),
        conditioned_on_obs: bool = True,
        ensemble_weight: float = 0.0,
        log_likelihood: Optional[Callable] = None,
        name: str = "ratio",
    ) -> "RatioNet":
        in_dim = latent_dim + (OBS_FEATURE_DIM if conditioned_on_obs else 0)
        net = Mlp.create([in_dim, *hidden, 1], rng, hidden_activation="relu", name=name)
        return cls(
            net=net,
            conditioned_on_obs=conditioned_on_obs,
            ensemble_weight=ensemble_weight,
            log_likelihood=log_likelihood,
        )

    def _inputs(self, xs, zs):
        if not self.conditioned_on_obs:
            return zs
        zv = ad.value_of(zs)
        feats = obs_features(xs)
        if feats.shape[0] != zv.shape[0]:
            raise ValueError("xs and zs batch sizes differ")
        return ad.concat([feats, zs], axis=1)

    def apply(self, xs, zs):
        """Log-ratio per pair with trainable network parameters.

        Used for discriminator training, where (x, z) are given samples; the
        ensemble likelihood term is a constant offset there.
        """
        out = self.net.apply(self._inputs(xs, zs))[:, 0]
        if self.ensemble_weight > 0:
            loglik = np.asarray(self.log_likelihood(xs, ad.value_of(zs)))
            out = ad.add(out, self.ensemble_weight * loglik)
        return out

    def apply_const(self, xs, zs):
        """Log-ratio per pair with the network treated as a constant.

        `zs` may be graph-connected (the generator objective); gradients then
        flow through z into both the network input and the ensemble
        likelihood term, but never into the network parameters.
        """
        out = self.net.apply_const(self._inputs(xs, zs))[:, 0]
        if self.ensemble_weight > 0:
            out = ad.add(out, ad.mul(self.log_likelihood(xs, zs), self.ensemble_weight))
        return out

    def params(self) -> list[Node]:
        return self.net.params()


@dataclass
class DiscTrainConfig:
    inner_steps: int = 5
    batch_size: int = 128
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.inner_steps < 0:
            raise ValueError("inner_steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def pc_disc_loss(ratio: RatioNet, xs, z_prior, z_q) -> Node:
    """sum_b sp(r(x_b, z_prior_b)) - sm(r(x_b, z_q_b)).

    Prior samples play the negative class, posterior samples the positive
    class; at the unrestricted minimum r(x, z) = log[q(z|x) / p(z)].
    """
    n = np.asarray(z_prior).shape[0]
    if np.asarray(z_q).shape[0] != n or np.atleast_1d(np.asarray(xs)).shape[0] != n:
        raise ValueError("xs, z_prior and z_q must have equal batch length")
    on_prior = ratio.apply(xs, z_prior)
    on_q = ratio.apply(xs, z_q)
    return ad.sum(ad.sub(ad.softplus(on_prior), ad.softminus(on_q)))


def jc_disc_loss(ratio: RatioNet, q_pairs, p_pairs) -> Node:
    """sum_b sp(s(x_b^p, z_b^p)) - sm(s(x_b^q, z_b^q)) over joint pairs."""
    xq, zq = q_pairs
    xp, zp = p_pairs
    if np.asarray(zq).shape[0] != np.asarray(zp).shape[0]:
        raise ValueError("q-side and p-side batches must have equal length")
    on_p = ratio.apply(xp, zp)
    on_q = ratio.apply(xq, zq)
    return ad.sum(ad.sub(ad.softplus(on_p), ad.softminus(on_q)))


def fit_ratio(
    ratio: RatioNet,
    sample_loss: Callable[[RatioNet, Rng], Node],
    cfg: DiscTrainConfig,
    rng: Rng,
) -> RatioNet:
    """Exactly `inner_steps` Adam steps on fresh batches from `sample_loss`.

    Optimizer moments are local to this call: across outer iterations only
    the network parameters themselves persist.
    """
    params = ratio.params()
    state = AdamState(lr=cfg.learning_rate)
    for step in range(cfg.inner_steps):
        loss = sample_loss(ratio, rng)
        if not np.isfinite(loss.value):
            raise FloatingPointError(f"non-finite discriminator loss at inner step {step}")
        zero_grad(params)
        backward(loss)
        adam_step(state, params)
    return ratio


def analytic_gaussian_log_ratio(q: GaussianSpec, p: GaussianSpec, z) -> np.ndarray:
    """Exact log q(z) - log p(z); test oracle for trained ratio networks."""
    if q.dim != p.dim:
        raise ValueError("dimension mismatch")
    return np.asarray(gaussian_logpdf(q, z)) - np.asarray(gaussian_logpdf(p, z))
