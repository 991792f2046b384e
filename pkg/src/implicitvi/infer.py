"""Outer-loop variational inference with implicit posteriors.

Every method alternates two nested loops: the inner loop fits an auxiliary
network (a discriminator estimating a log density ratio, or a denoiser
estimating a score) for the current generator; the outer loop takes one Adam
step on the generator parameters against that auxiliary estimate held fixed.

Treating the fitted ratio as a constant during the generator step is exact at
the current parameter point: the neglected term is the gradient of a KL
divergence at its own minimum, which vanishes. ``freeze_ratio_for_psi_step``
embodies that contract; no adjoint ever flows into the auxiliary parameters
during a generator update.

Methods:

* ``pc_adv``  - prior-contrastive adversarial: ratio of posterior to prior,
  explicit likelihood required in the generator objective.
* ``jc_adv``  - joint-contrastive adversarial: ratio of the data-posterior
  joint to the model joint; works with fully implicit models.
* ``pc_den``  - prior-contrastive denoising: generator gradient assembled
  from the analytic joint score plus a denoiser-based entropy term.
* ``jc_den``  - joint-contrastive denoising: two denoisers, gradient kernel
  is their score difference.
* ``hybrid``  - convex blend of the pc_adv and pc_den gradient estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .denoise import (
    DenoiserNet,
    NoiseConfig,
    denoiser_loss,
    fit_denoiser,
    joint_scores_from_denoisers,
    score_from_denoiser,
)
from .models import ImplicitPosterior, LatentVariableModel
from .numerics import AdamState, Node, Rng, adam_step, backward, child_rng, zero_grad
from .numerics import autodiff as ad
from .ratio import DiscTrainConfig, RatioNet, fit_ratio, jc_disc_loss, pc_disc_loss

METHODS = ("pc_adv", "jc_adv", "pc_den", "jc_den", "hybrid")


class ConfigurationError(ValueError):
    """A method was asked to run against a model lacking a required density."""


# ---------------------------------------------------------------------------
# configuration and state
# ---------------------------------------------------------------------------

@dataclass
class TrainLoopConfig:
    method: str = "pc_adv"
    outer_steps: int = 3000
    inner_steps: int = 5
    batch_size: int = 128
    psi_lr: float = 1e-3
    psi_lr_decay: float = 1.0
    phi_lr: float = 1e-3
    phi_lr_decay: float = 1.0
    warm_start_inner: bool = True
    hybrid_alpha: float = 0.5
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    ensemble_weight: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.outer_steps < 0 or self.inner_steps < 0:
            raise ValueError("step counts must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.hybrid_alpha <= 1.0:
            raise ValueError("hybrid_alpha must lie in [0, 1]")
        if not 0.0 < self.psi_lr_decay <= 1.0:
            raise ValueError("psi_lr_decay must lie in (0, 1]")
        if not 0.0 < self.phi_lr_decay <= 1.0:
            raise ValueError("phi_lr_decay must lie in (0, 1]")

    def psi_lr_at(self, step: int) -> float:
        return self.psi_lr * self.psi_lr_decay**step

    def phi_lr_at(self, step: int) -> float:
        return self.phi_lr * self.phi_lr_decay**step

    def disc_cfg(self, step: int = 0) -> DiscTrainConfig:
        return DiscTrainConfig(
            inner_steps=self.inner_steps,
            batch_size=self.batch_size,
            learning_rate=self.phi_lr_at(step),
        )


@dataclass
class GradientEstimate:
    """Per-generator-parameter gradient values with their provenance."""

    values: list
    provenance: str

    def __post_init__(self):
        for v in self.values:
            if not np.all(np.isfinite(v)):
                raise FloatingPointError(f"non-finite {self.provenance} gradient estimate")


def hybrid_gradient(adv: GradientEstimate, den: GradientEstimate, alpha: float) -> GradientEstimate:
    """alpha * adversarial + (1 - alpha) * denoising, matched shape by shape."""
    if len(adv.values) != len(den.values):
        raise ValueError("gradient estimates have different parameter counts")
    blended = []
    for a, d in zip(adv.values, den.values):
        if np.shape(a) != np.shape(d):
            raise ValueError(f"gradient shape mismatch: {np.shape(a)} vs {np.shape(d)}")
        blended.append(alpha * np.asarray(a) + (1.0 - alpha) * np.asarray(d))
    return GradientEstimate(values=blended, provenance="hybrid")


class FrozenRatio:
    """Constant view of a ratio network for the generator step.

    Evaluations are graph-connected through z but contribute no adjoints to
    the ratio parameters.
    """

    def __init__(self, ratio: RatioNet):
        self._ratio = ratio

    def __call__(self, xs, zs):
        return self._ratio.apply_const(xs, zs)


def freeze_ratio_for_psi_step(ratio: RatioNet) -> FrozenRatio:
    return FrozenRatio(ratio)


# ---------------------------------------------------------------------------
# data sources
# ---------------------------------------------------------------------------

class ModelMarginalData:
    """Fresh ancestral draws from the model marginal p(x) on every batch."""

    def __init__(self, model: LatentVariableModel):
        self._model = model

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        xs, _ = self._model.joint_sample(rng, n)
        return xs

    def __repr__(self):
        return "ModelMarginalData()"


class FixedData:
    """Minibatches drawn with replacement from a fixed observation set."""

    def __init__(self, xs: np.ndarray):
        xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
        if xs.size == 0:
            raise ValueError("dataset is empty")
        self._xs = xs

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        return self._xs[rng.integers(0, self._xs.shape[0], size=n)]

    def __repr__(self):
        return f"FixedData(n={self._xs.shape[0]})"


class TailMixtureData:
    """Base data source mixed with a uniform band of observations.

    Reweights where the amortized posterior spends its training effort; the
    per-observation inference target is unchanged because the bound
    decomposes over x. Joint-contrastive discriminators absorb the tilt as a
    log p_D(x)/p(x) offset in their limit, so keep the weight small there if
    the flat-zero limiting behaviour matters.
    """

    def __init__(self, base, weight: float, low: float, high: float):
        if not 0.0 < weight < 1.0:
            raise ValueError("mixture weight must lie in (0, 1)")
        if not low < high:
            raise ValueError("mixture band must be increasing")
        self._base = base
        self.weight = float(weight)
        self.low = float(low)
        self.high = float(high)

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        xs = self._base.sample(rng, n)
        mask = rng.random(n) < self.weight
        xs[mask] = rng.uniform(self.low, self.high, size=int(mask.sum()))
        return xs

    def __repr__(self):
        return f"TailMixtureData(w={self.weight}, band=[{self.low}, {self.high}])"


@dataclass
class RunState:
    posterior: ImplicitPosterior
    psi_opt: AdamState
    ratio: Optional[RatioNet] = None
    denoiser: Optional[DenoiserNet] = None
    denoiser_p: Optional[DenoiserNet] = None
    prior_denoiser: Optional[DenoiserNet] = None
    step: int = 0
    history: list = field(default_factory=list)
    _phi_factories: dict = field(default_factory=dict)

    def reinit_inner(self, rng: Rng) -> None:
        """Fresh auxiliary networks (the no-memory inner-loop mode)."""
        for name, factory in self._phi_factories.items():
            setattr(self, name, factory(rng))


def build_run_state(
    model: LatentVariableModel,
    cfg: TrainLoopConfig,
    rng: Rng,
    noise_dim: int = 8,
    gen_hidden: tuple[int, ...] = (64, 64),
    disc_hidden: tuple[int, ...] = (64, 64),
    den_hidden: tuple[int, ...] = (64, 64),
    implicit_prior_denoiser: bool = False,
) -> RunState:
    """Instantiate the networks a method needs, seeded from `rng`."""
    posterior = ImplicitPosterior.create(
        model.latent_dim, rng, noise_dim=noise_dim, hidden=gen_hidden
    )
    state = RunState(posterior=posterior, psi_opt=AdamState(lr=cfg.psi_lr))
    factories: dict[str, Callable] = {}

    if cfg.method in ("pc_adv", "hybrid"):
        hook = model.likelihood_logpdf if cfg.ensemble_weight > 0 else None
        factories["ratio"] = lambda r: RatioNet.create(
            model.latent_dim,
            r,
            hidden=disc_hidden,
            ensemble_weight=cfg.ensemble_weight,
            log_likelihood=hook,
            name="ratio",
        )
    if cfg.method == "jc_adv":
        factories["ratio"] = lambda r: RatioNet.create(
            model.latent_dim, r, hidden=disc_hidden, name="joint_ratio"
        )
    if cfg.method in ("pc_den", "hybrid"):
        factories["denoiser"] = lambda r: DenoiserNet.create(
            model.latent_dim, r, hidden=den_hidden, name="denoiser"
        )
        if implicit_prior_denoiser:
            factories["prior_denoiser"] = lambda r: DenoiserNet.create(
                model.latent_dim, r, hidden=den_hidden, conditioned_on_x=False,
                name="prior_denoiser",
            )
    if cfg.method == "jc_den":
        factories["denoiser"] = lambda r: DenoiserNet.create(
            model.latent_dim, r, hidden=den_hidden, name="denoiser_q"
        )
        factories["denoiser_p"] = lambda r: DenoiserNet.create(
            model.latent_dim, r, hidden=den_hidden, name="denoiser_p"
        )

    state._phi_factories = factories
    state.reinit_inner(rng)
    return state


# ---------------------------------------------------------------------------
# generator-step helpers
# ---------------------------------------------------------------------------

def _psi_adam_step(state: RunState, cfg: TrainLoopConfig, grads=None) -> float:
    """Apply one Adam step to the generator at the step's scheduled learning
    rate; returns the parameter displacement norm."""
    state.psi_opt.lr = cfg.psi_lr_at(state.step)
    params = state.posterior.params()
    before = [p.value.copy() for p in params]
    adam_step(state.psi_opt, params, grads=grads)
    sq = 0.0
    for b, p in zip(before, params):
        diff = p.value - b
        sq += float(np.sum(diff * diff))
    return float(np.sqrt(sq))


def _collect_psi_grads(state: RunState, loss: Node, provenance: str) -> GradientEstimate:
    params = state.posterior.params()
    zero_grad(params)
    backward(loss)
    est = GradientEstimate(
        values=[np.array(p.grad, copy=True) for p in params], provenance=provenance
    )
    zero_grad(params)
    return est


def _entropy_kernel(state: RunState, xs, z_val, sigma: float) -> np.ndarray:
    # (z - u(z)) / sigma^2 = minus the denoiser's posterior-score estimate
    return -score_from_denoiser(state.denoiser, z_val, xs, sigma)


def _joint_score(state: RunState, model: LatentVariableModel, xs, z_val, sigma) -> np.ndarray:
    if model.explicit_prior and model.explicit_likelihood:
        return model.joint_z_score(xs, z_val)
    if model.explicit_likelihood and state.prior_denoiser is not None:
        lik = model.likelihood_z_score(xs, z_val)
        prior = score_from_denoiser(state.prior_denoiser, z_val, None, sigma)
        return lik + prior
    raise ConfigurationError(
        "pc_den needs the joint score in z: either an explicit prior and "
        "likelihood, or an explicit likelihood plus a prior denoiser"
    )


def _surrogate_from_kernel(z_node: Node, kernel: np.ndarray) -> Node:
    """Scalar whose generator gradient is minus sum_b dz/dpsi . kernel_b.

    Minimising it ascends the bound whose z-gradient the kernel estimates.
    """
    return ad.neg(ad.sum(ad.mul(z_node, kernel)))


# ---------------------------------------------------------------------------
# outer steps, one per method
# ---------------------------------------------------------------------------

def pc_adv_outer_step(
    state: RunState, model: LatentVariableModel, data, cfg: TrainLoopConfig, rng: Rng
) -> dict:
    """Inner: fit the posterior/prior ratio. Outer: one generator step on
    sum_b [r(x_b, g(x_b, eps_b)) - log p(x_b | g(x_b, eps_b))]."""
    if not model.explicit_likelihood:
        raise ConfigurationError(
            "pc_adv requires an explicit likelihood log-density; "
            "use jc_adv for fully implicit models"
        )
    if not cfg.warm_start_inner:
        state.reinit_inner(rng)

    def sample_loss(ratio: RatioNet, r: Rng) -> Node:
        xs = data.sample(r, cfg.batch_size)
        z_prior = model.prior_sample(r, cfg.batch_size)
        z_q = state.posterior.sample(xs, r)
        return pc_disc_loss(ratio, xs, z_prior, z_q)

    inner_loss = _run_inner_ratio(state, sample_loss, cfg, rng)

    xs = data.sample(rng, cfg.batch_size)
    eps = rng.standard_normal((cfg.batch_size, state.posterior.noise_dim))
    z = state.posterior.sample_node(xs, eps)
    frozen = freeze_ratio_for_psi_step(state.ratio)
    loss = ad.sub(ad.sum(frozen(xs, z)), ad.sum(model.likelihood_logpdf(xs, z)))
    _check_finite_loss(loss, state.step)
    backward(loss)
    psi_objective = loss.item()
    displacement = _psi_adam_step(state, cfg)
    state.step += 1
    return {
        "inner_loss": inner_loss,
        "psi_objective": psi_objective,
        "elbo_estimate": -psi_objective,
        "psi_displacement_norm": displacement,
    }


def jc_adv_outer_step(
    state: RunState, model: LatentVariableModel, data, cfg: TrainLoopConfig, rng: Rng
) -> dict:
    """Inner: fit the joint-contrastive ratio between (x ~ data, z ~ q(.|x))
    and (z ~ prior, x ~ likelihood). Outer: minimise sum_b s(x_b, g(x_b, eps))."""
    if not cfg.warm_start_inner:
        state.reinit_inner(rng)

    def sample_loss(ratio: RatioNet, r: Rng) -> Node:
        xq = data.sample(r, cfg.batch_size)
        zq = state.posterior.sample(xq, r)
        xp, zp = model.joint_sample(r, cfg.batch_size)
        return jc_disc_loss(ratio, (xq, zq), (xp, zp))

    inner_loss = _run_inner_ratio(state, sample_loss, cfg, rng)

    xs = data.sample(rng, cfg.batch_size)
    eps = rng.standard_normal((cfg.batch_size, state.posterior.noise_dim))
    z = state.posterior.sample_node(xs, eps)
    frozen = freeze_ratio_for_psi_step(state.ratio)
    loss = ad.sum(frozen(xs, z))
    _check_finite_loss(loss, state.step)
    backward(loss)
    psi_objective = loss.item()
    displacement = _psi_adam_step(state, cfg)
    state.step += 1
    return {
        "inner_loss": inner_loss,
        "psi_objective": psi_objective,
        "elbo_estimate": None,
        "psi_displacement_norm": displacement,
    }


def pc_den_outer_step(
    state: RunState, model: LatentVariableModel, data, cfg: TrainLoopConfig, rng: Rng
) -> dict:
    """Inner: fit the posterior denoiser (plus the prior denoiser when the
    prior is implicit). Outer: one generator step along
    sum_b dg/dpsi . [d log p(x, z)/dz + (z - u(z)) / sigma^2]."""
    if not cfg.warm_start_inner:
        state.reinit_inner(rng)
    sigma = cfg.noise.at_step(state.step)

    def sample_batch(r: Rng):
        xs = data.sample(r, cfg.batch_size)
        return state.posterior.sample(xs, r), xs

    fit_denoiser(
        state.denoiser, sample_batch, cfg.inner_steps, rng, sigma, learning_rate=cfg.phi_lr_at(state.step)
    )
    if state.prior_denoiser is not None:
        fit_denoiser(
            state.prior_denoiser,
            lambda r: (model.prior_sample(r, cfg.batch_size), None),
            cfg.inner_steps,
            rng,
            sigma,
            learning_rate=cfg.phi_lr_at(state.step),
        )
    inner_loss = _heldout_denoiser_loss(state.denoiser, sample_batch, rng, sigma)

    xs = data.sample(rng, cfg.batch_size)
    eps = rng.standard_normal((cfg.batch_size, state.posterior.noise_dim))
    z = state.posterior.sample_node(xs, eps)
    z_val = z.detach()
    kernel = _joint_score(state, model, xs, z_val, sigma) + _entropy_kernel(
        state, xs, z_val, sigma
    )
    loss = _surrogate_from_kernel(z, kernel)
    _check_finite_loss(loss, state.step)
    backward(loss)
    psi_objective = loss.item()
    displacement = _psi_adam_step(state, cfg)
    state.step += 1
    return {
        "inner_loss": inner_loss,
        "psi_objective": psi_objective,
        "elbo_estimate": None,
        "psi_displacement_norm": displacement,
    }


def jc_den_outer_step(
    state: RunState, model: LatentVariableModel, data, cfg: TrainLoopConfig, rng: Rng
) -> dict:
    """Inner: fit denoisers over both joints (noise on z only). Outer:
    generator step with kernel score_p(z|x) - score_q(z|x)."""
    if not cfg.warm_start_inner:
        state.reinit_inner(rng)
    sigma = cfg.noise.at_step(state.step)

    def q_batch(r: Rng):
        xs = data.sample(r, cfg.batch_size)
        return state.posterior.sample(xs, r), xs

    def p_batch(r: Rng):
        xs, zs = model.joint_sample(r, cfg.batch_size)
        return zs, xs

    fit_denoiser(state.denoiser, q_batch, cfg.inner_steps, rng, sigma, learning_rate=cfg.phi_lr_at(state.step))
    fit_denoiser(state.denoiser_p, p_batch, cfg.inner_steps, rng, sigma, learning_rate=cfg.phi_lr_at(state.step))
    inner_loss = _heldout_denoiser_loss(state.denoiser, q_batch, rng, sigma)

    xs = data.sample(rng, cfg.batch_size)
    eps = rng.standard_normal((cfg.batch_size, state.posterior.noise_dim))
    z = state.posterior.sample_node(xs, eps)
    z_val = z.detach()
    kernel = joint_scores_from_denoisers(state.denoiser, state.denoiser_p, xs, z_val, sigma)
    loss = _surrogate_from_kernel(z, kernel)
    _check_finite_loss(loss, state.step)
    backward(loss)
    psi_objective = loss.item()
    displacement = _psi_adam_step(state, cfg)
    state.step += 1
    return {
        "inner_loss": inner_loss,
        "psi_objective": psi_objective,
        "elbo_estimate": None,
        "psi_displacement_norm": displacement,
    }


def hybrid_outer_step(
    state: RunState, model: LatentVariableModel, data, cfg: TrainLoopConfig, rng: Rng
) -> dict:
    """Fit both auxiliaries, blend the two gradient estimates with weight
    alpha on the adversarial one, and take a single generator step."""
    if not model.explicit_likelihood:
        raise ConfigurationError("hybrid includes pc_adv and needs an explicit likelihood")
    if not cfg.warm_start_inner:
        state.reinit_inner(rng)
    sigma = cfg.noise.at_step(state.step)

    def ratio_loss(ratio: RatioNet, r: Rng) -> Node:
        xs = data.sample(r, cfg.batch_size)
        z_prior = model.prior_sample(r, cfg.batch_size)
        z_q = state.posterior.sample(xs, r)
        return pc_disc_loss(ratio, xs, z_prior, z_q)

    def den_batch(r: Rng):
        xs = data.sample(r, cfg.batch_size)
        return state.posterior.sample(xs, r), xs

    inner_loss = _run_inner_ratio(state, ratio_loss, cfg, rng)
    fit_denoiser(state.denoiser, den_batch, cfg.inner_steps, rng, sigma, learning_rate=cfg.phi_lr_at(state.step))

    xs = data.sample(rng, cfg.batch_size)
    eps = rng.standard_normal((cfg.batch_size, state.posterior.noise_dim))
    z = state.posterior.sample_node(xs, eps)

    frozen = freeze_ratio_for_psi_step(state.ratio)
    adv_loss = ad.sub(ad.sum(frozen(xs, z)), ad.sum(model.likelihood_logpdf(xs, z)))
    _check_finite_loss(adv_loss, state.step)
    adv = _collect_psi_grads(state, adv_loss, "adversarial")

    z_val = z.detach()
    kernel = _joint_score(state, model, xs, z_val, sigma) + _entropy_kernel(
        state, xs, z_val, sigma
    )
    den_loss = _surrogate_from_kernel(z, kernel)
    _check_finite_loss(den_loss, state.step)
    den = _collect_psi_grads(state, den_loss, "denoising")

    blended = hybrid_gradient(adv, den, cfg.hybrid_alpha)
    psi_objective = adv_loss.item()
    displacement = _psi_adam_step(state, cfg, grads=blended.values)
    state.step += 1
    return {
        "inner_loss": inner_loss,
        "psi_objective": psi_objective,
        "elbo_estimate": -psi_objective,
        "psi_displacement_norm": displacement,
    }


OUTER_STEPS: dict[str, Callable] = {
    "pc_adv": pc_adv_outer_step,
    "jc_adv": jc_adv_outer_step,
    "pc_den": pc_den_outer_step,
    "jc_den": jc_den_outer_step,
    "hybrid": hybrid_outer_step,
}


def _run_inner_ratio(state: RunState, sample_loss, cfg: TrainLoopConfig, rng: Rng):
    fit_ratio(state.ratio, sample_loss, cfg.disc_cfg(state.step), rng)
    if cfg.inner_steps == 0:
        return None
    loss = sample_loss(state.ratio, rng)
    return loss.item()


def _heldout_denoiser_loss(denoiser, sample_batch, rng: Rng, sigma: float):
    zs, xs = sample_batch(rng)
    return denoiser_loss(denoiser, zs, xs, rng, sigma).item()


def _check_finite_loss(loss: Node, step: int) -> None:
    if not np.all(np.isfinite(loss.value)):
        raise FloatingPointError(f"non-finite generator objective at outer step {step}")


# ---------------------------------------------------------------------------
# full runs and monitoring
# ---------------------------------------------------------------------------

def run_training(
    state: RunState,
    model: LatentVariableModel,
    data,
    cfg: TrainLoopConfig,
    rng: Rng,
    on_step: Optional[Callable[[dict], None]] = None,
) -> RunState:
    """Run `outer_steps` outer iterations, appending one metrics record each."""
    step_fn = OUTER_STEPS[cfg.method]
    for _ in range(cfg.outer_steps):
        record = {"step": state.step, **step_fn(state, model, data, cfg, rng)}
        state.history.append(record)
        if on_step is not None:
            on_step(record)
    return state


def make_default_run(
    model: LatentVariableModel,
    cfg: TrainLoopConfig,
    seed: int,
    data=None,
    **net_kwargs,
) -> tuple[RunState, object, Rng]:
    """Seeded state, data source and training stream for a standard run.

    Substream 0 feeds network init, substream 1 the training loop; data
    defaults to fresh ancestral draws from the model marginal.
    """
    init_rng = child_rng(seed, 0)
    train_rng = child_rng(seed, 1)
    state = build_run_state(model, cfg, init_rng, **net_kwargs)
    if data is None:
        data = ModelMarginalData(model)
    return state, data, train_rng


def monte_carlo_elbo(
    sample_q: Callable[[np.ndarray, Rng], np.ndarray],
    ratio_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    loglik_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    xs: np.ndarray,
    rng: Rng,
) -> float:
    """One-sample estimate of sum_b [log p(x_b | z_b) - r(x_b, z_b)],
    z_b ~ q(.|x_b); reporting only, nothing is optimised through it."""
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    zs = sample_q(xs, rng)
    loglik = np.asarray(loglik_fn(xs, zs))
    ratios = np.asarray(ratio_fn(xs, zs))
    return float(np.sum(loglik - ratios))


def elbo_monitor(state: RunState, model: LatentVariableModel, xs, rng: Rng) -> float:
    """Bound estimate for a prior-contrastive run on a data batch."""
    if state.ratio is None:
        raise ConfigurationError("elbo monitoring needs a ratio network (pc_adv or hybrid)")
    if not model.explicit_likelihood:
        raise ConfigurationError("elbo monitoring needs an explicit likelihood")
    return monte_carlo_elbo(
        sample_q=state.posterior.sample,
        ratio_fn=lambda x, z: np.asarray(state.ratio.apply_const(x, z)),
        loglik_fn=lambda x, z: np.asarray(model.likelihood_logpdf(x, z)),
        xs=xs,
        rng=rng,
    )
