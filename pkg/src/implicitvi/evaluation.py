"""Ground-truth grids, divergence metrics, and limiting-behaviour diagnostics.

The evaluation currency is a normalized density on a bounded 2-D lattice:
exact posteriors come from normalizing the joint density over the grid,
approximate posteriors from histogramming generator samples. On top of that
sit the diagnostics that make the methods' limiting claims measurable: a
trained prior-contrastive ratio should match the log-likelihood up to an
additive constant, a converged joint-contrastive ratio should be flat at
zero, and a denoiser-derived vector field should be (nearly) curl-free.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .models import LatentVariableModel
from .numerics import Node, backward
from .numerics import autodiff as ad


@dataclass(frozen=True)
class GridSpec:
    """Bounded 2-D lattice of cell centers."""

    bounds: tuple[float, float, float, float] = (-4.0, 4.0, -4.0, 4.0)
    shape: tuple[int, int] = (200, 200)

    def __post_init__(self):
        z1_min, z1_max, z2_min, z2_max = self.bounds
        if not (z1_min < z1_max and z2_min < z2_max):
            raise ValueError("grid bounds must be increasing")
        if min(self.shape) < 2:
            raise ValueError("grid needs at least 2 cells per axis")

    @property
    def steps(self) -> tuple[float, float]:
        z1_min, z1_max, z2_min, z2_max = self.bounds
        return (
            (z1_max - z1_min) / self.shape[0],
            (z2_max - z2_min) / self.shape[1],
        )

    @property
    def cell_area(self) -> float:
        d1, d2 = self.steps
        return d1 * d2

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        z1_min, z1_max, z2_min, z2_max = self.bounds
        d1, d2 = self.steps
        c1 = z1_min + d1 * (np.arange(self.shape[0]) + 0.5)
        c2 = z2_min + d2 * (np.arange(self.shape[1]) + 0.5)
        return c1, c2

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        z1_min, z1_max, z2_min, z2_max = self.bounds
        return (
            np.linspace(z1_min, z1_max, self.shape[0] + 1),
            np.linspace(z2_min, z2_max, self.shape[1] + 1),
        )

    def mesh(self) -> np.ndarray:
        """All cell centers as an (n1 * n2, 2) array, row-major."""
        c1, c2 = self.centers()
        g1, g2 = np.meshgrid(c1, c2, indexing="ij")
        return np.stack([g1.ravel(), g2.ravel()], axis=1)


@dataclass
class Grid2D:
    """A field of values over a GridSpec; when holding a normalized density,
    sum(values) * cell_area == 1 within 1e-9."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.spec.shape}")

    def mass(self) -> float:
        return float(self.values.sum() * self.spec.cell_area)

    def correlation(self) -> float:
        """Pearson correlation of (z1, z2) under the density."""
        w = self.values * self.spec.cell_area
        w = w / w.sum()
        zs = self.spec.mesh()
        flat = w.ravel()
        mu = flat @ zs
        diff = zs - mu
        cov = (flat[:, None] * diff).T @ diff
        return float(cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1]))


def grid_posterior(model: LatentVariableModel, x: float, spec: GridSpec) -> Grid2D:
    """Exact posterior on the grid: exp(joint log-density) normalized by the
    lattice sum. Deterministic; raises if the grid captures no mass."""
    if model.latent_dim != 2:
        raise ValueError("grid posteriors are defined for 2-D latents")
    zs = spec.mesh()
    logp = np.asarray(model.joint_logpdf(np.full(zs.shape[0], float(x)), zs))
    peak = logp.max()
    if not np.isfinite(peak):
        raise ValueError("joint density vanishes on the whole grid; widen the bounds")
    vals = np.exp(logp - peak).reshape(spec.shape)
    total = vals.sum() * spec.cell_area
    if total <= 0:
        raise ValueError("joint density vanishes on the whole grid; widen the bounds")
    return Grid2D(spec=spec, values=vals / total)


def histogram_density(samples: np.ndarray, spec: GridSpec) -> tuple[Grid2D, float]:
    """Normalized histogram of latent samples plus the out-of-bounds fraction."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.shape[1] != 2:
        raise ValueError("histogram_density expects (n, 2) samples")
    e1, e2 = spec.edges()
    counts, _, _ = np.histogram2d(samples[:, 0], samples[:, 1], bins=(e1, e2))
    inside = counts.sum()
    if inside == 0:
        raise ValueError("no samples fall inside the grid bounds")
    oob = 1.0 - inside / samples.shape[0]
    return Grid2D(spec=spec, values=counts / (inside * spec.cell_area)), float(oob)


def kl_grid(q_hat: Grid2D, p_ref: Grid2D, eps_smooth: float = 1e-10) -> float:
    """sum q * ln((q + eps) / (p + eps)) * cell_area in nats.

    Both grids must share a spec and hold normalized densities; the raw value
    is returned, including any small negative slack the smoothing induces.
    """
    if q_hat.spec != p_ref.spec:
        raise ValueError("grids must share bounds and resolution")
    q = q_hat.values
    p = p_ref.values
    ratio = np.log((q + eps_smooth) / (p + eps_smooth))
    return float(np.sum(q * ratio) * q_hat.spec.cell_area)


def total_variation(a: Grid2D, b: Grid2D) -> float:
    if a.spec != b.spec:
        raise ValueError("grids must share bounds and resolution")
    return float(0.5 * np.abs(a.values - b.values).sum() * a.spec.cell_area)


def ratio_limit_diagnostic(ratio, model: LatentVariableModel, x: float, posterior: Grid2D) -> float:
    """Posterior-weighted std of [r(x, z) - log p(x | z)] over the grid.

    Zero iff the trained ratio matches the log-likelihood up to an additive
    constant, the limiting behaviour of a converged prior-contrastive run.
    `ratio` is a RatioNet or any callable (xs, zs) -> values.
    """
    if not model.explicit_likelihood:
        raise ValueError("ratio limit diagnostic needs an explicit likelihood")
    zs = posterior.spec.mesh()
    xs = np.full(zs.shape[0], float(x))
    ratio_fn = ratio.apply_const if hasattr(ratio, "apply_const") else ratio
    delta = np.asarray(ratio_fn(xs, zs)) - np.asarray(model.likelihood_logpdf(xs, zs))
    w = (posterior.values * posterior.spec.cell_area).ravel()
    w = w / w.sum()
    mean = w @ delta
    return float(np.sqrt(max(w @ (delta - mean) ** 2, 0.0)))


def flatness_diagnostic(ratio, xs: np.ndarray, zs: np.ndarray) -> float:
    """Mean |s(x, z)| over held-out joint samples; a converged
    joint-contrastive discriminator sits at the flat zero solution."""
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    if xs.size == 0:
        raise ValueError("flatness diagnostic needs a non-empty sample set")
    ratio_fn = ratio.apply_const if hasattr(ratio, "apply_const") else ratio
    return float(np.abs(np.asarray(ratio_fn(xs, zs))).mean())


def curl_proxy(score_fn: Callable[[np.ndarray], np.ndarray], spec: GridSpec) -> float:
    """Mean |d s1/d z2 - d s2/d z1| over the grid by central differences.

    Zero for conservative (gradient) fields; reported for denoiser-derived
    score fields, which no construction here forces to be conservative.
    """
    zs = spec.mesh()
    field_vals = np.asarray(score_fn(zs))
    if field_vals.shape != (zs.shape[0], 2):
        raise ValueError("score_fn must return an (n, 2) field")
    d1, d2 = spec.steps
    s1 = field_vals[:, 0].reshape(spec.shape)
    s2 = field_vals[:, 1].reshape(spec.shape)
    ds1_dz2 = np.gradient(s1, d2, axis=1)
    ds2_dz1 = np.gradient(s2, d1, axis=0)
    return float(np.abs(ds1_dz2 - ds2_dz1).mean())


def gradient_field(scalar_fn: Callable, spec: GridSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Exact gradient field of a tape-evaluable scalar function of z; a
    conservative field by construction (curl_proxy baseline)."""

    def field(zs: np.ndarray) -> np.ndarray:
        leaf = Node(np.atleast_2d(np.asarray(zs, dtype=np.float64)), name="z")
        backward(ad.sum(scalar_fn(leaf)))
        return np.array(leaf.grad, copy=True)

    return field


@dataclass
class Diagnostics:
    """Quantitative summary of one evaluation at a single observation."""

    x: float
    kl_nats: float
    posterior_correlation: float
    ratio_limit_std: Optional[float] = None
    flatness_mean_abs: Optional[float] = None
    curl_proxy: Optional[float] = None
    out_of_bounds_fraction: Optional[float] = None

    def __post_init__(self):
        for name in ("kl_nats", "posterior_correlation", "ratio_limit_std",
                     "flatness_mean_abs", "curl_proxy", "out_of_bounds_fraction"):
            v = getattr(self, name)
            if v is not None and not np.isfinite(v):
                raise FloatingPointError(f"diagnostic {name} is not finite: {v}")

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "kl_nats": self.kl_nats,
            "posterior_correlation": self.posterior_correlation,
            "ratio_limit_std": self.ratio_limit_std,
            "flatness_mean_abs": self.flatness_mean_abs,
            "curl_proxy": self.curl_proxy,
            "out_of_bounds_fraction": self.out_of_bounds_fraction,
        }


# ---------------------------------------------------------------------------
# on-disk formats
# ---------------------------------------------------------------------------

def grid_to_csv(grid: Grid2D, path) -> None:
    """Row-major `z1,z2,value` rows with 17 significant digits (lossless for
    float64)."""
    c1, c2 = grid.spec.centers()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z1", "z2", "value"])
        for i in range(grid.spec.shape[0]):
            for j in range(grid.spec.shape[1]):
                writer.writerow(
                    [f"{c1[i]:.17g}", f"{c2[j]:.17g}", f"{grid.values[i, j]:.17g}"]
                )


def grid_from_csv(path, spec: GridSpec) -> Grid2D:
    values = np.empty(spec.shape)
    c1, c2 = spec.centers()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["z1", "z2", "value"]:
            raise ValueError(f"unexpected CSV header {header}")
        for idx, row in enumerate(reader):
            i, j = divmod(idx, spec.shape[1])
            if abs(float(row[0]) - c1[i]) > 1e-9 or abs(float(row[1]) - c2[j]) > 1e-9:
                raise ValueError(f"CSV row {idx} does not match the grid layout")
            values[i, j] = float(row[2])
    return Grid2D(spec=spec, values=values)


def diagnostics_to_jsonl(diags: list[Diagnostics], path) -> None:
    with open(path, "w") as fh:
        for d in diags:
            fh.write(json.dumps(d.to_dict()) + "\n")


def diagnostics_from_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
