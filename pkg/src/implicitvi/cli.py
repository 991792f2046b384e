"""Config-driven experiment harness.

Subcommands:

* ``train  --config cfg.json --out dir [--seed N]`` - run the configured
  method, write ``params.json`` (snapshot), ``metrics.jsonl`` (one record per
  outer step) and ``diagnostics.jsonl`` (one record per evaluation x).
* ``eval   --config cfg.json --params params.json --out dir [--seed N]`` -
  recompute diagnostics from a snapshot and emit ``qhat_x*.csv`` histogram
  grids of the approximate posterior.
* ``oracle --config cfg.json --out dir`` - exact grid posteriors as
  ``posterior_x*.csv`` plus ``oracle_summary.json`` with their correlations.

Configs are flat JSON with strict key checking. Exit codes: 0 success,
2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .denoise import NoiseConfig, score_from_denoiser
from .evaluation import (
    Diagnostics,
    GridSpec,
    curl_proxy,
    diagnostics_to_jsonl,
    flatness_diagnostic,
    grid_posterior,
    grid_to_csv,
    histogram_density,
    kl_grid,
    ratio_limit_diagnostic,
)
from .infer import (
    METHODS,
    ConfigurationError,
    FixedData,
    ModelMarginalData,
    TailMixtureData,
    TrainLoopConfig,
    build_run_state,
    run_training,
)
from .models import LatentVariableModel, linear_gaussian_model, sprinkler_model
from .numerics import Mlp, child_rng

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SNAPSHOT_FORMAT = "implicitvi-params-v1"

MODELS = ("sprinkler", "linear_gaussian")

CONFIG_SCHEMA: dict[str, tuple] = {
    # key -> (allowed types, default); "model" and "method" are required
    "model": (str, None),
    "sigma_prior": ((int, float), 1.0),
    "coefficients": (list, [1.0, 1.0]),
    "obs_noise": ((int, float), 1.0),
    "method": (str, None),
    "outer_steps": (int, 3000),
    "inner_steps": (int, 5),
    "batch_size": (int, 128),
    "psi_lr": ((int, float), 1e-3),
    "psi_lr_decay": ((int, float), 1.0),
    "phi_lr": ((int, float), 1e-3),
    "phi_lr_decay": ((int, float), 1.0),
    "warm_start_inner": (bool, True),
    "hybrid_alpha": ((int, float), 0.5),
    "noise_sigma": ((int, float), 0.1),
    "noise_anneal": ((int, float), 1.0),
    "noise_sigma_min": ((int, float, type(None)), None),
    "ensemble_weight": ((int, float), 0.0),
    "gen_hidden": (list, [64, 64]),
    "disc_hidden": (list, [64, 64]),
    "den_hidden": (list, [64, 64]),
    "noise_dim": (int, 8),
    "data_size": ((int, type(None)), None),
    "tail_weight": ((int, float), 0.0),
    "tail_low": ((int, float), 0.0),
    "tail_high": ((int, float), 0.0),
    "eval_x": (list, None),
    "grid_bounds": (list, [-4.0, 4.0, -4.0, 4.0]),
    "grid_resolution": (list, [200, 200]),
    "eval_samples": (int, 1_000_000),
    "heldout_samples": (int, 4096),
    "seed": (int, 0),
    "output_dir": ((str, type(None)), None),
}

DEFAULT_EVAL_X = {"sprinkler": [0.0, 8.0, 50.0], "linear_gaussian": [-2.0, 0.0, 2.0]}


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)

    def __getattr__(self, key):
        try:
            return self.raw[key]
        except KeyError:
            raise AttributeError(key) from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            payload = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigurationError("config must be a JSON object")
        return cls.from_dict(payload)

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        unknown = sorted(set(payload) - set(CONFIG_SCHEMA))
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        raw = {}
        for key, (types, default) in CONFIG_SCHEMA.items():
            allowed = types if isinstance(types, tuple) else (types,)
            if key in payload:
                value = payload[key]
                # bool subclasses int; only keys that declare bool accept it
                if isinstance(value, bool) and bool not in allowed:
                    raise ConfigurationError(f"config key {key!r} must not be a boolean")
                if not isinstance(value, allowed):
                    raise ConfigurationError(
                        f"config key {key!r} has type {type(value).__name__}"
                    )
                raw[key] = value
            else:
                if default is None and key in ("model", "method"):
                    raise ConfigurationError(f"config key {key!r} is required")
                raw[key] = default
        cfg = cls(raw=raw)
        cfg._validate()
        return cfg

    def _validate(self) -> None:
        raw = self.raw
        if raw["model"] not in MODELS:
            raise ConfigurationError(f"model must be one of {MODELS}, got {raw['model']!r}")
        if raw["method"] not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}, got {raw['method']!r}")
        if raw["eval_x"] is None:
            raw["eval_x"] = list(DEFAULT_EVAL_X[raw["model"]])
        for key in ("gen_hidden", "disc_hidden", "den_hidden"):
            if not all(isinstance(v, int) and v > 0 for v in raw[key]):
                raise ConfigurationError(f"{key} must be a list of positive integers")
        if not all(isinstance(v, (int, float)) for v in raw["eval_x"]) or not raw["eval_x"]:
            raise ConfigurationError("eval_x must be a non-empty list of numbers")
        if len(raw["grid_bounds"]) != 4:
            raise ConfigurationError("grid_bounds must be [z1_min, z1_max, z2_min, z2_max]")
        if len(raw["grid_resolution"]) != 2 or not all(
            isinstance(v, int) and v >= 2 for v in raw["grid_resolution"]
        ):
            raise ConfigurationError("grid_resolution must be two integers >= 2")
        for key in ("outer_steps", "inner_steps"):
            if raw[key] < 0:
                raise ConfigurationError(f"{key} must be >= 0")
        for key in ("batch_size", "eval_samples", "heldout_samples", "noise_dim"):
            if raw[key] < 1:
                raise ConfigurationError(f"{key} must be >= 1")
        if raw["data_size"] is not None and raw["data_size"] < 1:
            raise ConfigurationError("data_size must be >= 1 or null")
        if not 0.0 <= raw["tail_weight"] < 1.0:
            raise ConfigurationError("tail_weight must lie in [0, 1)")
        if raw["tail_weight"] > 0 and not raw["tail_low"] < raw["tail_high"]:
            raise ConfigurationError("tail_low must be below tail_high when tail_weight > 0")
        if raw["model"] == "sprinkler" and raw["sigma_prior"] <= 0:
            raise ConfigurationError("sigma_prior must be positive")
        if raw["model"] == "linear_gaussian":
            if raw["obs_noise"] <= 0:
                raise ConfigurationError("obs_noise must be positive")
            if len(raw["coefficients"]) != 2 or not all(
                isinstance(v, (int, float)) for v in raw["coefficients"]
            ):
                raise ConfigurationError("coefficients must be two numbers (2-D latent)")
        try:
            self.noise_config()
            self.train_cfg()
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def build_model(self) -> LatentVariableModel:
        if self.model == "sprinkler":
            return sprinkler_model(float(self.sigma_prior))
        return linear_gaussian_model(
            np.asarray(self.coefficients, dtype=np.float64), float(self.obs_noise)
        )

    def noise_config(self) -> NoiseConfig:
        return NoiseConfig(
            sigma=float(self.noise_sigma),
            anneal=float(self.noise_anneal),
            sigma_min=None if self.noise_sigma_min is None else float(self.noise_sigma_min),
        )

    def train_cfg(self) -> TrainLoopConfig:
        return TrainLoopConfig(
            method=self.method,
            outer_steps=self.outer_steps,
            inner_steps=self.inner_steps,
            batch_size=self.batch_size,
            psi_lr=float(self.psi_lr),
            psi_lr_decay=float(self.psi_lr_decay),
            phi_lr=float(self.phi_lr),
            phi_lr_decay=float(self.phi_lr_decay),
            warm_start_inner=self.warm_start_inner,
            hybrid_alpha=float(self.hybrid_alpha),
            noise=self.noise_config(),
            ensemble_weight=float(self.ensemble_weight),
        )

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            bounds=tuple(float(v) for v in self.grid_bounds),
            shape=tuple(int(v) for v in self.grid_resolution),
        )

    def net_kwargs(self) -> dict:
        return {
            "noise_dim": self.noise_dim,
            "gen_hidden": tuple(self.gen_hidden),
            "disc_hidden": tuple(self.disc_hidden),
            "den_hidden": tuple(self.den_hidden),
        }


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def snapshot_to_dict(state, cfg: ExperimentConfig, seed: int) -> dict:
    nets = {"generator": state.posterior.generator.to_dict()}
    for name in ("ratio", "denoiser", "denoiser_p", "prior_denoiser"):
        attr = getattr(state, name)
        if attr is not None:
            nets[name] = (attr.net if hasattr(attr, "net") else attr).to_dict()
    return {
        "format": SNAPSHOT_FORMAT,
        "model": cfg.model,
        "method": cfg.method,
        "seed": seed,
        "outer_steps_completed": state.step,
        "noise_dim": state.posterior.noise_dim,
        "networks": nets,
    }


def load_snapshot_into_state(payload: dict, state, cfg: ExperimentConfig) -> None:
    if payload.get("format") != SNAPSHOT_FORMAT:
        raise ConfigurationError(f"snapshot format {payload.get('format')!r} not recognized")
    for key in ("model", "method"):
        if payload.get(key) != getattr(cfg, key):
            raise ConfigurationError(
                f"snapshot {key} {payload.get(key)!r} does not match config {getattr(cfg, key)!r}"
            )
    if payload.get("noise_dim") != cfg.noise_dim:
        raise ConfigurationError("snapshot noise_dim does not match config")
    nets = payload["networks"]
    try:
        _load_mlp(state.posterior.generator, nets["generator"])
        for name in ("ratio", "denoiser", "denoiser_p", "prior_denoiser"):
            attr = getattr(state, name)
            if attr is None:
                continue
            if name not in nets:
                raise ConfigurationError(f"snapshot lacks the {name!r} network")
            _load_mlp(attr.net if hasattr(attr, "net") else attr, nets[name])
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"snapshot incompatible with config networks: {exc}") from exc


def _load_mlp(target: Mlp, payload: dict) -> None:
    source = Mlp.from_dict(payload)
    target.set_param_values(source.param_values())


# ---------------------------------------------------------------------------
# evaluation harness shared by train/eval
# ---------------------------------------------------------------------------

def compute_diagnostics(
    state, model: LatentVariableModel, cfg: ExperimentConfig, seed: int
) -> tuple[list[Diagnostics], dict]:
    """Diagnostics per evaluation x plus the q-hat grids keyed by x."""
    spec = cfg.grid_spec()
    eval_rng = child_rng(seed, 2)
    sigma = cfg.noise_config().at_step(max(state.step - 1, 0))
    diags, grids = [], {}
    for x in cfg.eval_x:
        x = float(x)
        reference = grid_posterior(model, x, spec)
        samples = state.posterior.sample(np.full(cfg.eval_samples, x), eval_rng)
        qhat, oob = histogram_density(samples, spec)
        grids[x] = qhat

        ratio_limit = None
        if state.ratio is not None and cfg.method in ("pc_adv", "hybrid"):
            ratio_limit = ratio_limit_diagnostic(state.ratio, model, x, reference)
        flatness = None
        if state.ratio is not None and cfg.method == "jc_adv":
            xs_h, zs_h = model.joint_sample(child_rng(seed, 3), cfg.heldout_samples)
            flatness = flatness_diagnostic(state.ratio, xs_h, zs_h)
        curl = None
        if state.denoiser is not None:
            score_field = lambda zs: score_from_denoiser(
                state.denoiser, zs, np.full(zs.shape[0], x), sigma
            )
            curl = curl_proxy(score_field, spec)

        diags.append(
            Diagnostics(
                x=x,
                kl_nats=kl_grid(qhat, reference),
                posterior_correlation=reference.correlation(),
                ratio_limit_std=ratio_limit,
                flatness_mean_abs=flatness,
                curl_proxy=curl,
                out_of_bounds_fraction=oob,
            )
        )
    return diags, grids


def _x_tag(x: float) -> str:
    return f"{x:g}"


def _build_state_and_data(cfg: ExperimentConfig, seed: int):
    model = cfg.build_model()
    init_rng = child_rng(seed, 0)
    state = build_run_state(model, cfg.train_cfg(), init_rng, **cfg.net_kwargs())
    if cfg.data_size is None:
        data = ModelMarginalData(model)
    else:
        data = FixedData(model.joint_sample(child_rng(seed, 4), cfg.data_size)[0])
    if cfg.tail_weight > 0:
        data = TailMixtureData(data, cfg.tail_weight, cfg.tail_low, cfg.tail_high)
    return model, state, data


def _resolve_out_dir(cfg: Optional[ExperimentConfig], out: Optional[str]) -> Path:
    if out is not None:
        path = Path(out)
    elif cfg is not None and cfg.output_dir:
        path = Path(cfg.output_dir)
    else:
        raise ConfigurationError("an output directory is required (--out or config output_dir)")
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def run_train(config_path, out: Optional[str] = None, seed: Optional[int] = None) -> int:
    try:
        cfg = ExperimentConfig.from_file(config_path)
        out_dir = _resolve_out_dir(cfg, out)
        seed = cfg.seed if seed is None else seed
        model, state, data = _build_state_and_data(cfg, seed)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    metrics_path = out_dir / "metrics.jsonl"
    try:
        with open(metrics_path, "w") as fh:
            run_training(
                state,
                model,
                data,
                cfg.train_cfg(),
                child_rng(seed, 1),
                on_step=lambda rec: fh.write(json.dumps(rec) + "\n"),
            )
        diags, _ = compute_diagnostics(state, model, cfg, seed)
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    (out_dir / "params.json").write_text(json.dumps(snapshot_to_dict(state, cfg, seed)))
    diagnostics_to_jsonl(diags, out_dir / "diagnostics.jsonl")
    for d in diags:
        print(f"x={_x_tag(d.x)}: kl_nats={d.kl_nats:.4f}")
    return EXIT_OK


def run_eval(config_path, params_path, out: Optional[str] = None, seed: Optional[int] = None) -> int:
    try:
        cfg = ExperimentConfig.from_file(config_path)
        out_dir = _resolve_out_dir(cfg, out)
        seed = cfg.seed if seed is None else seed
        model, state, _ = _build_state_and_data(cfg, seed)
        try:
            payload = json.loads(Path(params_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read snapshot {params_path}: {exc}") from exc
        load_snapshot_into_state(payload, state, cfg)
        state.step = int(payload.get("outer_steps_completed", 0))
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        diags, grids = compute_diagnostics(state, model, cfg, seed)
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    diagnostics_to_jsonl(diags, out_dir / "diagnostics.jsonl")
    for x, grid in grids.items():
        grid_to_csv(grid, out_dir / f"qhat_x{_x_tag(x)}.csv")
    for d in diags:
        print(f"x={_x_tag(d.x)}: kl_nats={d.kl_nats:.4f}")
    return EXIT_OK


def run_oracle(config_path, out: Optional[str] = None, seed: Optional[int] = None) -> int:
    try:
        cfg = ExperimentConfig.from_file(config_path)
        out_dir = _resolve_out_dir(cfg, out)
        model = cfg.build_model()
        if not (model.explicit_prior and model.explicit_likelihood):
            raise ConfigurationError("oracle grids need a model with an explicit joint density")
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    spec = cfg.grid_spec()
    summary = {"model": cfg.model, "correlations": {}}
    for x in cfg.eval_x:
        x = float(x)
        grid = grid_posterior(model, x, spec)
        grid_to_csv(grid, out_dir / f"posterior_x{_x_tag(x)}.csv")
        summary["correlations"][_x_tag(x)] = grid.correlation()
        print(f"x={_x_tag(x)}: correlation={grid.correlation():.4f}")
    (out_dir / "oracle_summary.json").write_text(json.dumps(summary))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="implicitvi",
        description="Train, evaluate and benchmark implicit-posterior variational inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="run a configured training experiment")
    eval_p = sub.add_parser("eval", help="evaluate a params snapshot")
    oracle_p = sub.add_parser("oracle", help="emit exact grid posteriors")
    for p in (train_p, eval_p, oracle_p):
        p.add_argument("--config", required=True, help="path to a flat JSON config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    eval_p.add_argument("--params", required=True, help="params snapshot from train")

    args = parser.parse_args(argv)
    if args.command == "train":
        return run_train(args.config, args.out, args.seed)
    if args.command == "eval":
        return run_eval(args.config, args.params, args.out, args.seed)
    return run_oracle(args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
