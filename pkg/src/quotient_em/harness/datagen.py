"""Dataset generation from flat configs: seeded draws or exact atom designs."""

from __future__ import annotations

import numpy as np

from ..datasets import WeightedDataset
from ..errors import ConfigError
from ..ipm import PolynomialFeatures, RbfKernel
from ..models import FactorModel, GaussianMixture, SignMixture
from ..rng import stream
from .designs import gaussian_quantile_atoms

__all__ = ["build_model", "build_metric", "generate_data"]


def build_model(cfg: dict):
    kind = cfg.get("model.kind")
    if kind == "gmm":
        return GaussianMixture(
            k=int(cfg.get("model.k", 2)),
            d=int(cfg.get("model.d", 1)),
            covariance_mode=str(cfg.get("model.covariance_mode", "spherical-known")),
            sigma=float(cfg.get("model.sigma", 1.0)),
        )
    if kind == "sign-mixture":
        return SignMixture(d=int(cfg.get("model.d", 1)), sigma=float(cfg.get("model.sigma", 1.0)))
    if kind == "factor":
        d = int(cfg.get("model.d", 2))
        psi_diag = cfg.get("model.psi_diag", tuple([1.0] * d))
        if isinstance(psi_diag, (int, float)):
            psi_diag = tuple([float(psi_diag)] * d)
        if len(psi_diag) != d:
            raise ConfigError(f"model.psi_diag must have {d} entries")
        return FactorModel(d=d, r=int(cfg.get("model.r", 1)), psi=np.diag(psi_diag))
    raise ConfigError(
        f"unknown model.kind {kind!r}; valid kinds: gmm, sign-mixture, factor"
    )


def build_metric(cfg: dict, d: int):
    """Metric spec from config: {metric.type, metric.degree|bandwidth, metric.bound}."""
    kind = cfg.get("metric.type", "feature")
    if kind == "feature":
        bound = cfg.get("metric.bound")
        return PolynomialFeatures(
            degree=int(cfg.get("metric.degree", 2)), d=d,
            bound=float(bound) if bound is not None else None,
        )
    if kind == "mmd":
        return RbfKernel(bandwidth=float(cfg.get("metric.bandwidth", 1.0)))
    raise ConfigError(f"unknown metric.type {kind!r}; valid: feature, mmd")


def _theta_true(model, cfg: dict) -> np.ndarray:
    raw = cfg.get("data.theta_true")
    if raw is None:
        raise ConfigError("data.theta_true is required for this generator")
    if isinstance(raw, (int, float)):
        raw = (float(raw),)
    theta = np.asarray(raw, dtype=float)
    return model.layout.check(theta)


def generate_data(cfg: dict, seed: int) -> WeightedDataset:
    """Build the dataset named by the config; bit-reproducible per (cfg, seed).

    Generators: `sample` (n equally-weighted model draws), `quantile` (exact
    finite-support population from per-component Gaussian quantile atoms; 1-d
    mixture models only), `point-mass` (a single atom).
    """
    generator = cfg.get("data.generator", "sample")
    if generator == "point-mass":
        raw = cfg.get("data.point")
        if raw is None:
            raise ConfigError("data.point is required for the point-mass design")
        if isinstance(raw, (int, float)):
            raw = (float(raw),)
        pt = np.asarray(raw, dtype=float)[None, :]
        return WeightedDataset(points=pt, weights=np.array([1.0]))

    model = build_model(cfg)
    if generator == "sample":
        n = int(cfg.get("data.n", 100))
        theta = _theta_true(model, cfg)
        pts = model.sample(theta, n, stream(seed, "datagen.sample"))
        return WeightedDataset.from_points(pts)

    if generator == "quantile":
        n = int(cfg.get("data.n", 200))
        theta = _theta_true(model, cfg)
        if isinstance(model, GaussianMixture) and model.d == 1:
            if model.covariance_mode != "spherical-known":
                raise ConfigError("quantile design needs the spherical-known mixture")
            if n % model.k:
                raise ConfigError(f"data.n={n} must be divisible by k={model.k}")
            per = n // model.k
            w = model.layout.get(theta, "weights")
            means = model.layout.get(theta, "means").reshape(-1)
            pts, wts = [], []
            for z in range(model.k):
                pts.append(gaussian_quantile_atoms(means[z], model.sigma, per))
                wts.append(np.full(per, w[z] / per))
            return WeightedDataset(
                points=np.concatenate(pts)[:, None], weights=np.concatenate(wts)
            )
        if isinstance(model, SignMixture) and model.d == 1:
            if n % 2:
                raise ConfigError("sign-mixture quantile design needs even data.n")
            per = n // 2
            loc = float(theta[0])
            pts = np.concatenate(
                [
                    gaussian_quantile_atoms(loc, model.sigma, per),
                    gaussian_quantile_atoms(-loc, model.sigma, per),
                ]
            )
            return WeightedDataset(
                points=pts[:, None], weights=np.full(2 * per, 0.5 / per)
            )
        raise ConfigError("quantile designs are implemented for 1-d mixture models only")

    raise ConfigError(
        f"unknown data.generator {generator!r}; valid: sample, quantile, point-mass"
    )
