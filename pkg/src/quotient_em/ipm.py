"""Integral probability metrics: polynomial-feature IPMs and Gaussian-RBF MMD.

Feature IPMs between model laws are computed from exact low-order moments, so
orbit invariance is a sharp numerical identity rather than a statistical one;
kernel distances between models are estimated from seeded samples.  The module
also fits the one-sided moduli that transfer parameter-space contraction to
IPM error and back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import WeightedDataset
from .errors import (
    CapabilityError,
    DimensionError,
    DomainError,
    SymmetryBreachError,
)
from .groups import GroupAction, orbit_distance
from .models import LatentModel
from .rng import stream

__all__ = [
    "PolynomialFeatures",
    "CustomFeatures",
    "RbfKernel",
    "median_heuristic",
    "MmdEstimate",
    "feature_ipm_model",
    "feature_ipm_empirical",
    "mmd",
    "quotient_ipm",
    "ipm_dist_to_set",
    "ipm_deviation_bound",
    "fit_modulus_slope",
    "fit_lower_modulus_slope",
]

FEATURE_INVARIANCE_TOL = 1e-8
MODULUS_INFLATION = 1.10
LOWER_MODULUS_SHRINK = 0.90


@dataclass(frozen=True)
class PolynomialFeatures:
    """phi(x) = x (degree 1) or [x, vec(x x^T)] (degree 2)."""

    degree: int
    d: int
    bound: float | None = None  # sup-norm of phi over a declared compact domain

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise CapabilityError("polynomial features support degree 1 or 2 only")

    @property
    def out_dim(self) -> int:
        return self.d if self.degree == 1 else self.d + self.d * self.d

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.d:
            raise DimensionError(f"feature map expects dimension {self.d}, got {pts.shape[1]}")
        if self.degree == 1:
            return pts
        outer = pts[:, :, None] * pts[:, None, :]
        return np.concatenate([pts, outer.reshape(pts.shape[0], -1)], axis=1)

    def model_mean(self, model: LatentModel, theta) -> np.ndarray:
        mean, second = model.moments(theta)
        if self.degree == 1:
            return mean
        return np.concatenate([mean, second.reshape(-1)])


@dataclass(frozen=True)
class CustomFeatures:
    """Named coordinate functions applied pointwise; empirical use only."""

    funcs: tuple  # of (name, callable point -> float)
    d: int
    bound: float | None = None

    @property
    def out_dim(self) -> int:
        return len(self.funcs)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cols = [np.array([fn(x) for x in pts], dtype=float) for _, fn in self.funcs]
        return np.stack(cols, axis=1)

    def model_mean(self, model, theta):
        raise CapabilityError("custom features have no exact model means; use samples")


@dataclass(frozen=True)
class RbfKernel:
    """Gaussian RBF k(x,y) = exp(-||x-y||^2 / (2 bandwidth^2)); kappa = 1."""

    bandwidth: float
    kappa: float = 1.0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise DomainError("bandwidth must be positive")

    def gram(self, x, y) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        ya = np.atleast_2d(np.asarray(y, dtype=float))
        sq = (
            np.sum(xa**2, axis=1)[:, None]
            - 2.0 * xa @ ya.T
            + np.sum(ya**2, axis=1)[None, :]
        )
        return np.exp(-0.5 * np.maximum(sq, 0.0) / self.bandwidth**2)


def median_heuristic(points) -> float:
    """Median pairwise Euclidean distance of the pooled sample."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    if n < 2:
        raise DomainError("median heuristic needs at least two points")
    sq = (
        np.sum(pts**2, axis=1)[:, None]
        - 2.0 * pts @ pts.T
        + np.sum(pts**2, axis=1)[None, :]
    )
    iu = np.triu_indices(n, k=1)
    med = float(np.median(np.sqrt(np.maximum(sq[iu], 0.0))))
    if med <= 0:
        raise DomainError("median pairwise distance is zero; kernel bandwidth undefined")
    return med


def feature_ipm_model(model: LatentModel, theta, theta_prime, feature: PolynomialFeatures) -> float:
    """Euclidean norm of the exact model feature-mean difference."""
    diff = feature.model_mean(model, theta) - feature.model_mean(model, theta_prime)
    return float(np.linalg.norm(diff))


def feature_ipm_empirical(p: WeightedDataset, q: WeightedDataset, feature) -> float:
    """|| sum_i w_i phi(x_i) - sum_j v_j phi(y_j) ||."""
    fp = p.weights @ feature(p.points)
    fq = q.weights @ feature(q.points)
    return float(np.linalg.norm(fp - fq))


@dataclass(frozen=True)
class MmdEstimate:
    """MMD value (root of the positive part) plus the raw signed square."""

    value: float
    squared: float
    estimator: str

    def __float__(self) -> float:
        return self.value


def _dataset_key(ds: WeightedDataset) -> bytes:
    return np.ascontiguousarray(ds.points).tobytes() + np.ascontiguousarray(ds.weights).tobytes()


def mmd(p: WeightedDataset, q: WeightedDataset, kernel: RbfKernel, estimator: str = "v-statistic") -> MmdEstimate:
    """Kernel MMD between two weighted datasets.

    The v-statistic is the plug-in double sum (nonnegative up to rounding,
    clamped before the root).  The u-statistic removes the diagonals, needs
    unweighted equal-mass points on both sides, and may be negative; both the
    signed square and the root of its positive part are reported.

    Arguments are put in a canonical order first, so mmd(p, q) and mmd(q, p)
    run the identical float computation and symmetry is exact.
    """
    if _dataset_key(q) < _dataset_key(p):
        p, q = q, p
    kxx = kernel.gram(p.points, p.points)
    kyy = kernel.gram(q.points, q.points)
    kxy = kernel.gram(p.points, q.points)
    if estimator == "v-statistic":
        sq = (
            float(p.weights @ kxx @ p.weights)
            - 2.0 * float(p.weights @ kxy @ q.weights)
            + float(q.weights @ kyy @ q.weights)
        )
        return MmdEstimate(value=float(np.sqrt(max(sq, 0.0))), squared=sq, estimator=estimator)
    if estimator == "u-statistic":
        for ds, name in ((p, "p"), (q, "q")):
            if ds.n < 2 or float(np.max(np.abs(ds.weights - 1.0 / ds.n))) > 1e-15:
                raise CapabilityError(
                    f"u-statistic requires >= 2 unweighted equal-mass points in {name}"
                )
        n, m = p.n, q.n
        xx = (np.sum(kxx) - np.trace(kxx)) / (n * (n - 1))
        yy = (np.sum(kyy) - np.trace(kyy)) / (m * (m - 1))
        xy = float(np.mean(kxy))
        sq = xx + yy - 2.0 * xy
        return MmdEstimate(value=float(np.sqrt(max(sq, 0.0))), squared=float(sq), estimator=estimator)
    raise DomainError(f"unknown MMD estimator {estimator!r}")


def _kernel_ipm_between_models(
    model: LatentModel, theta, theta_prime, kernel: RbfKernel, seed: int, n_samples: int, index: int = 0
) -> float:
    x = model.sample(theta, n_samples, stream(seed, "ipm.kernel_left", index))
    y = model.sample(theta_prime, n_samples, stream(seed, "ipm.kernel_right", index))
    return mmd(WeightedDataset.from_points(x), WeightedDataset.from_points(y), kernel).value


def quotient_ipm(
    model: LatentModel,
    theta,
    theta_prime,
    metric,
    action: GroupAction,
    *,
    seed: int = 0,
    n_samples: int = 512,
    recheck: bool = True,
) -> float:
    """IPM between the induced laws, with an orbit-invariance recheck.

    Feature metrics are exact: replacing theta by act(g, theta) for three
    seeded g must reproduce the value to 1e-8.  Kernel metrics are estimated
    from seeded samples, so the recheck is statistical (3 standard errors of
    replicate scatter).  A recheck failure signals a model/action wiring bug.
    """
    if isinstance(metric, RbfKernel):
        reps = [
            _kernel_ipm_between_models(model, theta, theta_prime, metric, seed, n_samples, index=j)
            for j in range(4)
        ]
        value = float(np.mean(reps))
        if recheck:
            se = float(np.std(reps, ddof=1)) if len(reps) > 1 else 0.0
            tol = 3.0 * max(se, metric.kappa / np.sqrt(n_samples))
            for j in range(3):
                g = action.random_element(stream(seed, "ipm.invariance_element", j))
                moved = _kernel_ipm_between_models(
                    model, action.act(g, model.layout.check(theta)), theta_prime,
                    metric, seed, n_samples, index=10 + j,
                )
                if abs(moved - value) > tol:
                    raise SymmetryBreachError(
                        f"kernel quotient IPM moved by {abs(moved - value):.3e} "
                        f"(> {tol:.3e}) under a group element"
                    )
        return value

    value = feature_ipm_model(model, theta, theta_prime, metric)
    if recheck:
        t = model.layout.check(theta)
        for j in range(3):
            g = action.random_element(stream(seed, "ipm.invariance_element", j))
            moved = feature_ipm_model(model, action.act(g, t), theta_prime, metric)
            if abs(moved - value) > FEATURE_INVARIANCE_TOL:
                raise SymmetryBreachError(
                    f"feature quotient IPM moved by {abs(moved - value):.3e} "
                    "under a group element"
                )
    return value


def ipm_dist_to_set(
    model: LatentModel,
    theta,
    target,
    metric,
    action: GroupAction,
    *,
    seed: int = 0,
    n_samples: int = 512,
) -> float:
    """min over target members of the quotient IPM to theta."""
    members = list(target)
    if not members:
        raise DomainError("ipm_dist_to_set requires a nonempty target set")
    values = []
    for i, member in enumerate(members):
        values.append(
            quotient_ipm(
                model, theta, member, metric, action,
                seed=seed, n_samples=n_samples, recheck=(i == 0),
            )
        )
    return float(min(values))


def ipm_deviation_bound(kind: str, n: int, t: float, bound: float | None = None, kappa: float | None = None) -> float:
    """Plug-in deviation bound 2c/sqrt(n) + c*sqrt(2t/n) for c in {B, kappa}."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if t <= 0:
        raise DomainError("t must be positive")
    if kind == "feature":
        if bound is None or bound < 0:
            raise DomainError("feature bound B must be a nonnegative real")
        c = float(bound)
    elif kind == "kernel":
        if kappa is None or kappa < 0:
            raise DomainError("kernel kappa must be a nonnegative real")
        c = float(kappa)
    else:
        raise DomainError(f"unknown deviation-bound kind {kind!r}")
    return 2.0 * c / np.sqrt(n) + c * np.sqrt(2.0 * t / n)


def fit_modulus_slope(model: LatentModel, probes, feature: PolynomialFeatures) -> float:
    """One-sided upper modulus d_F(theta, theta') <= L ||theta - theta'||.

    L is the max observed pairwise ratio over the probe grid, inflated by 10%
    so the certificate holds on fresh grids from the same region.
    """
    pts = [model.layout.check(p) for p in probes]
    worst = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            dn = float(np.linalg.norm(pts[i] - pts[j]))
            if dn < 1e-12:
                continue
            worst = max(worst, feature_ipm_model(model, pts[i], pts[j], feature) / dn)
    if worst <= 0:
        raise DomainError("probe grid produced no usable modulus ratios")
    return MODULUS_INFLATION * worst


def fit_lower_modulus_slope(
    model: LatentModel, action: GroupAction, probes, center, feature: PolynomialFeatures
) -> float:
    """Linear lower envelope c with c * d_orbit(theta, center) <= d_F.

    c is the min observed ratio against the center, shrunk by 10%; its inverse
    (division) converts IPM error into an orbit-distance rate.
    """
    c_vec = model.layout.check(center)
    best = np.inf
    for p in probes:
        t = model.layout.check(p)
        od = orbit_distance(t, c_vec, action).value
        if od < 1e-9:
            continue
        best = min(best, feature_ipm_model(model, t, c_vec, feature) / od)
    if not np.isfinite(best) or best <= 0:
        raise DomainError("probe grid produced no usable lower-modulus ratios")
    return LOWER_MODULUS_SHRINK * best
