"""EM engine: iteration variants, slice maps, Jacobians, deviation measures.

The engine runs exact, inexact (additive per-step error) and sample-splitting
(fresh block per step) EM, optionally composing a canonical section after
every update.  Local analysis lives here too: the update-map Jacobian from
surrogate Hessian blocks with a finite-difference cross-check, the spectral
local rate, measured geometric rates from trajectories, the operator deviation
over a probe grid, and a multi-start estimate of the population fixed-point
set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import WeightedDataset
from .errors import (
    ConditioningError,
    DegeneracyError,
    DomainError,
    EmptySetError,
    InsufficientDataError,
    PreconditionError,
)
from .models import LatentModel
from .numerics import spectral_radius
from .rng import stream

__all__ = [
    "EmConfig",
    "Trajectory",
    "em_run",
    "slice_em_map",
    "refine_fixed_point",
    "EmJacobian",
    "em_jacobian",
    "local_rate",
    "empirical_rate",
    "empirical_rate_from_errors",
    "OperatorDeviation",
    "operator_deviation",
    "projection_set_estimate",
    "latin_hypercube_probes",
    "random_init",
]

ERROR_FLOOR = 100.0 * np.finfo(float).eps
MIN_RATE_WINDOW = 5
FIXED_POINT_TOL = 1e-8
JACOBIAN_FD_STEP = 1e-5
DEDUP_TOL = 1e-6


@dataclass(frozen=True)
class EmConfig:
    """Iteration plan: variant, stopping rule, optional canonical section."""

    variant: str = "exact"  # exact | inexact | split
    max_iters: int = 200
    conv_tol: float = 1e-10
    section: object | None = None
    epsilons: tuple[float, ...] | None = None  # inexact magnitudes, 0 past the end
    m_blocks: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("exact", "inexact", "split"):
            raise DomainError(f"unknown EM variant {self.variant!r}")
        if self.conv_tol <= 0:
            raise DomainError("conv_tol must be positive")
        if self.variant == "inexact":
            eps = tuple(float(e) for e in (self.epsilons or ()))
            if any(e < 0 for e in eps):
                raise DomainError("inexact epsilons must be nonnegative")
            object.__setattr__(self, "epsilons", eps)
        if self.variant == "split" and (self.m_blocks is None or self.m_blocks < 1):
            raise DomainError("split variant needs m_blocks >= 1")


@dataclass
class Trajectory:
    """Per-iteration record; row t describes iterate t (row 0 is the start)."""

    thetas: list[np.ndarray]
    phis: list[float]
    param_changes: list[float | None]
    orbit_dists: list[float | None]
    ipm_dists: list[float | None]
    step_devs: list[float | None]
    eps_injected: list[float | None]
    status: str  # converged | max_iters | degenerate

    def __len__(self) -> int:
        return len(self.thetas)

    @property
    def final(self) -> np.ndarray:
        return self.thetas[-1]

    def errors_to(self, theta_star: np.ndarray) -> np.ndarray:
        ref = np.asarray(theta_star, dtype=float).reshape(-1)
        return np.array([float(np.linalg.norm(t - ref)) for t in self.thetas])

    def to_csv(self, path) -> None:
        """Columns: t,phi,param_change,orbit_dist,ipm_dist,step_dev,eps_injected."""
        from pathlib import Path

        def cell(v) -> str:
            return "-" if v is None else f"{v:.17g}"

        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        lines = ["t,phi,param_change,orbit_dist,ipm_dist,step_dev,eps_injected"]
        for t in range(len(self.thetas)):
            lines.append(
                ",".join(
                    [
                        str(t),
                        f"{self.phis[t]:.17g}",
                        cell(self.param_changes[t]),
                        cell(self.orbit_dists[t]),
                        cell(self.ipm_dists[t]),
                        cell(self.step_devs[t]),
                        cell(self.eps_injected[t]),
                    ]
                )
            )
        p.write_text("\n".join(lines) + "\n")


def _apply_section(section, theta: np.ndarray) -> np.ndarray:
    return theta if section is None else section.apply(theta)


def _split_blocks(data: WeightedDataset, m_blocks: int, seed: int) -> list[WeightedDataset]:
    if data.n < m_blocks:
        raise DomainError(f"cannot split {data.n} points into {m_blocks} nonempty blocks")
    perm = stream(seed, "em.split_shuffle").permutation(data.n)
    bounds = np.linspace(0, data.n, m_blocks + 1, dtype=int)
    return [data.subset(perm[bounds[b] : bounds[b + 1]]) for b in range(m_blocks)]


def em_run(
    model: LatentModel,
    theta0,
    data: WeightedDataset,
    config: EmConfig,
    *,
    pop_data: WeightedDataset | None = None,
    orbit_ref=None,
    orbit_action=None,
    ipm_dist_fn=None,
) -> Trajectory:
    """Run EM per `config`, recording the per-iteration instrumentation.

    Optional hooks: `pop_data` records each step's deviation from the
    population update at the same iterate; (`orbit_ref`, `orbit_action`)
    record orbit distance to a reference; `ipm_dist_fn(theta)` records an IPM
    distance to a target set.
    """
    from .groups import orbit_distance

    theta = model.layout.check(theta0).copy()
    s = model.free_slice if model.hessian_capable else slice(0, model.layout.dim)

    blocks = (
        _split_blocks(data, config.m_blocks, config.seed)
        if config.variant == "split"
        else None
    )
    max_iters = config.max_iters if blocks is None else min(config.max_iters, len(blocks))

    def instrument(th):
        od = (
            float(orbit_distance(th, orbit_ref, orbit_action).value)
            if orbit_ref is not None and orbit_action is not None
            else None
        )
        ipm = float(ipm_dist_fn(th)) if ipm_dist_fn is not None else None
        return od, ipm

    od0, ipm0 = instrument(theta)
    traj = Trajectory(
        thetas=[theta.copy()],
        phis=[model.objective(theta, data)],
        param_changes=[None],
        orbit_dists=[od0],
        ipm_dists=[ipm0],
        step_devs=[None],
        eps_injected=[None],
        status="max_iters",
    )

    for t in range(max_iters):
        step_data = blocks[t] if blocks is not None else data
        try:
            candidate = model.m_step(theta, step_data)
        except (DegeneracyError, ConditioningError):
            traj.status = "degenerate"
            return traj
        candidate = _apply_section(config.section, candidate)

        step_dev = None
        if pop_data is not None:
            pop_update = _apply_section(config.section, model.m_step(theta, pop_data))
            step_dev = float(np.linalg.norm(candidate - pop_update))

        eps_val = None
        if config.variant == "inexact":
            eps_val = config.epsilons[t] if t < len(config.epsilons) else 0.0
            if eps_val > 0.0:
                u = stream(config.seed, "em.inexact_direction", t).standard_normal(
                    s.stop - s.start
                )
                u /= np.linalg.norm(u)
                candidate = candidate.copy()
                candidate[s] = candidate[s] + eps_val * u

        change = float(np.linalg.norm(candidate - theta))
        if change <= config.conv_tol:
            traj.status = "converged"
            return traj

        theta = candidate
        od, ipm = instrument(theta)
        traj.thetas.append(theta.copy())
        traj.phis.append(model.objective(theta, data))
        traj.param_changes.append(change)
        traj.orbit_dists.append(od)
        traj.ipm_dists.append(ipm)
        traj.step_devs.append(step_dev)
        traj.eps_injected.append(eps_val)

    return traj


def slice_em_map(model: LatentModel, section, theta, data: WeightedDataset) -> np.ndarray:
    """One section-composed EM update; input must be section-canonical."""
    t = model.layout.check(theta)
    if not section.is_canonical(t):
        raise PreconditionError("slice_em_map input is not section-canonical")
    return section.apply(model.m_step(t, data))


def refine_fixed_point(
    model: LatentModel,
    section,
    theta,
    data: WeightedDataset,
    tol: float = 1e-12,
    max_iters: int = 10_000,
) -> np.ndarray:
    """Iterate the slice map until the step is below tol (or iteration cap)."""
    t = _apply_section(section, model.layout.check(theta))
    for _ in range(max_iters):
        nxt = _apply_section(section, model.m_step(t, data))
        if float(np.linalg.norm(nxt - t)) <= tol:
            return nxt
        t = nxt
    return t


@dataclass(frozen=True)
class EmJacobian:
    """Update-map Jacobian at a fixed point, with its FD cross-check."""

    matrix: np.ndarray
    fd_matrix: np.ndarray
    max_fd_diff: float


def em_jacobian(
    model: LatentModel,
    theta_star,
    data: WeightedDataset,
    section=None,
) -> EmJacobian:
    """DT at a fixed point from the surrogate Hessian blocks.

    DT = -H_pp^{-1} H_pt at (theta*, theta*).  Cross-checked against central
    finite differences of the raw M-step map on the free coordinates; the raw
    map has the same derivative as the section-composed map at interior slice
    fixed points, and stays well-defined where the section is kinked (e.g. the
    symmetric sign-model fixed point at the origin).
    """
    t = model.layout.check(theta_star)
    update = _apply_section(section, model.m_step(t, data))
    if float(np.linalg.norm(update - t)) > FIXED_POINT_TOL:
        raise PreconditionError(
            f"theta_star is not a fixed point within {FIXED_POINT_TOL:g} "
            f"(residual {float(np.linalg.norm(update - t)):.3e})"
        )
    h_pp, h_pt = model.q_hessian_blocks(t, t, data)
    cond = np.linalg.cond(h_pp)
    if not np.isfinite(cond) or cond > 1e12:
        raise ConditioningError(f"H_pp condition number {cond:.3e} is too large")
    matrix = -np.linalg.solve(h_pp, h_pt)

    s = model.free_slice
    m = s.stop - s.start
    fd = np.empty((m, m))
    for j in range(m):
        tp = t.copy()
        tm = t.copy()
        tp[s.start + j] += JACOBIAN_FD_STEP
        tm[s.start + j] -= JACOBIAN_FD_STEP
        fd[:, j] = (model.m_step(tp, data)[s] - model.m_step(tm, data)[s]) / (
            2.0 * JACOBIAN_FD_STEP
        )
    return EmJacobian(
        matrix=matrix, fd_matrix=fd, max_fd_diff=float(np.max(np.abs(matrix - fd)))
    )


def local_rate(model: LatentModel, theta_star, data: WeightedDataset, section=None) -> float:
    """Spectral radius of the update-map Jacobian at the fixed point."""
    return spectral_radius(em_jacobian(model, theta_star, data, section=section).matrix)


def empirical_rate_from_errors(errors, skip_initial: int = 0, floor: float | None = None) -> float:
    """Geometric factor fitted to the largest strictly-decreasing error window.

    Least-squares slope of log e_t over the window, exponentiated; windows
    must contain at least five iterations above the floor (default 100*eps;
    callers fitting against an imperfectly-resolved fixed point should raise
    it above the fixed point's own accuracy).
    """
    e = np.asarray(errors, dtype=float).reshape(-1)
    valid = e > (ERROR_FLOOR if floor is None else max(floor, ERROR_FLOOR))
    best: tuple[int, int] | None = None
    start = None
    for t in range(len(e)):
        ok = valid[t] and (start is None or e[t] < e[t - 1])
        if ok:
            if start is None:
                start = t
        else:
            if start is not None and t - start >= MIN_RATE_WINDOW:
                if best is None or (t - start) > (best[1] - best[0]):
                    best = (start, t)
            start = t if valid[t] else None
    if start is not None and len(e) - start >= MIN_RATE_WINDOW:
        if best is None or (len(e) - start) > (best[1] - best[0]):
            best = (start, len(e))
    if best is None:
        raise InsufficientDataError(
            f"no strictly decreasing window of >= {MIN_RATE_WINDOW} iterations above the floor"
        )
    lo, hi = best
    lo = min(lo + skip_initial, hi - MIN_RATE_WINDOW)
    ts = np.arange(lo, hi)
    ys = np.log(e[lo:hi])
    slope = np.polyfit(ts, ys, 1)[0]
    return float(np.exp(slope))


def empirical_rate(
    trajectory: Trajectory, theta_star, skip_initial: int = 0, floor: float | None = None
) -> float:
    return empirical_rate_from_errors(trajectory.errors_to(theta_star), skip_initial, floor)


@dataclass(frozen=True)
class OperatorDeviation:
    """max_theta ||sample update - population update|| over the probe grid."""

    value: float
    skipped: tuple[int, ...] = ()

    def __float__(self) -> float:
        return self.value


def operator_deviation(
    model: LatentModel,
    pop_data: WeightedDataset,
    sample_data: WeightedDataset,
    probe_grid,
    section=None,
) -> OperatorDeviation:
    """Operator deviation sup over the probe grid; degenerate probes skipped."""
    worst = 0.0
    skipped: list[int] = []
    for i, theta in enumerate(probe_grid):
        try:
            t_pop = _apply_section(section, model.m_step(theta, pop_data))
            t_smp = _apply_section(section, model.m_step(theta, sample_data))
        except (DegeneracyError, ConditioningError):
            skipped.append(i)
            continue
        worst = max(worst, float(np.linalg.norm(t_smp - t_pop)))
    return OperatorDeviation(value=worst, skipped=tuple(skipped))


def latin_hypercube_probes(
    model: LatentModel, center, radius: float, count: int = 64, seed: int = 0
) -> list[np.ndarray]:
    """Seeded Latin hypercube of probe parameters in a free-coordinate box."""
    c = model.layout.check(center)
    s = model.free_slice if model.hessian_capable else slice(0, model.layout.dim)
    m = s.stop - s.start
    rng = stream(seed, "em.probe_grid")
    u = (rng.random((count, m)) + np.stack([rng.permutation(count) for _ in range(m)], axis=1)) / count
    offsets = (2.0 * u - 1.0) * radius
    probes = []
    for i in range(count):
        th = c.copy()
        th[s] = th[s] + offsets[i]
        probes.append(th)
    return probes


def random_init(model: LatentModel, data: WeightedDataset, rng: np.random.Generator):
    """A feasible random starting parameter drawn from the data's geometry."""
    from .models import FactorModel, GaussianMixture, SignMixture

    if isinstance(model, GaussianMixture):
        idx = rng.choice(data.n, size=model.k, replace=False)
        means = data.points[idx] + 0.1 * model.sigma * rng.standard_normal((model.k, model.d))
        weights = np.full(model.k, 1.0 / model.k)
        if model.covariance_mode == "full-free":
            mu = data.mean()
            cov = data.second_moment() - np.outer(mu, mu)
            cov = cov + 1e-6 * np.eye(model.d)
            return model.pack(weights, means, np.stack([cov] * model.k))
        return model.pack(weights, means)
    if isinstance(model, SignMixture):
        idx = int(rng.integers(data.n))
        return data.points[idx].copy()
    if isinstance(model, FactorModel):
        scale = float(np.sqrt(np.mean(np.diag(data.second_moment()))))
        return (scale / np.sqrt(model.r) * rng.standard_normal((model.d, model.r))).reshape(-1)
    raise DomainError(f"no random_init rule for {type(model).__name__}")


def projection_set_estimate(
    model: LatentModel,
    pop_data: WeightedDataset,
    n_starts: int,
    seed: int,
    section,
) -> list[np.ndarray]:
    """Population fixed points found by multi-start EM, canonicalized, deduped.

    Every returned point satisfies ||slice_em_map(theta) - theta|| <= 1e-8;
    results are sorted lexicographically for determinism.
    """
    if n_starts < 1:
        raise DomainError("n_starts must be >= 1")
    found: list[np.ndarray] = []
    for i in range(n_starts):
        rng = stream(seed, "em.projection_start", i)
        try:
            theta0 = random_init(model, pop_data, rng)
            cfg = EmConfig(variant="exact", max_iters=2000, conv_tol=1e-10, section=section)
            traj = em_run(model, theta0, pop_data, cfg)
            if traj.status == "degenerate":
                continue
            theta = refine_fixed_point(model, section, traj.final, pop_data)
            residual = float(np.linalg.norm(slice_em_map(model, section, theta, pop_data) - theta))
            if residual > FIXED_POINT_TOL:
                continue
        except (DegeneracyError, ConditioningError, PreconditionError):
            continue
        if all(float(np.linalg.norm(theta - f)) > DEDUP_TOL for f in found):
            found.append(theta)
    if not found:
        raise EmptySetError("no multi-start run converged to a fixed point")
    found.sort(key=lambda th: tuple(th))
    return found
