"""Dense linear-algebra kernels: spectra, SPD roots, polar factors, sphere nets.

Matrices are plain float64 numpy arrays (row-major).  Eigen/SVD work is
delegated to LAPACK through numpy.linalg; the sphere-net construction is a
randomized greedy maximal packing whose cardinality is post-checked against
the volumetric bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, ConditioningError, ParameterError
from .rng import stream

__all__ = [
    "Tolerances",
    "TOL",
    "SphereNet",
    "as_matrix",
    "spectral_radius",
    "spd_sqrt",
    "polar_factors",
    "sphere_net",
    "scalarize_vector_sup",
]


@dataclass(frozen=True)
class Tolerances:
    """All numeric tolerances for this module, in one place."""

    symmetry: float = 1e-10          # max asymmetry accepted by spd_sqrt
    spd_reconstruction: float = 1e-9  # ||S @ S - m|| target for spd_sqrt
    polar_orthogonality: float = 1e-9
    min_singular_value: float = 1e-10  # polar_factors conditioning floor
    eig_clamp_floor: float = 1e-14    # eigenvalue clamp in spd_sqrt
    eig_clamp_budget: float = 1e-10   # max total clamped mass before error
    net_unit_norm: float = 1e-12      # stored net points must be unit vectors
    net_separation_slack: float = 0.98  # greedy packs at slack*eta separation
    net_rejection_cutoff: int = 100_000  # consecutive rejections before stop


TOL = Tolerances()


def as_matrix(m) -> np.ndarray:
    """Validate and return a 2-d float64 matrix with finite entries."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix entries must be finite (no NaN/Inf)")
    return a


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a square matrix.

    Uses LAPACK's complete (Hessenberg-QR) eigenvalue routine, so complex
    conjugate dominant pairs of nonsymmetric inputs are handled exactly.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"spectral_radius needs a square matrix, got {a.shape}")
    if a.size == 0:
        raise DimensionError("spectral_radius of an empty matrix is undefined")
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def spd_sqrt(m, tol: Tolerances = TOL) -> np.ndarray:
    """Principal square root of a symmetric positive-definite matrix.

    Symmetric eigendecomposition route; tiny negative eigenvalues are clamped
    at `tol.eig_clamp_floor` and the clamped mass must stay below
    `tol.eig_clamp_budget`, otherwise the input is reported as indefinite.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"spd_sqrt needs a square matrix, got {a.shape}")
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > tol.symmetry:
        raise DomainError(f"spd_sqrt: input asymmetry {asym:.3e} exceeds {tol.symmetry:.1e}")
    sym = 0.5 * (a + a.T)
    evals, evecs = np.linalg.eigh(sym)
    if evals[0] <= 0.0:
        clamped_mass = float(np.sum(np.abs(np.minimum(evals, 0.0))))
        if clamped_mass > tol.eig_clamp_budget:
            raise DomainError(
                f"spd_sqrt: min eigenvalue {evals[0]:.3e} is not positive "
                f"(clamped mass {clamped_mass:.3e} exceeds budget)"
            )
        evals = np.maximum(evals, tol.eig_clamp_floor)
    root = (evecs * np.sqrt(evals)) @ evecs.T
    return 0.5 * (root + root.T)


def polar_factors(b, tol: Tolerances = TOL) -> tuple[np.ndarray, np.ndarray]:
    """Right polar decomposition b = u @ h with u orthogonal and h SPD.

    h = (b^T b)^{1/2} computed from the SVD; near-singular inputs are rejected
    with the offending singular value.
    """
    a = as_matrix(b)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"polar_factors needs a square matrix, got {a.shape}")
    u_svd, s, vt = np.linalg.svd(a)
    smin = float(s[-1]) if s.size else 0.0
    if smin <= tol.min_singular_value:
        raise ConditioningError(
            f"polar_factors: smallest singular value {smin:.3e} "
            f"is at or below the {tol.min_singular_value:.1e} floor"
        )
    u = u_svd @ vt
    h = vt.T @ (s[:, None] * vt)
    return u, 0.5 * (h + h.T)


@dataclass(frozen=True)
class SphereNet:
    """An eta-net of the unit sphere S^{dim-1} in Euclidean norm."""

    dim: int
    eta: float
    points: np.ndarray  # shape (count, dim), unit rows

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise DimensionError("net points must be (count, dim)")
        norms = np.linalg.norm(pts, axis=1)
        if pts.shape[0] and float(np.max(np.abs(norms - 1.0))) > TOL.net_unit_norm:
            raise DomainError("net points must have unit norm within 1e-12")

    @property
    def cardinality_bound(self) -> float:
        return (1.0 + 2.0 / self.eta) ** self.dim

    def __len__(self) -> int:
        return int(self.points.shape[0])


def sphere_net(dim: int, eta: float, seed: int = 0) -> SphereNet:
    """Greedy maximal packing realizing an eta-net of S^{dim-1}.

    Candidates are seeded uniform sphere samples; a candidate joins the net
    when it is at least 0.98*eta from every accepted point, and construction
    stops after 1e5 consecutive rejections.  The slack makes early stopping
    harmless for coverage at radius eta, while the packing stays eta'-separated
    with eta' < eta, so the accepted count is checked against the (1+2/eta)^dim
    volumetric bound before returning.
    """
    if dim < 1:
        raise ParameterError(f"sphere_net: dim must be >= 1, got {dim}")
    if not (0.0 < eta < 1.0):
        raise ParameterError(f"sphere_net: eta must lie in (0,1), got {eta}")
    if dim == 1:
        points = np.array([[1.0], [-1.0]])
        return SphereNet(dim=1, eta=eta, points=points)

    rng = stream(seed, f"numerics.sphere_net:{eta!r}", dim)
    sep = TOL.net_separation_slack * eta
    # ||c - a|| <= sep  <=>  <c, a> >= 1 - sep^2/2 for unit vectors
    cos_thresh = 1.0 - 0.5 * sep * sep
    accepted: list[np.ndarray] = []
    block = np.empty((0, dim))
    rejections = 0
    batch = 1024
    while rejections < TOL.net_rejection_cutoff:
        cands = rng.standard_normal((batch, dim))
        cands /= np.linalg.norm(cands, axis=1, keepdims=True)
        if block.shape[0]:
            blocked = np.any(block @ cands.T >= cos_thresh, axis=0)
        else:
            blocked = np.zeros(batch, dtype=bool)
        if bool(np.all(blocked)):
            rejections += batch
            continue
        fresh: list[np.ndarray] = []
        for pos in range(batch):
            if blocked[pos]:
                rejections += 1
                if rejections >= TOL.net_rejection_cutoff:
                    break
                continue
            c = cands[pos]
            if fresh and float(np.max(np.asarray(fresh) @ c)) >= cos_thresh:
                rejections += 1
                if rejections >= TOL.net_rejection_cutoff:
                    break
                continue
            fresh.append(c)
            rejections = 0
        if fresh:
            accepted.extend(fresh)
            block = np.asarray(accepted)
    points = np.asarray(accepted)
    bound = (1.0 + 2.0 / eta) ** dim
    if points.shape[0] > bound:
        raise DomainError(
            f"sphere_net: packing produced {points.shape[0]} points, "
            f"above the volumetric bound {bound:.1f}"
        )
    return SphereNet(dim=dim, eta=eta, points=points)


def scalarize_vector_sup(values, net: SphereNet) -> float:
    """Net upper bound (1-eta)^{-1} max_v max_y <v, y> on max_y ||y||.

    The empty supremum is 0 by convention.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        return 0.0
    if vals.ndim == 1:
        vals = vals[None, :]
    if vals.shape[1] != net.dim:
        raise DimensionError(
            f"scalarize_vector_sup: vectors have dim {vals.shape[1]}, net dim {net.dim}"
        )
    inner = net.points @ vals.T
    return float(np.max(inner)) / (1.0 - net.eta)
