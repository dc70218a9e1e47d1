"""Closed-form calculators for contraction envelopes and concentration bounds.

Every calculator evaluates a displayed finite-sample formula exactly as
stated; BoundReport pairs a bound sequence with the measured quantity it must
dominate and records the verdict.  The only numerical work is the entropy
integral, done by adaptive Simpson quadrature with an interval floor near the
integrable endpoint singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DivergenceError, DomainError

__all__ = [
    "EnvelopeInputs",
    "BoundReport",
    "perturbed_envelope",
    "inexact_envelope",
    "delta_from_gradients",
    "argmax_shift_bound",
    "function_gap_shift_bound",
    "approx_stationary_shift_bound",
    "covering_bound",
    "ball_covering_bound",
    "dudley_bound",
    "matrix_bernstein_tail",
    "matrix_bernstein_hp",
    "bousquet_bound",
    "ipm_to_orbit_rate",
]

DOMINANCE_TOL = 1e-12
DUDLEY_DEFAULT_CONSTANT = 24.0
DUDLEY_INTERVAL_FLOOR = 1e-12


@dataclass(frozen=True)
class EnvelopeInputs:
    """Inputs of the contraction envelopes: rate, floor, start, curvature."""

    gamma: float
    delta: float = 0.0
    e0: float = 0.0
    lam: float | None = None
    eps_schedule: tuple[float, ...] | None = None
    horizon: int = 0

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise DomainError(f"gamma must lie in [0,1), got {self.gamma}")
        for name, v in (("delta", self.delta), ("e0", self.e0)):
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be a finite nonnegative real")
        if self.lam is not None and self.lam <= 0:
            raise DomainError("lambda must be positive")
        if self.horizon < 0:
            raise DomainError("horizon must be nonnegative")


@dataclass(frozen=True)
class BoundReport:
    """A bound curve paired with measurements and a dominance verdict."""

    name: str
    inputs: dict
    t: tuple[int, ...]
    bound: tuple[float, ...]
    measured: tuple[float, ...]
    dominance: bool = field(init=False)
    max_slack: float = field(init=False)
    substitutions: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.t) != len(self.bound) or len(self.bound) != len(self.measured):
            raise DomainError("t, bound and measured must have equal lengths")
        margins = [b - m for b, m in zip(self.bound, self.measured)]
        object.__setattr__(self, "dominance", all(g >= -DOMINANCE_TOL for g in margins))
        object.__setattr__(self, "max_slack", max(margins) if margins else 0.0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": dict(self.inputs),
            "t": list(self.t),
            "bound": list(self.bound),
            "measured": list(self.measured),
            "dominance": self.dominance,
            "max_slack": self.max_slack,
            "substitutions": list(self.substitutions),
        }


def perturbed_envelope(gamma: float, delta: float, e0: float, horizon: int) -> list[float]:
    """b_t = gamma^t e0 + (1 - gamma^t)/(1 - gamma) * delta for t = 0..horizon."""
    EnvelopeInputs(gamma=gamma, delta=delta, e0=e0, horizon=horizon)
    out = []
    for t in range(horizon + 1):
        gt = gamma**t
        out.append(gt * e0 + (1.0 - gt) / (1.0 - gamma) * delta)
    return out


def inexact_envelope(gamma: float, e0: float, eps_schedule) -> list[float]:
    """b_t = gamma^t e0 + sum_{k<t} gamma^{t-1-k} eps_k for t = 0..len(eps)."""
    eps = tuple(float(e) for e in eps_schedule)
    if any(e < 0 for e in eps):
        raise DomainError("eps schedule entries must be nonnegative")
    EnvelopeInputs(gamma=gamma, e0=e0, eps_schedule=eps, horizon=len(eps))
    out = [float(e0)]
    acc = 0.0
    for k in range(len(eps)):
        acc = gamma * acc + eps[k]
        out.append(gamma ** (k + 1) * e0 + acc)
    return out


def delta_from_gradients(lam: float, sup_grad_dev: float) -> float:
    """Operator-deviation bound sup||grad dev|| / lambda under strong concavity."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if sup_grad_dev < 0:
        raise DomainError("gradient deviation must be nonnegative")
    return sup_grad_dev / lam


def argmax_shift_bound(lam: float, eps: float) -> float:
    """Maximizer shift <= eps/lambda under a uniform gradient error eps."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    return eps / lam


def function_gap_shift_bound(lam: float, delta_sup: float) -> float:
    """Maximizer shift <= sqrt(4 delta / lambda) under uniform value error delta."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if delta_sup < 0:
        raise DomainError("delta must be nonnegative")
    return math.sqrt(4.0 * delta_sup / lam)


def approx_stationary_shift_bound(lam: float, eta: float) -> float:
    """Distance to the maximizer <= sqrt(2 eta / lambda) at eta-stationary points."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if eta < 0:
        raise DomainError("eta must be nonnegative")
    return math.sqrt(2.0 * eta / lam)


def covering_bound(p: int, lip: float, radius: float, eps: float) -> float:
    """Covering-number bound (1 + 2 L R / eps)^p for a Lipschitz-indexed class."""
    if p < 1 or lip <= 0 or radius <= 0 or eps <= 0:
        raise DomainError("covering_bound needs positive p, L, R, eps")
    return (1.0 + 2.0 * lip * radius / eps) ** p


def ball_covering_bound(p: int, radius: float, rho: float) -> float:
    """Volumetric bound (1 + 2 R / rho)^p for covering a Euclidean ball."""
    if p < 1 or radius <= 0 or rho <= 0:
        raise DomainError("ball_covering_bound needs positive p, R, rho")
    return (1.0 + 2.0 * radius / rho) ** p


def _simpson(f, a: float, b: float) -> float:
    c = 0.5 * (a + b)
    return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))


def _adaptive_simpson(f, a: float, b: float, tol: float, whole: float, depth: int) -> float:
    c = 0.5 * (a + b)
    left = _simpson(f, a, c)
    right = _simpson(f, c, b)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return _adaptive_simpson(f, a, c, tol / 2.0, left, depth - 1) + _adaptive_simpson(
        f, c, b, tol / 2.0, right, depth - 1
    )


def dudley_bound(entropy, diam: float, n: int, constant: float = DUDLEY_DEFAULT_CONSTANT, abs_tol: float = 1e-8) -> float:
    """(C / sqrt(n)) * integral_0^diam sqrt(log N(eps)) d eps by adaptive Simpson.

    The integrand's endpoint singularity is handled by summing octaves
    [diam 2^{-j-1}, diam 2^{-j}] down to the 1e-12 interval floor; if the
    octave contributions fail to Cauchy-converge before the floor, the entropy
    is reported as non-integrable.
    """
    if diam <= 0:
        raise DomainError("diam must be positive")
    if n < 1:
        raise DomainError("n must be >= 1")
    if constant <= 0:
        raise DomainError("constant must be positive")

    def integrand(eps: float) -> float:
        v = float(entropy(eps))
        if v < 0:
            return 0.0
        return math.sqrt(v)

    total = 0.0
    hi = diam
    prev_seg = math.inf
    stalls = 0
    while hi > DUDLEY_INTERVAL_FLOOR * diam:
        lo = max(hi / 2.0, DUDLEY_INTERVAL_FLOOR * diam)
        seg = _adaptive_simpson(
            integrand, lo, hi, tol=abs_tol / 64.0, whole=_simpson(integrand, lo, hi), depth=30
        )
        total += seg
        if seg < abs_tol:
            return constant / math.sqrt(n) * total
        if seg >= prev_seg * 0.999:
            stalls += 1
            if stalls >= 8:
                raise DivergenceError(
                    "entropy integral octaves stopped shrinking; integrand is not integrable at 0"
                )
        else:
            stalls = 0
        prev_seg = seg
        hi = lo
    raise DivergenceError(
        "entropy integral did not Cauchy-converge above the 1e-12 interval floor"
    )


def matrix_bernstein_tail(v: float, r: float, d: int, t: float) -> float:
    """Tail bound 2 d exp(-(t^2/2) / (V + R t / 3)) for self-adjoint sums."""
    if v < 0 or r <= 0 or d < 1:
        raise DomainError("matrix_bernstein_tail needs V >= 0, R > 0, d >= 1")
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t == 0.0:
        return 2.0 * d
    return 2.0 * d * math.exp(-(t * t / 2.0) / (v + r * t / 3.0))


def matrix_bernstein_hp(v: float, r: float, d: int, delta_prob: float) -> float:
    """High-probability inversion sqrt(2 V log(2d/delta)) + (2R/3) log(2d/delta)."""
    if v < 0 or r <= 0 or d < 1:
        raise DomainError("matrix_bernstein_hp needs V >= 0, R > 0, d >= 1")
    if not (0.0 < delta_prob < 1.0):
        raise DomainError("delta_prob must lie in (0,1)")
    log_term = math.log(2.0 * d / delta_prob)
    return math.sqrt(2.0 * v * log_term) + (2.0 * r / 3.0) * log_term


def bousquet_bound(ez: float, v: float, b: float, n: int, t: float) -> float:
    """Supremum bound EZ + sqrt(2 v t / n) + b t / (3 n)."""
    if min(ez, v, b, t) < 0 or n < 1:
        raise DomainError("bousquet_bound needs nonnegative inputs and n >= 1")
    return ez + math.sqrt(2.0 * v * t / n) + b * t / (3.0 * n)


def ipm_to_orbit_rate(ipm_value: float, modulus_slope: float) -> float:
    """Invert a linear lower modulus: orbit distance <= ipm_value / c."""
    if modulus_slope <= 0:
        raise DomainError("modulus slope c must be positive")
    if ipm_value < 0:
        raise DomainError("ipm value must be nonnegative")
    return ipm_value / modulus_slope
