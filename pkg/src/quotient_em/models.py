"""Three latent-variable families with closed-form EM machinery.

Each model exposes the same surface: marginal log-density, posterior table,
objective, complete-data surrogate and its derivatives in the update variable,
the exact M-step, moment formulas, sampling, and the symmetry action it lives
under.  Population quantities are exact because both the sample and the
"population" are finite-support WeightedDatasets.

Differentiable (Hessian-capable) coordinates are the means block for the
spherical known-variance mixture, and the full parameter for the sign mixture
and the factor model; the full-covariance mixture supports only the M-step and
ascent machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import WeightedDataset
from .errors import (
    CapabilityError,
    DegeneracyError,
    DomainError,
    ConditioningError,
    LikelihoodUnderflowError,
)
from .groups import (
    GroupAction,
    OrthogonalAction,
    ParamLayout,
    PermutationAction,
    SignAction,
)

__all__ = [
    "PosteriorTable",
    "LatentModel",
    "GaussianMixture",
    "SignMixture",
    "FactorModel",
]

RESP_FLOOR = 1e-300
COMPONENT_MASS_FLOOR = 1e-12
MIXED_HESSIAN_STEP = 1e-5   # relative FD step for the cross block
SCORE_FD_STEP = 1e-6        # relative FD step for marginal-score checks
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PosteriorTable:
    """E-step output: responsibilities, or Gaussian conditional (means, cov)."""

    responsibilities: np.ndarray | None = None  # (n, k), rows sum to 1
    latent_means: np.ndarray | None = None      # (n, r)
    latent_cov: np.ndarray | None = None        # (r, r), shared across points


def _sorted_row_sum(a: np.ndarray) -> np.ndarray:
    """Row sums with a permutation-invariant (ascending) reduction order.

    Relabeling mixture components permutes columns; sorting first makes the
    reduction bit-identical across relabelings, which keeps posterior
    transport an exact identity rather than an ulp-level one.
    """
    return np.sum(np.sort(a, axis=1), axis=1)


def _row_logsumexp(a: np.ndarray) -> np.ndarray:
    m = np.max(a, axis=1)
    safe = np.where(np.isfinite(m), m, 0.0)
    return safe + np.log(_sorted_row_sum(np.exp(a - safe[:, None])))


def _central_diff(fun, x: np.ndarray, rel_step: float) -> np.ndarray:
    """Central finite differences of a scalar or vector function of x."""
    x = np.asarray(x, dtype=float)
    probe = fun(x)
    probe_arr = np.atleast_1d(np.asarray(probe, dtype=float))
    out = np.empty((probe_arr.size, x.size))
    for j in range(x.size):
        h = rel_step * (1.0 + abs(float(x[j])))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        fp = np.atleast_1d(np.asarray(fun(xp), dtype=float))
        fm = np.atleast_1d(np.asarray(fun(xm), dtype=float))
        out[:, j] = (fp - fm) / (2.0 * h)
    return out[0] if np.isscalar(probe) or np.ndim(probe) == 0 else out


class LatentModel:
    """Common surface shared by the three families."""

    layout: ParamLayout
    hessian_capable: bool = True

    # -- subclass hooks -------------------------------------------------
    @property
    def free_slice(self) -> slice:
        """Slice of the flat parameter holding the differentiable coordinates."""
        raise NotImplementedError

    def log_marginal_all(self, theta, points) -> np.ndarray:
        raise NotImplementedError

    def posterior(self, theta, data: WeightedDataset) -> PosteriorTable:
        raise NotImplementedError

    def q_surrogate(self, theta_prime, theta, data: WeightedDataset) -> float:
        raise NotImplementedError

    def q_gradient(self, theta_prime, theta, data: WeightedDataset) -> np.ndarray:
        raise NotImplementedError

    def _h_pp(self, theta_prime, theta, data: WeightedDataset) -> np.ndarray:
        raise NotImplementedError

    def m_step(self, theta, data: WeightedDataset) -> np.ndarray:
        raise NotImplementedError

    def _complete_score(self, theta, x) -> np.ndarray:
        raise NotImplementedError

    def moments(self, theta) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def sample(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def action(self) -> GroupAction:
        raise NotImplementedError

    # -- shared implementations -----------------------------------------
    @property
    def free_dim(self) -> int:
        s = self.free_slice
        return s.stop - s.start

    def log_marginal(self, theta, x) -> float:
        return float(self.log_marginal_all(theta, np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def objective(self, theta, data: WeightedDataset) -> float:
        return float(data.weights @ self.log_marginal_all(theta, data.points))

    def q_hessian_blocks(
        self, theta_prime, theta, data: WeightedDataset
    ) -> tuple[np.ndarray, np.ndarray]:
        """(H_pp, H_pt): analytic update-variable Hessian and FD cross block.

        The cross block differentiates the analytic gradient in the current
        iterate's free coordinates with central step 1e-5 * (1 + ||theta||).
        """
        self._require_hessian()
        tp = self.layout.check(theta_prime)
        t = self.layout.check(theta)
        h_pp = self._h_pp(tp, t, data)
        s = self.free_slice
        step = MIXED_HESSIAN_STEP * (1.0 + float(np.linalg.norm(t)))

        def grad_of_theta(free_part: np.ndarray) -> np.ndarray:
            full = t.copy()
            full[s] = free_part
            return self.q_gradient(tp, full, data)

        base = t[s].copy()
        m = self.free_dim
        h_pt = np.empty((m, m))
        for j in range(m):
            xp = base.copy()
            xm = base.copy()
            xp[j] += step
            xm[j] -= step
            h_pt[:, j] = (grad_of_theta(xp) - grad_of_theta(xm)) / (2.0 * step)
        return h_pp, h_pt

    def fisher_check(self, theta, x) -> tuple[np.ndarray, np.ndarray]:
        """(FD marginal score, posterior-averaged complete-data score)."""
        self._require_hessian()
        t = self.layout.check(theta)
        s = self.free_slice
        x = np.asarray(x, dtype=float).reshape(-1)

        def logp(free_part: np.ndarray) -> float:
            full = t.copy()
            full[s] = free_part
            return self.log_marginal(full, x)

        fd = _central_diff(logp, t[s].copy(), SCORE_FD_STEP)
        analytic = self._complete_score(t, x)
        return np.asarray(fd, dtype=float).reshape(-1), analytic

    def strong_concavity_certificate(self, theta, data: WeightedDataset) -> float:
        """Closed-form lambda with -H_pp >= lambda * I for this iterate."""
        self._require_hessian()
        h_pp = self._h_pp(self.layout.check(theta), self.layout.check(theta), data)
        return float(np.min(np.linalg.eigvalsh(-h_pp)))

    def posterior_kl(self, theta, theta_prime, data: WeightedDataset) -> float:
        """Data-weighted KL between posteriors at theta and theta_prime."""
        post = self.posterior(theta, data)
        post_p = self.posterior(theta_prime, data)
        if post.responsibilities is not None:
            r = post.responsibilities
            rp = post_p.responsibilities
            kl_rows = np.sum(r * (np.log(r) - np.log(rp)), axis=1)
            return float(data.weights @ kl_rows)
        m, c = post.latent_means, post.latent_cov
        mp, cp = post_p.latent_means, post_p.latent_cov
        r_dim = c.shape[0]
        cp_inv = np.linalg.inv(cp)
        _, logdet_c = np.linalg.slogdet(c)
        _, logdet_cp = np.linalg.slogdet(cp)
        diffs = mp - m
        quad = np.einsum("ni,ij,nj->n", diffs, cp_inv, diffs)
        kl_rows = 0.5 * (
            np.trace(cp_inv @ c) + quad - r_dim + logdet_cp - logdet_c
        )
        return float(data.weights @ kl_rows)

    def _require_hessian(self):
        if not self.hessian_capable:
            raise CapabilityError(
                f"{type(self).__name__}: gradient/Hessian machinery is not "
                "available in this mode"
            )


def _spherical_loglik(points: np.ndarray, means: np.ndarray, sigma: float) -> np.ndarray:
    """(n, k) log N(x_i; mu_z, sigma^2 I)."""
    d = points.shape[1]
    sq = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ means.T
        + np.sum(means**2, axis=1)[None, :]
    )
    return -0.5 * d * (LOG_2PI + 2.0 * math.log(sigma)) - 0.5 * sq / (sigma * sigma)


def _pack_lower(mat: np.ndarray) -> np.ndarray:
    d = mat.shape[0]
    idx = np.tril_indices(d)
    return mat[idx]


def _unpack_lower(packed: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros((d, d))
    idx = np.tril_indices(d)
    out[idx] = packed
    out = out + out.T - np.diag(np.diag(out))
    return out


@dataclass(frozen=True)
class GaussianMixture(LatentModel):
    """k-component Gaussian mixture under the S_k relabeling action.

    covariance_mode "spherical-known" (the Hessian-capable, means-only mode:
    weights ride along unchanged and sigma is known) or "full-free" (weights,
    means and full covariances all updated by the M-step; no derivative
    machinery).
    """

    k: int
    d: int
    covariance_mode: str = "spherical-known"
    sigma: float = 1.0
    layout: ParamLayout = field(init=False)
    hessian_capable: bool = field(init=False)

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("mixture needs k >= 1 components")
        if self.covariance_mode not in ("spherical-known", "full-free"):
            raise DomainError(f"unknown covariance_mode {self.covariance_mode!r}")
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")
        spec = [("weights", (self.k,)), ("means", (self.k, self.d))]
        if self.covariance_mode == "full-free":
            spec.append(("covs", (self.k, self.d * (self.d + 1) // 2)))
        object.__setattr__(self, "layout", ParamLayout.build(spec))
        object.__setattr__(self, "hessian_capable", self.covariance_mode == "spherical-known")

    @property
    def dof(self) -> int:
        base = (self.k - 1) + self.k * self.d
        if self.covariance_mode == "full-free":
            base += self.k * self.d * (self.d + 1) // 2
        return base

    @property
    def free_slice(self) -> slice:
        self._require_hessian()
        return self.layout.block("means").sl

    def pack(self, weights, means, covs=None) -> np.ndarray:
        parts = {"weights": np.asarray(weights, dtype=float),
                 "means": np.asarray(means, dtype=float).reshape(self.k, self.d)}
        if self.covariance_mode == "full-free":
            covs = np.asarray(covs, dtype=float)
            parts["covs"] = np.stack([_pack_lower(covs[z]) for z in range(self.k)])
        return self.layout.pack(parts)

    def _weights(self, theta: np.ndarray) -> np.ndarray:
        w = self.layout.get(theta, "weights")
        if np.any(w <= 0.0) or abs(float(np.sum(w)) - 1.0) > 1e-9:
            raise DomainError("mixture weights must lie in the open simplex")
        return w

    def _covs(self, theta: np.ndarray) -> np.ndarray:
        packed = self.layout.get(theta, "covs")
        covs = np.stack([_unpack_lower(packed[z], self.d) for z in range(self.k)])
        for z in range(self.k):
            if np.min(np.linalg.eigvalsh(covs[z])) <= 0.0:
                raise DomainError(f"component {z} covariance is not positive definite")
        return covs

    def _log_joint(self, theta: np.ndarray, points: np.ndarray) -> np.ndarray:
        """(n, k) table log pi_z + log f(x_i; component z)."""
        w = self._weights(theta)
        means = self.layout.get(theta, "means")
        if self.covariance_mode == "spherical-known":
            ll = _spherical_loglik(points, means, self.sigma)
        else:
            covs = self._covs(theta)
            n = points.shape[0]
            ll = np.empty((n, self.k))
            for z in range(self.k):
                diff = points - means[z]
                sign, logdet = np.linalg.slogdet(covs[z])
                if sign <= 0:
                    raise DomainError(f"component {z} covariance is not positive definite")
                sol = np.linalg.solve(covs[z], diff.T).T
                ll[:, z] = -0.5 * (
                    self.d * LOG_2PI + logdet + np.sum(diff * sol, axis=1)
                )
        return np.log(w)[None, :] + ll

    def log_marginal_all(self, theta, points) -> np.ndarray:
        t = self.layout.check(theta)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = _row_logsumexp(self._log_joint(t, pts))
        if not np.all(np.isfinite(vals)):
            raise LikelihoodUnderflowError("marginal likelihood underflowed at a data point")
        return vals

    def posterior(self, theta, data: WeightedDataset) -> PosteriorTable:
        t = self.layout.check(theta)
        lj = self._log_joint(t, data.points)
        lse = _row_logsumexp(lj)
        if not np.all(np.isfinite(lse)):
            raise LikelihoodUnderflowError("all components underflowed at a data point")
        r = np.exp(lj - lse[:, None])
        r = np.maximum(r, RESP_FLOOR)
        r /= _sorted_row_sum(r)[:, None]
        return PosteriorTable(responsibilities=r)

    def q_surrogate(self, theta_prime, theta, data: WeightedDataset) -> float:
        tp = self.layout.check(theta_prime)
        t = self.layout.check(theta)
        r = self.posterior(t, data).responsibilities
        lj = self._log_joint(tp, data.points)
        return float(data.weights @ np.sum(r * lj, axis=1))

    def q_gradient(self, theta_prime, theta, data: WeightedDataset) -> np.ndarray:
        self._require_hessian()
        tp = self.layout.check(theta_prime)
        t = self.layout.check(theta)
        r = self.posterior(t, data).responsibilities
        means_p = self.layout.get(tp, "means")
        wr = data.weights[:, None] * r
        grad = (wr.T @ data.points - np.sum(wr, axis=0)[:, None] * means_p) / (
            self.sigma**2
        )
        return grad.reshape(-1)

    def _h_pp(self, theta_prime, theta, data: WeightedDataset) -> np.ndarray:
        r = self.posterior(theta, data).responsibilities
        mass = data.weights @ r
        diag = np.repeat(mass / self.sigma**2, self.d)
        return -np.diag(diag)

    def strong_concavity_certificate(self, theta, data: WeightedDataset) -> float:
        self._require_hessian()
        r = self.posterior(self.layout.check(theta), data).responsibilities
        mass = data.weights @ r
        return float(np.min(mass)) / self.sigma**2

    def m_step(self, theta, data: WeightedDataset) -> np.ndarray:
        t = self.layout.check(theta)
        r = self.posterior(t, data).responsibilities
        wr = data.weights[:, None] * r
        mass = np.sum(wr, axis=0)
        if np.any(mass < COMPONENT_MASS_FLOOR):
            raise DegeneracyError(
                f"component mass fell below {COMPONENT_MASS_FLOOR:g}: {mass}"
            )
        means = (wr.T @ data.points) / mass[:, None]
        out = t.copy()
        out[self.layout.block("means").sl] = means.reshape(-1)
        if self.covariance_mode == "full-free":
            out[self.layout.block("weights").sl] = mass
            packed = np.empty((self.k, self.d * (self.d + 1) // 2))
            for z in range(self.k):
                diff = data.points - means[z]
                cov = (diff * wr[:, z][:, None]).T @ diff / mass[z]
                if np.min(np.linalg.eigvalsh(cov)) <= 0.0:
                    raise DegeneracyError(f"component {z} scatter collapsed")
                packed[z] = _pack_lower(cov)
            out[self.layout.block("covs").sl] = packed.reshape(-1)
        return out

    def _complete_score(self, theta, x) -> np.ndarray:
        t = self.layout.check(theta)
        means = self.layout.get(t, "means")
        data1 = WeightedDataset(points=np.atleast_2d(x), weights=np.array([1.0]))
        r = self.posterior(t, data1).responsibilities[0]
        score = r[:, None] * (np.asarray(x, dtype=float)[None, :] - means) / self.sigma**2
        return score.reshape(-1)

    def moments(self, theta) -> tuple[np.ndarray, np.ndarray]:
        t = self.layout.check(theta)
        w = self._weights(t)
        means = self.layout.get(t, "means")
        mean = w @ means
        second = (means * w[:, None]).T @ means
        if self.covariance_mode == "spherical-known":
            second = second + self.sigma**2 * np.eye(self.d)
        else:
            covs = self._covs(t)
            second = second + np.sum(w[:, None, None] * covs, axis=0)
        return mean, second

    def sample(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        t = self.layout.check(theta)
        w = self._weights(t)
        means = self.layout.get(t, "means")
        comps = rng.choice(self.k, size=n, p=w / np.sum(w))
        if self.covariance_mode == "spherical-known":
            return means[comps] + self.sigma * rng.standard_normal((n, self.d))
        covs = self._covs(t)
        chols = np.stack([np.linalg.cholesky(covs[z]) for z in range(self.k)])
        noise = rng.standard_normal((n, self.d))
        return means[comps] + np.einsum("nij,nj->ni", chols[comps], noise)

    def action(self) -> PermutationAction:
        names = ("weights", "means") + (
            ("covs",) if self.covariance_mode == "full-free" else ()
        )
        return PermutationAction(k=self.k, layout=self.layout, component_blocks=names)


@dataclass(frozen=True)
class SignMixture(LatentModel):
    """Symmetric two-component location mixture (1/2)N(theta) + (1/2)N(-theta)."""

    d: int
    sigma: float = 1.0
    layout: ParamLayout = field(init=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")
        object.__setattr__(self, "layout", ParamLayout.build([("mean", (self.d,))]))

    @property
    def dof(self) -> int:
        return self.d

    @property
    def free_slice(self) -> slice:
        return slice(0, self.d)

    def _loglik_pair(self, theta: np.ndarray, points: np.ndarray) -> np.ndarray:
        means = np.stack([theta, -theta])
        return math.log(0.5) + _spherical_loglik(points, means, self.sigma)

    def log_marginal_all(self, theta, points) -> np.ndarray:
        t = self.layout.check(theta)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return _row_logsumexp(self._loglik_pair(t, pts))

    def posterior(self, theta, data: WeightedDataset) -> PosteriorTable:
        t = self.layout.check(theta)
        lj = self._loglik_pair(t, data.points)
        r = np.exp(lj - _row_logsumexp(lj)[:, None])
        r = np.maximum(r, RESP_FLOOR)
        r /= _sorted_row_sum(r)[:, None]
        return PosteriorTable(responsibilities=r)

    def q_surrogate(self, theta_prime, theta, data: WeightedDataset) -> float:
        tp = self.layout.check(theta_prime)
        t = self.layout.check(theta)
        r = self.posterior(t, data).responsibilities
        lj = self._loglik_pair(tp, data.points)
        return float(data.weights @ np.sum(r * lj, axis=1))

    def q_gradient(self, theta_prime, theta, data: WeightedDataset) -> np.ndarray:
        tp = self.layout.check(theta_prime)
        t = self.layout.check(theta)
        r = self.posterior(t, data).responsibilities
        signed = (r[:, 0] - r[:, 1]) * data.weights
        return (signed @ data.points - tp) / self.sigma**2

    def _h_pp(self, theta_prime, theta, data: WeightedDataset) -> np.ndarray:
        return -np.eye(self.d) / self.sigma**2

    def strong_concavity_certificate(self, theta, data: WeightedDataset) -> float:
        return 1.0 / self.sigma**2

    def m_step(self, theta, data: WeightedDataset) -> np.ndarray:
        t = self.layout.check(theta)
        r = self.posterior(t, data).responsibilities
        signed = (r[:, 0] - r[:, 1]) * data.weights
        return signed @ data.points

    def _complete_score(self, theta, x) -> np.ndarray:
        t = self.layout.check(theta)
        xv = np.asarray(x, dtype=float).reshape(-1)
        data1 = WeightedDataset(points=xv[None, :], weights=np.array([1.0]))
        r = self.posterior(t, data1).responsibilities[0]
        return (r[0] * (xv - t) - r[1] * (xv + t)) / self.sigma**2

    def moments(self, theta) -> tuple[np.ndarray, np.ndarray]:
        t = self.layout.check(theta)
        return np.zeros(self.d), self.sigma**2 * np.eye(self.d) + np.outer(t, t)

    def sample(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        t = self.layout.check(theta)
        signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        return signs[:, None] * t[None, :] + self.sigma * rng.standard_normal((n, self.d))

    def action(self) -> SignAction:
        return SignAction(layout=self.layout)


@dataclass(frozen=True)
class FactorModel(LatentModel):
    """Linear-Gaussian factor model X = A Z + noise, Z ~ N(0, I_r).

    The noise covariance psi is known and SPD; the parameter is the loading
    matrix A (row-major flattened), identified up to right O(r) rotation.
    """

    d: int
    r: int
    psi: np.ndarray
    layout: ParamLayout = field(init=False)
    _psi_inv: np.ndarray = field(init=False, repr=False)
    _psi_chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        if psi.shape != (self.d, self.d):
            raise DomainError(f"psi must be {self.d}x{self.d}")
        if np.max(np.abs(psi - psi.T)) > 1e-10 or np.min(np.linalg.eigvalsh(psi)) <= 0:
            raise DomainError("psi must be symmetric positive definite")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "layout", ParamLayout.build([("loading", (self.d, self.r))]))
        object.__setattr__(self, "_psi_inv", np.linalg.inv(psi))
        object.__setattr__(self, "_psi_chol", np.linalg.cholesky(psi))

    @property
    def dof(self) -> int:
        return self.d * self.r

    @property
    def free_slice(self) -> slice:
        return slice(0, self.d * self.r)

    def loading(self, theta) -> np.ndarray:
        return self.layout.get(self.layout.check(theta), "loading")

    def log_marginal_all(self, theta, points) -> np.ndarray:
        a = self.loading(theta)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cov = a @ a.T + self.psi
        sign, logdet = np.linalg.slogdet(cov)
        if sign <= 0:
            raise DomainError("marginal covariance is not positive definite")
        sol = np.linalg.solve(cov, pts.T).T
        return -0.5 * (self.d * LOG_2PI + logdet + np.sum(pts * sol, axis=1))

    def _conditional(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(C, C A^T psi^{-1}): shared conditional covariance and mean map."""
        prec = np.eye(self.r) + a.T @ self._psi_inv @ a
        c = np.linalg.inv(prec)
        c = 0.5 * (c + c.T)
        return c, c @ a.T @ self._psi_inv

    def posterior(self, theta, data: WeightedDataset) -> PosteriorTable:
        a = self.loading(theta)
        c, mean_map = self._conditional(a)
        return PosteriorTable(latent_means=data.points @ mean_map.T, latent_cov=c)

    def _suff_stats(self, theta, data: WeightedDataset):
        post = self.posterior(theta, data)
        m = post.latent_means
        c = post.latent_cov
        w = data.weights
        s_xm = (data.points * w[:, None]).T @ m
        s_mm = (m * w[:, None]).T @ m + c
        return post, s_xm, s_mm

    def q_surrogate(self, theta_prime, theta, data: WeightedDataset) -> float:
        ap = self.loading(theta_prime)
        post, s_xm, s_mm = self._suff_stats(theta, data)
        m, c = post.latent_means, post.latent_cov
        w = data.weights
        sign, logdet_psi = np.linalg.slogdet(self.psi)
        resid = data.points - m @ ap.T
        quad = np.einsum("ni,ij,nj->n", resid, self._psi_inv, resid)
        trace_term = np.trace(self._psi_inv @ ap @ c @ ap.T)
        obs = -0.5 * (self.d * LOG_2PI + logdet_psi) - 0.5 * (w @ quad + trace_term)
        latent = -0.5 * self.r * LOG_2PI - 0.5 * (
            np.trace(c) + float(w @ np.sum(m * m, axis=1))
        )
        return float(obs + latent)

    def q_gradient(self, theta_prime, theta, data: WeightedDataset) -> np.ndarray:
        ap = self.loading(theta_prime)
        _, s_xm, s_mm = self._suff_stats(theta, data)
        return (self._psi_inv @ (s_xm - ap @ s_mm)).reshape(-1)

    def _h_pp(self, theta_prime, theta, data: WeightedDataset) -> np.ndarray:
        _, _, s_mm = self._suff_stats(theta, data)
        return -np.kron(self._psi_inv, s_mm)

    def m_step(self, theta, data: WeightedDataset) -> np.ndarray:
        _, s_xm, s_mm = self._suff_stats(theta, data)
        cond = np.linalg.cond(s_mm)
        if not np.isfinite(cond) or cond > 1e12:
            raise ConditioningError(
                f"factor normal matrix condition number {cond:.3e} is too large"
            )
        return np.linalg.solve(s_mm.T, s_xm.T).T.reshape(-1)

    def _complete_score(self, theta, x) -> np.ndarray:
        a = self.loading(theta)
        xv = np.asarray(x, dtype=float).reshape(-1)
        c, mean_map = self._conditional(a)
        m = mean_map @ xv
        return (self._psi_inv @ (np.outer(xv, m) - a @ (np.outer(m, m) + c))).reshape(-1)

    def moments(self, theta) -> tuple[np.ndarray, np.ndarray]:
        a = self.loading(theta)
        return np.zeros(self.d), a @ a.T + self.psi

    def sample(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        a = self.loading(theta)
        z = rng.standard_normal((n, self.r))
        noise = rng.standard_normal((n, self.d)) @ self._psi_chol.T
        return z @ a.T + noise

    def action(self) -> OrthogonalAction:
        return OrthogonalAction(r=self.r, layout=self.layout, loading_block="loading")
