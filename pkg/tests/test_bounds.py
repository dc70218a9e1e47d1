import math

import numpy as np
import pytest

from quotient_em.bounds import (
    BoundReport,
    approx_stationary_shift_bound,
    argmax_shift_bound,
    ball_covering_bound,
    bousquet_bound,
    covering_bound,
    delta_from_gradients,
    dudley_bound,
    function_gap_shift_bound,
    inexact_envelope,
    ipm_to_orbit_rate,
    matrix_bernstein_hp,
    matrix_bernstein_tail,
    perturbed_envelope,
)
from quotient_em.errors import DivergenceError, DomainError
from quotient_em.models import SignMixture
from quotient_em.rng import stream


class TestEnvelopes:
    def test_zero_delta_is_geometric(self):
        env = perturbed_envelope(0.6, 0.0, 2.0, 5)
        assert env == pytest.approx([2.0 * 0.6**t for t in range(6)], abs=1e-15)

    def test_arithmetic_instance(self):
        assert perturbed_envelope(0.5, 0.1, 0.0, 3)[3] == pytest.approx(0.175, abs=1e-15)

    def test_limit_value(self):
        assert perturbed_envelope(0.5, 0.1, 0.0, 50)[50] == pytest.approx(0.2, abs=1e-12)

    def test_gamma_domain(self):
        with pytest.raises(DomainError):
            perturbed_envelope(1.0, 0.1, 0.0, 3)

    def test_constant_eps_matches_perturbed(self):
        eps = [0.07] * 20
        a = inexact_envelope(0.4, 0.3, eps)
        b = perturbed_envelope(0.4, 0.07, 0.3, 20)
        assert a == pytest.approx(b, abs=1e-14)

    def test_single_impulse_unrolls(self):
        env = inexact_envelope(0.5, 0.0, [1.0] + [0.0] * 8)
        for t in range(1, 10):
            assert env[t] == pytest.approx(0.5 ** (t - 1), abs=1e-15)

    def test_zero_schedule_is_geometric(self):
        env = inexact_envelope(0.3, 1.0, [0.0] * 10)
        assert env == pytest.approx([0.3**t for t in range(11)], abs=1e-15)

    def test_negative_eps_rejected(self):
        with pytest.raises(DomainError):
            inexact_envelope(0.5, 0.0, [0.1, -0.1])


class TestStabilityBounds:
    def test_delta_from_gradients(self):
        assert delta_from_gradients(2.0, 0.5) == 0.25
        assert delta_from_gradients(2.0, 0.0) == 0.0
        with pytest.raises(DomainError):
            delta_from_gradients(0.0, 1.0)

    def test_quadratic_equality_case(self):
        # gradient offset eps on a lam-quadratic shifts the argmax by exactly eps/lam
        lam, eps = 1.7, 0.23
        assert argmax_shift_bound(lam, eps) == pytest.approx(eps / lam, abs=1e-16)

    def test_zero_perturbations(self):
        assert argmax_shift_bound(1.0, 0.0) == 0.0
        assert function_gap_shift_bound(1.0, 0.0) == 0.0
        assert approx_stationary_shift_bound(1.0, 0.0) == 0.0

    def test_function_gap_bound_dominates_measured_shift(self):
        # tilted quadratics over a ball: shift and sup value error in closed form
        for r in range(100):
            rng = stream(0, "bounds.gap", r)
            lam = 0.5 + 2.0 * rng.random()
            u_star = rng.standard_normal(3)
            rho = 1.0 + rng.random()
            a = rng.standard_normal(3)
            a *= 0.5 * lam * rho * rng.random() / np.linalg.norm(a)  # interior maximizer
            shift = float(np.linalg.norm(a)) / lam
            delta_sup = abs(float(a @ u_star)) + float(np.linalg.norm(a)) * rho
            assert shift <= function_gap_shift_bound(lam, delta_sup) + 1e-12

    def test_approx_stationary_bound(self):
        for r in range(100):
            rng = stream(1, "bounds.stationary", r)
            lam = 0.5 + 2.0 * rng.random()
            u_star = rng.standard_normal(3)
            rho = 1.0 + rng.random()
            v = rng.standard_normal(3)
            v /= np.linalg.norm(v)
            delta = 0.5 * rho * rng.random()
            eta = lam * delta * (delta + rho)  # sup of <grad, u - u_hat> over the ball
            assert delta <= approx_stationary_shift_bound(lam, eta) + 1e-12


class TestCovering:
    def test_arithmetic(self):
        assert covering_bound(2, 1.0, 1.0, 1.0) == 9.0
        assert ball_covering_bound(2, 1.0, 0.5) == 25.0

    def test_constructed_function_net_within_bound(self):
        # log-density class of the 1-d sign mixture over a parameter interval,
        # sup distance on a fixed evaluation box
        model = SignMixture(d=1, sigma=1.0)
        xs = np.linspace(-3.0, 3.0, 201)[:, None]
        radius, eps = 1.0, 0.25

        def fvals(theta):
            return model.log_marginal_all(np.array([theta]), xs)

        thetas = np.linspace(-radius, radius, 400)
        # certified Lipschitz constant: max |d/dtheta log p| over a fine grid
        grads = np.array(
            [
                float(np.max(np.abs((fvals(t + 1e-6) - fvals(t - 1e-6)) / 2e-6)))
                for t in thetas[::8]
            ]
        )
        lip = 1.05 * float(np.max(grads))
        accepted = []
        for t in thetas:
            vals = fvals(t)
            if all(float(np.max(np.abs(vals - other))) > eps for other in accepted):
                accepted.append(vals)
        assert len(accepted) <= covering_bound(1, lip, radius, eps)

    def test_constructed_ball_net_within_bound(self):
        rng = stream(2, "bounds.ballnet")
        rho, radius, p = 0.3, 1.0, 2
        pts = []
        for _ in range(5000):
            x = rng.standard_normal(p)
            x *= radius * rng.random() ** (1.0 / p) / np.linalg.norm(x)
            if all(float(np.linalg.norm(x - y)) > rho for y in pts):
                pts.append(x)
        assert len(pts) <= ball_covering_bound(p, radius, rho)


class TestDudley:
    def test_zero_entropy(self):
        assert dudley_bound(lambda e: 0.0, 1.0, 100) == 0.0

    def test_against_riemann_oracle(self):
        p, lip, radius = 2, 1.0, 1.0
        entropy = lambda eps: p * math.log(1.0 + 2.0 * lip * radius / eps)
        val = dudley_bound(entropy, 1.0, 100, constant=24.0)
        xs = (np.arange(1_000_000) + 0.5) / 1_000_000
        oracle = 24.0 / 10.0 * float(np.mean(np.sqrt(p * np.log(1.0 + 2.0 / xs))))
        assert abs(val - oracle) / oracle <= 1e-6

    def test_exact_inverse_sqrt_n_scaling(self):
        entropy = lambda eps: 2.0 * math.log(1.0 + 1.0 / eps)
        assert dudley_bound(entropy, 1.0, 100) / dudley_bound(entropy, 1.0, 400) == 2.0

    def test_divergent_entropy_detected(self):
        with pytest.raises(DivergenceError):
            dudley_bound(lambda e: 1.0 / e**2, 1.0, 100)


class TestConcentrationCalculators:
    def test_matrix_bernstein_at_zero(self):
        assert matrix_bernstein_tail(1.0, 1.0, 4, 0.0) == 8.0

    def test_matrix_bernstein_hp_inverts_tail(self):
        for v, r, d, delta in [(1.0, 1.0, 4, 0.05), (37.5, 0.75, 4, 0.01), (5.0, 2.0, 8, 0.1)]:
            t_star = matrix_bernstein_hp(v, r, d, delta)
            assert matrix_bernstein_tail(v, r, d, t_star) <= delta + 1e-12

    def test_bousquet_arithmetic(self):
        assert bousquet_bound(0.1, 1.0, 1.0, 100, 2.0) == pytest.approx(
            0.1 + math.sqrt(4.0 / 100.0) + 2.0 / 300.0
        )
        assert bousquet_bound(0.1, 1.0, 1.0, 100, 0.0) == pytest.approx(0.1)

    def test_ipm_to_orbit_rate(self):
        assert ipm_to_orbit_rate(0.0, 2.0) == 0.0
        assert ipm_to_orbit_rate(0.4, 2.0) == 0.2
        assert ipm_to_orbit_rate(0.8, 2.0) == 2.0 * ipm_to_orbit_rate(0.4, 2.0)
        with pytest.raises(DomainError):
            ipm_to_orbit_rate(0.1, 0.0)


class TestMonotonicity:
    def test_calculators_monotone_in_each_argument(self):
        grids = np.linspace(0.1, 0.9, 5)
        for i in range(len(grids) - 1):
            g0, g1 = grids[i], grids[i + 1]
            assert perturbed_envelope(g1, 0.1, 1.0, 10)[10] >= perturbed_envelope(g0, 0.1, 1.0, 10)[10]
            assert matrix_bernstein_tail(1.0, 1.0, 4, 1.0 + g1) <= matrix_bernstein_tail(1.0, 1.0, 4, 1.0 + g0)
            assert matrix_bernstein_tail(1.0 + g1, 1.0, 4, 2.0) >= matrix_bernstein_tail(1.0 + g0, 1.0, 4, 2.0)
            assert bousquet_bound(0.1, 1.0, 1.0, 100, g1) >= bousquet_bound(0.1, 1.0, 1.0, 100, g0)
            assert covering_bound(2, g1, 1.0, 0.5) >= covering_bound(2, g0, 1.0, 0.5)
            assert delta_from_gradients(1.0, g1) >= delta_from_gradients(1.0, g0)
            assert argmax_shift_bound(g1, 0.5) <= argmax_shift_bound(g0, 0.5)


class TestBoundReport:
    def test_dominance_and_slack(self):
        rep = BoundReport(
            name="demo",
            inputs={"gamma": 0.5},
            t=(0, 1, 2),
            bound=(1.0, 0.6, 0.4),
            measured=(0.9, 0.6, 0.1),
        )
        assert rep.dominance
        assert rep.max_slack == pytest.approx(0.3)
        d = rep.to_dict()
        assert d["dominance"] is True
        assert d["substitutions"] == []

    def test_violation_flips_verdict(self):
        rep = BoundReport(
            name="demo",
            inputs={},
            t=(0, 1),
            bound=(1.0, 0.5),
            measured=(0.9, 0.5001),
        )
        assert not rep.dominance

    def test_length_mismatch_rejected(self):
        with pytest.raises(DomainError):
            BoundReport(name="demo", inputs={}, t=(0,), bound=(1.0, 2.0), measured=(0.5,))
