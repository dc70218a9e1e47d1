import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quotient_em.errors import ConditioningError, DimensionError, DomainError, ParameterError
from quotient_em.numerics import (
    polar_factors,
    scalarize_vector_sup,
    spd_sqrt,
    spectral_radius,
    sphere_net,
)
from quotient_em.rng import stream


def random_spd(rng, dim):
    b = rng.standard_normal((dim, dim))
    return b @ b.T + dim * np.eye(dim)


class TestSpectralRadius:
    def test_identity(self):
        assert spectral_radius(np.eye(3)) == 1.0

    def test_nilpotent(self):
        assert spectral_radius([[0.0, 1.0], [0.0, 0.0]]) == 0.0

    def test_two_by_two_characteristic_root(self):
        # larger root of lambda^2 - 0.9 lambda + 0.18, computed independently
        oracle = float(np.max(np.roots([1.0, -0.9, 0.18])))
        assert spectral_radius([[0.5, 0.2], [0.1, 0.4]]) == pytest.approx(oracle, rel=1e-12)

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            spectral_radius(np.ones((2, 3)))

    def test_scalar_homogeneity(self):
        for i in range(50):
            rng = stream(0, "numerics.scaling", i)
            m = rng.standard_normal((4, 4))
            c = float(rng.standard_normal()) * 3.0
            assert spectral_radius(c * m) == pytest.approx(
                abs(c) * spectral_radius(m), rel=1e-9, abs=1e-12
            )

    def test_dominated_by_row_sum_norm(self):
        for i in range(50):
            rng = stream(0, "numerics.rowsum", i)
            m = rng.standard_normal((5, 5))
            assert spectral_radius(m) <= float(np.max(np.sum(np.abs(m), axis=1)))


class TestSpdSqrt:
    def test_identity(self):
        assert np.allclose(spd_sqrt(np.eye(3)), np.eye(3), atol=1e-12)

    def test_diagonal(self):
        assert np.allclose(spd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12)

    def test_reconstruction_over_seeded_spd(self):
        for i in range(100):
            rng = stream(1, "numerics.spd", i)
            dim = 2 + i % 7  # up to 8
            m = random_spd(rng, dim)
            s = spd_sqrt(m)
            rel = np.linalg.norm(s @ s - m) / np.linalg.norm(m)
            assert rel <= 1e-9
            assert np.all(np.linalg.eigvalsh(s) > 0)

    def test_asymmetric_rejected(self):
        with pytest.raises(DomainError, match="asymmetry"):
            spd_sqrt([[1.0, 0.5], [0.0, 1.0]])

    def test_indefinite_rejected(self):
        with pytest.raises(DomainError, match="eigenvalue"):
            spd_sqrt(np.diag([1.0, -0.5]))


class TestPolarFactors:
    def test_orthogonal_input(self):
        theta = 0.7
        q = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        u, h = polar_factors(q)
        assert np.allclose(u, q, atol=1e-12)
        assert np.allclose(h, np.eye(2), atol=1e-12)

    def test_spd_input(self):
        m = random_spd(stream(2, "numerics.polar_spd"), 3)
        u, h = polar_factors(m)
        assert np.allclose(u, np.eye(3), atol=1e-9)
        assert np.allclose(h, m, atol=1e-9)

    def test_reconstruction_and_orthogonality(self):
        for i in range(100):
            rng = stream(2, "numerics.polar", i)
            dim = 2 + i % 5  # up to 6
            b = rng.standard_normal((dim, dim)) + 0.5 * np.eye(dim)
            if np.linalg.svd(b, compute_uv=False)[-1] < 1e-6:
                continue
            u, h = polar_factors(b)
            assert np.linalg.norm(u.T @ u - np.eye(dim)) <= 1e-9
            assert np.linalg.norm(u @ h - b) <= 1e-9
            assert np.min(np.linalg.eigvalsh(h)) > 0

    def test_near_singular_rejected(self):
        with pytest.raises(ConditioningError, match="singular value"):
            polar_factors(np.diag([1.0, 1e-14]))


class TestSphereNet:
    def test_dim_one_is_two_points(self):
        net = sphere_net(1, 0.5)
        assert sorted(net.points.reshape(-1).tolist()) == [-1.0, 1.0]

    def test_cardinality_bound_dim2(self):
        net = sphere_net(2, 0.9, seed=0)
        assert len(net) <= 10  # floor of (1 + 2/0.9)^2

    def test_coverage_dim3(self):
        eta = 0.3
        net = sphere_net(3, eta, seed=0)
        probes = stream(3, "numerics.cover").standard_normal((10_000, 3))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        dmin = np.sqrt(np.maximum(2.0 - 2.0 * (probes @ net.points.T).max(axis=1), 0.0))
        assert float(np.max(dmin)) <= eta

    def test_eta_out_of_range(self):
        with pytest.raises(ParameterError):
            sphere_net(2, 1.5)
        with pytest.raises(ParameterError):
            sphere_net(2, 0.0)


class TestScalarize:
    def test_unit_vector_bracketed(self):
        net = sphere_net(3, 0.3, seed=0)
        val = scalarize_vector_sup(np.eye(3)[:1], net)
        assert 1.0 <= val <= 1.0 / (1.0 - 0.3) + 1e-12

    def test_empty_is_zero(self):
        net = sphere_net(2, 0.5, seed=0)
        assert scalarize_vector_sup(np.empty((0, 2)), net) == 0.0

    def test_bracket_over_seeded_vectors(self):
        eta = 0.2
        net = sphere_net(3, eta, seed=0)
        rng = stream(4, "numerics.scalarize")
        ys = rng.standard_normal((100, 3)) * 2.0
        exact = float(np.max(np.linalg.norm(ys, axis=1)))
        val = scalarize_vector_sup(ys, net)
        assert exact - 1e-12 <= val <= exact / (1.0 - eta) + 1e-12

    def test_dimension_mismatch(self):
        net = sphere_net(2, 0.5, seed=0)
        with pytest.raises(DimensionError):
            scalarize_vector_sup(np.ones((3, 3)), net)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=4, max_size=4),
    st.floats(-3, 3, allow_nan=False),
)
def test_spectral_radius_scaling_property(entries, c):
    m = np.asarray(entries).reshape(2, 2)
    assert spectral_radius(c * m) == pytest.approx(abs(c) * spectral_radius(m), abs=1e-9)
