import numpy as np
import pytest

from quotient_em.datasets import WeightedDataset
from quotient_em.em import (
    EmConfig,
    em_jacobian,
    em_run,
    empirical_rate_from_errors,
    latin_hypercube_probes,
    local_rate,
    operator_deviation,
    projection_set_estimate,
    refine_fixed_point,
    slice_em_map,
)
from quotient_em.errors import (
    DomainError,
    InsufficientDataError,
    PreconditionError,
)
from quotient_em.groups import ParamLayout, section_for, sign_canonicalize
from quotient_em.harness.designs import gmm1d_population, misspecified_population
from quotient_em.models import GaussianMixture, LatentModel, SignMixture
from quotient_em.rng import stream


class QuadraticToy(LatentModel):
    """Surrogate -lam/2 ||t' - (M t + b)||^2: the update map is exactly linear."""

    hessian_capable = True

    def __init__(self, m_mat, offset, lam=2.0):
        self.m_mat = np.asarray(m_mat, dtype=float)
        self.offset = np.asarray(offset, dtype=float)
        self.lam = lam
        self.layout = ParamLayout.build([("state", (self.offset.size,))])

    @property
    def free_slice(self):
        return slice(0, self.offset.size)

    def _target(self, theta):
        return self.m_mat @ theta + self.offset

    def m_step(self, theta, data):
        return self._target(self.layout.check(theta))

    def q_gradient(self, theta_prime, theta, data):
        return -self.lam * (self.layout.check(theta_prime) - self._target(self.layout.check(theta)))

    def _h_pp(self, theta_prime, theta, data):
        return -self.lam * np.eye(self.offset.size)

    def objective(self, theta, data):
        return -float(np.linalg.norm(self.layout.check(theta) - self.offset) ** 2)


DUMMY = WeightedDataset(points=np.zeros((1, 1)), weights=np.array([1.0]))


def sign_setup(seed=3, n=400, theta=(1.5, 0.8)):
    model = SignMixture(d=2, sigma=1.0)
    pts = model.sample(np.asarray(theta), n, stream(seed, "em.sign_data"))
    data = WeightedDataset.from_points(pts)
    section = section_for(model.action())
    return model, data, section


class TestEmRun:
    def test_fixed_point_gives_length_one_converged(self):
        toy = QuadraticToy(np.zeros((2, 2)), [1.0, -2.0])
        traj = em_run(toy, np.array([1.0, -2.0]), DUMMY, EmConfig(max_iters=50, conv_tol=1e-10))
        assert len(traj) == 1
        assert traj.status == "converged"

    def test_exact_ascent_along_runs(self):
        model, data, section = sign_setup()
        for r in range(20):
            theta0 = 2.0 * stream(5, "em.ascent", r).standard_normal(2)
            traj = em_run(model, theta0, data, EmConfig(max_iters=80, conv_tol=1e-12))
            phis = np.asarray(traj.phis)
            assert np.all(phis[1:] >= phis[:-1] - 1e-10)

    def test_inexact_zero_eps_is_bitwise_exact(self):
        model, data, section = sign_setup()
        theta0 = np.array([0.9, 0.4])
        exact = em_run(
            model, theta0, data,
            EmConfig(variant="exact", max_iters=30, conv_tol=1e-14, section=section, seed=9),
        )
        zero = em_run(
            model, theta0, data,
            EmConfig(
                variant="inexact", max_iters=30, conv_tol=1e-14, section=section,
                epsilons=tuple([0.0] * 30), seed=9,
            ),
        )
        assert len(exact) == len(zero)
        for a, b in zip(exact.thetas, zero.thetas):
            assert np.array_equal(a, b)

    def test_inexact_steps_record_epsilons(self):
        model, data, _ = sign_setup()
        eps = (0.05, 0.02, 0.01)
        traj = em_run(
            model, np.array([0.9, 0.4]), data,
            EmConfig(variant="inexact", max_iters=3, conv_tol=1e-300, epsilons=eps, seed=1),
        )
        assert traj.eps_injected[1:] == list(eps[: len(traj) - 1])

    def test_split_uses_each_block_once(self):
        model, data, _ = sign_setup(n=90)
        cfg = EmConfig(variant="split", max_iters=10, conv_tol=1e-300, m_blocks=3, seed=2)
        traj = em_run(model, np.array([0.9, 0.4]), data, cfg, pop_data=data)
        assert len(traj) <= 4  # at most m_blocks steps plus the start
        assert all(v is not None and v >= 0 for v in traj.step_devs[1:])

    def test_split_requires_enough_points(self):
        model, data, _ = sign_setup(n=4)
        with pytest.raises(DomainError):
            em_run(
                model, np.array([0.9, 0.4]), data,
                EmConfig(variant="split", max_iters=3, conv_tol=1e-6, m_blocks=9),
            )

    def test_degenerate_status(self):
        model = GaussianMixture(k=2, d=1, sigma=1.0)
        theta = model.pack([0.5, 0.5], [[0.0], [1e7]])
        data = WeightedDataset.from_points(np.array([[0.0], [0.4]]))
        traj = em_run(model, theta, data, EmConfig(max_iters=5, conv_tol=1e-10))
        assert traj.status == "degenerate"

    def test_trajectory_csv_layout(self, tmp_path):
        model, data, section = sign_setup()
        traj = em_run(
            model, np.array([0.9, 0.4]), data,
            EmConfig(max_iters=5, conv_tol=1e-300, section=section),
            pop_data=data, orbit_ref=np.array([1.5, 0.8]), orbit_action=model.action(),
        )
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,phi,param_change,orbit_dist,ipm_dist,step_dev,eps_injected"
        first = lines[1].split(",")
        assert first[0] == "0" and first[2] == "-" and first[4] == "-"
        assert len(lines) == len(traj) + 1


class TestSliceMap:
    def test_requires_canonical_input(self):
        model, data, section = sign_setup()
        noncanonical = np.array([-1.0, 0.5])
        with pytest.raises(PreconditionError):
            slice_em_map(model, section, noncanonical, data)

    def test_sign_composition_is_bitwise(self):
        model, data, section = sign_setup()
        theta = np.array([1.2, 0.1])
        assert np.array_equal(
            slice_em_map(model, section, theta, data),
            sign_canonicalize(model.m_step(theta, data)),
        )

    def test_output_is_canonical(self):
        model, data, section = sign_setup()
        out = slice_em_map(model, section, np.array([1.2, 0.1]), data)
        assert section.is_canonical(out)

    def test_fixed_point_residual_small(self):
        model, data, section = sign_setup()
        star = refine_fixed_point(model, section, np.array([1.2, 0.6]), data)
        assert np.linalg.norm(slice_em_map(model, section, star, data) - star) <= 1e-10


class TestJacobian:
    def test_quadratic_toy_recovers_linear_map(self):
        m_mat = np.array([[0.5, 0.0], [0.0, 0.2]])
        toy = QuadraticToy(m_mat, [0.3, -0.1])
        star = np.linalg.solve(np.eye(2) - m_mat, toy.offset)
        jac = em_jacobian(toy, star, DUMMY)
        assert np.allclose(jac.matrix, m_mat, atol=1e-10)
        assert jac.max_fd_diff <= 1e-9
        assert local_rate(toy, star, DUMMY) == pytest.approx(0.5, abs=1e-10)

    def test_rate_invariant_under_group_element(self):
        # applying a fixed sign flip to a symmetric setup leaves the spectrum alone
        model, data, section = sign_setup()
        star = refine_fixed_point(model, section, np.array([1.2, 0.6]), data)
        rho = local_rate(model, star, data)
        flipped_pts = -data.points
        flipped = WeightedDataset(points=flipped_pts, weights=data.weights)
        rho_flip = local_rate(model, -star, flipped)
        assert rho == pytest.approx(rho_flip, abs=1e-8)

    def test_sign_symmetric_jacobian_is_second_moment(self):
        model = SignMixture(d=2, sigma=1.0)
        pts = 1.2 * np.array([[1.0, 0], [-1.0, 0], [0, 1.0], [0, -1.0]])
        data = WeightedDataset.from_points(pts)
        jac = em_jacobian(model, np.zeros(2), data)
        assert np.allclose(jac.matrix, data.second_moment(), atol=1e-10)
        assert jac.max_fd_diff <= 1e-4

    def test_separated_mixture_is_locally_contractive(self):
        model = GaussianMixture(k=2, d=1, sigma=1.0)
        pop = gmm1d_population([-2.0, 2.0], [0.5, 0.5])
        section = section_for(model.action())
        star = refine_fixed_point(model, section, model.pack([0.5, 0.5], [[-1.5], [2.5]]), pop)
        assert local_rate(model, star, pop, section=section) < 1.0

    def test_non_fixed_point_rejected(self):
        model, data, section = sign_setup()
        with pytest.raises(PreconditionError, match="fixed point"):
            em_jacobian(model, np.array([5.0, 5.0]), data)


class TestEmpiricalRate:
    def test_pure_geometric(self):
        errors = 0.3 ** np.arange(30)
        assert empirical_rate_from_errors(errors) == pytest.approx(0.3, abs=1e-12)

    def test_noisy_geometric(self):
        rng = stream(6, "em.rate_noise")
        errors = 2.0 * 0.7 ** np.arange(40) + 1e-12 * rng.random(40)
        assert empirical_rate_from_errors(errors) == pytest.approx(0.7, abs=1e-6)

    def test_diverging_sequence_rejected(self):
        with pytest.raises(InsufficientDataError):
            empirical_rate_from_errors(1.5 ** np.arange(20))

    def test_short_window_rejected(self):
        with pytest.raises(InsufficientDataError):
            empirical_rate_from_errors([1.0, 0.5, 0.25, 0.12])


class TestOperatorDeviation:
    def test_zero_when_same_data(self):
        model, data, section = sign_setup()
        probes = [np.array([1.0, 0.5]), np.array([0.8, 0.2])]
        dev = operator_deviation(model, data, data, probes, section=section)
        assert dev.value <= 1e-12
        assert dev.skipped == ()

    def test_decreasing_in_n_on_average(self):
        model = SignMixture(d=1, sigma=1.0)
        pop = gmm1d_population([1.5], [1.0], atoms_per_component=400)
        # symmetric population for the sign model
        pts = np.concatenate([pop.points, -pop.points])
        sym = WeightedDataset(points=pts, weights=np.concatenate([pop.weights, pop.weights]) / 2)
        probes = [np.array([1.2]), np.array([1.5]), np.array([1.8])]
        means = []
        for n in (100, 400, 1600):
            vals = []
            for r in range(50):
                rng = stream(7, f"em.trend.{n}", r)
                idx = rng.choice(sym.n, size=n, p=sym.weights)
                sample = WeightedDataset.from_points(sym.points[idx])
                vals.append(operator_deviation(model, sym, sample, probes).value)
            means.append(float(np.mean(vals)))
        assert means[0] > means[1] > means[2]

    def test_bounded_by_gradient_deviation_over_lambda(self):
        model = GaussianMixture(k=2, d=1, sigma=1.0)
        pop = gmm1d_population([-2.0, 2.0], [0.5, 0.5])
        rng = stream(8, "em.gradbound")
        idx = rng.choice(pop.n, size=300, p=pop.weights)
        sample = WeightedDataset.from_points(pop.points[idx])
        probes = [
            model.pack([0.5, 0.5], [[-2.1], [1.9]]),
            model.pack([0.5, 0.5], [[-1.8], [2.2]]),
        ]
        dev = operator_deviation(model, pop, sample, probes).value
        lam = min(model.strong_concavity_certificate(th, pop) for th in probes)
        sup_dev = max(
            float(
                np.linalg.norm(
                    model.q_gradient(model.m_step(th, src), th, sample)
                    - model.q_gradient(model.m_step(th, src), th, pop)
                )
            )
            for th in probes
            for src in (pop, sample)
        )
        assert dev <= sup_dev / lam + 1e-12


class TestProjectionSet:
    def test_well_specified_self_consistency(self):
        model = GaussianMixture(k=2, d=1, sigma=1.0)
        pop = gmm1d_population([-2.0, 2.0], [0.5, 0.5], atoms_per_component=400)
        section = section_for(model.action())
        found = projection_set_estimate(model, pop, n_starts=8, seed=3, section=section)
        assert len(found) == 1
        independent = refine_fixed_point(
            model, section, model.pack([0.5, 0.5], [[-2.0], [2.0]]), pop
        )
        assert np.linalg.norm(found[0] - independent) <= 1e-6
        # desk-scale population: the generating means are recovered up to
        # the atom-discretization bias only
        assert np.linalg.norm(found[0] - model.pack([0.5, 0.5], [[-2.0], [2.0]])) <= 2e-2

    def test_sign_symmetric_population_collapses_to_one_point(self):
        model = SignMixture(d=1, sigma=1.0)
        atoms = gmm1d_population([2.0], [1.0], atoms_per_component=200).points
        sym = WeightedDataset(
            points=np.concatenate([atoms, -atoms]),
            weights=np.full(2 * atoms.shape[0], 0.5 / atoms.shape[0]),
        )
        section = section_for(model.action())
        found = projection_set_estimate(model, sym, n_starts=10, seed=4, section=section)
        assert len(found) == 1
        assert section.is_canonical(found[0])

    def test_misspecified_fixed_points_are_stationary(self):
        model = GaussianMixture(k=2, d=1, sigma=1.0)
        pop = misspecified_population()
        section = section_for(model.action())
        found = projection_set_estimate(model, pop, n_starts=16, seed=5, section=section)
        assert len(found) >= 1
        for theta in found:
            assert np.linalg.norm(slice_em_map(model, section, theta, pop) - theta) <= 1e-8
            assert abs(
                model.objective(model.m_step(theta, pop), pop) - model.objective(theta, pop)
            ) <= 1e-8


def test_population_distance_to_set_decays_geometrically():
    # population trajectories in a verified basin contract toward the
    # fixed-point set at the certified factor
    from quotient_em.harness.designs import certify_contraction

    model = GaussianMixture(k=2, d=1, sigma=1.0)
    pop = misspecified_population()
    section = section_for(model.action())
    targets = projection_set_estimate(model, pop, n_starts=12, seed=6, section=section)
    best = max(targets, key=lambda th: model.objective(th, pop))
    cert = certify_contraction(
        model, pop, section, best, radius=0.25, seed=6, target_set=targets
    )

    def dist(theta):
        return min(float(np.linalg.norm(theta - m)) for m in targets)

    for theta0 in cert.probes[:10]:
        traj = em_run(
            model, theta0, pop,
            EmConfig(max_iters=25, conv_tol=1e-300, section=section),
        )
        d0 = dist(traj.thetas[0])
        for t, th in enumerate(traj.thetas):
            assert dist(th) <= cert.gamma_hat**t * d0 + 1e-12


def test_latin_hypercube_probes_deterministic_and_boxed():
    model = SignMixture(d=2, sigma=1.0)
    center = np.array([1.0, -0.5])
    a = latin_hypercube_probes(model, center, radius=0.3, count=16, seed=11)
    b = latin_hypercube_probes(model, center, radius=0.3, count=16, seed=11)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    for th in a:
        assert np.max(np.abs(th - center)) <= 0.3 + 1e-12
