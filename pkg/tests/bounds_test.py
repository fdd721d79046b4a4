"""Tests for the bounds module."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from design_lab.bounds import (
    GradientProbe,
    canonical_curve,
    check_continuity,
    check_covariance,
    check_derivative_identity,
    check_directional_derivative,
    check_expected_moment,
    check_gradient_bound,
    check_haar_moment,
    check_mixture_inequality,
    check_normalization_lemma,
    continuity_bound,
    design_threshold_M,
    embed_local_unitary,
    f_alpha,
    gradient_f_alpha,
    lipschitz_bound,
    minimal_eps_prime,
    monte_carlo_tail,
    random_skew_hermitian,
    tail_bound,
    theorem_epsilon,
)
from design_lab.config import Experiment, ExperimentConfig
from design_lab.ensembles import MeasurementBasis
from design_lab.errors import InvalidArgumentError, InvalidCurveError, OutOfTheoremDomainError
from design_lab.sampling import (
    HaarUnitary,
    Isometry,
    ginibre,
    haar_isometry,
    haar_unitary,
    perturbed_density,
    perturbed_thermal_state,
)
from design_lab.tensor_core import HermitianOperator, hermitian_operator_basis


def _density(d, rng):
    a = ginibre((d, d), rng)
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


class TestClosedForms:
    """Closed-form evaluators."""

    def test_continuity_bound(self):
        """2k sqrt(d_A delta) + delta d_A."""
        assert continuity_bound(2, 2, 0.0) == 0.0
        assert continuity_bound(2, 2, 0.1) == pytest.approx(1.98885, abs=1e-5)
        assert continuity_bound(2, 1, 0.01) == pytest.approx(0.30284, abs=1e-5)

    def test_continuity_bound_domain(self):
        """delta must stay below 1/(2 d_A)."""
        with pytest.raises(OutOfTheoremDomainError):
            continuity_bound(2, 2, 0.25)
        with pytest.raises(OutOfTheoremDomainError):
            continuity_bound(2, 2, -0.01)

    def test_design_threshold(self):
        """Smallest integer above the threshold with the natural log."""
        assert design_threshold_M(2, 1, 0.1, 0.01) == 5348
        assert design_threshold_M(2, 2, 0.3, 0.1) == 18459

    def test_design_threshold_monotone(self):
        """Tighter targets need larger complements."""
        base = design_threshold_M(2, 2, 0.3, 0.1)
        assert design_threshold_M(2, 2, 0.3, 0.01) > base
        assert design_threshold_M(2, 2, 0.2, 0.1) > base
        assert design_threshold_M(3, 2, 0.3, 0.1) > base
        assert design_threshold_M(2, 3, 0.3, 0.1) > base

    @pytest.mark.parametrize(("eps_prime", "Delta"), [(0.0, 0.1), (1.0, 0.1), (0.3, 0.0), (0.3, 1.5)])
    def test_design_threshold_domain(self, eps_prime, Delta):
        """Both parameters lie in (0, 1)."""
        with pytest.raises(InvalidArgumentError):
            design_threshold_M(2, 2, eps_prime, Delta)

    def test_theorem_epsilon(self):
        """eps' plus the continuity term."""
        assert theorem_epsilon(0.3, 2, 2, 0.0) == 0.3
        assert theorem_epsilon(0.3, 2, 2, 1e-4) == pytest.approx(0.35677, abs=1e-5)
        assert theorem_epsilon(0.1, 2, 2, 0.001) == pytest.approx(0.28089, abs=1e-5)

    def test_tail_bound(self):
        """2 d_A^(2k) exp(-M eps'^2 / (4 (2k - 1)^2 d_A^(2k - 1)))."""
        assert tail_bound(4096, 2, 1, 0.2) == pytest.approx(8 * math.exp(-20.48))
        assert tail_bound(4096, 2, 1, 0.2) == pytest.approx(1.02e-8, rel=5e-3)
        assert tail_bound(10**6, 2, 2, 0.3) < tail_bound(10**5, 2, 2, 0.3)

    def test_tail_bound_at_threshold(self):
        """The threshold inverts the tail formula."""
        for d_A, k, eps_prime, Delta in [(2, 1, 0.1, 0.01), (2, 2, 0.3, 0.1), (3, 2, 0.5, 0.05)]:
            assert tail_bound(design_threshold_M(d_A, k, eps_prime, Delta), d_A, k, eps_prime) <= Delta

    def test_lipschitz_bound(self):
        """2 (2k - 1) / sqrt(d_A)."""
        assert lipschitz_bound(4, 2) == pytest.approx(3.0)
        assert lipschitz_bound(1, 1) == pytest.approx(2.0)
        assert lipschitz_bound(2, 3) == pytest.approx(7.0711, abs=1e-4)
        assert lipschitz_bound(2, 3) > lipschitz_bound(2, 2)

    def test_minimal_eps_prime(self):
        """Inverse of the threshold condition."""
        eps = minimal_eps_prime(2048, 2, 2, 0.1)
        assert eps == pytest.approx(0.9006, abs=1e-4)
        assert design_threshold_M(2, 2, min(0.999, 1.001 * eps), 0.1) <= 2048


class TestMixtureInequality:
    """Tests for check_mixture_inequality."""

    def test_identical_ensembles(self, rng):
        """Every quantity vanishes."""
        ensemble = [(0.3, _density(2, rng.child(0))), (0.7, _density(2, rng.child(1)))]
        report = check_mixture_inequality(ensemble, ensemble, 2)
        assert report.satisfied
        assert all(component.observed_value == pytest.approx(0.0, abs=1e-12) for component in report.components)

    def test_singleton_first_order(self, rng):
        """For k = 1 and one member the outer terms coincide."""
        rho, sigma = _density(3, rng.child(0)), _density(3, rng.child(1))
        report = check_mixture_inequality([(1.0, rho)], [(1.0, sigma)], 1)
        triangle, telescoping = report.components
        assert triangle.observed_value == pytest.approx(telescoping.bound_value)

    def test_random_pairs(self, rng):
        """Both steps hold for random ensembles."""
        for index in range(30):
            d, k = 2 + index % 2, 1 + index % 3
            stream = rng.child(index)
            ens_a = [(w, _density(d, stream.child(j))) for j, w in enumerate((0.2, 0.3, 0.5))]
            ens_b = [(w, _density(d, stream.child(3 + j))) for j, w in enumerate((0.4, 0.4, 0.2))]
            report = check_mixture_inequality(ens_a, ens_b, k)
            assert report.satisfied, report

    def test_mismatch(self, rng):
        """Ensembles must have matching lengths and dimensions."""
        rho = _density(2, rng)
        with pytest.raises(InvalidArgumentError):
            check_mixture_inequality([(1.0, rho)], [(0.5, rho), (0.5, rho)], 2)
        with pytest.raises(InvalidArgumentError):
            check_mixture_inequality([(1.0, rho)], [(1.0, np.eye(3) / 3)], 2)


class TestNormalizationLemma:
    """Tests for check_normalization_lemma."""

    def test_maximally_mixed(self, rng):
        """No deformation means equal weights and members."""
        report = check_normalization_lemma(haar_isometry(16, 2, rng), HermitianOperator.maximally_mixed(2))
        assert report.satisfied
        for component in report.components:
            assert component.observed_value == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize(("d_A", "delta"), [(2, 0.01), (2, 0.1), (3, 0.1), (2, 0.2499)])
    def test_random_draws(self, rng, d_A, delta):
        """All three inequalities hold, also close to the domain boundary."""
        for index in range(20):
            stream = rng.child(index)
            v = haar_isometry(32, d_A, stream.child(0))
            report = check_normalization_lemma(v, perturbed_density(d_A, delta, stream.child(1)))
            assert report.satisfied, report
            assert report.context["delta"] == pytest.approx(delta, abs=1e-10)

    def test_out_of_domain(self, rng):
        """delta = 1/(2 d_A) is rejected."""
        with pytest.raises(OutOfTheoremDomainError):
            check_normalization_lemma(haar_isometry(8, 2, rng), HermitianOperator(np.diag([0.75, 0.25])))


class TestDerivativeIdentity:
    """Tests for check_derivative_identity and canonical_curve."""

    def test_constant_curve(self, rng):
        """Both sides vanish."""
        stack = np.stack([_density(2, rng.child(i)) / 3 for i in range(3)])
        report = check_derivative_identity(lambda lam: stack, 0.0, 2)
        assert report.satisfied
        assert report.observed_value == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_canonical_curve(self, rng, k):
        """Finite differences match the closed form within 1e-7."""
        curve = canonical_curve(haar_isometry(6, 2, rng.child(0)), random_skew_hermitian(6, rng.child(1)))
        report = check_derivative_identity(curve, 0.3, k)
        assert report.satisfied
        assert report.observed_value <= 1e-7

    def test_canonical_curve_is_an_ensemble(self, rng):
        """The stack has unit total trace."""
        curve = canonical_curve(haar_isometry(5, 2, rng.child(0)), random_skew_hermitian(5, rng.child(1)))
        stack = curve(0.7)
        assert stack.shape == (5, 2, 2)
        assert np.einsum("zaa->", stack).real == pytest.approx(1.0)

    def test_degenerate_curve(self):
        """A member with vanishing trace is rejected."""
        stack = np.stack([np.diag([1.0, 0.0]), np.zeros((2, 2))])
        with pytest.raises(InvalidCurveError):
            check_derivative_identity(lambda lam: stack, 0.0, 2)

    def test_generator_shape(self, rng):
        """The generator must be M x M."""
        with pytest.raises(InvalidArgumentError):
            canonical_curve(haar_isometry(4, 2, rng), np.zeros((3, 3)))


def test_random_skew_hermitian(rng):
    """Skew-Hermitian with spectral norm 1."""
    g = random_skew_hermitian(5, rng)
    assert np.allclose(g, -g.conj().T)
    assert np.linalg.norm(g, 2) == pytest.approx(1.0)


class TestGradient:
    """Gradient of f_alpha and its norm bound."""

    def test_first_order_gradient_vanishes(self, rng):
        """The first moment does not depend on U."""
        probe = GradientProbe.draw(2, 1, 6, rng)
        for alpha in range(len(probe.basis)):
            assert np.max(np.abs(gradient_f_alpha(probe, alpha))) <= 1e-12

    def test_identity_direction_vanishes(self, rng):
        """X = 1/sqrt(d_A^k) measures the trace, which is constant."""
        probe = GradientProbe.draw(2, 2, 8, rng)
        assert np.max(np.abs(gradient_f_alpha(probe, 0))) <= 1e-12
        assert f_alpha(probe, 0) == pytest.approx(0.5)

    @pytest.mark.parametrize(("d_A", "k", "M"), [(2, 2, 4), (2, 3, 8), (3, 2, 6)])
    def test_directional_derivative(self, rng, d_A, k, M):
        """Tr[grad^dagger G U] matches a central difference."""
        probe = GradientProbe.draw(d_A, k, M, rng.child(0))
        for alpha in (1, len(probe.basis) // 2, len(probe.basis) - 1):
            report = check_directional_derivative(probe, alpha, random_skew_hermitian(M, rng.child(alpha)))
            assert report.satisfied, report

    def test_gradient_is_tangent(self, rng):
        """U^dagger grad is skew-Hermitian."""
        probe = GradientProbe.draw(2, 2, 5, rng)
        tangent = probe.U.matrix.conj().T @ gradient_f_alpha(probe, 3)
        assert np.allclose(tangent, -tangent.conj().T, atol=1e-12)

    def test_right_tangent_direction(self, rng):
        """Re Tr[grad^dagger U A] is the derivative along U exp(tA), and grad is fixed by the tangent projection."""
        probe = GradientProbe.draw(2, 2, 6, rng.child(0))
        u = probe.U.matrix
        a = random_skew_hermitian(6, rng.child(1))
        h = 1e-5
        for alpha in (1, 7, 15):
            grad = gradient_f_alpha(probe, alpha)
            analytic = np.trace(grad.conj().T @ u @ a).real
            numeric = (f_alpha(probe, alpha, u @ expm(h * a)) - f_alpha(probe, alpha, u @ expm(-h * a))) / (2 * h)
            assert analytic == pytest.approx(numeric, abs=1e-6)
            assert np.allclose(0.5 * (grad - u @ grad.conj().T @ u), grad, atol=1e-12)

    def test_gradient_bound(self, rng):
        """Gradient norms stay below 2(2k - 1)/sqrt(d_A)."""
        for index, (k, M) in enumerate([(1, 4), (2, 4), (2, 8), (3, 8), (2, 16)]):
            report = check_gradient_bound(GradientProbe.draw(2, k, M, rng.child(index)))
            assert report.satisfied, report
            assert report.bound_value == pytest.approx(lipschitz_bound(2, k))

    def test_probe_validation(self, rng):
        """The probe needs the standard embedding and a small M."""
        basis = hermitian_operator_basis(4)
        with pytest.raises(InvalidArgumentError):
            GradientProbe(haar_unitary(4, rng), Isometry(haar_unitary(4, rng).matrix[:, :2]), basis, 2)
        with pytest.raises(InvalidArgumentError):
            GradientProbe(haar_unitary(65, rng), Isometry.standard_embedding(65, 2), basis, 2)
        with pytest.raises(InvalidArgumentError):
            GradientProbe(haar_unitary(4, rng), Isometry.standard_embedding(4, 2), hermitian_operator_basis(3), 2)


class TestContinuityAndCovariance:
    """Continuity, covariance and averaged moments."""

    @pytest.mark.parametrize(("d_A", "k", "delta"), [(2, 1, 1e-4), (2, 2, 1e-2), (3, 3, 1 / 60), (2, 3, 0.2)])
    def test_continuity(self, rng, d_A, k, delta):
        """The observed distance respects the continuity bound."""
        for index in range(5):
            stream = rng.child(index)
            state = perturbed_thermal_state(d_A, 12, delta, stream.child(0))
            report = check_continuity(state, MeasurementBasis(haar_unitary(12, stream.child(1))), k)
            assert report.satisfied, report
            assert report.bound_value == pytest.approx(continuity_bound(d_A, k, delta), abs=1e-9)

    def test_continuity_at_zero_delta(self, rng):
        """A locally maximally mixed state is its own companion."""
        state = perturbed_thermal_state(2, 8, 0.0, rng.child(0))
        report = check_continuity(state, MeasurementBasis(haar_unitary(8, rng.child(1))), 2)
        assert report.observed_value == pytest.approx(0.0, abs=1e-10)

    def test_covariance(self, rng):
        """Local unitaries on the input rotate the row ensemble."""
        for index in range(10):
            stream = rng.child(index)
            d_A = 2 + index % 2
            report = check_covariance(haar_unitary(16, stream.child(0)), haar_unitary(d_A, stream.child(1)), 2)
            assert report.satisfied, report

    def test_embed_local_unitary(self, rng):
        """U_A in the top-left block, identity elsewhere."""
        u_a = haar_unitary(2, rng)
        embedded = embed_local_unitary(u_a, 5).matrix
        assert np.allclose(embedded[:2, :2], u_a.matrix)
        assert np.allclose(embedded[2:, 2:], np.eye(3))
        with pytest.raises(InvalidArgumentError):
            embed_local_unitary(HaarUnitary(np.eye(6)), 5)

    def test_expected_moment(self, rng):
        """Averaged row-ensemble moments approach the Haar moment."""
        assert check_expected_moment(2, 2, 8, 200, rng).satisfied

    def test_haar_moment(self, rng):
        """Averaged Haar states reproduce the closed-form moment."""
        report = check_haar_moment(2, 2, 20_000, rng)
        assert report.satisfied, report


class TestMonteCarloTail:
    """Tests for monte_carlo_tail."""

    def test_first_order_never_exceeds(self, rng):
        """k = 1 gives design error 0 in every trial."""
        cfg = ExperimentConfig(experiment=Experiment.LEMMA2_TAIL, d_A=2, k=1, M=16, n_trials=20, eps_prime=0.01)
        result = monte_carlo_tail(cfg, rng)
        assert result.exceedance.exceedances == 0
        assert all(record.design_error <= 1e-10 for record in result.records)
        assert result.exceedance.below_threshold
        assert [c.name for c in result.report.components] == ["tail_bound"]

    def test_square_isometries_always_exceed(self, rng):
        """M = d_A = 2 at k = 2 has error 1/3 > 0.3 in every trial."""
        cfg = ExperimentConfig(experiment=Experiment.LEMMA2_TAIL, d_A=2, k=2, M=2, n_trials=10, eps_prime=0.3)
        result = monte_carlo_tail(cfg, rng)
        assert result.exceedance.fraction == 1.0
        assert all(record.design_error == pytest.approx(1 / 3, abs=1e-10) for record in result.records)
        assert result.report.satisfied

    def test_theorem_mode_threshold(self, rng):
        """delta > 0 compares against the theorem epsilon."""
        cfg = ExperimentConfig(
            experiment=Experiment.THEOREM1_ENDTOEND, d_A=2, k=2, M=64, delta=1e-4, n_trials=5, eps_prime=0.3
        )
        result = monte_carlo_tail(cfg, rng)
        assert all(record.threshold_used == pytest.approx(0.35677, abs=1e-5) for record in result.records)

    def test_records_do_not_depend_on_workers(self, rng):
        """Trial i always draws from stream i."""
        values = {"experiment": Experiment.LEMMA2_TAIL, "d_A": 2, "k": 2, "M": 32, "n_trials": 8}
        serial = monte_carlo_tail(ExperimentConfig(**values), rng).records
        parallel = monte_carlo_tail(ExperimentConfig(**values, workers=2), rng).records
        assert serial == parallel
        assert [record.trial_index for record in serial] == list(range(8))
