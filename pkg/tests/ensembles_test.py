"""Tests for the ensembles module."""

import math

import numpy as np
import pytest

from design_lab.ensembles import (
    EnsembleDocument,
    EnsembleSource,
    MeasurementBasis,
    MomentOperator,
    StateEnsemble,
    computational_ensemble,
    deformed_row_ensemble,
    density_sqrt,
    design_distance,
    ensemble_from_document,
    ensemble_to_document,
    exact_thermal_companion,
    haar_moment_operator,
    moment_from_document,
    moment_operator,
    moment_to_document,
    projected_ensemble,
    rotate_ensemble,
    row_ensemble,
    symmetric_projector,
)
from design_lab.errors import InvalidArgumentError, RankDeficiencyError
from design_lab.sampling import (
    Isometry,
    haar_bipartite_state,
    haar_isometry,
    haar_unitary,
    perturbed_density,
    perturbed_thermal_state,
)
from design_lab.tensor_core import BipartiteState, HermitianOperator, kron_power, partial_trace, trace_distance


class TestStateEnsemble:
    """Validation of StateEnsemble."""

    def test_probabilities_must_sum_to_one(self):
        """Weights 0.5 and 0.6 are rejected."""
        with pytest.raises(InvalidArgumentError):
            StateEnsemble(np.array([0.5, 0.6]), np.eye(2), EnsembleSource.ROW)

    def test_states_must_be_normalized(self):
        """Unnormalized members are rejected."""
        with pytest.raises(InvalidArgumentError):
            StateEnsemble(np.array([1.0]), np.array([[1.0, 1.0]]), EnsembleSource.ROW)

    def test_members(self):
        """Members come back as (probability, state) pairs."""
        ensemble = StateEnsemble(np.array([0.25, 0.75]), np.eye(2), EnsembleSource.ROW)
        assert len(ensemble) == 2
        p, psi = ensemble.members[1]
        assert p == 0.75
        assert psi.amplitudes[1] == 1.0


class TestConstructions:
    """Projected, computational and row ensembles."""

    def test_row_ensemble_is_one_design(self, rng):
        """The first moment of a row ensemble is exactly 1/d_A."""
        for d_A, M in [(2, 8), (3, 64), (4, 256)]:
            ensemble = row_ensemble(haar_isometry(M, d_A, rng.child(M)))
            assert np.allclose(ensemble.average_state(), np.eye(d_A) / d_A, atol=1e-12)
            assert ensemble.probabilities.sum() == pytest.approx(1.0)

    def test_row_ensemble_probabilities(self, rng):
        """p_z = ||V^dagger|z>||^2 / d_A."""
        v = haar_isometry(6, 2, rng)
        expected = np.sum(np.abs(v.matrix) ** 2, axis=1) / 2
        assert np.allclose(row_ensemble(v).probabilities, expected)

    def test_plain_and_deformed_row_ensembles_agree(self, rng):
        """Deforming with 1/d_A changes nothing."""
        v = haar_isometry(12, 3, rng)
        plain = row_ensemble(v)
        deformed = deformed_row_ensemble(v, HermitianOperator.maximally_mixed(3))
        assert np.allclose(plain.probabilities, deformed.probabilities)
        assert np.allclose(plain.states, deformed.states)

    def test_two_construction_paths_agree(self, rng):
        """Measuring sqrt(rho) V^dagger in basis U equals the deformed row ensemble of U^T V."""
        d_A, M = 2, 16
        v = haar_isometry(M, d_A, rng.child(0))
        rho = perturbed_density(d_A, 0.1, rng.child(1))
        u = haar_unitary(M, rng.child(2))
        state = BipartiteState(density_sqrt(rho, d_A) @ v.matrix.conj().T)
        explicit = projected_ensemble(state, MeasurementBasis(u))
        fast = deformed_row_ensemble(Isometry(u.matrix.T @ v.matrix), rho)
        assert np.allclose(explicit.probabilities, fast.probabilities, atol=1e-12)
        for k in (1, 2, 3):
            assert np.allclose(moment_operator(explicit, k).op.entries, moment_operator(fast, k).op.entries, atol=1e-10)

    def test_computational_basis_shortcut(self, rng):
        """computational_ensemble equals projected_ensemble in the standard basis."""
        state = haar_bipartite_state(2, 8, rng)
        fast = computational_ensemble(state)
        explicit = projected_ensemble(state, MeasurementBasis.computational(8))
        assert np.allclose(fast.probabilities, explicit.probabilities)
        assert np.allclose(fast.states, explicit.states)

    def test_zero_probability_outcomes_dropped(self):
        """Outcomes that never occur are not members."""
        coefficients = np.zeros((2, 4), dtype=complex)
        coefficients[0, 0] = coefficients[1, 2] = 1 / np.sqrt(2)
        ensemble = computational_ensemble(BipartiteState(coefficients))
        assert len(ensemble) == 2
        assert np.allclose(ensemble.probabilities, [0.5, 0.5])

    def test_basis_dimension_mismatch(self, rng):
        """The basis must live on the complement."""
        with pytest.raises(InvalidArgumentError):
            projected_ensemble(haar_bipartite_state(2, 4, rng), MeasurementBasis.computational(5))

    def test_density_sqrt_validation(self):
        """Only d_A x d_A density matrices have a square root here."""
        with pytest.raises(InvalidArgumentError):
            density_sqrt(HermitianOperator(np.diag([1.5, -0.5])), 2)
        with pytest.raises(InvalidArgumentError):
            density_sqrt(HermitianOperator.maximally_mixed(3), 2)


class TestMoments:
    """Moment operators and the distance to Haar."""

    def test_moment_operator_invariants(self, rng):
        """Unit trace, positive and supported on the symmetric subspace."""
        moment = moment_operator(row_ensemble(haar_isometry(16, 2, rng)), 3)
        assert moment.op.dim == 8
        assert moment.op.trace() == pytest.approx(1.0)
        moment.validate()

    def test_validate_detects_asymmetric_support(self):
        """|01><01| is not supported on the symmetric subspace."""
        op = np.zeros((4, 4))
        op[1, 1] = 1.0
        with pytest.raises(InvalidArgumentError):
            MomentOperator(HermitianOperator(op), 2, 2).validate()

    def test_dimension_checked(self):
        """The operator must act on (C^d_A)^(x)k."""
        with pytest.raises(InvalidArgumentError):
            MomentOperator(HermitianOperator.maximally_mixed(3), 2, 2)

    @pytest.mark.parametrize(("d", "k"), [(2, 1), (2, 2), (3, 2), (2, 3)])
    def test_symmetric_projector(self, d, k):
        """A projector of rank binom(d + k - 1, k)."""
        projector = symmetric_projector(d, k)
        assert np.allclose(projector @ projector, projector)
        assert np.trace(projector) == pytest.approx(math.comb(d + k - 1, k))

    def test_haar_moment(self):
        """k = 1 gives 1/d and k = 2 has unit trace."""
        assert np.allclose(haar_moment_operator(3, 1).op.entries, np.eye(3) / 3)
        assert haar_moment_operator(2, 2).op.trace() == pytest.approx(1.0)

    def test_first_moment_has_zero_error(self, rng):
        """Every row ensemble is an exact 1-design."""
        assert design_distance(row_ensemble(haar_isometry(32, 3, rng)), 1) <= 1e-10

    def test_square_isometry_has_constant_error(self, rng):
        """For M = d_A = 2 and k = 2 the design error is 1/3 for every unitary."""
        for index in range(5):
            ensemble = row_ensemble(Isometry(haar_unitary(2, rng.child(index)).matrix))
            assert design_distance(ensemble, 2) == pytest.approx(1 / 3, abs=1e-10)

    def test_single_state_error(self):
        """One pure state is at distance 1 - 1/binom(d + k - 1, k) from Haar."""
        ensemble = StateEnsemble(np.array([1.0]), np.array([[1.0, 0.0]]), EnsembleSource.PROJECTED)
        assert design_distance(ensemble, 2) == pytest.approx(2 / 3)

    def test_rotation_conjugates_moment(self, rng):
        """Rotating every member by U conjugates the k-th moment by U^(x)k."""
        ensemble = row_ensemble(haar_isometry(8, 2, rng.child(0)))
        u = haar_unitary(2, rng.child(1)).matrix
        u2 = kron_power(u, 2)
        rotated = moment_operator(rotate_ensemble(ensemble, u), 2).op.entries
        assert np.allclose(rotated, u2 @ moment_operator(ensemble, 2).op.entries @ u2.conj().T)


class TestThermalCompanion:
    """Tests for exact_thermal_companion."""

    def test_companion_is_locally_maximally_mixed(self, rng):
        """The companion has rho_A = 1/d_A and keeps the Schmidt bases."""
        state = perturbed_thermal_state(3, 8, 0.1, rng)
        companion = exact_thermal_companion(state)
        assert np.allclose(partial_trace(companion).entries, np.eye(3) / 3, atol=1e-12)
        assert trace_distance(partial_trace(state), partial_trace(companion)) == pytest.approx(0.1, abs=1e-10)

    def test_rank_deficient(self):
        """Product states have no companion."""
        coefficients = np.zeros((2, 4), dtype=complex)
        coefficients[0, 0] = 1.0
        with pytest.raises(RankDeficiencyError):
            exact_thermal_companion(BipartiteState(coefficients))


def test_documents_restore_values(rng):
    """Ensemble and moment documents survive a JSON trip."""
    ensemble = row_ensemble(haar_isometry(4, 2, rng))
    text = ensemble_to_document(ensemble).model_dump_json()
    restored = ensemble_from_document(EnsembleDocument.model_validate_json(text))
    assert restored.source is EnsembleSource.ROW
    assert np.allclose(restored.states, ensemble.states)

    moment = moment_operator(ensemble, 2)
    again = moment_from_document(moment_to_document(moment))
    assert (again.k, again.d_A) == (2, 2)
    assert np.allclose(again.op.entries, moment.op.entries)
