"""Post-measurement ensembles, row ensembles of isometries and their moment operators.

Two construction paths produce the same ensembles:

* the explicit path, :func:`projected_ensemble`, measures a bipartite state in an M x M basis
  (cost O(M^2 d_A)); it is the test oracle;
* the isometry path, :func:`row_ensemble` / :func:`deformed_row_ensemble`, reads the ensemble off
  an M x d_A isometry (cost O(M d_A^2)); it is what the experiments run at large M.

Row ``z`` of an isometry ``V`` is read as the bra ``<v_z|``, so the member state is
``V^dagger |z>`` normalized. With ``Phi_V = sum_z V^dagger|z> (x) |z> / sqrt(d_A)`` measuring in the
standard basis reproduces the row ensemble.
"""

import math
from dataclasses import dataclass
from enum import StrEnum
from functools import lru_cache
from itertools import permutations

import numpy as np
from loguru import logger
from pydantic import BaseModel

from design_lab.errors import InvalidArgumentError, RankDeficiencyError
from design_lab.sampling import HaarUnitary, Isometry
from design_lab.tensor_core import (
    SCHMIDT_ZERO,
    BipartiteState,
    HermitianOperator,
    PureState,
    check_dimension,
    schmidt_decompose,
    trace_distance,
)

ZERO_PROBABILITY = 1e-14
PROBABILITY_ATOL = 1e-10
DENSITY_ATOL = 1e-10
SCHEMA_VERSION = 1


class EnsembleSource(StrEnum):
    """How an ensemble was constructed."""

    PROJECTED = "projected"
    ROW = "row"
    DEFORMED_ROW = "deformed_row"


@dataclass(frozen=True)
class StateEnsemble:
    """Finite ensemble {(p_z, psi_z)} of pure states on C^d_A.

    ``states`` holds one normalized state per row, in member order.
    """

    probabilities: np.ndarray
    states: np.ndarray
    source: EnsembleSource

    def __post_init__(self) -> None:
        probabilities = np.array(self.probabilities, dtype=float)
        states = np.array(self.states, dtype=complex)
        if states.ndim != 2 or probabilities.shape != (states.shape[0],) or states.shape[0] == 0:
            raise InvalidArgumentError("Ensemble needs matching nonempty probabilities and states")
        if np.any(probabilities <= 0):
            raise InvalidArgumentError("Ensemble probabilities must be positive")
        if abs(probabilities.sum() - 1.0) > PROBABILITY_ATOL:
            raise InvalidArgumentError(f"Probabilities sum to {probabilities.sum()!r}, not 1")
        if np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)) > PROBABILITY_ATOL:
            raise InvalidArgumentError("Ensemble states are not normalized")
        probabilities.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "probabilities", probabilities)
        object.__setattr__(self, "states", states)

    @property
    def d_A(self) -> int:
        """Dimension of the member states."""
        return self.states.shape[1]

    def __len__(self) -> int:
        """Number of members."""
        return self.states.shape[0]

    @property
    def members(self) -> list[tuple[float, PureState]]:
        """Members as (probability, state) pairs."""
        return [(float(p), PureState(psi)) for p, psi in zip(self.probabilities, self.states, strict=True)]

    def average_state(self) -> np.ndarray:
        """First moment sum_z p_z |psi_z><psi_z|."""
        return np.einsum("z,za,zb->ab", self.probabilities, self.states, self.states.conj())


@dataclass(frozen=True)
class MeasurementBasis:
    """Orthonormal basis {U|z>} of C^M; the basis vectors are the columns of ``unitary``."""

    unitary: HaarUnitary

    @classmethod
    def computational(cls, M: int) -> "MeasurementBasis":
        """Standard basis of C^M."""
        return cls(HaarUnitary(np.eye(M, dtype=complex)))

    @property
    def dim(self) -> int:
        """Dimension M."""
        return self.unitary.dim


@dataclass(frozen=True)
class MomentOperator:
    """k-th moment operator sum_z p_z |psi_z><psi_z|^(x)k on (C^d_A)^(x)k."""

    op: HermitianOperator
    k: int
    d_A: int

    def __post_init__(self) -> None:
        if self.op.dim != self.d_A**self.k:
            raise InvalidArgumentError(f"Operator dimension {self.op.dim} is not {self.d_A}^{self.k}")
        if abs(self.op.trace() - 1.0) > PROBABILITY_ATOL:
            raise InvalidArgumentError(f"Moment operator trace is {self.op.trace()!r}, not 1")

    def validate(self, psd_atol: float = 1e-10, support_atol: float = 1e-9) -> None:
        """Check positivity and support on the symmetric subspace.

        Raises:
            InvalidArgumentError: If either property fails.
        """
        entries = self.op.entries
        if np.linalg.eigvalsh(entries).min() < -psd_atol:
            raise InvalidArgumentError("Moment operator is not positive semidefinite")
        projector = symmetric_projector(self.d_A, self.k)
        leakage = np.linalg.svd(entries - projector @ entries, compute_uv=False).sum()
        if leakage > support_atol:
            raise InvalidArgumentError(f"Moment operator leaks out of the symmetric subspace ({leakage:.3e})")


def _normalized_members(vectors: np.ndarray, source: EnsembleSource) -> StateEnsemble:
    """Turn unnormalized post-measurement vectors (one per row) into an ensemble.

    Squared norms are the outcome probabilities; outcomes below ``ZERO_PROBABILITY`` are dropped.
    """
    weights = np.einsum("za,za->z", vectors, vectors.conj()).real
    keep = weights >= ZERO_PROBABILITY
    total = float(weights[keep].sum())
    shift = abs(total - 1.0)
    if shift > PROBABILITY_ATOL:
        raise InvalidArgumentError(f"Outcome probabilities sum to {total!r}; input is not a normalized state")
    if not np.all(keep):
        logger.debug(f"Dropped {int(np.sum(~keep))} zero-probability outcomes, renormalization shift {shift:.3e}")
    kept = vectors[keep]
    kept_weights = weights[keep]
    states = kept / np.sqrt(kept_weights)[:, None]
    return StateEnsemble(kept_weights / total, states, source)


def projected_ensemble(state: BipartiteState, basis: MeasurementBasis) -> StateEnsemble:
    """Post-measurement ensemble of A after measuring the complement in ``basis``.

    Raises:
        InvalidArgumentError: If the basis dimension differs from the complement dimension.
    """
    if basis.dim != state.M:
        raise InvalidArgumentError(f"Basis dimension {basis.dim} does not match complement dimension {state.M}")
    vectors = (state.coefficients @ basis.unitary.matrix.conj()).T
    return _normalized_members(vectors, EnsembleSource.PROJECTED)


def computational_ensemble(state: BipartiteState) -> StateEnsemble:
    """Projected ensemble for the standard basis of the complement, without forming an M x M identity."""
    return _normalized_members(state.coefficients.T, EnsembleSource.PROJECTED)


def row_ensemble(v: Isometry) -> StateEnsemble:
    """Row ensemble: p_z = ||V^dagger|z>||^2 / d_A and psi_z = V^dagger|z> normalized."""
    return _normalized_members(v.matrix.conj() / np.sqrt(v.d_A), EnsembleSource.ROW)


def density_sqrt(rho_A: HermitianOperator, d_A: int) -> np.ndarray:
    """Positive square root of a d_A x d_A density matrix.

    Raises:
        InvalidArgumentError: If ``rho_A`` has the wrong dimension or is not positive with unit trace.
    """
    entries = rho_A.entries
    if rho_A.dim != d_A:
        raise InvalidArgumentError(f"rho_A has dimension {rho_A.dim}, isometry has d_A = {d_A}")
    eigenvalues, eigenvectors = np.linalg.eigh(entries)
    if eigenvalues.min() < -DENSITY_ATOL or abs(eigenvalues.sum() - 1.0) > DENSITY_ATOL:
        raise InvalidArgumentError("rho_A is not a density matrix (positive, unit trace) within tolerance")
    return (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.conj().T


def deformed_row_ensemble(v: Isometry, rho_A: HermitianOperator) -> StateEnsemble:
    """Ensemble of (sqrt(d_A rho_A) (x) 1)|Phi_V> measured in the standard basis.

    Member z has unnormalized vector sqrt(rho_A) V^dagger|z> and probability <z|V rho_A V^dagger|z>.

    Raises:
        InvalidArgumentError: If ``rho_A`` is not a d_A x d_A density matrix.
    """
    root = density_sqrt(rho_A, v.d_A)
    vectors = v.matrix.conj() @ root.T
    return _normalized_members(vectors, EnsembleSource.DEFORMED_ROW)


def rotate_ensemble(e: StateEnsemble, u_A: np.ndarray) -> StateEnsemble:
    """Replace every member psi_z by U_A psi_z."""
    return StateEnsemble(e.probabilities, e.states @ np.asarray(u_A).T, e.source)


def _tensor_powers(states: np.ndarray, k: int) -> np.ndarray:
    powers = states
    for _ in range(k - 1):
        powers = (powers[:, :, None] * states[:, None, :]).reshape(states.shape[0], -1)
    return powers


def moment_operator(e: StateEnsemble, k: int) -> MomentOperator:
    """sum_z p_z |psi_z><psi_z|^(x)k, accumulated in member order.

    Raises:
        ResourceLimitError: If d_A^k exceeds the dimension cap.
    """
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    check_dimension(e.d_A, k)
    powers = _tensor_powers(e.states, k)
    entries = np.einsum("z,za,zb->ab", e.probabilities, powers, powers.conj())
    return MomentOperator(HermitianOperator(0.5 * (entries + entries.conj().T)), k, e.d_A)


@lru_cache(maxsize=32)
def _symmetric_projector(d: int, k: int) -> np.ndarray:
    dim = d**k
    indices = np.arange(dim).reshape([d] * k)
    projector = np.zeros((dim, dim))
    for perm in permutations(range(k)):
        permuted = np.transpose(indices, perm).reshape(-1)
        projector[permuted, np.arange(dim)] += 1.0
    projector /= math.factorial(k)
    projector.setflags(write=False)
    return projector


def symmetric_projector(d: int, k: int) -> np.ndarray:
    """Projector onto the symmetric subspace of (C^d)^(x)k: the average of all slot permutations."""
    check_dimension(d, k)
    return _symmetric_projector(d, k)


def haar_moment_operator(d: int, k: int) -> MomentOperator:
    """E_psi |psi><psi|^(x)k over Haar-random psi, i.e. P_sym / binom(d + k - 1, k)."""
    projector = symmetric_projector(d, k)
    return MomentOperator(HermitianOperator(projector / math.comb(d + k - 1, k)), k, d)


def design_distance(e: StateEnsemble, k: int) -> float:
    """Trace distance of the ensemble's k-th moment to the Haar moment (the epsilon of a k-design)."""
    return trace_distance(moment_operator(e, k).op, haar_moment_operator(e.d_A, k).op)


def exact_thermal_companion(state: BipartiteState) -> BipartiteState:
    """The locally maximally mixed state sum_i |a_i> (x) |b_i> / sqrt(d_A) sharing the Schmidt bases.

    Raises:
        RankDeficiencyError: If the Schmidt rank is below d_A.
    """
    schmidt = schmidt_decompose(state)
    if schmidt.weights.min() <= SCHMIDT_ZERO:
        raise RankDeficiencyError(f"Schmidt rank below d_A = {state.d_A}; the companion is undefined")
    coefficients = schmidt.left_basis @ schmidt.right_basis.T / np.sqrt(state.d_A)
    return BipartiteState(coefficients)


class EnsembleDocument(BaseModel):
    """JSON form of a StateEnsemble; complex numbers are [re, im] pairs."""

    schema_version: int = SCHEMA_VERSION
    d_A: int
    source: EnsembleSource
    probabilities: list[float]
    states: list[list[tuple[float, float]]]


class MomentOperatorDocument(BaseModel):
    """JSON form of a MomentOperator; complex numbers are [re, im] pairs."""

    schema_version: int = SCHEMA_VERSION
    d_A: int
    k: int
    entries: list[list[tuple[float, float]]]


def _pairs(matrix: np.ndarray) -> list[list[tuple[float, float]]]:
    return [[(float(x.real), float(x.imag)) for x in row] for row in matrix]


def _complex(pairs: list[list[tuple[float, float]]]) -> np.ndarray:
    array = np.asarray(pairs, dtype=float)
    return array[..., 0] + 1j * array[..., 1]


def ensemble_to_document(e: StateEnsemble) -> EnsembleDocument:
    """Serializable form of an ensemble."""
    return EnsembleDocument(
        d_A=e.d_A, source=e.source, probabilities=[float(p) for p in e.probabilities], states=_pairs(e.states)
    )


def ensemble_from_document(doc: EnsembleDocument) -> StateEnsemble:
    """Rebuild an ensemble from its document."""
    return StateEnsemble(np.asarray(doc.probabilities), _complex(doc.states), doc.source)


def moment_to_document(m: MomentOperator) -> MomentOperatorDocument:
    """Serializable form of a moment operator."""
    return MomentOperatorDocument(d_A=m.d_A, k=m.k, entries=_pairs(m.op.entries))


def moment_from_document(doc: MomentOperatorDocument) -> MomentOperator:
    """Rebuild a moment operator from its document."""
    return MomentOperator(HermitianOperator(_complex(doc.entries)), doc.k, doc.d_A)
