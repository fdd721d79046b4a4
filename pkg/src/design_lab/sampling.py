"""Seeded Haar sampling: unitaries, isometries, pure states and near-thermal bipartite states.

Every draw goes through an :class:`RngStream`, a PCG64 generator seeded by
``SeedSequence(seed, spawn_key=(stream_index, *path))``. Trials use ``stream_index = trial_index``;
nested draws inside a trial use :meth:`RngStream.child`.
"""

from dataclasses import dataclass, field

import numpy as np

from design_lab.errors import InvalidArgumentError, OutOfTheoremDomainError
from design_lab.tensor_core import BipartiteState, HermitianOperator, PureState

ALGORITHM_ID = "numpy.PCG64/SeedSequence"
STREAM_LAYOUT = "SeedSequence(entropy=seed, spawn_key=(stream_index, *path)); stream_index = trial_index"
UNITARY_ATOL = 1e-10


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream; identical parameters reproduce identical draws bit-for-bit."""

    seed: int
    stream_index: int = 0
    path: tuple[int, ...] = ()
    algorithm_id: str = ALGORITHM_ID
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_index, *self.path))
        object.__setattr__(self, "generator", np.random.Generator(np.random.PCG64(sequence)))

    def child(self, index: int) -> "RngStream":
        """Independent substream below this one."""
        return RngStream(self.seed, self.stream_index, (*self.path, index))


@dataclass(frozen=True)
class HaarUnitary:
    """M x M unitary matrix."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidArgumentError(f"Unitary must be square, got shape {matrix.shape}")
        if np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))) > UNITARY_ATOL:
            raise InvalidArgumentError("Matrix is not unitary within tolerance")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        """Dimension M."""
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Isometry:
    """M x d_A matrix V with orthonormal columns (V^dagger V = 1)."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[1] > matrix.shape[0]:
            raise InvalidArgumentError(f"Isometry must be tall (M x d_A with d_A <= M), got shape {matrix.shape}")
        if np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[1]))) > UNITARY_ATOL:
            raise InvalidArgumentError("Columns are not orthonormal within tolerance")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def standard_embedding(cls, M: int, d_A: int) -> "Isometry":
        """W = identity block over zero block."""
        return cls(np.eye(M, d_A, dtype=complex))

    @property
    def M(self) -> int:
        """Number of rows."""
        return self.matrix.shape[0]

    @property
    def d_A(self) -> int:
        """Number of columns."""
        return self.matrix.shape[1]


def ginibre(shape: tuple[int, ...], rng: RngStream) -> np.ndarray:
    """Complex Gaussian matrix; real and imaginary parts are independent standard normals."""
    draws = rng.generator.standard_normal((2, *shape))
    return draws[0] + 1j * draws[1]


def _phase_fixed_qr(matrix: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(matrix)
    diagonal = np.diagonal(r)
    magnitude = np.abs(diagonal)
    phases = np.ones_like(diagonal)
    nonzero = magnitude > 0
    phases[nonzero] = diagonal[nonzero] / magnitude[nonzero]
    return q * phases


def haar_unitary(dim: int, rng: RngStream) -> HaarUnitary:
    """Haar-random unitary on U(dim) from the phase-corrected QR of a Ginibre matrix."""
    if dim < 1:
        raise InvalidArgumentError(f"Unitary dimension must be positive, got {dim}")
    return HaarUnitary(_phase_fixed_qr(ginibre((dim, dim), rng)))


def haar_isometry(M: int, d: int, rng: RngStream) -> Isometry:
    """Isometry C^d -> C^M from the unitarily invariant measure (thin QR of an M x d Ginibre matrix)."""
    if not 1 <= d <= M:
        raise InvalidArgumentError(f"Isometry needs 1 <= d <= M, got d={d}, M={M}")
    return Isometry(_phase_fixed_qr(ginibre((M, d), rng)))


def haar_pure_state(dim: int, rng: RngStream) -> PureState:
    """Uniformly random pure state on C^dim."""
    if dim < 1:
        raise InvalidArgumentError(f"State dimension must be positive, got {dim}")
    return PureState.from_vector(ginibre((dim,), rng))


def haar_bipartite_state(d_A: int, M: int, rng: RngStream) -> BipartiteState:
    """Uniformly random pure state on C^d_A (x) C^M."""
    coefficients = ginibre((d_A, M), rng)
    return BipartiteState(coefficients / np.linalg.norm(coefficients))


def _check_delta(d_A: int, delta: float) -> None:
    if not 0.0 <= delta < 1.0 / (2 * d_A):
        raise OutOfTheoremDomainError(f"delta={delta} must satisfy 0 <= delta < 1/(2 d_A) = {1 / (2 * d_A)}")
    if d_A == 1 and delta > 0.0:
        raise OutOfTheoremDomainError("A one-dimensional subsystem is always maximally mixed; delta must be 0")


def perturbed_spectrum(d_A: int, delta: float) -> np.ndarray:
    """Schmidt spectrum (1/d_A + delta, 1/d_A - delta, 1/d_A, ...)."""
    _check_delta(d_A, delta)
    weights = np.full(d_A, 1.0 / d_A)
    if d_A > 1:
        weights[0] += delta
        weights[1] -= delta
    return weights


def perturbed_density(d_A: int, delta: float, rng: RngStream) -> HermitianOperator:
    """Random density matrix at trace distance exactly ``delta`` from 1/d_A, Haar-random eigenbasis."""
    weights = perturbed_spectrum(d_A, delta)
    basis = haar_unitary(d_A, rng).matrix
    return HermitianOperator((basis * weights) @ basis.conj().T)


def perturbed_thermal_state(d_A: int, M: int, delta: float, rng: RngStream) -> BipartiteState:
    """Bipartite state whose reduced state on A is at trace distance ``delta`` from 1/d_A.

    Raises:
        OutOfTheoremDomainError: If ``delta >= 1/(2 d_A)``.
        InvalidArgumentError: If ``d_A > M``.
    """
    weights = perturbed_spectrum(d_A, delta)
    if d_A > M:
        raise InvalidArgumentError(f"Need d_A <= M, got d_A={d_A}, M={M}")
    left = haar_unitary(d_A, rng).matrix
    right = haar_isometry(M, d_A, rng).matrix
    return BipartiteState((left * np.sqrt(weights)) @ right.T)
