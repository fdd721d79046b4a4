"""Dense complex linear-algebra primitives for pure states, density operators and tensor powers.

Tensor index convention: every k-fold tensor power in design-lab is slot-1-major, i.e. the first
tensor slot varies slowest (the ``numpy.kron`` convention). A bipartite coefficient matrix ``C``
stores the component ``<i|_A <z|_Abar |Psi>`` at ``C[i, z]``, so the flat state vector is
``C.reshape(-1)``.

All values are immutable after construction: the wrapped arrays are copied and flagged read-only.
"""

from dataclasses import dataclass
from enum import StrEnum
from functools import reduce
from typing import overload

import numpy as np
from loguru import logger

from design_lab.config import config
from design_lab.errors import InvalidArgumentError, ResourceLimitError

NORM_ATOL = 1e-12
HERMITIAN_ATOL = 1e-12
ORTHONORMAL_ATOL = 1e-10
EIGEN_ZERO = 1e-14
SCHMIDT_ZERO = 1e-12


def _frozen(array: np.ndarray, dtype: type = complex) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def check_dimension(d: int, k: int) -> int:
    """Return ``d**k`` after checking it against the configured dimension cap.

    Raises:
        ResourceLimitError: If ``d**k`` exceeds the cap (``DESIGN_LAB_CAP``, default 4096).
    """
    dim = d**k
    if dim > config.model.cap:
        raise ResourceLimitError(f"Tensor dimension {d}^{k} = {dim} exceeds the cap {config.model.cap}")
    return dim


@dataclass(frozen=True)
class PureState:
    """Normalized state vector on C^d."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = _frozen(self.amplitudes)
        if amplitudes.ndim != 1 or amplitudes.size == 0:
            raise InvalidArgumentError(f"A pure state needs a nonempty vector, got shape {amplitudes.shape}")
        norm = float(np.linalg.norm(amplitudes))
        if abs(norm - 1.0) > NORM_ATOL:
            raise InvalidArgumentError(f"State vector is not normalized (norm {norm!r})")
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "PureState":
        """Normalize an arbitrary nonzero vector into a state."""
        vector = np.asarray(vector, dtype=complex)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise InvalidArgumentError("Cannot normalize the zero vector")
        return cls(vector / norm)

    @classmethod
    def basis(cls, index: int, dim: int) -> "PureState":
        """Computational basis state |index> on C^dim."""
        vector = np.zeros(dim, dtype=complex)
        vector[index] = 1.0
        return cls(vector)

    @property
    def dim(self) -> int:
        """Hilbert space dimension."""
        return self.amplitudes.size

    def projector(self) -> "HermitianOperator":
        """The rank-one density operator |psi><psi|."""
        return HermitianOperator(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian d x d matrix; real dtypes are kept real."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries)
        entries = _frozen(entries, float if np.isrealobj(entries) else complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] == 0:
            raise InvalidArgumentError(f"Operator must be a nonempty square matrix, got shape {entries.shape}")
        scale = max(1.0, float(np.max(np.abs(entries))))
        if np.max(np.abs(entries - entries.conj().T)) > HERMITIAN_ATOL * scale:
            raise InvalidArgumentError("Operator is not Hermitian within tolerance")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        """Matrix dimension."""
        return self.entries.shape[0]

    def trace(self) -> float:
        """Real part of the trace."""
        return float(np.trace(self.entries).real)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "HermitianOperator":
        """The maximally mixed state 1/d."""
        return cls(np.eye(dim, dtype=complex) / dim)


class Subsystem(StrEnum):
    """Side of a bipartition kept by a partial trace."""

    A = "A"
    COMPLEMENT = "Abar"


@dataclass(frozen=True)
class BipartiteState:
    """Pure state on C^d_A (x) C^M stored as its d_A x M coefficient matrix."""

    coefficients: np.ndarray

    def __post_init__(self) -> None:
        coefficients = _frozen(self.coefficients)
        if coefficients.ndim != 2 or 0 in coefficients.shape:
            raise InvalidArgumentError(f"Coefficients must be a nonempty matrix, got shape {coefficients.shape}")
        norm = float(np.linalg.norm(coefficients))
        if abs(norm - 1.0) > NORM_ATOL:
            raise InvalidArgumentError(f"Bipartite state is not normalized (Frobenius norm {norm!r})")
        object.__setattr__(self, "coefficients", coefficients)

    @classmethod
    def from_vector(cls, vector: np.ndarray, d_A: int, M: int) -> "BipartiteState":
        """Reshape a flat slot-1-major vector of length d_A * M."""
        vector = np.asarray(vector)
        if vector.size != d_A * M:
            raise InvalidArgumentError(f"Vector of length {vector.size} does not split as {d_A} x {M}")
        return cls(vector.reshape(d_A, M))

    @property
    def d_A(self) -> int:
        """Dimension of subsystem A."""
        return self.coefficients.shape[0]

    @property
    def M(self) -> int:
        """Dimension of the complement."""
        return self.coefficients.shape[1]

    @property
    def vector(self) -> np.ndarray:
        """Flat state vector."""
        return self.coefficients.reshape(-1)


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Schmidt form sum_i sqrt(q_i) |a_i> (x) |b_i>.

    ``left_basis`` (d_A x d_A) and ``right_basis`` (M x d_A) hold the basis vectors as columns.
    """

    weights: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", _frozen(self.weights, float))
        object.__setattr__(self, "left_basis", _frozen(self.left_basis))
        object.__setattr__(self, "right_basis", _frozen(self.right_basis))

    def reassemble(self) -> BipartiteState:
        """Rebuild the bipartite state from its Schmidt data."""
        coefficients = (self.left_basis * np.sqrt(self.weights)) @ self.right_basis.T
        return BipartiteState(coefficients)


@dataclass(frozen=True)
class OperatorBasis:
    """Hilbert-Schmidt orthonormal basis of Hermitian d x d matrices."""

    elements: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", _frozen(self.elements))

    @property
    def dim(self) -> int:
        """Matrix dimension of the basis elements."""
        return self.elements.shape[1]

    def __len__(self) -> int:
        """Number of basis elements."""
        return self.elements.shape[0]

    def gram(self) -> np.ndarray:
        """Matrix of Tr[X_a X_b]."""
        flat = self.elements.reshape(len(self), -1)
        return flat.conj() @ flat.T

    def coefficients(self, operator: np.ndarray) -> np.ndarray:
        """Expansion coefficients Tr[X_a H] (real for Hermitian H)."""
        return np.einsum("aij,ji->a", self.elements, np.asarray(operator)).real

    def expand(self, coefficients: np.ndarray) -> np.ndarray:
        """Operator sum_a c_a X_a."""
        return np.einsum("a,aij->ij", coefficients, self.elements)


OperatorLike = HermitianOperator | np.ndarray


def _matrix(op: OperatorLike) -> np.ndarray:
    if isinstance(op, HermitianOperator):
        return op.entries
    return HermitianOperator(op).entries


def trace_distance(a: OperatorLike, b: OperatorLike) -> float:
    """Trace distance D(a, b) = ||a - b||_1 / 2 of two Hermitian operators.

    Raises:
        InvalidArgumentError: On dimension mismatch or non-Hermitian input.
    """
    a_mat, b_mat = _matrix(a), _matrix(b)
    if a_mat.shape != b_mat.shape:
        raise InvalidArgumentError(f"Dimension mismatch: {a_mat.shape} vs {b_mat.shape}")
    eigenvalues = np.linalg.eigvalsh(a_mat - b_mat)
    eigenvalues[np.abs(eigenvalues) < EIGEN_ZERO] = 0.0
    return 0.5 * float(np.sum(np.abs(eigenvalues)))


def state_fidelity(psi: PureState, phi: PureState) -> float:
    """Overlap |<psi|phi>|^2."""
    if psi.dim != phi.dim:
        raise InvalidArgumentError(f"Dimension mismatch: {psi.dim} vs {phi.dim}")
    return float(abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2)


def pure_state_distance(psi: PureState, phi: PureState) -> float:
    """Trace distance of two pure states, sqrt(1 - |<psi|phi>|^2)."""
    return float(np.sqrt(max(0.0, 1.0 - state_fidelity(psi, phi))))


def partial_trace(state: BipartiteState, keep: Subsystem = Subsystem.A) -> HermitianOperator:
    """Reduced density operator of one side of a bipartite pure state."""
    c = state.coefficients
    if keep is Subsystem.A:
        return HermitianOperator(c @ c.conj().T)
    return HermitianOperator(c.T @ c.conj())


def _trace_all_but(ops: np.ndarray, d: int, k: int, slot: int) -> np.ndarray:
    """Batched partial trace over every slot except ``slot`` (1-based); leading axes are batch axes."""
    batch = ops.shape[:-2]
    tensor = ops.reshape(*batch, *([d] * (2 * k)))
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:k])
    cols = [rows[i] if i != slot - 1 else letters[k + i] for i in range(k)]
    subscripts = f"...{''.join(rows)}{''.join(cols)}->...{rows[slot - 1]}{cols[slot - 1]}"
    return np.einsum(subscripts, tensor)


def partial_trace_all_but(op: OperatorLike, slot: int, d: int, k: int) -> np.ndarray:
    """Trace out every tensor slot of an operator on (C^d)^(x)k except ``slot`` (1-based).

    A stack of operators (leading batch axes) is traced elementwise.

    Raises:
        InvalidArgumentError: If ``slot`` is out of range or the operator is not d^k dimensional.
    """
    matrix = np.asarray(op.entries if isinstance(op, HermitianOperator) else op)
    if not 1 <= slot <= k:
        raise InvalidArgumentError(f"slot must be in 1..{k}, got {slot}")
    if matrix.ndim < 2 or matrix.shape[-2:] != (d**k, d**k):
        raise InvalidArgumentError(f"Operator of shape {matrix.shape} is not on ({d})^{k}")
    return _trace_all_but(matrix, d, k, slot)


def schmidt_decompose(state: BipartiteState) -> SchmidtDecomposition:
    """Schmidt decomposition via SVD of the coefficient matrix.

    Right vectors belonging to vanishing singular values are replaced by standard basis vectors
    orthonormalized against the kept ones, in index order.
    """
    if state.d_A > state.M:
        raise InvalidArgumentError(f"Schmidt decomposition here needs d_A <= M, got {state.d_A} > {state.M}")
    left, singular, right_h = np.linalg.svd(state.coefficients, full_matrices=False)
    weights = singular**2
    rank = int(np.sum(weights > SCHMIDT_ZERO))
    right = right_h.T[:, :rank]
    if rank < state.d_A:
        logger.debug(f"Completing rank-{rank} Schmidt basis to {state.d_A} vectors")
        right = _complete_orthonormal(right, state.d_A)
        weights[rank:] = 0.0
    return SchmidtDecomposition(weights=weights / weights.sum(), left_basis=left, right_basis=right)


def _complete_orthonormal(columns: np.ndarray, target: int) -> np.ndarray:
    dim = columns.shape[0]
    basis = [columns[:, j] for j in range(columns.shape[1])]
    for index in range(dim):
        if len(basis) == target:
            break
        candidate = np.zeros(dim, dtype=complex)
        candidate[index] = 1.0
        for vector in basis:
            candidate = candidate - np.vdot(vector, candidate) * vector
        norm = np.linalg.norm(candidate)
        if norm > ORTHONORMAL_ATOL:
            basis.append(candidate / norm)
    return np.stack(basis, axis=1)


@overload
def kron_power(x: PureState, k: int) -> PureState: ...
@overload
def kron_power(x: HermitianOperator, k: int) -> HermitianOperator: ...
@overload
def kron_power(x: np.ndarray, k: int) -> np.ndarray: ...
def kron_power(x: PureState | HermitianOperator | np.ndarray, k: int) -> PureState | HermitianOperator | np.ndarray:
    """k-fold tensor power (slot-1-major).

    Raises:
        InvalidArgumentError: If ``k < 1``.
        ResourceLimitError: If the resulting dimension exceeds the cap.
    """
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    if isinstance(x, PureState):
        check_dimension(x.dim, k)
        return PureState(reduce(np.kron, [x.amplitudes] * k))
    if isinstance(x, HermitianOperator):
        check_dimension(x.dim, k)
        return HermitianOperator(reduce(np.kron, [x.entries] * k))
    array = np.asarray(x)
    check_dimension(array.shape[0], k)
    return reduce(np.kron, [array] * k)


def hermitian_operator_basis(d: int) -> OperatorBasis:
    """Generalized Gell-Mann basis, Hilbert-Schmidt orthonormal.

    Order: 1/sqrt(d), then symmetric and antisymmetric off-diagonal pairs for i < j, then the
    d - 1 traceless diagonal elements.
    """
    if d < 1:
        raise InvalidArgumentError(f"d must be >= 1, got {d}")
    elements = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for i in range(d):
        for j in range(i + 1, d):
            symmetric = np.zeros((d, d), dtype=complex)
            symmetric[i, j] = symmetric[j, i] = 1 / np.sqrt(2)
            antisymmetric = np.zeros((d, d), dtype=complex)
            antisymmetric[i, j] = 1j / np.sqrt(2)
            antisymmetric[j, i] = -1j / np.sqrt(2)
            elements.extend([symmetric, antisymmetric])
    for l in range(1, d):  # noqa: E741
        diagonal = np.zeros(d, dtype=complex)
        diagonal[:l] = 1.0
        diagonal[l] = -l
        elements.append(np.diag(diagonal) / np.sqrt(l * (l + 1)))
    return OperatorBasis(np.stack(elements))
