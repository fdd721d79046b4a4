"""Mixed-field Ising chain quench: reduced-state mixing and design errors of projected ensembles over time."""

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sps
from loguru import logger
from pydantic import BaseModel, Field

from design_lab.bounds import minimal_eps_prime, theorem_epsilon
from design_lab.config import SpinChainConfig
from design_lab.ensembles import computational_ensemble, deformed_row_ensemble, design_distance
from design_lab.errors import DesignLabError, InvalidArgumentError
from design_lab.sampling import RngStream, haar_isometry
from design_lab.tensor_core import (
    BipartiteState,
    HermitianOperator,
    PureState,
    check_dimension,
    partial_trace,
    trace_distance,
)

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
NORM_DRIFT_ATOL = 1e-10

SITE_STATES = {
    "0": np.array([1.0, 0.0]),
    "1": np.array([0.0, 1.0]),
    "+": np.array([1.0, 1.0]) / np.sqrt(2),
    "-": np.array([1.0, -1.0]) / np.sqrt(2),
    "y": np.array([1.0, 1.0j]) / np.sqrt(2),
}


def _local(n_sites: int, ops: dict[int, np.ndarray]) -> sps.spmatrix:
    """Tensor product with ``ops[i]`` on site i and identities elsewhere; site 0 is the leftmost factor."""
    factors = [sps.csr_matrix(ops.get(site, np.eye(2))) for site in range(n_sites)]
    return reduce(lambda a, b: sps.kron(a, b, format="csr"), factors)


def build_hamiltonian(cfg: SpinChainConfig) -> HermitianOperator:
    """H = J sum Z_i Z_{i+1} + h_x sum X_i + h_z sum Z_i.

    The periodic bond Z_{N-1} Z_0 is added only for N > 2, where it is distinct from the open bond.

    Raises:
        ResourceLimitError: If 2^N exceeds the dimension cap.
    """
    n = cfg.n_sites
    dim = check_dimension(2, n)
    bonds = [(i, i + 1) for i in range(n - 1)]
    if cfg.boundary == "periodic" and n > 2:
        bonds.append((n - 1, 0))
    h = sps.csr_matrix((dim, dim))
    for i, j in bonds:
        h = h + cfg.J * _local(n, {i: PAULI_Z, j: PAULI_Z})
    for site in range(n):
        h = h + cfg.h_x * _local(n, {site: PAULI_X}) + cfg.h_z * _local(n, {site: PAULI_Z})
    logger.debug(f"Built {dim}x{dim} Hamiltonian with {len(bonds)} bonds ({cfg.boundary})")
    return HermitianOperator(h.toarray())


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (ascending) and eigenvectors (columns) of a Hamiltonian."""

    energies: np.ndarray
    vectors: np.ndarray


def diagonalize(h: HermitianOperator) -> Spectrum:
    """Full eigendecomposition."""
    energies, vectors = np.linalg.eigh(h.entries)
    energies.setflags(write=False)
    vectors.setflags(write=False)
    return Spectrum(energies, vectors)


def evolve(psi0: PureState, h: HermitianOperator, t: float, spectrum: Spectrum | None = None) -> PureState:
    """exp(-iHt) psi0 in the eigenbasis of H; pass ``spectrum`` to reuse one decomposition across times.

    Raises:
        InvalidArgumentError: On dimension mismatch.
        DesignLabError: If the norm drifts by more than 1e-10.
    """
    if psi0.dim != h.dim:
        raise InvalidArgumentError(f"State dimension {psi0.dim} does not match Hamiltonian dimension {h.dim}")
    spectrum = spectrum or diagonalize(h)
    coefficients = spectrum.vectors.conj().T @ psi0.amplitudes
    evolved = spectrum.vectors @ (np.exp(-1j * spectrum.energies * t) * coefficients)
    drift = abs(float(np.linalg.norm(evolved)) - 1.0)
    if drift > NORM_DRIFT_ATOL:
        raise DesignLabError(f"Norm drifted by {drift:.3e} at t={t}")
    return PureState.from_vector(evolved)


def product_state(labels: str) -> PureState:
    """Product state from one label per site: ``0``, ``1``, ``+``, ``-`` or ``y`` (sigma_y eigenstate, +1)."""
    if not labels or set(labels) - set(SITE_STATES):
        raise InvalidArgumentError(f"Invalid product state labels {labels!r}")
    return PureState(reduce(np.kron, [SITE_STATES[label] for label in labels]))


class TimeSlice(BaseModel):
    """Mixing and design errors at one evolution time.

    ``theorem_ceiling`` and ``within_ceiling_fraction`` are unset while the reduced state is too far from
    maximally mixed for the guarantee to apply.
    """

    t: float
    delta: float = Field(ge=0.0)
    design_error_comp: float = Field(ge=0.0, le=1.0)
    q10: float
    q50: float
    q90: float
    theorem_ceiling: float | None = None
    within_ceiling_fraction: float | None = None
    random_errors: list[float] = Field(default_factory=list, exclude=True)


def reference_eps_prime(cfg: SpinChainConfig, k: int) -> float:
    """Configured eps' for the ceiling, or the smallest one the complement dimension supports."""
    return cfg.eps_prime_ref or minimal_eps_prime(cfg.M, cfg.d_A, k, cfg.Delta)


def design_error_trace(cfg: SpinChainConfig, k: int, n_random_bases: int, rng: RngStream) -> list[TimeSlice]:
    """Quench ``cfg.site_states`` and measure the complement of the first ``cut`` sites at every time.

    Random-basis errors use fresh Haar isometries on the reduced state; basis ``b`` at time index
    ``i`` draws from stream ``i * n_random_bases + b``.
    """
    d_A, M = cfg.d_A, cfg.M
    check_dimension(d_A, k)
    eps_ref = reference_eps_prime(cfg, k)
    logger.info(f"Spin chain: N={cfg.n_sites}, d_A={d_A}, M={M}, k={k}, reference eps'={eps_ref:.4f}")

    h = build_hamiltonian(cfg)
    spectrum = diagonalize(h)
    psi0 = product_state(cfg.site_states)
    maximally_mixed = HermitianOperator.maximally_mixed(d_A)

    slices = []
    for index, t in enumerate(cfg.times):
        state = BipartiteState.from_vector(evolve(psi0, h, t, spectrum).amplitudes, d_A, M)
        rho_A = partial_trace(state)
        delta = trace_distance(rho_A, maximally_mixed)
        computational = design_distance(computational_ensemble(state), k)
        errors = [
            design_distance(
                deformed_row_ensemble(
                    haar_isometry(M, d_A, RngStream(rng.seed, index * n_random_bases + b, rng.path)), rho_A
                ),
                k,
            )
            for b in range(n_random_bases)
        ]
        q10, q50, q90 = (float(q) for q in np.quantile(errors, [0.1, 0.5, 0.9]))
        ceiling = theorem_epsilon(eps_ref, k, d_A, delta) if delta < 1.0 / (2 * d_A) else None
        within = None if ceiling is None else float(np.mean([error <= ceiling for error in errors]))
        logger.debug(f"t={t}: delta={delta:.4e}, computational={computational:.4e}, median random={q50:.4e}")
        slices.append(
            TimeSlice(
                t=t,
                delta=delta,
                design_error_comp=min(max(computational, 0.0), 1.0),
                q10=q10,
                q50=q50,
                q90=q90,
                theorem_ceiling=ceiling,
                within_ceiling_fraction=within,
                random_errors=errors,
            )
        )
    return slices
