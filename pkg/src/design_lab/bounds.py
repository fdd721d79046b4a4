"""Closed-form design bounds and numerical checks of the inequalities behind them.

The closed forms are plain functions of the parameters. Every ``check_*`` function evaluates both
sides of one inequality on concrete data and returns a :class:`~design_lab.reports.BoundReport`.
"""

import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import reduce
from typing import NamedTuple

import numpy as np
from loguru import logger
from scipy.linalg import expm

from design_lab.config import GRADIENT_MAX_M, ExperimentConfig, config
from design_lab.ensembles import (
    ZERO_PROBABILITY,
    MeasurementBasis,
    StateEnsemble,
    deformed_row_ensemble,
    design_distance,
    exact_thermal_companion,
    haar_moment_operator,
    moment_operator,
    projected_ensemble,
    rotate_ensemble,
    row_ensemble,
)
from design_lab.errors import InvalidArgumentError, InvalidCurveError, OutOfTheoremDomainError
from design_lab.reports import BoundReport, ExceedanceSummary, TrialRecord, map_ordered, wilson_interval
from design_lab.sampling import (
    HaarUnitary,
    Isometry,
    RngStream,
    ginibre,
    haar_isometry,
    haar_unitary,
    perturbed_density,
)
from design_lab.tensor_core import (
    BipartiteState,
    HermitianOperator,
    OperatorBasis,
    check_dimension,
    hermitian_operator_basis,
    kron_power,
    partial_trace,
    partial_trace_all_but,
    trace_distance,
)

CHECK_ATOL = 1e-9
COVARIANCE_ATOL = 1e-10
DIRECTIONAL_ATOL = 1e-6
DEFAULT_STEP = 1e-5
CURVE_ZERO = 1e-12

DensityLike = HermitianOperator | np.ndarray
EnsembleLike = Sequence[tuple[float, DensityLike]]


def _check_delta(d_A: int, delta: float) -> None:
    if not 0.0 <= delta < 1.0 / (2 * d_A):
        raise OutOfTheoremDomainError(f"delta={delta} must satisfy 0 <= delta < 1/(2 d_A) = {1 / (2 * d_A)}")


def _check_unit_interval(**values: float) -> None:
    for name, value in values.items():
        if not 0.0 < value < 1.0:
            raise InvalidArgumentError(f"{name}={value} must lie strictly between 0 and 1")


def _concentration_rate(d_A: int, k: int) -> float:
    """4 (2k - 1)^2 d_A^(2k - 1), the denominator of the tail exponent."""
    return 4.0 * (2 * k - 1) ** 2 * float(d_A) ** (2 * k - 1)


def continuity_bound(d_A: int, k: int, delta: float) -> float:
    """2k sqrt(d_A delta) + delta d_A, the moment distance between a state and its thermal companion.

    Raises:
        OutOfTheoremDomainError: If ``delta`` is outside ``[0, 1/(2 d_A))``.
    """
    _check_delta(d_A, delta)
    return 2 * k * math.sqrt(d_A * delta) + delta * d_A


def design_threshold_M(d_A: int, k: int, eps_prime: float, Delta: float) -> int:
    """Smallest M strictly above 4(2k-1)^2 d_A^(2k-1) / eps'^2 * ln(2 d_A^(2k) / Delta).

    Raises:
        InvalidArgumentError: If ``eps_prime`` or ``Delta`` is outside ``(0, 1)``.
    """
    _check_unit_interval(eps_prime=eps_prime, Delta=Delta)
    value = _concentration_rate(d_A, k) / eps_prime**2 * math.log(2 * float(d_A) ** (2 * k) / Delta)
    return math.floor(value) + 1


def minimal_eps_prime(M: int, d_A: int, k: int, Delta: float) -> float:
    """Infimum of the eps' for which M satisfies the threshold condition at confidence 1 - Delta."""
    _check_unit_interval(Delta=Delta)
    if M < 1:
        raise InvalidArgumentError(f"M must be positive, got {M}")
    return math.sqrt(_concentration_rate(d_A, k) * math.log(2 * float(d_A) ** (2 * k) / Delta) / M)


def theorem_epsilon(eps_prime: float, k: int, d_A: int, delta: float) -> float:
    """eps' + 2k sqrt(d_A delta) + d_A delta."""
    return eps_prime + continuity_bound(d_A, k, delta)


def tail_bound(M: int, d_A: int, k: int, eps_prime: float) -> float:
    """2 d_A^(2k) exp(-M eps'^2 / (4 (2k-1)^2 d_A^(2k-1)))."""
    return 2 * float(d_A) ** (2 * k) * math.exp(-M * eps_prime**2 / _concentration_rate(d_A, k))


def lipschitz_bound(d_A: int, k: int) -> float:
    """2 (2k - 1) / sqrt(d_A)."""
    return 2 * (2 * k - 1) / math.sqrt(d_A)


def _densities(ensemble: EnsembleLike) -> tuple[np.ndarray, list[np.ndarray]]:
    weights = np.array([float(p) for p, _ in ensemble])
    matrices = [rho.entries if isinstance(rho, HermitianOperator) else np.asarray(rho) for _, rho in ensemble]
    return weights, matrices


def check_mixture_inequality(ens_a: EnsembleLike, ens_b: EnsembleLike, k: int) -> BoundReport:
    """Check both steps of the mixture bound for two ensembles of density matrices.

    With ``lhs = D(sum p rho^k, sum r sigma^k)``, ``mid = sum p D(rho^k, sigma^k) + D(p, r)`` and
    ``rhs = k sum p D(rho, sigma) + D(p, r)`` the components are ``lhs <= mid`` (triangle) and
    ``mid <= rhs`` (telescoping).

    Raises:
        InvalidArgumentError: If the ensembles have different lengths or member dimensions.
    """
    p, rhos = _densities(ens_a)
    r, sigmas = _densities(ens_b)
    if len(rhos) != len(sigmas) or not rhos:
        raise InvalidArgumentError(f"Ensembles must be nonempty and matched, got {len(rhos)} and {len(sigmas)}")
    if any(a.shape != b.shape for a, b in zip(rhos, sigmas, strict=True)):
        raise InvalidArgumentError("Member dimensions differ between the ensembles")

    powers_a = [kron_power(rho, k) for rho in rhos]
    powers_b = [kron_power(sigma, k) for sigma in sigmas]
    mixture_a = sum(w * a for w, a in zip(p, powers_a, strict=True))
    mixture_b = sum(w * b for w, b in zip(r, powers_b, strict=True))
    classical = 0.5 * float(np.abs(p - r).sum())

    lhs = trace_distance(mixture_a, mixture_b)
    mid = sum(w * trace_distance(a, b) for w, a, b in zip(p, powers_a, powers_b, strict=True)) + classical
    rhs = k * sum(w * trace_distance(a, b) for w, a, b in zip(p, rhos, sigmas, strict=True)) + classical
    return BoundReport.combine(
        "mixture",
        [
            BoundReport.check("triangle", mid, lhs, CHECK_ATOL),
            BoundReport.check("telescoping", rhs, mid, CHECK_ATOL),
        ],
        k=k,
        members=len(rhos),
    )


def check_normalization_lemma(v: Isometry, rho_A: HermitianOperator) -> BoundReport:
    """Compare the deformed row ensemble of ``(v, rho_A)`` with the plain row ensemble of ``v``.

    Components: ``max_z |p_z - r_z| / r_z <= 2 delta d_A``, ``D(p, r) <= delta d_A`` and
    ``max_z D(psi_z, phi_z) <= 2 sqrt(d_A delta)``.

    Raises:
        OutOfTheoremDomainError: If ``D(rho_A, 1/d_A) >= 1/(2 d_A)``.
    """
    d_A = v.d_A
    delta = trace_distance(rho_A, HermitianOperator.maximally_mixed(d_A))
    _check_delta(d_A, delta)
    deformed = deformed_row_ensemble(v, rho_A)
    plain = row_ensemble(v)
    if len(deformed) != len(plain):
        raise InvalidArgumentError("Row ensembles dropped different outcomes; the isometry has near-zero rows")

    p, r = deformed.probabilities, plain.probabilities
    relative = float(np.max(np.abs(p - r) / r))
    classical = 0.5 * float(np.abs(p - r).sum())
    overlaps = np.abs(np.einsum("za,za->z", deformed.states.conj(), plain.states)) ** 2
    member = float(np.sqrt(np.clip(1.0 - overlaps, 0.0, None)).max())
    return BoundReport.combine(
        "normalization",
        [
            BoundReport.check("relative_weight", 2 * delta * d_A, relative, CHECK_ATOL),
            BoundReport.check("weight_distance", delta * d_A, classical, CHECK_ATOL),
            BoundReport.check("member_overlap", 2 * math.sqrt(d_A * delta), member, CHECK_ATOL),
        ],
        d_A=d_A,
        M=v.M,
        delta=delta,
    )


Curve = Callable[[float], np.ndarray]


def canonical_curve(w: Isometry, g: np.ndarray) -> Curve:
    """rho(lambda)_z = W^dagger exp(-lambda G) |z><z| exp(lambda G) W / d_A as an (M, d_A, d_A) stack."""
    generator = np.asarray(g, dtype=complex)
    if generator.shape != (w.M, w.M):
        raise InvalidArgumentError(f"Generator must be {w.M} x {w.M}, got {generator.shape}")

    def curve(lam: float) -> np.ndarray:
        columns = w.matrix.conj().T @ expm(-lam * generator)
        return np.einsum("az,bz->zab", columns, columns.conj()) / w.d_A

    return curve


def _batched_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, ra, ca = a.shape
    _, rb, cb = b.shape
    return np.einsum("nij,nkl->nikjl", a, b).reshape(n, ra * rb, ca * cb)


def _normalized_power_sum(rho: np.ndarray, k: int) -> np.ndarray:
    """sum_z p_z (rho_z / p_z)^(x)k."""
    weights = np.einsum("zaa->z", rho).real
    normalized = rho / weights[:, None, None]
    return np.einsum("z,zab->ab", weights, reduce(_batched_kron, [normalized] * k))


def check_derivative_identity(curve: Curve, lam: float, k: int, h: float = DEFAULT_STEP) -> BoundReport:
    """Compare d/dlambda sum_z p_z rho_hat_z^(x)k with its closed-form expansion.

    Both the left-hand side and the curve derivatives entering the right-hand side are central
    differences with step ``h``; the deviation is the largest entry of the difference.

    Raises:
        InvalidCurveError: If some p(lambda)_z <= 1e-12 at lambda or lambda +- h.
    """
    points = [np.asarray(curve(lam + offset), dtype=complex) for offset in (-h, 0.0, h)]
    for rho in points:
        if np.einsum("zaa->z", rho).real.min() <= CURVE_ZERO:
            raise InvalidCurveError(f"Curve has a vanishing trace near lambda={lam}")
    minus, center, plus = points

    lhs = (_normalized_power_sum(plus, k) - _normalized_power_sum(minus, k)) / (2 * h)

    derivative = (plus - minus) / (2 * h)
    weight_derivative = np.einsum("zaa->z", derivative).real
    normalized = center / np.einsum("zaa->z", center).real[:, None, None]
    rhs = np.zeros_like(lhs)
    for l in range(k):  # noqa: E741
        factors = [normalized] * l + [derivative] + [normalized] * (k - l - 1)
        rhs += reduce(_batched_kron, factors).sum(axis=0)
    rhs -= (k - 1) * np.einsum("z,zab->ab", weight_derivative, reduce(_batched_kron, [normalized] * k))

    deviation = float(np.max(np.abs(lhs - rhs)))
    scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    tolerance = max(1e-8, 1e2 * h * h * scale)
    return BoundReport.check("derivative", 0.0, deviation, tolerance, k=k, lam=lam, h=h)


def random_skew_hermitian(dim: int, rng: RngStream) -> np.ndarray:
    """Random skew-Hermitian matrix with spectral norm 1."""
    a = ginibre((dim, dim), rng)
    g = 0.5 * (a - a.conj().T)
    return g / np.linalg.norm(g, 2)


@dataclass(frozen=True)
class GradientProbe:
    """Point U on U(M) at which f_alpha(U) = Tr[X_alpha M^(k)_{UW}] and its gradient are evaluated.

    ``W`` is the standard embedding and ``basis`` a Hilbert-Schmidt orthonormal basis of
    Hermitian operators on (C^d_A)^(x)k.
    """

    U: HaarUnitary
    W: Isometry
    basis: OperatorBasis
    k: int

    def __post_init__(self) -> None:
        if self.U.dim != self.W.M:
            raise InvalidArgumentError(f"U is {self.U.dim}-dimensional but W has {self.W.M} rows")
        if self.W.M > GRADIENT_MAX_M:
            raise InvalidArgumentError(f"Gradient diagnostics are limited to M <= {GRADIENT_MAX_M}")
        if not np.allclose(self.W.matrix, np.eye(self.W.M, self.W.d_A)):
            raise InvalidArgumentError("W must be the standard embedding")
        if self.basis.dim != self.W.d_A**self.k:
            raise InvalidArgumentError(f"Basis acts on dimension {self.basis.dim}, expected {self.W.d_A}^{self.k}")
        if not np.allclose(self.basis.gram(), np.eye(len(self.basis)), atol=1e-10):
            raise InvalidArgumentError("Operator basis is not orthonormal")

    @classmethod
    def draw(cls, d_A: int, k: int, M: int, rng: RngStream) -> "GradientProbe":
        """Probe at a Haar-random U with the standard embedding and the Gell-Mann basis."""
        check_dimension(d_A, k)
        w = Isometry.standard_embedding(M, d_A)
        return cls(haar_unitary(M, rng), w, hermitian_operator_basis(d_A**k), k)

    @property
    def d_A(self) -> int:
        """Subsystem dimension."""
        return self.W.d_A

    @property
    def M(self) -> int:
        """Dimension of the unitary group's defining representation."""
        return self.W.M


def _moment_at(probe: GradientProbe, unitary: np.ndarray) -> np.ndarray:
    return moment_operator(row_ensemble(Isometry(unitary @ probe.W.matrix)), probe.k).op.entries


def f_alpha(probe: GradientProbe, alpha: int, unitary: np.ndarray | None = None) -> float:
    """Tr[X_alpha M^(k)] for the row ensemble of U W; ``unitary`` replaces ``probe.U`` when given."""
    matrix = probe.U.matrix if unitary is None else np.asarray(unitary)
    return float(np.einsum("ab,ba->", probe.basis.elements[alpha], _moment_at(probe, matrix)).real)


@dataclass(frozen=True)
class _GradientTerms:
    keep: np.ndarray
    rows: np.ndarray
    full_power: np.ndarray
    slot_operators: list[np.ndarray]


def _gradient_terms(probe: GradientProbe) -> _GradientTerms:
    """Per-outcome tensors shared by every alpha."""
    d, k = probe.d_A, probe.k
    v = probe.U.matrix @ probe.W.matrix
    weights = np.einsum("za,za->z", v, v.conj()).real
    keep = weights / d >= ZERO_PROBABILITY
    rows = v[keep]
    states = rows.conj() / np.sqrt(weights[keep])[:, None]
    projectors = np.einsum("na,nb->nab", states, states.conj())
    identity = np.broadcast_to(np.eye(d, dtype=complex), projectors.shape)
    slot_operators = []
    for l in range(k):  # noqa: E741
        factors = [projectors] * l + [identity] + [projectors] * (k - l - 1)
        slot_operators.append(reduce(_batched_kron, factors))
    full_power = reduce(_batched_kron, [projectors] * k)
    return _GradientTerms(keep, rows, full_power, slot_operators)


def _gradient(probe: GradientProbe, terms: _GradientTerms, x: np.ndarray) -> np.ndarray:
    d, k = probe.d_A, probe.k
    expectation = np.einsum("ab,nba->n", x, terms.full_power).real
    slot_sum = sum(partial_trace_all_but(x @ op, l + 1, d, k) for l, op in enumerate(terms.slot_operators)) / d
    c = slot_sum - (k - 1) * expectation[:, None, None] * np.eye(d) / d
    y = np.zeros((probe.M, probe.M), dtype=complex)
    y[terms.keep] = np.einsum("na,nab,cb->nc", terms.rows, c, probe.W.matrix.conj())
    u = probe.U.matrix
    return y - u @ y.conj().T @ u


def gradient_f_alpha(probe: GradientProbe, alpha: int) -> np.ndarray:
    """Gradient of f_alpha at U as a tangent vector of U(M).

    Built from B_{l,z} = Tr_{all but slot l+1}[X_alpha (R_z^(x)l (x) 1 (x) R_z^(x)(k-l-1))] / d_A for
    l = 0..k-1 and c_z = Tr[X_alpha R_z^(x)k], with R_z the member projectors of the row ensemble.
    The result G_f = Y - U Y^dagger U, with Y assembled row by row from these terms, satisfies
    Tr[G_f^dagger A U] = d/dt f_alpha(exp(tA) U) and Tr[G_f^dagger U A] = d/dt f_alpha(U exp(tA)) at t = 0
    for every skew-Hermitian A.
    """
    return _gradient(probe, _gradient_terms(probe), probe.basis.elements[alpha])


def check_directional_derivative(
    probe: GradientProbe, alpha: int, g: np.ndarray, h: float = DEFAULT_STEP
) -> BoundReport:
    """Compare Tr[grad^dagger G U] against a central difference of f_alpha along exp(tG) U."""
    u = probe.U.matrix
    analytic = float(np.einsum("ba,bc,ca->", gradient_f_alpha(probe, alpha).conj(), g, u).real)
    forward = f_alpha(probe, alpha, expm(h * g) @ u)
    backward = f_alpha(probe, alpha, expm(-h * g) @ u)
    numeric = (forward - backward) / (2 * h)
    return BoundReport.check(
        "directional_derivative", DIRECTIONAL_ATOL, abs(analytic - numeric), alpha=alpha, analytic=analytic
    )


def check_gradient_bound(probe: GradientProbe) -> BoundReport:
    """Largest Frobenius norm of the gradients over the operator basis, against 2(2k-1)/sqrt(d_A)."""
    terms = _gradient_terms(probe)
    norms = [float(np.linalg.norm(_gradient(probe, terms, x))) for x in probe.basis.elements]
    worst = int(np.argmax(norms))
    return BoundReport.check(
        "gradient_bound",
        lipschitz_bound(probe.d_A, probe.k),
        norms[worst],
        CHECK_ATOL,
        d_A=probe.d_A,
        k=probe.k,
        M=probe.M,
        alpha=worst,
    )


def check_continuity(state: BipartiteState, basis: MeasurementBasis, k: int) -> BoundReport:
    """Moment distance between ``state`` and its thermal companion, both measured in ``basis``.

    Raises:
        OutOfTheoremDomainError: If the reduced state is too far from maximally mixed.
        RankDeficiencyError: If the Schmidt rank is below d_A.
    """
    d_A = state.d_A
    delta = trace_distance(partial_trace(state), HermitianOperator.maximally_mixed(d_A))
    bound = continuity_bound(d_A, k, delta)
    companion = exact_thermal_companion(state)
    observed = trace_distance(
        moment_operator(projected_ensemble(state, basis), k).op,
        moment_operator(projected_ensemble(companion, basis), k).op,
    )
    return BoundReport.check("continuity", bound, observed, CHECK_ATOL, d_A=d_A, k=k, M=state.M, delta=delta)


def embed_local_unitary(u_A: HaarUnitary, M: int) -> HaarUnitary:
    """U_A acting on the first d_A basis vectors of C^M, identity elsewhere."""
    if u_A.dim > M:
        raise InvalidArgumentError(f"Cannot embed a {u_A.dim}-dimensional unitary into C^{M}")
    block = np.eye(M, dtype=complex)
    block[: u_A.dim, : u_A.dim] = u_A.matrix
    return HaarUnitary(block)


def check_covariance(u: HaarUnitary, u_A: HaarUnitary, k: int) -> BoundReport:
    """Moment of the row ensemble of U U_A-hat W against the U_A^dagger-rotated ensemble of U W."""
    d_A, M = u_A.dim, u.dim
    w = Isometry.standard_embedding(M, d_A).matrix
    shifted = row_ensemble(Isometry(u.matrix @ embed_local_unitary(u_A, M).matrix @ w))
    rotated = rotate_ensemble(row_ensemble(Isometry(u.matrix @ w)), u_A.matrix.conj().T)
    difference = moment_operator(shifted, k).op.entries - moment_operator(rotated, k).op.entries
    return BoundReport.check("covariance", COVARIANCE_ATOL, float(np.max(np.abs(difference))), d_A=d_A, k=k, M=M)


def check_expected_moment(
    d_A: int, k: int, M: int, n: int, rng: RngStream, bound: float | None = None
) -> BoundReport:
    """Trace-norm deviation of the average row-ensemble moment over ``n`` isometries from the Haar moment.

    The default bound is the Monte Carlo scale 4 d_A^k / sqrt(n).
    """
    dim = check_dimension(d_A, k)
    total = np.zeros((dim, dim), dtype=complex)
    for index in range(n):
        total += moment_operator(row_ensemble(haar_isometry(M, d_A, rng.child(index))), k).op.entries
    deviation = 2 * trace_distance(0.5 * (total + total.conj().T) / n, haar_moment_operator(d_A, k).op)
    limit = 4 * dim / math.sqrt(n) if bound is None else bound
    return BoundReport.check("expected_moment", limit, deviation, d_A=d_A, k=k, M=M, n=n)


def check_haar_moment(d: int, k: int, n: int, rng: RngStream, bound: float = 5e-2) -> BoundReport:
    """Trace-norm deviation of the average of n Haar-random |psi><psi|^(x)k from the closed form."""
    dim = check_dimension(d, k)
    vectors = ginibre((n, d), rng)
    states = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    powers = states
    for _ in range(k - 1):
        powers = (powers[:, :, None] * states[:, None, :]).reshape(n, -1)
    average = np.einsum("za,zb->ab", powers, powers.conj()) / n
    deviation = 2 * trace_distance(0.5 * (average + average.conj().T), haar_moment_operator(d, k).op)
    return BoundReport.check("haar_moment", bound, deviation, d=d, k=k, n=n, dim=dim)


class TailTask(NamedTuple):
    """Inputs of one tail trial; picklable so trials can run in worker processes."""

    seed: int
    path: tuple[int, ...]
    trial_index: int
    d_A: int
    k: int
    M: int
    delta: float
    threshold: float
    record_timing: bool


def tail_trial(task: TailTask) -> TrialRecord:
    """Draw one isometry (and reduced state when delta > 0) and record its design error."""
    start = time.perf_counter()
    stream = RngStream(task.seed, task.trial_index, task.path)
    v = haar_isometry(task.M, task.d_A, stream.child(0))
    if task.delta > 0.0:
        ensemble: StateEnsemble = deformed_row_ensemble(v, perturbed_density(task.d_A, task.delta, stream.child(1)))
    else:
        ensemble = row_ensemble(v)
    error = design_distance(ensemble, task.k)
    elapsed = (time.perf_counter() - start) * 1e3 if task.record_timing else 0.0
    return TrialRecord(
        trial_index=task.trial_index,
        stream_index=task.trial_index,
        d_A=task.d_A,
        k=task.k,
        M=task.M,
        delta=task.delta,
        design_error=error,
        threshold_used=task.threshold,
        exceeded=error > task.threshold,
        wall_time_ms=elapsed,
    )


class TailResult(NamedTuple):
    """Per-trial records, the bound report and the exceedance statistics of a tail run."""

    records: list[TrialRecord]
    report: BoundReport
    exceedance: ExceedanceSummary


def monte_carlo_tail(cfg: ExperimentConfig, rng: RngStream) -> TailResult:
    """Sample random isometries and count design errors above the guaranteed threshold.

    With ``delta = 0`` the threshold is eps'; with ``delta > 0`` every trial also draws a reduced
    state at distance ``delta`` from maximally mixed and the threshold is the theorem epsilon.
    Trial ``i`` draws from stream ``i``, so the records do not depend on ``cfg.workers``.

    Raises:
        InvalidArgumentError: If M < d_A or M is missing.
    """
    d_A, k, delta = cfg.d_A, cfg.k, cfg.delta
    if cfg.M is None or cfg.M < d_A:
        raise InvalidArgumentError(f"Tail experiment needs M >= d_A, got M={cfg.M}, d_A={d_A}")
    M = cfg.M
    check_dimension(d_A, k)
    threshold = theorem_epsilon(cfg.eps_prime, k, d_A, delta) if delta > 0 else cfg.eps_prime
    threshold_M = design_threshold_M(d_A, k, cfg.eps_prime, cfg.Delta)
    below = M < threshold_M
    if below:
        logger.warning(f"M={M} is below the guaranteed threshold {threshold_M}; the confidence check is skipped")
    logger.info(f"Running {cfg.n_trials} tail trials at d_A={d_A}, k={k}, M={M}, delta={delta}")

    tasks = [
        TailTask(rng.seed, rng.path, index, d_A, k, M, delta, threshold, config.model.record_timing)
        for index in range(cfg.n_trials)
    ]
    records = sorted(map_ordered(tail_trial, tasks, cfg.workers), key=lambda record: record.trial_index)

    exceedances = sum(record.exceeded for record in records)
    fraction = exceedances / len(records)
    low, high = wilson_interval(exceedances, len(records))
    tail = tail_bound(M, d_A, k, cfg.eps_prime)
    exceedance = ExceedanceSummary(
        trials=len(records),
        exceedances=exceedances,
        fraction=fraction,
        wilson_low=low,
        wilson_high=high,
        confidence=0.95,
        tail_bound=tail,
        Delta=cfg.Delta,
        threshold_M=threshold_M,
        below_threshold=below,
    )
    components = [BoundReport.check("tail_bound", min(1.0, tail) + 3 * (high - low) / 2, fraction)]
    if not below:
        components.append(BoundReport.check("confidence", cfg.Delta, high))
    report = BoundReport.combine(
        "tail",
        components,
        d_A=d_A,
        k=k,
        M=M,
        delta=delta,
        eps_prime=cfg.eps_prime,
        Delta=cfg.Delta,
        threshold=threshold,
    )
    return TailResult(records, report, exceedance)
