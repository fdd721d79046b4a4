"""Experiment dispatch and result files.

Every workflow returns trial records plus a :class:`~design_lab.reports.BoundReport` whose components
are the acceptance criteria of that experiment. :func:`run_experiment` writes ``trials.csv`` and
``summary.json`` (and ``timeslices.csv`` for the spin chain) into the output directory. The files
depend only on the configuration, the seed and the software version.
"""

import csv
import importlib.metadata
import math
from collections.abc import Callable, Sequence
from enum import StrEnum
from itertools import product
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
from loguru import logger
from pydantic import TypeAdapter

from design_lab.bounds import (
    GradientProbe,
    TailTask,
    canonical_curve,
    check_continuity,
    check_covariance,
    check_derivative_identity,
    check_directional_derivative,
    check_gradient_bound,
    check_haar_moment,
    check_mixture_inequality,
    check_normalization_lemma,
    lipschitz_bound,
    monte_carlo_tail,
    random_skew_hermitian,
    tail_trial,
)
from design_lab.config import Experiment, ExperimentConfig, config
from design_lab.ensembles import (
    MeasurementBasis,
    deformed_row_ensemble,
    density_sqrt,
    design_distance,
    moment_operator,
    projected_ensemble,
    row_ensemble,
)
from design_lab.errors import InvalidArgumentError
from design_lab.reports import (
    BoundReport,
    ExceedanceSummary,
    RngMetadata,
    SummaryReport,
    TrialRecord,
    fit_loglog_slope,
    map_ordered,
)
from design_lab.sampling import (
    ALGORITHM_ID,
    STREAM_LAYOUT,
    HaarUnitary,
    Isometry,
    RngStream,
    ginibre,
    haar_bipartite_state,
    haar_isometry,
    haar_unitary,
    perturbed_density,
    perturbed_thermal_state,
)
from design_lab.spinchain import TimeSlice, design_error_trace
from design_lab.tensor_core import BipartiteState, HermitianOperator, partial_trace, trace_distance

PACKAGE_NAME = "design-lab"
TRIALS_FILE = "trials.csv"
SUMMARY_FILE = "summary.json"
TIMESLICES_FILE = "timeslices.csv"
TRIAL_CSV_HEADER = (
    "trial_index",
    "stream_index",
    "d_A",
    "k",
    "M",
    "delta",
    "design_error",
    "threshold_used",
    "exceeded",
    "wall_time_ms",
)
TIMESLICE_CSV_HEADER = ("t", "basis", "delta", "design_error", "q10", "q90", "theorem_ceiling", "within_ceiling")

SPINCHAIN_MIXED_DELTA = 0.05
SPINCHAIN_HORIZON = 20.0
SPINCHAIN_MIN_WITHIN = 0.9
SPINCHAIN_Q90_CEILING = 0.35
SCALING_SLOPE = -0.5
SCALING_SLOPE_ATOL = 0.1
ONE_DESIGN_ATOL = 1e-10
PATH_ATOL = 1e-10
ORACLE_DIMENSIONS = (2, 3, 4)
ORACLE_COMPLEMENTS = (8, 16, 32, 64, 128, 256)
HAAR_MOMENT_SAMPLES = 100_000
COVARIANCE_DRAWS = 100
CURVE_LAMBDA = 0.3

_records_adapter = TypeAdapter(list[TrialRecord])


class RecordFormat(StrEnum):
    """Serialization of trial records."""

    CSV = "csv"
    JSON = "json"


class Outcome(NamedTuple):
    """What a workflow hands back to :func:`run_experiment`."""

    records: list[TrialRecord]
    report: BoundReport
    exceedance: ExceedanceSummary | None = None
    details: dict[str, Any] | None = None
    timeslices: list[TimeSlice] | None = None


def software_version() -> str:
    """Installed version of the package."""
    return importlib.metadata.version(PACKAGE_NAME)


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def emit_records(records: Sequence[TrialRecord], fmt: RecordFormat, path: Path) -> Path:
    """Write trial records as CSV (fixed header, 17 significant digits) or as a JSON array.

    Raises:
        InvalidArgumentError: If ``records`` is empty.
        OSError: If the file cannot be written.
    """
    if not records:
        raise InvalidArgumentError("No trial records to write")
    ordered = sorted(records, key=lambda record: record.trial_index)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt is RecordFormat.JSON:
        path.write_bytes(_records_adapter.dump_json(ordered, indent=2))
    else:
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(TRIAL_CSV_HEADER)
            for record in ordered:
                writer.writerow([_cell(getattr(record, column)) for column in TRIAL_CSV_HEADER])
    logger.debug(f"Wrote {len(ordered)} records to {path}")
    return path


def parse_records(path: Path) -> list[TrialRecord]:
    """Read records written by :func:`emit_records`; the format follows the file suffix.

    Raises:
        InvalidArgumentError: If a CSV header differs from the record schema.
    """
    if path.suffix.lower() == ".json":
        return _records_adapter.validate_json(path.read_bytes())
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != TRIAL_CSV_HEADER:
            raise InvalidArgumentError(f"Unexpected CSV header {reader.fieldnames}")
        return [TrialRecord.model_validate(row) for row in reader]


def _write_timeslices(slices: Sequence[TimeSlice], path: Path) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TIMESLICE_CSV_HEADER)
        for s in slices:
            ceiling = s.theorem_ceiling
            writer.writerow(
                [_cell(v) for v in (s.t, "computational", s.delta, s.design_error_comp, None, None, ceiling, None)]
            )
            writer.writerow(
                [_cell(v) for v in (s.t, "haar", s.delta, s.q50, s.q10, s.q90, ceiling, s.within_ceiling_fraction)]
            )


def _zero_count(name: str, failures: int, total: int, **context: Any) -> BoundReport:
    return BoundReport.check(name, 0.0, float(failures), total=total, **context)


def _record(
    index: int, d_A: int, k: int, M: int, delta: float, error: float, threshold: float, exceeded: bool
) -> TrialRecord:
    return TrialRecord(
        trial_index=index,
        stream_index=index,
        d_A=d_A,
        k=k,
        M=M,
        delta=delta,
        design_error=error,
        threshold_used=threshold,
        exceeded=exceeded,
    )


def _run_tail(cfg: ExperimentConfig) -> Outcome:
    result = monte_carlo_tail(cfg, RngStream(cfg.seed))
    return Outcome(result.records, result.report, result.exceedance)


class _ContinuityTask(NamedTuple):
    seed: int
    index: int
    d_A: int
    k: int
    M: int
    delta: float


class _ContinuityResult(NamedTuple):
    record: TrialRecord
    ratio: float


def _continuity_trial(task: _ContinuityTask) -> _ContinuityResult:
    stream = RngStream(task.seed, task.index)
    state = perturbed_thermal_state(task.d_A, task.M, task.delta, stream.child(0))
    basis = MeasurementBasis(haar_unitary(task.M, stream.child(1)))
    report = check_continuity(state, basis, task.k)
    ratio = report.observed_value / report.bound_value if report.bound_value > 0 else 0.0
    record = _record(
        task.index,
        task.d_A,
        task.k,
        task.M,
        task.delta,
        report.observed_value,
        report.bound_value,
        not report.satisfied,
    )
    return _ContinuityResult(record, ratio)


def _grid(cfg: ExperimentConfig) -> list[tuple[int, int, int, float]]:
    return [
        (d_A, k, M, delta)
        for d_A, k, M in product(cfg.grid_d_A(), cfg.grid_k(), cfg.grid_M())
        for delta in cfg.grid_delta(d_A)
    ]


def _run_continuity(cfg: ExperimentConfig) -> Outcome:
    grid = _grid(cfg)
    tasks = [_ContinuityTask(cfg.seed, i, *grid[i % len(grid)]) for i in range(cfg.n_trials)]
    results = map_ordered(_continuity_trial, tasks, cfg.workers)
    records = [result.record for result in results]
    violations = sum(record.exceeded for record in records)
    tightness = max(result.ratio for result in results)
    report = BoundReport.combine(
        "continuity_sweep",
        [
            _zero_count("continuity_violations", violations, len(records)),
            BoundReport.check("tightness", 1.0, tightness),
        ],
        grid_points=len(grid),
    )
    return Outcome(records, report, details={"max_tightness_ratio": tightness})


class _GradientTask(NamedTuple):
    seed: int
    index: int
    d_A: int
    k: int
    M: int


class _GradientResult(NamedTuple):
    record: TrialRecord
    gradient_norm: float
    directional: float
    derivative: float
    derivative_ok: bool


def _gradient_trial(task: _GradientTask) -> _GradientResult:
    stream = RngStream(task.seed, task.index)
    probe = GradientProbe.draw(task.d_A, task.k, task.M, stream.child(0))
    bound = check_gradient_bound(probe)
    alpha = int(stream.child(1).generator.integers(len(probe.basis)))
    generator = random_skew_hermitian(task.M, stream.child(2))
    directional = check_directional_derivative(probe, alpha, generator)
    curve = canonical_curve(haar_isometry(task.M, task.d_A, stream.child(3)), generator)
    derivative = check_derivative_identity(curve, CURVE_LAMBDA, task.k)
    error = design_distance(row_ensemble(Isometry(probe.U.matrix @ probe.W.matrix)), task.k)
    record = _record(task.index, task.d_A, task.k, task.M, 0.0, error, bound.bound_value, not bound.satisfied)
    return _GradientResult(
        record, bound.observed_value, directional.observed_value, derivative.observed_value, derivative.satisfied
    )


def _run_gradient(cfg: ExperimentConfig) -> Outcome:
    grid = list(product(cfg.grid_d_A(), cfg.grid_k(), cfg.grid_M()))
    tasks = [_GradientTask(cfg.seed, i, *grid[i % len(grid)]) for i in range(cfg.n_trials)]
    results = map_ordered(_gradient_trial, tasks, cfg.workers)
    records = [result.record for result in results]
    worst_norms: dict[tuple[int, int], float] = {}
    for result in results:
        key = (result.record.d_A, result.record.k)
        worst_norms[key] = max(worst_norms.get(key, 0.0), result.gradient_norm)
    report = BoundReport.combine(
        "gradient_check",
        [
            _zero_count("gradient_bound_violations", sum(r.exceeded for r in records), len(records)),
            BoundReport.check("directional_derivative", 1e-6, max(r.directional for r in results)),
            BoundReport.check("derivative_identity", 1e-7, max(r.derivative for r in results)),
            _zero_count("derivative_tolerance", sum(not r.derivative_ok for r in results), len(results)),
        ],
    )
    details = {
        f"d_A={d_A},k={k}": {"max_gradient_norm": norm, "lipschitz_bound": lipschitz_bound(d_A, k)}
        for (d_A, k), norm in worst_norms.items()
    }
    return Outcome(records, report, details=details)


def _run_scaling(cfg: ExperimentConfig) -> Outcome:
    d_A, k, n = cfg.d_A, cfg.k, cfg.n_trials
    timing = config.model.record_timing
    complements = cfg.grid_M()
    tasks = [
        TailTask(cfg.seed, (), j * n + i, d_A, k, M, 0.0, cfg.eps_prime, timing)
        for j, M in enumerate(complements)
        for i in range(n)
    ]
    records = map_ordered(tail_trial, tasks, cfg.workers)
    medians = [float(np.median([r.design_error for r in records if r.M == M])) for M in complements]
    slope = fit_loglog_slope(complements, medians)
    report = BoundReport.check("slope", SCALING_SLOPE_ATOL, abs(slope - SCALING_SLOPE), slope=slope)
    return Outcome(records, report, details={"M": complements, "median_design_error": medians, "slope": slope})


def _run_spinchain(cfg: ExperimentConfig) -> Outcome:
    chain = cfg.spinchain
    n = cfg.n_random_bases
    slices = design_error_trace(chain, cfg.k, n, RngStream(cfg.seed))
    records = []
    for i, s in enumerate(slices):
        threshold = s.theorem_ceiling if s.theorem_ceiling is not None else 1.0
        for b, error in enumerate(s.random_errors):
            records.append(_record(i * n + b, chain.d_A, cfg.k, chain.M, s.delta, error, threshold, error > threshold))

    horizon = [s for s in slices if s.t <= SPINCHAIN_HORIZON]
    late = [s for s in horizon if s.delta < SPINCHAIN_MIXED_DELTA and s.within_ceiling_fraction is not None]
    min_delta = min((s.delta for s in horizon), default=1.0)
    miss_rate = max((1.0 - (s.within_ceiling_fraction or 0.0) for s in late), default=1.0)
    q90 = max((s.q90 for s in late), default=1.0)
    report = BoundReport.combine(
        "spinchain_demo",
        [
            BoundReport.check("mixing", SPINCHAIN_MIXED_DELTA, min_delta, strict=True),
            BoundReport.check("ceiling_miss_rate", 1.0 - SPINCHAIN_MIN_WITHIN, miss_rate),
            BoundReport.check("random_q90", SPINCHAIN_Q90_CEILING, q90),
            BoundReport.check("computational_trend", slices[0].design_error_comp, slices[-1].design_error_comp),
        ],
        n_sites=chain.n_sites,
        d_A=chain.d_A,
        M=chain.M,
    )
    details = {"late_slices": [s.t for s in late], "delta": [s.delta for s in slices]}
    return Outcome(records, report, details=details, timeslices=slices)


class _OneDesignTask(NamedTuple):
    seed: int
    index: int


def _one_design_trial(task: _OneDesignTask) -> TrialRecord:
    d_A = ORACLE_DIMENSIONS[task.index % len(ORACLE_DIMENSIONS)]
    M = ORACLE_COMPLEMENTS[(task.index // len(ORACLE_DIMENSIONS)) % len(ORACLE_COMPLEMENTS)]
    ensemble = row_ensemble(haar_isometry(M, d_A, RngStream(task.seed, task.index)))
    error = trace_distance(HermitianOperator(ensemble.average_state()), HermitianOperator.maximally_mixed(d_A))
    return _record(task.index, d_A, 1, M, 0.0, error, ONE_DESIGN_ATOL / 2, 2 * error > ONE_DESIGN_ATOL)


def _random_density(d: int, rng: RngStream) -> np.ndarray:
    a = ginibre((d, d), rng)
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def _oracle_stream(seed: int, *path: int) -> RngStream:
    """Streams for the non-trial checks live below path (1, ...), apart from the trial streams."""
    return RngStream(seed, 0, (1, *path))


def _run_oracle(cfg: ExperimentConfig) -> Outcome:
    seed, n = cfg.seed, cfg.n_trials
    records = map_ordered(_one_design_trial, [_OneDesignTask(seed, i) for i in range(n)], cfg.workers)
    components = [_zero_count("one_design", sum(r.exceeded for r in records), len(records))]

    haar = [
        check_haar_moment(d, k, HAAR_MOMENT_SAMPLES, _oracle_stream(seed, 0, d, k)) for d in (2, 3) for k in (1, 2, 3)
    ]
    components.append(BoundReport.combine("haar_moment", haar))

    covariance = []
    for i in range(COVARIANCE_DRAWS):
        d_A = 2 + i % 2
        stream = _oracle_stream(seed, 1, i)
        covariance.append(check_covariance(haar_unitary(16, stream.child(0)), haar_unitary(d_A, stream.child(1)), 2))
    components.append(BoundReport.check("covariance", PATH_ATOL, max(r.observed_value for r in covariance)))

    path_deviation = 0.0
    normalization_failures = 0
    mixture_failures = 0
    for i in range(n):
        stream = _oracle_stream(seed, 2, i)
        d_A = 2 + i % 2
        delta = (0.01, 0.1)[(i // 2) % 2]
        v = haar_isometry(32, d_A, stream.child(0))
        rho_A = perturbed_density(d_A, delta, stream.child(1))
        normalization_failures += not check_normalization_lemma(v, rho_A).satisfied
        path_deviation = max(path_deviation, _path_deviation(v, rho_A, haar_unitary(32, stream.child(2))))
        mixture_failures += not _random_mixture_check(i, stream.child(3)).satisfied
    components.append(BoundReport.check("path_equivalence", PATH_ATOL, path_deviation))
    components.append(_zero_count("normalization", normalization_failures, n))
    components.append(_zero_count("mixture", mixture_failures, n))

    curve_reports = []
    for k in (1, 2, 3):
        stream = _oracle_stream(seed, 3, k)
        curve = canonical_curve(haar_isometry(6, 2, stream.child(0)), random_skew_hermitian(6, stream.child(1)))
        curve_reports.append(check_derivative_identity(curve, CURVE_LAMBDA, k))
    components.append(BoundReport.combine("derivative_identity", curve_reports))

    random_state = haar_bipartite_state(2, 1024, _oracle_stream(seed, 4))
    mixing = trace_distance(partial_trace(random_state), HermitianOperator.maximally_mixed(2))
    components.append(BoundReport.check("random_state_mixing", 0.25, mixing))

    report = BoundReport.combine("oracle_check", components)
    return Outcome(records, report, details={"random_state_delta": mixing})


def _path_deviation(v: Isometry, rho_A: HermitianOperator, u: HaarUnitary) -> float:
    """Largest entry difference between the explicit and the isometry construction of the same ensemble."""
    state = BipartiteState(density_sqrt(rho_A, v.d_A) @ v.matrix.conj().T)
    explicit = moment_operator(projected_ensemble(state, MeasurementBasis(u)), 2).op.entries
    rotated = moment_operator(deformed_row_ensemble(Isometry(u.matrix.T @ v.matrix), rho_A), 2).op.entries
    return float(np.max(np.abs(explicit - rotated)))


def _random_mixture_check(index: int, rng: RngStream) -> BoundReport:
    d = 2 + index % 2
    k = 1 + index % 3
    size = 3
    p = rng.child(0).generator.dirichlet(np.ones(size))
    r = rng.child(1).generator.dirichlet(np.ones(size))
    ens_a = [(float(w), _random_density(d, rng.child(2 + j))) for j, w in enumerate(p)]
    ens_b = [(float(w), _random_density(d, rng.child(2 + size + j))) for j, w in enumerate(r)]
    return check_mixture_inequality(ens_a, ens_b, k)


WORKFLOWS: dict[Experiment, Callable[[ExperimentConfig], Outcome]] = {
    Experiment.LEMMA2_TAIL: _run_tail,
    Experiment.THEOREM1_ENDTOEND: _run_tail,
    Experiment.CONTINUITY_SWEEP: _run_continuity,
    Experiment.GRADIENT_CHECK: _run_gradient,
    Experiment.SCALING_SWEEP: _run_scaling,
    Experiment.SPINCHAIN_DEMO: _run_spinchain,
    Experiment.ORACLE_CHECK: _run_oracle,
}


def _criteria(report: BoundReport) -> dict[str, bool]:
    if not report.components:
        return {report.name: report.satisfied}
    return {component.name: component.satisfied for component in report.components}


def _finite(value: Any) -> Any:
    """Replace non-finite floats, which JSON cannot carry, by None."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_finite(item) for item in value]
    return value


def run_experiment(cfg: ExperimentConfig) -> SummaryReport:
    """Run the configured workflow and write its result files into ``cfg.output_dir``.

    Raises:
        DesignLabError: If a precondition fails while the workflow runs.
        OSError: If the output files cannot be written.
    """
    logger.info(f"Running {cfg.experiment} with seed {cfg.seed} on {cfg.workers} worker(s)")
    outcome = WORKFLOWS[cfg.experiment](cfg)
    records = sorted(outcome.records, key=lambda record: record.trial_index)
    criteria = _criteria(outcome.report)
    summary = SummaryReport(
        software_version=software_version(),
        experiment=cfg.experiment.value,
        config=cfg.model_dump(mode="json"),
        rng=RngMetadata(algorithm_id=ALGORITHM_ID, seed=cfg.seed, stream_layout=STREAM_LAYOUT),
        report=outcome.report,
        exceedance=outcome.exceedance,
        criteria=criteria,
        passed=all(criteria.values()),
        details=_finite(outcome.details or {}),
    )

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    emit_records(records, RecordFormat.CSV, out / TRIALS_FILE)
    (out / SUMMARY_FILE).write_text(summary.model_dump_json(indent=2) + "\n")
    if outcome.timeslices is not None:
        _write_timeslices(outcome.timeslices, out / TIMESLICES_FILE)
    level = "INFO" if summary.passed else "WARNING"
    logger.log(level, f"{cfg.experiment}: {'passed' if summary.passed else 'criteria violated'} -> {out}")
    return summary
