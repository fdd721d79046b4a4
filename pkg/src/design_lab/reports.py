"""Result records, bound reports and the deterministic trial pool."""

import multiprocessing
from collections.abc import Callable, Iterable, Sequence
from typing import Any, TypeVar

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.stats import norm

from design_lab.config import ConfigModel, config

SCHEMA_VERSION = 1
DISTANCE_SLACK = 1e-9

TaskT = TypeVar("TaskT")
ResultT = TypeVar("ResultT")


class BoundReport(BaseModel):
    """Outcome of checking ``observed_value <= bound_value + tolerance``.

    A combined report carries its checks in ``components`` and mirrors the one with the least slack,
    so ``satisfied`` is always derivable from the stored numbers.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    bound_value: float
    observed_value: float
    tolerance: float = 0.0
    satisfied: bool
    margin: float
    context: dict[str, Any] = Field(default_factory=dict)
    components: list["BoundReport"] = Field(default_factory=list)

    @classmethod
    def check(
        cls, name: str, bound: float, observed: float, tolerance: float = 0.0, strict: bool = False, **context: Any
    ) -> "BoundReport":
        """Single inequality check; ``strict`` turns ``<=`` into ``<`` and is recorded in the context."""
        bound, observed = float(bound), float(observed)
        if strict:
            context = {**context, "strict": True}
        return cls(
            name=name,
            bound_value=bound,
            observed_value=observed,
            tolerance=tolerance,
            satisfied=observed < bound + tolerance if strict else observed <= bound + tolerance,
            margin=bound - observed,
            context=context,
        )

    @classmethod
    def combine(cls, name: str, components: Sequence["BoundReport"], **context: Any) -> "BoundReport":
        """Conjunction of several checks."""
        if not components:
            raise ValueError("combine needs at least one component")
        worst = min(components, key=lambda report: report.margin + report.tolerance)
        return cls(
            name=name,
            bound_value=worst.bound_value,
            observed_value=worst.observed_value,
            tolerance=worst.tolerance,
            satisfied=all(report.satisfied for report in components),
            margin=worst.margin,
            context=context,
            components=list(components),
        )


class TrialRecord(BaseModel):
    """Inputs and outcome of one Monte Carlo trial."""

    model_config = ConfigDict(frozen=True)

    trial_index: int
    stream_index: int
    d_A: int
    k: int
    M: int
    delta: float
    design_error: float
    threshold_used: float
    exceeded: bool
    wall_time_ms: float = 0.0

    @field_validator("design_error")
    @classmethod
    def _unit_interval(cls, value: float) -> float:
        if not -DISTANCE_SLACK <= value <= 1.0 + DISTANCE_SLACK:
            raise ValueError(f"design_error {value!r} outside [0, 1]")
        return min(max(value, 0.0), 1.0)


class ExceedanceSummary(BaseModel):
    """Empirical exceedance statistics of a tail experiment."""

    trials: int
    exceedances: int
    fraction: float
    wilson_low: float
    wilson_high: float
    confidence: float
    tail_bound: float
    Delta: float
    threshold_M: int
    below_threshold: bool


class RngMetadata(BaseModel):
    """Everything needed to regenerate the random draws of a run."""

    algorithm_id: str
    seed: int
    stream_layout: str


class SummaryReport(BaseModel):
    """Machine-readable summary written next to the trial CSV."""

    schema_version: int = SCHEMA_VERSION
    software_version: str
    experiment: str
    config: dict[str, Any]
    rng: RngMetadata
    report: BoundReport
    exceedance: ExceedanceSummary | None = None
    criteria: dict[str, bool]
    passed: bool
    details: dict[str, Any] = Field(default_factory=dict)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in 0..trials")
    z = float(norm.ppf(0.5 + confidence / 2))
    p = successes / trials
    z2 = z * z
    denominator = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denominator
    half = z * np.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denominator
    return (max(0.0, center - half), min(1.0, center + half))


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    slope, _ = np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float)), 1)
    return float(slope)


def _init_worker(settings: dict[str, Any]) -> None:
    """Install the parent's settings in a pool worker; spawned workers would otherwise reload them from disk."""
    config.model = ConfigModel(**settings)


def map_ordered(fn: Callable[[TaskT], ResultT], tasks: Iterable[TaskT], workers: int = 1) -> list[ResultT]:
    """Run independent tasks and return results in task order.

    With ``workers > 1`` tasks are spread over a process pool; the order of the returned list never
    depends on scheduling.
    """
    task_list = list(tasks)
    if workers <= 1 or len(task_list) <= 1:
        return [fn(task) for task in task_list]
    logger.debug(f"Dispatching {len(task_list)} tasks to {workers} workers")
    chunksize = max(1, len(task_list) // (4 * workers))
    with multiprocessing.Pool(workers, initializer=_init_worker, initargs=(config.model.model_dump(),)) as pool:
        return pool.map(fn, task_list, chunksize=chunksize)
