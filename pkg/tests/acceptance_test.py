"""Monte Carlo acceptance runs at the published sizes (``pytest -m slow``)."""

import pytest

from design_lab.bounds import check_expected_moment, design_threshold_M, theorem_epsilon
from design_lab.config import Experiment, ExperimentConfig
from design_lab.harness import SUMMARY_FILE, TRIALS_FILE, run_experiment
from design_lab.sampling import RngStream

pytestmark = pytest.mark.slow


def _run(tmp_path, workers, **values):
    cfg = ExperimentConfig(**values, workers=workers, output_dir=tmp_path)
    return run_experiment(cfg)


def test_oracle_identities(tmp_path, workers):
    """1-designs, Haar moments, covariance, normalization, mixtures and path equivalence."""
    summary = _run(tmp_path, workers, experiment=Experiment.ORACLE_CHECK, n_trials=1000)
    assert summary.passed, summary.criteria


def test_expected_moment():
    """Averaged moments converge at the Monte Carlo rate."""
    assert check_expected_moment(2, 2, 64, 10_000, RngStream(11)).satisfied


def test_continuity_sweep(tmp_path, workers):
    """The continuity bound holds in every one of 10^4 trials and is never attained."""
    summary = _run(
        tmp_path,
        workers,
        experiment=Experiment.CONTINUITY_SWEEP,
        d_A_values=[2, 3],
        k_values=[1, 2, 3],
        M=16,
        n_trials=10_000,
    )
    assert summary.criteria == {"continuity_violations": True, "tightness": True}
    assert summary.details["max_tightness_ratio"] < 1.0


def test_gradient_check(tmp_path, workers):
    """Gradient norms, directional derivatives and the derivative identity over 200 probes."""
    summary = _run(
        tmp_path,
        workers,
        experiment=Experiment.GRADIENT_CHECK,
        d_A=2,
        k_values=[2, 3],
        M_values=[4, 8, 16],
        n_trials=200,
    )
    assert summary.passed, summary.criteria


def test_tail_at_threshold(tmp_path, workers):
    """Above the threshold the exceedance fraction stays below Delta."""
    assert design_threshold_M(2, 2, 0.3, 0.1) == 18459
    summary = _run(
        tmp_path,
        workers,
        experiment=Experiment.LEMMA2_TAIL,
        d_A=2,
        k=2,
        M=32768,
        eps_prime=0.3,
        Delta=0.1,
        n_trials=500,
    )
    assert summary.passed, summary.criteria
    assert summary.exceedance is not None
    assert summary.exceedance.wilson_high <= 0.1


def test_theorem_end_to_end(tmp_path, workers):
    """Near-maximally mixed reduced states inherit the guarantee with the theorem epsilon."""
    summary = _run(
        tmp_path,
        workers,
        experiment=Experiment.THEOREM1_ENDTOEND,
        d_A=2,
        k=2,
        M=32768,
        delta=1e-4,
        eps_prime=0.3,
        Delta=0.1,
        n_trials=200,
    )
    assert summary.passed, summary.criteria
    assert summary.report.context["threshold"] == pytest.approx(theorem_epsilon(0.3, 2, 2, 1e-4))
    assert summary.exceedance is not None
    assert summary.exceedance.fraction <= 0.1


def test_concentration_scaling(tmp_path, workers):
    """The median design error falls like M^(-1/2)."""
    summary = _run(
        tmp_path,
        workers,
        experiment=Experiment.SCALING_SWEEP,
        d_A=2,
        k=2,
        M_values=[2**6, 2**8, 2**10, 2**12, 2**14],
        n_trials=100,
    )
    assert summary.passed, summary.details
    assert summary.details["slope"] == pytest.approx(-0.5, abs=0.1)


def test_spinchain_demo(tmp_path, workers):
    """The chaotic chain mixes, random bases respect the ceiling and the computational error drops."""
    summary = _run(tmp_path, workers, experiment=Experiment.SPINCHAIN_DEMO, k=2, n_random_bases=50)
    assert summary.criteria == {
        "mixing": True,
        "ceiling_miss_rate": True,
        "random_q90": True,
        "computational_trend": True,
    }


@pytest.mark.parametrize(
    "values",
    [
        {"experiment": Experiment.LEMMA2_TAIL, "d_A": 2, "k": 2, "M": 1024, "n_trials": 64},
        {"experiment": Experiment.CONTINUITY_SWEEP, "d_A_values": [2, 3], "k_values": [2], "M": 16, "n_trials": 64},
        {"experiment": Experiment.GRADIENT_CHECK, "d_A": 2, "k_values": [2], "M_values": [4, 8], "n_trials": 16},
        {"experiment": Experiment.SCALING_SWEEP, "d_A": 2, "k": 2, "M_values": [64, 256], "n_trials": 32},
        {"experiment": Experiment.ORACLE_CHECK, "n_trials": 32},
        {"experiment": Experiment.THEOREM1_ENDTOEND, "d_A": 2, "k": 2, "M": 256, "delta": 1e-3, "n_trials": 16},
        {
            "experiment": Experiment.SPINCHAIN_DEMO,
            "k": 2,
            "n_random_bases": 4,
            "spinchain": {"n_sites": 6, "times": [0.0, 2.0]},
        },
    ],
)
def test_worker_count_does_not_change_outputs(tmp_path, values):
    """Byte-identical files for one and four workers."""
    run_experiment(ExperimentConfig(**values, workers=1, output_dir=tmp_path / "serial"))
    run_experiment(ExperimentConfig(**values, workers=4, output_dir=tmp_path / "parallel"))
    for name in (TRIALS_FILE, SUMMARY_FILE):
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "parallel" / name).read_bytes()
