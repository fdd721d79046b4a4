"""Config Provider.

Handles the user settings file, environment overrides and the declarative experiment
configuration read by the CLI.
"""

import tomllib
from enum import StrEnum
from pathlib import Path
from typing import Any, Literal

import pydantic_yaml
import typer
from loguru import logger
from platformdirs import PlatformDirs
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from design_lab.errors import InvalidArgumentError

config_app = typer.Typer(name="config", no_args_is_help=True, help="Configuration related commands.")
APP_NAME = "design_lab"
APP_AUTHOR = "design_lab"

DEFAULT_CAP = 4096
GRADIENT_MAX_M = 64


class ConfigModel(BaseSettings):
    """Application settings.

    BaseSettings uses the defaults if no values are provided, or no environment variables are set.
    ``DESIGN_LAB_CAP`` overrides the d^k dimension cap.
    """

    model_config = SettingsConfigDict(env_prefix=f"{APP_NAME}_", env_ignore_empty=True, env_file=".env")
    logs_dir: Path = PlatformDirs(APP_NAME, APP_AUTHOR).user_log_path
    log_level: str = "INFO"
    cap: int = Field(default=DEFAULT_CAP, ge=1)
    record_timing: bool = False


class Config:
    """Represents the design-lab user configuration."""

    model: ConfigModel

    def __init__(self) -> None:
        """Initialize the Config class."""
        self.config_file = PlatformDirs(APP_NAME, APP_AUTHOR).user_config_path / "config.yaml"
        self.model = ConfigModel()

    def init(self) -> None:
        """Create the settings file with defaults if needed, then load it."""
        if self.config_file.exists() is False:
            self.model = ConfigModel()
            self._save_config()
        self.model = self._load_config()

    def show(self) -> None:
        """Show the current configuration."""
        print("Current configuration:")
        print(f"Config file: {self.config_file}")
        print(pydantic_yaml.to_yaml_str(self.model))

    def _load_config(self) -> ConfigModel:
        """Load the config from the file; environment variables win over file values."""
        logger.debug(f"Loading configuration from {self.config_file}")
        file_values = pydantic_yaml.parse_yaml_file_as(dict[str, Any], self.config_file) or {}
        from_env = ConfigModel()
        env_values = {name: getattr(from_env, name) for name in from_env.model_fields_set}
        return ConfigModel(**{**file_values, **env_values})

    def _save_config(self) -> None:
        """Save the config to the file."""
        self.config_file.parent.mkdir(parents=True, exist_ok=True)
        self.config_file.write_text(pydantic_yaml.to_yaml_str(self.model))
        logger.debug(f"Config saved to: {self.config_file}")


config = Config()


@config_app.callback()
def config_callback():
    """Callback for config commands."""
    print("Initializing configuration")
    config.init()


@config_app.command()
def show():
    """Show the current configuration."""
    config.show()


class Experiment(StrEnum):
    """Experiment workflows dispatched by the harness."""

    LEMMA2_TAIL = "lemma2_tail"
    THEOREM1_ENDTOEND = "theorem1_endtoend"
    CONTINUITY_SWEEP = "continuity_sweep"
    GRADIENT_CHECK = "gradient_check"
    SCALING_SWEEP = "scaling_sweep"
    SPINCHAIN_DEMO = "spinchain_demo"
    ORACLE_CHECK = "oracle_check"


SITE_LABELS = "01+-y"
DEMO_SITE_STATE = "y"
DEFAULT_TIMES = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0]


class SpinChainConfig(BaseModel):
    """Mixed-field Ising chain used by the spin-chain demonstrator.

    ``initial_state`` is one character per site from ``0``, ``1``, ``+``, ``-``, ``y`` (the +1 eigenstate of
    sigma_y). Empty means ``|+y>`` on every site: a zero-energy product state for these couplings, so the
    quench heats the chain to infinite temperature and the kept spins approach maximal mixing.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_sites: int = Field(default=12, ge=2, le=12)
    J: float = 1.0
    h_x: float = 1.05
    h_z: float = 0.5
    boundary: Literal["open", "periodic"] = "open"
    cut: int = Field(default=1, ge=1, le=2)
    times: list[float] = Field(default_factory=lambda: list(DEFAULT_TIMES))
    initial_state: str = ""
    eps_prime_ref: float | None = Field(default=None, gt=0.0, lt=1.0)
    Delta: float = Field(default=0.1, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_chain(self) -> "SpinChainConfig":
        if self.cut >= self.n_sites:
            raise ValueError(f"cut={self.cut} must leave at least one site in the complement")
        if 2**self.n_sites > config.model.cap:
            raise ValueError(f"2^{self.n_sites} exceeds the dimension cap {config.model.cap}")
        if self.initial_state and len(self.initial_state) != self.n_sites:
            raise ValueError("initial_state needs exactly one character per site")
        if set(self.initial_state) - set(SITE_LABELS):
            raise ValueError(f"initial_state characters must be among {SITE_LABELS!r}")
        if not self.times or any(t < 0 for t in self.times):
            raise ValueError("times must be a nonempty list of nonnegative values")
        return self

    @property
    def d_A(self) -> int:
        """Dimension of the kept subsystem."""
        return 2**self.cut

    @property
    def M(self) -> int:
        """Dimension of the measured complement."""
        return 2 ** (self.n_sites - self.cut)

    @property
    def site_states(self) -> str:
        """Per-site initial state labels."""
        return self.initial_state or DEMO_SITE_STATE * self.n_sites


class ExperimentConfig(BaseModel):
    """Declarative description of one experiment run.

    Scalar parameters (``d_A``, ``k``, ``M``, ``delta``) are used unless the matching ``*_values``
    grid is given. ``workers`` and ``output_dir`` only affect execution and are not echoed.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: Experiment
    d_A: int = Field(default=2, ge=1)
    k: int = Field(default=2, ge=1)
    M: int | None = Field(default=None, ge=1)
    d_A_values: list[int] | None = None
    k_values: list[int] | None = None
    M_values: list[int] | None = None
    delta: float = Field(default=0.0, ge=0.0)
    delta_values: list[float] | None = None
    eps_prime: float = Field(default=0.3, gt=0.0, lt=1.0)
    Delta: float = Field(default=0.1, gt=0.0, lt=1.0)
    n_trials: int = Field(default=100, ge=1)
    n_random_bases: int = Field(default=50, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1, exclude=True)
    output_dir: Path = Field(default=Path("results"), exclude=True)
    spinchain: SpinChainConfig = Field(default_factory=SpinChainConfig)

    def grid_d_A(self) -> list[int]:
        """Subsystem dimensions covered by the run."""
        return list(self.d_A_values) if self.d_A_values else [self.d_A]

    def grid_k(self) -> list[int]:
        """Moment orders covered by the run."""
        return list(self.k_values) if self.k_values else [self.k]

    def grid_M(self) -> list[int]:
        """Complement dimensions covered by the run."""
        if self.M_values:
            return list(self.M_values)
        return [self.M] if self.M is not None else []

    def grid_delta(self, d_A: int) -> list[float]:
        """Perturbation strengths for one subsystem dimension.

        Defaults to ``{1e-4, 1e-2, 0.1 / (2 d_A)}`` for the continuity sweep.
        """
        if self.delta_values:
            return list(self.delta_values)
        if self.experiment is Experiment.CONTINUITY_SWEEP:
            return [1e-4, 1e-2, 0.1 / (2 * d_A)]
        return [self.delta]

    @model_validator(mode="after")
    def _check_preconditions(self) -> "ExperimentConfig":
        cap = config.model.cap
        for d_A in self.grid_d_A():
            if d_A < 1:
                raise ValueError("d_A must be positive")
            for k in self.grid_k():
                if k < 1:
                    raise ValueError("k must be positive")
                if d_A**k > cap:
                    raise ValueError(f"d_A^k = {d_A}^{k} exceeds the dimension cap {cap}")
            for delta in self.grid_delta(d_A):
                if not 0.0 <= delta < 1.0 / (2 * d_A):
                    raise ValueError(f"delta={delta} outside 0 <= delta < 1/(2 d_A) for d_A={d_A}")
                if d_A == 1 and delta > 0:
                    raise ValueError("delta > 0 is meaningless for d_A = 1")
            for M in self.grid_M():
                if M < d_A:
                    raise ValueError(f"M={M} is smaller than d_A={d_A}")

        needs_M = {
            Experiment.LEMMA2_TAIL,
            Experiment.THEOREM1_ENDTOEND,
            Experiment.CONTINUITY_SWEEP,
            Experiment.GRADIENT_CHECK,
            Experiment.SCALING_SWEEP,
        }
        if self.experiment in needs_M and not self.grid_M():
            raise ValueError(f"{self.experiment} needs M or M_values")
        single = {Experiment.LEMMA2_TAIL, Experiment.THEOREM1_ENDTOEND}
        if self.experiment in single and (self.M is None or self.M_values):
            raise ValueError(f"{self.experiment} runs at a single M; use scaling_sweep for a grid")
        if self.experiment is Experiment.SCALING_SWEEP and len(set(self.grid_M())) < 2:
            raise ValueError("scaling_sweep needs at least two distinct M_values")
        if self.experiment is Experiment.LEMMA2_TAIL and self.delta != 0.0:
            raise ValueError("lemma2_tail runs at delta = 0; use theorem1_endtoend for delta > 0")
        if self.experiment is Experiment.THEOREM1_ENDTOEND and self.delta <= 0.0:
            raise ValueError("theorem1_endtoend needs delta > 0")
        if self.experiment is Experiment.GRADIENT_CHECK and max(self.grid_M()) > GRADIENT_MAX_M:
            raise ValueError(f"gradient diagnostics are limited to M <= {GRADIENT_MAX_M}")
        return self


def read_config_file(path: Path) -> dict[str, Any]:
    """Read a declarative experiment file (``.toml``, ``.yaml`` or ``.yml``) into a dict.

    Raises:
        InvalidArgumentError: If the suffix is not supported.
        OSError: If the file cannot be read.
    """
    text = path.read_text()
    suffix = path.suffix.lower()
    if suffix == ".toml":
        return tomllib.loads(text)
    if suffix in {".yaml", ".yml"}:
        return pydantic_yaml.parse_yaml_raw_as(dict[str, Any], text) or {}
    raise InvalidArgumentError(f"Unsupported config file type '{path.suffix}' (use .toml or .yaml)")


def load_experiment_config(
    experiment: Experiment,
    defaults: dict[str, Any],
    path: Path | None = None,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Merge subcommand defaults, an optional config file and CLI overrides.

    Later sources win; ``None`` overrides are ignored.

    Raises:
        InvalidArgumentError: If the file names a different experiment.
        pydantic.ValidationError: If the merged values violate a precondition or contain unknown keys.
    """
    values: dict[str, Any] = {**defaults}
    if path is not None:
        file_values = read_config_file(path)
        named = file_values.pop("experiment", experiment.value)
        if named != experiment.value:
            raise InvalidArgumentError(f"Config file is for '{named}', not '{experiment.value}'")
        values.update(file_values)
        logger.debug(f"Loaded experiment values from {path}")
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    values["experiment"] = experiment
    return ExperimentConfig.model_validate(values)
