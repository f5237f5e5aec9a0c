"""
Configuration and run-manifest models for nls-lab experiments.
"""

import json
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from nls_lab.core.error_handling import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ExperimentName = Literal[
    "scattering-audit",
    "linear-decay",
    "soliton-stability",
    "model-problem",
    "modified-scattering",
    "boundstate-branch",
]
EXPERIMENTS: Tuple[str, ...] = (
    "scattering-audit",
    "linear-decay",
    "soliton-stability",
    "model-problem",
    "modified-scattering",
    "boundstate-branch",
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialConfig(_Section):
    family: Literal["gaussian_well", "sech2", "bump", "tabulated", "zero"] = "gaussian_well"
    depth: Optional[float] = Field(default=None, gt=0)
    width: Optional[float] = Field(default=None, gt=0)
    sign: Optional[Literal[-1, 1]] = None
    table_x: Optional[List[float]] = None
    table_v: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_table(self) -> "PotentialConfig":
        if self.family == "tabulated":
            if not self.table_x or not self.table_v or len(self.table_x) != len(self.table_v):
                raise ValueError("tabulated potential needs table_x and table_v of equal length")
        return self


class GridConfig(_Section):
    half_width: float = Field(default=100.0, gt=0)
    n_points: int = Field(default=2048, ge=64)

    @field_validator("n_points")
    @classmethod
    def _even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("n_points must be even")
        return value


class FrequencyConfig(_Section):
    band_limit: float = Field(default=8.0, gt=0)
    m_points: int = Field(default=512, ge=2)


class EvolutionSettings(_Section):
    dt: float = Field(default=0.02, gt=0)
    t_end: float = Field(default=200.0, gt=0)
    stride: int = Field(default=50, ge=1)
    nonlinearity_sign: Literal[-1, 0, 1] = 1
    quartic_prefactor: float = 0.5


class InitialDataConfig(_Section):
    """Soliton Q[z0] plus a Gaussian wavepacket of L2 norm epsilon."""

    soliton_z0_re: float = 0.08
    soliton_z0_im: float = 0.0
    epsilon: float = Field(default=0.05, ge=0, le=0.2)
    center: float = 0.0
    velocity: float = 0.8
    width: float = Field(default=8.0, gt=0)

    @model_validator(mode="after")
    def _check_soliton(self) -> "InitialDataConfig":
        if abs(complex(self.soliton_z0_re, self.soliton_z0_im)) > 0.2:
            raise ValueError("|z0| must not exceed 0.2")
        return self


class ModelConfig(_Section):
    """Localized coefficient profiles amplitude * exp(-(x/width)^2) of the model equation."""

    a1_amplitude: float = Field(default=0.01, ge=0, le=0.1)
    a2_amplitude: float = Field(default=0.01, ge=0, le=0.1)
    b_amplitude: float = Field(default=0.05, ge=0, le=0.3)
    width: float = Field(default=1.0, gt=0)
    phase_rate: float = -0.3


class AnalysisConfig(_Section):
    alpha: float = Field(default=0.1, gt=0, lt=1.0 / 3.0)
    fit_window: Tuple[float, float] = (50.0, 200.0)
    defect_window: Tuple[float, float] = (20.0, 200.0)
    dyadic_times: List[float] = Field(default_factory=lambda: [25.0, 50.0, 100.0])
    reference_k: float = 0.4
    cubic_band: Tuple[float, float] = (0.25, 0.6)
    far_field_time: float = Field(default=200.0, ge=20.0)
    cutoff: float = Field(default=0.5, gt=0)
    taper: float = Field(default=0.1, ge=0, le=1)
    branch_moduli: List[float] = Field(
        default_factory=lambda: [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625]
    )
    delta_max: float = Field(default=0.2, gt=0, le=0.2)

    @field_validator("fit_window", "defect_window", "cubic_band")
    @classmethod
    def _ordered(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not value[0] < value[1]:
            raise ValueError("interval must satisfy lo < hi")
        return value


class ExperimentConfig(_Section):
    experiment: ExperimentName
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    frequency: FrequencyConfig = Field(default_factory=FrequencyConfig)
    evolution: EvolutionSettings = Field(default_factory=EvolutionSettings)
    initial_data: InitialDataConfig = Field(default_factory=InitialDataConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    seed: int = 0
    threads: int = Field(default=1, ge=1)
    output_dir: str = "runs"
    compress_snapshots: bool = False

    @property
    def z0(self) -> complex:
        return complex(self.initial_data.soliton_z0_re, self.initial_data.soliton_z0_im)


# Overrides on top of the model defaults, per experiment.
EXPERIMENT_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "scattering-audit": {
        "grid": {"half_width": 40.0, "n_points": 4096},
    },
    "linear-decay": {
        "grid": {"half_width": 300.0, "n_points": 4096},
        "evolution": {"dt": 0.05, "t_end": 200.0, "stride": 20, "nonlinearity_sign": 0},
        "initial_data": {"soliton_z0_re": 0.0, "velocity": 0.0, "width": 6.0},
    },
    "soliton-stability": {
        "grid": {"half_width": 400.0, "n_points": 4096},
        "evolution": {"dt": 0.05, "t_end": 200.0, "stride": 40},
    },
    "model-problem": {
        "potential": {"family": "bump"},
        "grid": {"half_width": 400.0, "n_points": 4096},
        "evolution": {"dt": 0.05, "t_end": 200.0, "stride": 40},
        "initial_data": {"soliton_z0_re": 0.0},
    },
    "modified-scattering": {
        "grid": {"half_width": 400.0, "n_points": 4096},
        "evolution": {"dt": 0.05, "t_end": 200.0, "stride": 40},
        "initial_data": {"soliton_z0_re": 0.0},
    },
    "boundstate-branch": {
        "grid": {"half_width": 40.0, "n_points": 1024},
    },
}


def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _validate(document: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], tuple(first["loc"])) from e


def default_config(experiment: str, **overrides: Any) -> ExperimentConfig:
    """Config for ``experiment`` with its documented defaults filled in."""
    if experiment not in EXPERIMENT_DEFAULTS:
        raise ConfigError(f"unknown experiment '{experiment}'; choose from {', '.join(EXPERIMENTS)}",
                          ("experiment",))
    document = _deep_merge(EXPERIMENT_DEFAULTS[experiment], overrides)
    document["experiment"] = experiment
    return _validate(document)


def parse_config(text: str) -> ExperimentConfig:
    """
    Parse a TOML or JSON document (JSON if it starts with '{').

    Only ``experiment`` is required; everything else defaults per experiment.

    Raises:
        ConfigError: malformed document, unknown key, type mismatch or constraint violation
    """
    stripped = text.lstrip()
    try:
        if stripped.startswith("{"):
            document = json.loads(text)
        else:
            document = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"malformed config document: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError("config document must be a table of sections")
    experiment = document.get("experiment")
    if experiment is None:
        raise ConfigError("missing required key", ("experiment",))
    if experiment not in EXPERIMENT_DEFAULTS:
        raise ConfigError(f"unknown experiment '{experiment}'", ("experiment",))
    return _validate(_deep_merge(EXPERIMENT_DEFAULTS[experiment], document))


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical JSON (sorted keys) that parse_config turns back into an equal config."""
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return parse_config(text)


class CriterionResult(BaseModel):
    """One acceptance check with its measured value."""

    name: str
    passed: bool
    value: Optional[float] = None
    bound: Optional[str] = None
    detail: Optional[str] = None


class RunManifest(BaseModel):
    experiment: str
    config: Dict[str, Any]
    code_version: str
    started_at: datetime
    wall_clock_seconds: float = 0.0
    criteria: List[CriterionResult] = Field(default_factory=list)
    measurements: Dict[str, Any] = Field(default_factory=dict)
    artifacts: List[str] = Field(default_factory=list)
    failed_stage: Optional[str] = None
    error: Optional[str] = None

    @property
    def success(self) -> bool:
        return self.error is None and all(c.passed for c in self.criteria)

    def deterministic_view(self) -> Dict[str, Any]:
        """Manifest content without the wall-clock fields."""
        return self.model_dump(mode="json", exclude={"started_at", "wall_clock_seconds"})
