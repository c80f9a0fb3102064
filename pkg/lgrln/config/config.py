"""Configuration module for the summarization pipeline."""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from lgrln.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path("config/config.json")
DEFAULT_GRAPH_TAU = 2.5


class AggregationMode(str, Enum):
    """Neighbour weighting used by the graph layers."""

    BI_THRESHOLD = "bi_threshold"
    SUM = "sum"


class Branch(str, Enum):
    """Graph branches of the relational reasoning stack."""

    FORWARD = "forward"
    BACKWARD = "backward"
    UNDIRECTED = "undirected"


class LossMode(str, Enum):
    """Training objective."""

    BIASED = "biased"
    MEAN = "mean"


class KernelType(str, Enum):
    """Kernel used by temporal segmentation."""

    LINEAR = "linear"
    RBF = "rbf"


class _Section(BaseModel):
    """Base for config sections: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid")


class GraphConfig(_Section):
    """Configuration for temporal graph construction."""

    tau: float = Field(..., description="Edge threshold in seconds")

    @field_validator("tau")
    @classmethod
    def validate_tau(cls, v: float) -> float:
        """Reject non-positive thresholds."""
        if v <= 0:
            raise ValueError(f"graph.tau must be positive, got {v}")
        return v


class GbtConfig(_Section):
    """Configuration for the bi-threshold graph layers."""

    tau1: float = 0.5
    tau2: float = 0.9
    alpha1: float = 0.7
    alpha2: float = 0.3
    hidden_dim: int = 128
    n_layers: int = 2
    dropout_rate: float = 0.4
    time_embed_layers: List[int] = Field(default_factory=lambda: [0])
    max_positions: int = 2048
    aggregation: AggregationMode = AggregationMode.BI_THRESHOLD

    @model_validator(mode="after")
    def validate_ranges(self) -> "GbtConfig":
        """Check threshold ordering, weight ordering and layer indices."""
        if not -1.0 <= self.tau1 <= self.tau2 <= 1.0:
            raise ValueError(
                f"need -1 <= tau1 <= tau2 <= 1, got tau1={self.tau1}, tau2={self.tau2}"
            )
        if not self.alpha1 > self.alpha2 >= 0.0:
            raise ValueError(
                f"need alpha1 > alpha2 >= 0, got alpha1={self.alpha1}, alpha2={self.alpha2}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.hidden_dim < 1 or self.n_layers < 1 or self.max_positions < 1:
            raise ValueError("hidden_dim, n_layers and max_positions must be positive")
        bad = [i for i in self.time_embed_layers if not 0 <= i < self.n_layers]
        if bad:
            raise ValueError(f"time_embed_layers {bad} outside [0, {self.n_layers})")
        return self


class ModelConfig(_Section):
    """Configuration for the network topology."""

    branches: List[Branch] = Field(
        default_factory=lambda: [Branch.FORWARD, Branch.BACKWARD, Branch.UNDIRECTED]
    )

    @field_validator("branches")
    @classmethod
    def validate_branches(cls, v: List[Branch]) -> List[Branch]:
        """Require at least one branch, without repeats."""
        if not v:
            raise ValueError("model.branches must name at least one branch")
        if len(set(v)) != len(v):
            raise ValueError(f"model.branches has duplicates: {v}")
        return v


class LossConfig(_Section):
    """Configuration for the training objective."""

    mode: LossMode = LossMode.BIASED
    a: float = 0.02
    b: float = 0.16
    subset_size: int = 1
    eps: float = 1e-7

    @model_validator(mode="after")
    def validate_weights(self) -> "LossConfig":
        """Enforce 0 <= a < b < 1 and a positive subset size."""
        if not 0.0 <= self.a < self.b < 1.0:
            raise ValueError(f"need 0 <= a < b < 1, got a={self.a}, b={self.b}")
        if self.subset_size < 1:
            raise ValueError(f"subset_size must be >= 1, got {self.subset_size}")
        if not 0.0 < self.eps < 0.5:
            raise ValueError(f"loss.eps must be in (0, 0.5), got {self.eps}")
        return self


class SummaryConfig(_Section):
    """Configuration for segmentation and keyshot selection."""

    budget_ratio: float = 0.15
    max_changes: Optional[int] = None
    penalty_coeff: float = 1.0
    kernel: KernelType = KernelType.LINEAR
    rbf_gamma: Optional[float] = None
    use_dataset_change_points: bool = True

    @model_validator(mode="after")
    def validate_ranges(self) -> "SummaryConfig":
        """Check budget and penalty ranges."""
        if not 0.0 < self.budget_ratio <= 1.0:
            raise ValueError(f"budget_ratio must be in (0, 1], got {self.budget_ratio}")
        if self.max_changes is not None and self.max_changes < 0:
            raise ValueError(f"max_changes must be >= 0, got {self.max_changes}")
        if self.penalty_coeff < 0:
            raise ValueError(f"penalty_coeff must be >= 0, got {self.penalty_coeff}")
        return self


class TrainConfig(_Section):
    """Root configuration: optimizer, schedule and all sections."""

    epochs: int = 30
    learning_rate: float = 1e-3
    weight_decay: float = 0.01
    betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    folds: int = 5
    workers: int = 1

    graph: GraphConfig
    gbt: GbtConfig = Field(default_factory=GbtConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    summary: SummaryConfig = Field(default_factory=SummaryConfig)

    @model_validator(mode="after")
    def validate_schedule(self) -> "TrainConfig":
        """Check optimizer and cross-validation settings."""
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if not all(0.0 <= beta < 1.0 for beta in self.betas):
            raise ValueError(f"betas must lie in [0, 1), got {self.betas}")
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        return self

    @property
    def dropout_rate(self) -> float:
        """Dropout rate applied inside the graph layers."""
        return self.gbt.dropout_rate

    @property
    def tau(self) -> float:
        """Graph edge threshold in seconds."""
        return self.graph.tau

    @property
    def budget_ratio(self) -> float:
        """Summary length as a fraction of the video."""
        return self.summary.budget_ratio


def default_config(**overrides: Any) -> TrainConfig:
    """Build the shipped default configuration.

    Args:
        overrides: Flat dotted keys (``"loss.a"``) or nested sections

    Returns:
        Validated configuration
    """
    data: Dict[str, Any] = {"graph": {"tau": DEFAULT_GRAPH_TAU}}
    _merge(data, expand_dotted(overrides))
    return parse_config(data)


def expand_dotted(data: Dict[str, Any]) -> Dict[str, Any]:
    """Turn flat dotted keys into nested sections.

    ``{"loss.a": 0.1, "gbt": {"tau1": 0.2}}`` becomes
    ``{"loss": {"a": 0.1}, "gbt": {"tau1": 0.2}}``.
    """
    nested: Dict[str, Any] = {}
    for key, value in data.items():
        parts = key.split(".")
        target = nested
        for part in parts[:-1]:
            existing = target.setdefault(part, {})
            if not isinstance(existing, dict):
                raise ConfigurationError(f"Key {key!r} conflicts with scalar {part!r}")
            target = existing
        leaf = parts[-1]
        if isinstance(value, dict):
            existing = target.setdefault(leaf, {})
            if not isinstance(existing, dict):
                raise ConfigurationError(f"Key {key!r} conflicts with scalar {leaf!r}")
            _merge(existing, expand_dotted(value))
        else:
            target[leaf] = value
    return nested


def _merge(base: Dict[str, Any], extra: Dict[str, Any]) -> None:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


def parse_config(data: Dict[str, Any]) -> TrainConfig:
    """Validate a configuration mapping.

    Args:
        data: Nested or flat-dotted configuration mapping

    Returns:
        Validated configuration

    Raises:
        ConfigurationError: If a key is unknown or a value is out of range
    """
    try:
        return TrainConfig(**expand_dotted(data))
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigurationError(f"Invalid configuration: {problems}") from e


def load_config(config_path: Union[str, Path] = DEFAULT_CONFIG_PATH) -> TrainConfig:
    """Load configuration from a JSON file.

    A missing file is created with the shipped defaults.

    Args:
        config_path: Path to the configuration file

    Returns:
        Validated configuration
    """
    config_path = Path(config_path)
    try:
        with open(config_path, "r") as f:
            config_data = json.load(f)
    except FileNotFoundError:
        logger.warning(f"Config {config_path} not found, writing defaults")
        config = default_config()
        config_path.parent.mkdir(exist_ok=True, parents=True)
        with open(config_path, "w") as f:
            f.write(config.model_dump_json(indent=2))
        return config
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Config {config_path} is not valid JSON: {e}") from e

    if not isinstance(config_data, dict):
        raise ConfigurationError(f"Config {config_path} must hold a JSON object")
    config = parse_config(config_data)
    logger.info(f"Configuration loaded from {config_path}")
    return config
