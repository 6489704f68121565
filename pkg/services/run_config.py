"""
Run configuration module.

RunConfig and RunManifest schemas, loading of the JSON run file with
command-line overrides, the config digest naming each run directory and
per-stage timing.
"""

import hashlib
import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt, ValidationError, field_validator

from config import (
    BATCH_SIZE,
    DEFAULT_FRACTIONS,
    EPOCHS,
    HIDDEN_SIZES,
    JOBS,
    L2_PENALTY,
    LEARNING_RATE,
    OUTPUT_DIR,
    SEED,
    TEST_FRACTION,
    VERSION,
)
from services.attack import AttackConfig
from services.classifier import TrainConfig
from services.criteria import CRITERIA, CriteriaConfig, Criterion, ReferenceSpec, check_fractions
from services.errors import ConfigError, DataError
from services.methods import METHODS, ExplainerParams

logger = logging.getLogger(__name__)


class TrainParams(BaseModel):
    """Architecture, split and SGD settings for the train command."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    hidden_sizes: Tuple[PositiveInt, ...] = HIDDEN_SIZES
    test_fraction: float = Field(default=TEST_FRACTION, gt=0.0, lt=1.0)
    learning_rate: float = Field(default=LEARNING_RATE, gt=0.0)
    epochs: PositiveInt = EPOCHS
    batch_size: PositiveInt = BATCH_SIZE
    l2_penalty: float = Field(default=L2_PENALTY, ge=0.0)
    seed: Optional[int] = None

    def train_config(self, run_seed: int) -> TrainConfig:
        """TrainConfig, falling back to the run seed."""
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            l2_penalty=self.l2_penalty,
            seed=run_seed if self.seed is None else self.seed,
        )


class RunConfig(BaseModel):
    """Everything a train / evaluate / explain run depends on."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset_path: Optional[str] = None
    model_path: Optional[str] = None
    methods: Tuple[str, ...] = ("random", "grad")
    criteria: Tuple[Criterion, ...] = CRITERIA
    fractions: Tuple[float, ...] = DEFAULT_FRACTIONS
    seed: int = SEED
    num_examples: PositiveInt = 20
    jobs: PositiveInt = JOBS
    output_dir: str = OUTPUT_DIR
    target_class: Optional[NonNegativeInt] = None
    attack: AttackConfig = AttackConfig()
    explainer: ExplainerParams = ExplainerParams()
    train: TrainParams = TrainParams()
    reference: ReferenceSpec = ReferenceSpec()

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, methods):
        if not methods:
            raise ValueError("at least one method is required")
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown method(s) {', '.join(unknown)}; expected one of {', '.join(METHODS)}")
        return methods

    @field_validator("criteria")
    @classmethod
    def _some_criteria(cls, criteria):
        if not criteria:
            raise ValueError("at least one criterion is required")
        return criteria

    @field_validator("fractions")
    @classmethod
    def _valid_fractions(cls, fractions):
        check_fractions(fractions)
        return fractions

    def criteria_config(self) -> CriteriaConfig:
        return CriteriaConfig(fractions=self.fractions, target_class=self.target_class, attack_cfg=self.attack)

    def echo(self, portable: bool = False) -> Dict[str, Any]:
        """JSON-ready dump of the config; portable leaves out jobs and output_dir."""
        return self.model_dump(mode="json", exclude={"jobs", "output_dir"} if portable else None)

    def digest(self) -> str:
        """First 12 hex chars of SHA-256 over the canonical config without jobs and output_dir."""
        canonical = json.dumps(self.echo(portable=True), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def run_directory(self) -> Path:
        return Path(self.output_dir) / f"run-{self.digest()}"


class RunManifest(BaseModel):
    """Config echo, tool version, stage timings and diagnostics of one run."""

    model_config = ConfigDict(extra="forbid")

    command: str
    version: str = VERSION
    config: Dict[str, Any]
    stage_seconds: Dict[str, float] = {}
    diagnostics: Dict[str, int] = {}


def _set_dotted(target: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = target
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value


def validation_message(error: ValidationError) -> str:
    """One "field.path: message" line per problem."""
    lines = []
    for err in error.errors():
        location = ".".join(str(part) for part in err["loc"]) or "config"
        lines.append(f"{location}: {err['msg']}")
    return "\n".join(lines)


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Build a RunConfig from an optional JSON file and dotted-key overrides.

    Overrides whose value is None are ignored; the rest replace file values.

    Raises:
        ConfigError: unreadable file, bad JSON or schema violations
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"Error reading config {path}: {str(e)}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(raw, key, value)
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(validation_message(e)) from e


def require_file(path: Optional[str], what: str) -> Path:
    """Path of an input file that must already exist."""
    if not path:
        raise ConfigError(f"{what} is not set; pass it in the config file or as a flag")
    resolved = Path(path)
    if not resolved.is_file():
        raise DataError(f"{what} not found: {resolved}")
    return resolved


@contextmanager
def timed_stage(timings: Dict[str, float], name: str):
    """Record the wall-clock seconds of a stage under name."""
    logger.info(f"Stage {name} started")
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = round(time.perf_counter() - start, 6)
        logger.info(f"Stage {name} finished in {timings[name]:.2f}s")
