"""
Experiment configuration loading, validation and canonical serialization
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Union

from src.conditions import CONDITIONS
from src.errors import ConfigError
from src.models import ModelSpec

SUBCOMMANDS = ("generate", "skeleton", "conditions", "exponents", "tree-bm", "time-change", "inequalities")

INT_GRIDS = ("n_grid", "k_grid", "kprime_grid")
FLOAT_GRIDS = ("t_grid", "h_grid")

# Fields that change where or how fast a run happens but not what it computes
EXECUTION_FIELDS = ("workers", "out")

MAX_SEED = 2 ** 64 - 1


@dataclass
class ExperimentConfig:
    """
    One runner invocation

    Grids: n_grid (graph sizes), k_grid (mark counts), kprime_grid (fine
    mark counts for delta-density), t_grid (rescaled times, empty for the
    default grid) and h_grid (lattice steps as fractions of the shortest
    skeleton edge).
    """

    subcommand: str = "generate"
    model: ModelSpec = field(default_factory=ModelSpec)
    n_grid: List[int] = field(default_factory=lambda: [1000])
    k_grid: List[int] = field(default_factory=lambda: [3])
    kprime_grid: List[int] = field(default_factory=lambda: [4, 8, 16])
    t_grid: List[float] = field(default_factory=list)
    h_grid: List[float] = field(default_factory=lambda: [0.25, 0.125])
    delta: float = 0.5
    eps: float = 0.1
    conditions: List[str] = field(default_factory=lambda: ["S", "G", "V", "R"])
    replicas: int = 10
    steps: int = 10_000
    t_max: float = 1.0
    n_paths: int = 10_000
    bootstrap: int = 200
    seed: int = 0
    workers: int = 1
    out: str = "reports"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Raise ConfigError on the first invalid field"""
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"Unknown subcommand: {self.subcommand}. Choose from {SUBCOMMANDS}")
        if not isinstance(self.model, ModelSpec):
            raise ConfigError(f"model must be a ModelSpec, got {type(self.model).__name__}")
        for name in INT_GRIDS + FLOAT_GRIDS:
            values = getattr(self, name)
            if not isinstance(values, list):
                raise ConfigError(f"{name} must be a list, got {values!r}")
            if any(isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0 for v in values):
                raise ConfigError(f"{name} values must be positive numbers, got {values}")
            if name in INT_GRIDS and any(int(v) != v for v in values):
                raise ConfigError(f"{name} values must be integers, got {values}")
        if not self.n_grid or not self.k_grid:
            raise ConfigError("n_grid and k_grid must not be empty")
        if any(v >= 1 for v in self.h_grid):
            raise ConfigError(f"h_grid holds fractions of the shortest edge and must lie below 1, got {self.h_grid}")
        unknown = [c for c in self.conditions if c not in CONDITIONS]
        if unknown or not self.conditions:
            raise ConfigError(f"Unknown conditions {unknown}. Choose from {CONDITIONS}")
        if "dense" in self.conditions and (not self.kprime_grid or min(self.kprime_grid) < self.k_grid[0]):
            raise ConfigError(f"kprime_grid {self.kprime_grid} must not go below K={self.k_grid[0]}")
        for name in ("replicas", "steps", "n_paths", "bootstrap", "workers"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        for name in ("delta", "eps", "t_max"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if not isinstance(self.out, str) or not self.out:
            raise ConfigError(f"out must be a non-empty path, got {self.out!r}")

    # Serialization

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"Config must be a JSON object, got {type(data).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown config keys: {unknown}")

        values = dict(data)
        model = values.pop("model", {})
        if not isinstance(model, dict):
            raise ConfigError(f"model must be a JSON object, got {model!r}")
        model_keys = {f.name for f in fields(ModelSpec)}
        unknown = sorted(set(model) - model_keys)
        if unknown:
            raise ConfigError(f"Unknown model keys: {unknown}")
        try:
            values["model"] = ModelSpec(**model)
        except TypeError as exc:
            raise ConfigError(f"Invalid model: {exc}") from exc
        # floats stay floats so a dumped config reloads to the same bytes
        for name in FLOAT_GRIDS + ("delta", "eps", "t_max"):
            if name in values:
                values[name] = _as_float(name, values[name])
        return cls(**values)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["model"] = self.model.to_dict()
        return data

    def to_json(self, include_execution: bool = True) -> str:
        data = self.to_dict()
        if not include_execution:
            data = {k: v for k, v in data.items() if k not in EXECUTION_FIELDS}
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON without the execution-only fields"""
        return hashlib.sha256(self.to_json(include_execution=False).encode("utf-8")).hexdigest()

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with the non-None overrides applied; model fields go through model_*"""
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key.startswith("model_"):
                data["model"][key[len("model_"):]] = value
            else:
                data[key] = value
        return ExperimentConfig.from_dict(data)


def _as_float(name: str, value):
    if isinstance(value, list):
        return [_as_float(name, v) for v in value]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be numeric, got {value!r}")
    return float(value)


def load_config(path: Optional[Union[str, Path]] = None, subcommand: Optional[str] = None) -> ExperimentConfig:
    """
    Load an experiment config from JSON

    Args:
        path: JSON file; None gives the defaults
        subcommand: Overrides the file's subcommand

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: if the file is missing, not JSON or invalid
    """
    data: Dict = {}
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"Config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"Config must be a JSON object, got {type(data).__name__}")
    if subcommand is not None:
        data = {**data, "subcommand": subcommand}
    return ExperimentConfig.from_dict(data)
