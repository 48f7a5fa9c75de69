import logging
import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Set, Tuple

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from pwinterp.errors import ConfigError, ConfigValidationError

logger = logging.getLogger(__name__)

COMMANDS = (
    "analyze-sequence",
    "density",
    "carleson-measure",
    "build-multiplier",
    "multiplier-probe",
    "build-family",
    "solve-interpolation",
    "norm-study",
    "mcphail-check",
    "control-solve",
    "control-simulate",
    "control-report",
)


@dataclass
class NumericSettings:
    """
    Tolerances and policy constants shared by the numerical modules.

    Each field can be overridden with an environment variable named
    PWINTERP_<FIELD_NAME_UPPERCASE>.
    """
    duplicate_tolerance: float = 1e-12
    quad_rtol: float = 1e-10
    quad_order: int = 16
    quad_initial_panels: int = 4
    quad_max_panels: int = 4096
    line_tail_fraction: float = 0.01
    line_initial_radius: float = 32.0
    line_max_radius: float = 65536.0
    pairing_rtol: float = 1e-6
    pairing_max_radius: float = 4096.0
    multiple_zero_threshold: float = 1e-10
    biorthogonality_tolerance: float = 1e-8
    underflow_floor: float = 1e-300
    # Calibrated on the {n + i} contrast pair; not derived from theory.
    mq_threshold: float = 10.0
    gram_digits: int = 40
    ridge_factor: float = 1e-12
    simulation_tolerance: float = 1e-8
    simulation_initial_panels: int = 8
    simulation_max_panels: int = 1024

    def to_dict(self) -> Dict[str, Any]:
        """Convert the settings to a dictionary."""
        return asdict(self)

    @classmethod
    def from_env(cls) -> "NumericSettings":
        """Build settings from defaults overridden by PWINTERP_* variables."""
        values: Dict[str, Any] = {}
        for field in fields(cls):
            raw = os.getenv(f"PWINTERP_{field.name.upper()}")
            if raw is None:
                continue
            try:
                values[field.name] = int(raw) if field.type in (int, "int") else float(raw)
            except ValueError:
                raise ConfigValidationError(
                    f"Environment override PWINTERP_{field.name.upper()}={raw!r} is not numeric"
                )
        return cls(**values)

    @property
    def ridge_condition_limit(self) -> float:
        """Condition number above which Gram systems are ridge-regularised.

        Four digits are kept in reserve, so float64 precision (16 digits)
        gives the classical 1e12 limit.
        """
        return 10.0 ** (self.gram_digits - 4)


# Global instance
_settings: Optional[NumericSettings] = None


def init_settings(env_file: Optional[Path] = None) -> NumericSettings:
    """Initialize and return the global NumericSettings instance.

    Args:
        env_file: Optional .env file loaded into the environment first.
    """
    global _settings
    if _settings is None:
        if env_file is not None:
            load_dotenv(env_file, override=False)
        _settings = NumericSettings.from_env()
        logger.debug(f"Numeric settings initialized: {_settings.to_dict()}")
    return _settings


def get_settings() -> NumericSettings:
    """Return the global settings, initializing them from the environment on first use."""
    if _settings is None:
        return init_settings()
    return _settings


def reload_settings() -> NumericSettings:
    """Re-read the environment overrides."""
    global _settings
    _settings = None
    return init_settings()


def _split_floats(value: Any) -> Any:
    if isinstance(value, str):
        parts = [part for part in value.replace(";", ",").split(",") if part.strip()]
        return [float(part) for part in parts]
    return value


class RunConfig(BaseModel):
    """One command-line run: the command, its inputs and scalar parameters."""

    model_config = ConfigDict(extra="forbid")

    command: str
    output_dir: Path = Path("out")
    seed: int = 0

    nodes_file: Optional[Path] = None
    generator: Optional[Literal["perturbed-integers", "shifted-integers", "imaginary-ladder"]] = None
    N: int = 50
    shift: float = 0.0
    shift_im: float = 0.0
    tail_offset: Optional[float] = None
    data_file: Optional[Path] = None
    weights_file: Optional[Path] = None
    family_manifest: Optional[Path] = None
    system_file: Optional[Path] = None
    x0_file: Optional[Path] = None
    x1_file: Optional[Path] = None
    signal_file: Optional[Path] = None

    p: float = 2.0
    q: Optional[float] = None
    tau: float = math.pi
    epsilon: float = 0.5
    a: float = 0.0
    side: Literal["upper", "lower"] = "upper"
    horizon: Optional[float] = None
    threshold: Optional[float] = None
    trials: int = 20
    r_grid: List[float] = [10.0, 20.0, 50.0, 100.0]
    offsets: List[float] = [-1.0, 0.0, 1.0]
    probe_radius: float = 50.0
    probe_height: float = 3.0
    probe_points: int = 201

    @field_validator("r_grid", "offsets", mode="before")
    @classmethod
    def _parse_lists(cls, value: Any) -> Any:
        return _split_floats(value)

    @field_validator("command")
    @classmethod
    def _known_command(cls, value: str) -> str:
        if value not in COMMANDS:
            raise ValueError(f"unknown command '{value}'")
        return value

    @field_validator("p", "q")
    @classmethod
    def _exponent_range(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not (1.0 < value < math.inf):
            raise ValueError("exponent must lie in (1, inf)")
        return value

    @field_validator("tau", "epsilon", "probe_radius")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @field_validator("horizon")
    @classmethod
    def _positive_horizon(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError("horizon must be positive")
        return value

    @field_validator("N", "trials", "probe_points")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("r_grid")
    @classmethod
    def _increasing_grid(cls, value: List[float]) -> List[float]:
        if not value or any(r <= 0 for r in value) or any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("r_grid must be positive and strictly increasing")
        return value

    @model_validator(mode="after")
    def _fill_conjugate(self) -> "RunConfig":
        if self.q is None:
            self.q = self.p / (self.p - 1.0)
        return self

    def input_files(self) -> Dict[str, Path]:
        """All file parameters that are set."""
        return {
            name: value
            for name, value in self.__dict__.items()
            if (name.endswith("_file") or name.endswith("_manifest")) and value is not None
        }


class ConfigLoader:
    """
    Loads flat `key = value` run configuration files.

    Bare file names are looked up in the config directory, which defaults to
    PWINTERP_CONFIG_DIR or project_root/conf.d. An `include = other.conf`
    line merges another file first; keys in the including file win.
    """

    INCLUDE_KEY = "include"

    def __init__(self, base_dir: Optional[Path] = None):
        if base_dir is None:
            env_dir = os.getenv("PWINTERP_CONFIG_DIR")
            if env_dir:
                base_dir = Path(env_dir).expanduser().resolve()
            else:
                # default to project_root/conf.d (parallel to pwinterp and tests)
                base_dir = Path(__file__).resolve().parent.parent / "conf.d"
        self.base_dir = base_dir

    def resolve(self, name: str | Path) -> Path:
        """Resolve a config name to an existing path."""
        path = Path(name).expanduser()
        if path.exists():
            return path.resolve()
        candidate = self.base_dir / path
        if candidate.exists():
            return candidate.resolve()
        raise ConfigError(f"Config file not found: {name} (searched ., {self.base_dir})")

    def load_values(self, path: Path, _seen: Optional[Set[Path]] = None) -> Dict[str, Tuple[str, Path]]:
        """Read key/value pairs with includes; each value remembers its defining file."""
        path = path.resolve()
        seen = set() if _seen is None else _seen
        if path in seen:
            raise ConfigError(f"Include cycle through {path}")
        seen.add(path)

        try:
            raw = dotenv_values(path, interpolate=False)
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}")

        merged: Dict[str, Tuple[str, Path]] = {}
        include = raw.pop(self.INCLUDE_KEY, None)
        if include:
            for item in include.split(","):
                include_path = (path.parent / item.strip()).resolve()
                if not include_path.exists():
                    raise ConfigError(f"Included config not found: {include_path}")
                merged.update(self.load_values(include_path, seen))
        for key, value in raw.items():
            if value is None:
                raise ConfigError(f"Key '{key}' in {path} has no value")
            merged[key] = (value, path)
        logger.debug(f"Loaded {len(raw)} keys from {path}")
        return merged

    def load(
        self,
        name: str | Path,
        overrides: Optional[Dict[str, str]] = None,
        check_files: bool = True,
    ) -> RunConfig:
        """Load, resolve paths and validate a run configuration.

        Raises:
            ConfigError: unreadable config, include problems, missing input files
            ConfigValidationError: a parameter outside its documented range
        """
        path = self.resolve(name)
        values = self.load_values(path)
        for key, value in (overrides or {}).items():
            values[key] = (value, Path.cwd() / "_override_")

        resolved: Dict[str, Any] = {}
        for key, (value, origin) in values.items():
            if key.endswith("_file") or key.endswith("_manifest"):
                file_path = Path(value).expanduser()
                if not file_path.is_absolute():
                    file_path = origin.parent / file_path
                resolved[key] = file_path
            else:
                resolved[key] = value
        if "output_dir" not in resolved and os.getenv("PWINTERP_OUTPUT_DIR"):
            resolved["output_dir"] = os.environ["PWINTERP_OUTPUT_DIR"]

        try:
            config = RunConfig.model_validate(resolved)
        except ValidationError as e:
            raise ConfigValidationError(f"Invalid configuration {path}: {e}")

        if check_files:
            for key, file_path in config.input_files().items():
                if not file_path.exists():
                    raise ConfigError(f"{key} does not exist: {file_path}")
        logger.info(f"Loaded run configuration '{config.command}' from {path}")
        return config
