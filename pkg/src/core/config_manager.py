"""
Configuration Manager
Handles loading, validation, and management of experiment configuration
"""
import logging
import os
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

import yaml
from dotenv import load_dotenv

from .energy import (
    DEFAULT_BREAKPOINTS,
    ActivityLabel,
    EnergyAccuracyProfile,
    EnergyConfig,
)
from .errors import ConfigError, InfeasibleError
from .harvest import ClimateConfig, HarvestConfig, ScheduleTemplate
from .predictor import EnsembleParams, FeatureLayout

logger = logging.getLogger(__name__)

ENV_PREFIX = "ADAEM_"
ENV_SEPARATOR = "__"
POLICY_NAMES = ("adaem", "on-demand", "energy-neutral", "oracle")

_FLAT_LINE = re.compile(r'^\s*([A-Za-z_][\w]*)\.([A-Za-z_][\w]*)\s*=\s*(.*?)\s*$')
_ENV_REF = re.compile(r'\$\{([^}]+)\}')


@dataclass
class ProfileConfig:
    """Energy/accuracy breakpoints as [consumption_j, accuracy] pairs"""
    breakpoints: List[List[float]] = field(
        default_factory=lambda: [list(point) for point in DEFAULT_BREAKPOINTS]
    )


@dataclass
class PredictorConfig:
    """Tree ensemble hyperparameters and the robustness factor"""
    n_trees: int = 20
    max_depth: int = 6
    min_samples_leaf: int = 5
    recent: int = 3
    previous_days: int = 2
    robustness_k: float = 1.0
    seed: int = 0


@dataclass
class PlannerConfig:
    """Accuracy target and critical-activity handling"""
    a_min: float = 0.90
    critical_activities: List[str] = field(default_factory=lambda: ["exercise"])
    mask_threshold: float = 0.5
    history_days: int = 30


@dataclass
class SimulationConfig:
    """Experiment scale and policy selection"""
    users: int = 5
    days: int = 365
    training_days: int = 60
    seed: int = 0
    exercise_lengths: List[int] = field(default_factory=lambda: [6, 5, 4, 3, 2])
    on_demand_accuracy: Optional[float] = None
    ideal_predictions: bool = False
    jobs: int = 1
    policies: List[str] = field(default_factory=lambda: list(POLICY_NAMES))


@dataclass
class DebugConfig:
    """Debug and logging configuration"""
    log_level: str = "INFO"
    log_file: str = "log/adaem.log"


@dataclass
class AppConfig:
    """Main application configuration"""
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    harvest: HarvestConfig = field(default_factory=HarvestConfig)
    climate: ClimateConfig = field(default_factory=ClimateConfig)
    schedule: ScheduleTemplate = field(default_factory=ScheduleTemplate)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    debug: DebugConfig = field(default_factory=DebugConfig)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AppConfig':
        """Create AppConfig from a {section: {key: value}} dictionary"""
        data = data or {}
        sections = {f.name: f for f in fields(cls)}
        unknown = [name for name in data if name not in sections]
        if unknown:
            raise ConfigError("Unknown configuration section", key=unknown[0])

        built = {}
        for name, section_type in SECTION_TYPES.items():
            values = data.get(name) or {}
            if not isinstance(values, dict):
                raise ConfigError(f"section must be a mapping, got {type(values).__name__}", key=name)
            built[name] = _build_section(name, section_type, values)
        config = cls(**built)
        config.validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        """Convert AppConfig to dictionary"""
        result = {}
        for section in fields(self):
            values = asdict(getattr(self, section.name))
            result[section.name] = {key: _plain(value) for key, value in values.items()}
        return result

    @property
    def accuracy_profile(self) -> EnergyAccuracyProfile:
        return EnergyAccuracyProfile(tuple(tuple(point) for point in self.profile.breakpoints))

    @property
    def ensemble_params(self) -> EnsembleParams:
        p = self.predictor
        return EnsembleParams(
            n_trees=p.n_trees, max_depth=p.max_depth, min_samples_leaf=p.min_samples_leaf, seed=p.seed
        )

    @property
    def feature_layout(self) -> FeatureLayout:
        return FeatureLayout(
            recent=self.predictor.recent,
            previous_days=self.predictor.previous_days,
            intervals_per_day=self.schedule.intervals_per_day,
        )

    @property
    def critical_set(self) -> FrozenSet[ActivityLabel]:
        return frozenset(ActivityLabel.parse(name) for name in self.planner.critical_activities)

    @property
    def on_demand_accuracy(self) -> float:
        fixed = self.simulation.on_demand_accuracy
        return self.planner.a_min if fixed is None else fixed

    def validate(self) -> None:
        """Cross-section checks; raises ConfigError naming the key"""
        try:
            profile = self.accuracy_profile
        except ConfigError as e:
            raise ConfigError(str(e).split(": ", 1)[-1], key="profile.breakpoints")

        for key, value in (("planner.a_min", self.planner.a_min),
                           ("simulation.on_demand_accuracy", self.on_demand_accuracy)):
            try:
                profile.min_consumption_for(value)
            except InfeasibleError as e:
                raise ConfigError(str(e), key=key)

        try:
            self.critical_set
        except ValueError as e:
            raise ConfigError(str(e), key="planner.critical_activities")
        if not 0.0 < self.planner.mask_threshold <= 1.0:
            raise ConfigError(f"must be within (0, 1], got {self.planner.mask_threshold}",
                              key="planner.mask_threshold")
        if self.planner.history_days < 1:
            raise ConfigError(f"must be >= 1, got {self.planner.history_days}", key="planner.history_days")

        if self.predictor.robustness_k < 0:
            raise ConfigError(f"must be >= 0, got {self.predictor.robustness_k}", key="predictor.robustness_k")
        try:
            self.ensemble_params
        except ValueError as e:
            raise ConfigError(str(e), key="predictor")

        sim = self.simulation
        for key in ("users", "days", "jobs"):
            if getattr(sim, key) < 1:
                raise ConfigError(f"must be >= 1, got {getattr(sim, key)}", key=f"simulation.{key}")
        if sim.training_days < 0:
            raise ConfigError(f"must be >= 0, got {sim.training_days}", key="simulation.training_days")
        if not sim.exercise_lengths:
            raise ConfigError("needs at least one window length", key="simulation.exercise_lengths")
        unknown = [p for p in sim.policies if p not in POLICY_NAMES]
        if unknown:
            raise ConfigError(f"unknown policy {unknown[0]!r}, choose from {list(POLICY_NAMES)}",
                              key="simulation.policies")

        if self.energy.interval_seconds * self.schedule.intervals_per_day != 86400:
            raise ConfigError("intervals must tile one day exactly", key="energy.interval_seconds")
        if self.energy.horizon_intervals != self.schedule.intervals_per_day:
            raise ConfigError(
                f"must equal the {self.schedule.intervals_per_day} intervals of one day, "
                f"got {self.energy.horizon_intervals}",
                key="energy.horizon_intervals",
            )
        for length in sim.exercise_lengths:
            try:
                replace(self.schedule, exercise_length=int(length)).validate()
            except ConfigError as e:
                raise ConfigError(str(e), key="simulation.exercise_lengths")

    def template_for(self, user: int) -> ScheduleTemplate:
        """Daily routine of one user; exercise windows cycle through exercise_lengths"""
        lengths = self.simulation.exercise_lengths
        return replace(self.schedule, exercise_length=int(lengths[user % len(lengths)]))


SECTION_TYPES: Dict[str, type] = {
    "energy": EnergyConfig,
    "profile": ProfileConfig,
    "harvest": HarvestConfig,
    "climate": ClimateConfig,
    "schedule": ScheduleTemplate,
    "predictor": PredictorConfig,
    "planner": PlannerConfig,
    "simulation": SimulationConfig,
    "debug": DebugConfig,
}


def _build_section(name: str, section_type: type, values: Dict[str, Any]):
    known = {f.name for f in fields(section_type)}
    for key in values:
        if key not in known:
            raise ConfigError("unknown key", key=f"{name}.{key}")
    values = dict(values)
    if section_type is ScheduleTemplate and "weekend_days" in values:
        values["weekend_days"] = tuple(values["weekend_days"])
    try:
        section = section_type(**values)
        validate = getattr(section, "validate", None)
        if validate is not None:
            validate()
    except ConfigError as e:
        raise ConfigError(str(e).split(": ", 1)[-1], key=f"{name}.{e.key}" if e.key else name)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), key=name)
    return section


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


def parse_flat(text: str) -> Dict[str, Dict[str, Any]]:
    """
    Parse `section.key = value` lines (`#` starts a comment)

    Values go through YAML so numbers, booleans and lists keep their types.
    """
    data: Dict[str, Dict[str, Any]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        match = _FLAT_LINE.match(line)
        if not match:
            raise ConfigError(f"line {number}: expected 'section.key = value', got {raw.strip()!r}")
        section, key, value = match.groups()
        data.setdefault(section, {})[key] = _parse_scalar(value, f"{section}.{key}")
    return data


def _parse_scalar(value: str, key: str):
    try:
        return yaml.safe_load(value) if value else None
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse value {value!r}: {e}", key=key)


class ConfigManager:
    """Manages configuration loading, saving, and validation"""

    def __init__(self, config_path: Optional[str] = "config/config.yaml",
                 env_file: Optional[str] = ".env"):
        self.config_path = Path(config_path) if config_path else None
        self.config: Optional[AppConfig] = None
        if env_file and Path(env_file).exists():
            load_dotenv(env_file)

    def load_config(self) -> AppConfig:
        """Load configuration from file, environment overrides applied on top"""
        data: Dict[str, Any] = {}
        if self.config_path is not None:
            if self.config_path.exists():
                data = self._read(self.config_path)
            else:
                logger.info(f"No configuration at {self.config_path}, using defaults")
        data = self._resolve_config_values(data)
        data = self._apply_env_overrides(data)
        self.config = AppConfig.from_dict(data)
        return self.config

    def save_config(self, path: Optional[Path] = None) -> None:
        """Save current configuration as YAML"""
        if not self.config:
            raise ConfigError("No configuration to save")
        target = Path(path) if path else self.config_path
        if target is None:
            raise ConfigError("No configuration path given")
        target.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(target, 'w') as f:
                yaml.safe_dump(self.config.to_dict(), f, default_flow_style=False, indent=2, sort_keys=True)
        except OSError as e:
            raise ConfigError(f"Failed to save config to {target}: {e}")

    def get_config(self) -> AppConfig:
        """Get current configuration, loading if necessary"""
        if not self.config:
            return self.load_config()
        return self.config

    def update_config(self, section: str, **kwargs) -> AppConfig:
        """Return and keep a copy of the config with some keys of one section replaced"""
        config = self.get_config()
        data = config.to_dict()
        if section not in data:
            raise ConfigError("Unknown configuration section", key=section)
        for key, value in kwargs.items():
            if key not in data[section]:
                raise ConfigError("unknown key", key=f"{section}.{key}")
            data[section][key] = value
        self.config = AppConfig.from_dict(data)
        return self.config

    def _read(self, path: Path) -> Dict[str, Any]:
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"Failed to read config from {path}: {e}")

        if path.suffix.lower() in (".yaml", ".yml"):
            try:
                data = yaml.safe_load(text) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"Failed to parse {path}: {e}")
            if not isinstance(data, dict):
                raise ConfigError(f"{path} must contain a mapping of sections")
            return data
        return parse_flat(text)

    def _resolve_env_vars(self, value):
        """Replace ${VAR} references with environment values"""
        if not isinstance(value, str) or '${' not in value:
            return value

        def replace_var(match):
            var_name = match.group(1)
            if var_name not in os.environ:
                raise ConfigError(f"Environment variable {var_name} not set")
            return os.environ[var_name]

        resolved = _ENV_REF.sub(replace_var, value)
        # A whole-value reference takes the type of what it points at
        return yaml.safe_load(resolved) if _ENV_REF.fullmatch(value) else resolved

    def _resolve_config_values(self, obj):
        """Recursively resolve environment variables in configuration data"""
        if isinstance(obj, str):
            return self._resolve_env_vars(obj)
        if isinstance(obj, dict):
            return {key: self._resolve_config_values(value) for key, value in obj.items()}
        if isinstance(obj, list):
            return [self._resolve_config_values(item) for item in obj]
        return obj

    def _apply_env_overrides(self, data: Dict[str, Any]) -> Dict[str, Any]:
        """ADAEM_<SECTION>__<KEY>=value overrides file values"""
        merged = {section: dict(values or {}) for section, values in data.items()}
        for name, raw in sorted(os.environ.items()):
            if not name.startswith(ENV_PREFIX) or ENV_SEPARATOR not in name:
                continue
            section, _, key = name[len(ENV_PREFIX):].lower().partition(ENV_SEPARATOR)
            merged.setdefault(section, {})[key] = _parse_scalar(raw, f"{section}.{key}")
            logger.debug(f"Environment override {section}.{key}")
        return merged

    def validate_config(self) -> Tuple[bool, str]:
        """Validate configuration without raising"""
        try:
            config = self.config or self.load_config()
            config.validate()
        except ConfigError as e:
            return False, str(e)
        return True, "Configuration is valid"
