"""
Energy Model
Domain types, battery dynamics, constraint checking and the inter-charge gap
objective shared by the planner, the baselines and the simulator
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, AbstractSet

import numpy as np

from .errors import ConfigError, InfeasibleError

logger = logging.getLogger(__name__)

# Tolerance for energy/accuracy comparisons
EPSILON = 1e-9


class ActivityLabel(Enum):
    """The five activity categories tracked on the device"""
    SLEEP = "sleep"
    WORK = "work"
    EXERCISE = "exercise"
    LEISURE = "leisure"
    OTHER = "other"

    @classmethod
    def parse(cls, value) -> 'ActivityLabel':
        """Accept labels, their values or their names in any case"""
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"Unknown activity label: {value!r}")

    @property
    def slot(self) -> int:
        """Position of the label in one-hot encodings"""
        return ACTIVITY_ORDER.index(self)


ACTIVITY_ORDER: Tuple[ActivityLabel, ...] = tuple(ActivityLabel)


@dataclass(frozen=True)
class MotionIntensities:
    """Relative motion intensity per activity (exercise = 1)"""
    work: float = 0.3
    leisure: float = 0.2

    def __post_init__(self):
        for key in ("work", "leisure"):
            value = getattr(self, key)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"intensity must be within [0, 1], got {value}", key=f"{key}_intensity")

    def of(self, label: ActivityLabel) -> float:
        if label is ActivityLabel.EXERCISE:
            return 1.0
        if label is ActivityLabel.SLEEP:
            return 0.0
        if label is ActivityLabel.WORK:
            return self.work
        if label is ActivityLabel.LEISURE:
            return self.leisure
        return 0.5


@dataclass(frozen=True)
class EnergyConfig:
    """Physical parameters of the battery and the decision horizon"""
    capacity_j: float = 160.0
    e_min_j: float = 16.0
    e_max_j: float = 160.0
    e_target_j: float = 96.0
    e_charge_per_interval_j: float = 30.0
    harvest_efficiency: float = 1.0
    horizon_intervals: int = 24
    interval_seconds: float = 3600.0

    def __post_init__(self):
        if self.e_min_j < 0:
            raise ConfigError(f"must be >= 0, got {self.e_min_j}", key="e_min_j")
        if not self.e_min_j < self.e_target_j:
            raise ConfigError(
                f"must exceed e_min_j ({self.e_min_j}), got {self.e_target_j}", key="e_target_j"
            )
        if not self.e_target_j <= self.e_max_j:
            raise ConfigError(
                f"must be >= e_target_j ({self.e_target_j}), got {self.e_max_j}", key="e_max_j"
            )
        if not self.e_max_j <= self.capacity_j:
            raise ConfigError(
                f"must be >= e_max_j ({self.e_max_j}), got {self.capacity_j}", key="capacity_j"
            )
        if self.e_charge_per_interval_j <= 0:
            raise ConfigError(
                f"must be > 0, got {self.e_charge_per_interval_j}", key="e_charge_per_interval_j"
            )
        if not 0.0 < self.harvest_efficiency <= 1.0:
            raise ConfigError(
                f"must be within (0, 1], got {self.harvest_efficiency}", key="harvest_efficiency"
            )
        if self.horizon_intervals < 1:
            raise ConfigError(f"must be >= 1, got {self.horizon_intervals}", key="horizon_intervals")
        if self.interval_seconds <= 0:
            raise ConfigError(f"must be > 0, got {self.interval_seconds}", key="interval_seconds")


@dataclass(frozen=True)
class BatteryState:
    """Battery energy at the start of an interval"""
    energy_j: float
    interval_index: int = 0

    def __post_init__(self):
        if self.energy_j < 0:
            raise ValueError(f"Battery energy cannot be negative: {self.energy_j}")


DEFAULT_BREAKPOINTS: Tuple[Tuple[float, float], ...] = (
    (1.0, 0.80),
    (2.0, 0.85),
    (3.0, 0.90),
    (4.0, 0.95),
)


@dataclass(frozen=True)
class EnergyAccuracyProfile:
    """
    Piecewise-linear map from per-interval consumption to application accuracy

    Breakpoints are (consumption_j, accuracy) pairs, strictly increasing in
    consumption and non-decreasing in accuracy.
    """
    breakpoints: Tuple[Tuple[float, float], ...] = DEFAULT_BREAKPOINTS

    def __post_init__(self):
        points = tuple((float(c), float(a)) for c, a in self.breakpoints)
        object.__setattr__(self, 'breakpoints', points)

        if not points:
            raise ConfigError("energy/accuracy profile needs at least one breakpoint", key="breakpoints")
        for consumption, accuracy in points:
            if consumption < 0:
                raise ConfigError(f"negative consumption {consumption}", key="breakpoints")
            if not 0.0 <= accuracy <= 1.0:
                raise ConfigError(f"accuracy {accuracy} outside [0, 1]", key="breakpoints")
        for (c0, a0), (c1, a1) in zip(points, points[1:]):
            if c1 <= c0:
                raise ConfigError("consumption must be strictly increasing", key="breakpoints")
            if a1 < a0:
                raise ConfigError("accuracy must not decrease with consumption", key="breakpoints")

    @property
    def consumptions(self) -> Tuple[float, ...]:
        return tuple(c for c, _ in self.breakpoints)

    @property
    def accuracies(self) -> Tuple[float, ...]:
        return tuple(a for _, a in self.breakpoints)

    @property
    def max_consumption_j(self) -> float:
        return self.breakpoints[-1][0]

    @property
    def max_accuracy(self) -> float:
        return self.breakpoints[-1][1]

    @property
    def floor_accuracy(self) -> float:
        return self.breakpoints[0][1]

    def accuracy_of(self, consumption_j: float) -> float:
        return accuracy_of(self, consumption_j)

    def min_consumption_for(self, a_min: float) -> float:
        return min_consumption_for(self, a_min)

    def levels_from(self, floor_j: float) -> Tuple[float, ...]:
        """Allowed consumption levels: the floor plus every breakpoint above it, ascending"""
        upper = [c for c in self.consumptions if c > floor_j + EPSILON]
        return (floor_j, *upper)

    def step_down(self, consumption_j: float, floor_j: float) -> float:
        """Next lower allowed level below consumption_j, never below floor_j"""
        lower = [c for c in self.consumptions if floor_j + EPSILON < c < consumption_j - EPSILON]
        return lower[-1] if lower else floor_j


def accuracy_of(profile: EnergyAccuracyProfile, consumption_j: float) -> float:
    """Interpolated accuracy; clamps to the end breakpoints outside their range"""
    if consumption_j < 0:
        raise ValueError(f"Consumption cannot be negative: {consumption_j}")
    if not profile.breakpoints:
        raise ConfigError("energy/accuracy profile is empty", key="breakpoints")
    return float(np.interp(consumption_j, profile.consumptions, profile.accuracies))


def min_consumption_for(profile: EnergyAccuracyProfile, a_min: float) -> float:
    """Smallest consumption whose interpolated accuracy reaches a_min"""
    if a_min > profile.max_accuracy + EPSILON:
        raise InfeasibleError(
            f"Accuracy {a_min:.3f} exceeds the profile maximum {profile.max_accuracy:.3f}"
        )

    points = profile.breakpoints
    for i, (consumption, accuracy) in enumerate(points):
        if accuracy >= a_min - EPSILON:
            if i == 0:
                return consumption
            c0, acc0 = points[i - 1]
            if accuracy - acc0 <= EPSILON:
                return consumption
            fraction = (a_min - acc0) / (accuracy - acc0)
            return c0 + min(1.0, max(0.0, fraction)) * (consumption - c0)

    return points[-1][0]


def battery_step(
    state: BatteryState,
    config: EnergyConfig,
    harvest_j: float,
    charging: bool,
    consumption_j: float,
) -> Tuple[BatteryState, float]:
    """
    Advance the battery by one interval

    Returns:
        (next state, overflow_j) where overflow_j is harvest/charge energy
        discarded because the battery hit e_max_j
    """
    if harvest_j < 0:
        raise ValueError(f"Harvested energy cannot be negative: {harvest_j}")
    if consumption_j < 0:
        raise ValueError(f"Consumption cannot be negative: {consumption_j}")

    raw = (
        state.energy_j
        + config.harvest_efficiency * harvest_j
        + (config.e_charge_per_interval_j if charging else 0.0)
        - consumption_j
    )
    overflow = max(0.0, raw - config.e_max_j)
    energy = min(max(raw, 0.0), config.e_max_j)
    return BatteryState(energy_j=energy, interval_index=state.interval_index + 1), overflow


def project_levels(
    initial_energy_j: float,
    config: EnergyConfig,
    harvest_j: Sequence[float],
    charge_flags: Sequence[bool],
    consumption_j: Sequence[float],
) -> Tuple[List[float], List[float]]:
    """
    Repeated battery_step without building state objects

    Returns:
        (levels, overflow) where levels[t] is the energy at the end of interval t
    """
    eta = config.harvest_efficiency
    charge = config.e_charge_per_interval_j
    e_max = config.e_max_j

    level = initial_energy_j
    levels: List[float] = []
    overflow: List[float] = []
    for harvest, flag, used in zip(harvest_j, charge_flags, consumption_j):
        raw = level + eta * harvest + (charge if flag else 0.0) - used
        overflow.append(raw - e_max if raw > e_max else 0.0)
        level = min(max(raw, 0.0), e_max)
        levels.append(level)
    return levels, overflow


def charging_session_starts(charge_flags: Iterable[bool]) -> List[int]:
    """Start indices of maximal runs of consecutive charging intervals"""
    starts = []
    previous = False
    for index, flag in enumerate(charge_flags):
        flag = bool(flag)
        if flag and not previous:
            starts.append(index)
        previous = flag
    return starts


def min_intercharge_gap(charge_flags: Sequence[bool], horizon: Optional[int] = None) -> int:
    """
    Minimum gap between consecutive charging-session starts

    With fewer than two sessions the gap is the horizon length.
    """
    horizon = len(charge_flags) if horizon is None else horizon
    starts = charging_session_starts(charge_flags)
    if len(starts) <= 1:
        return horizon
    return int(np.diff(starts).min())


@dataclass(frozen=True)
class ViolationReport:
    """Constraint violation counts for a plan or a realized day"""
    energy_floor_violations: int = 0
    accuracy_violations: int = 0
    critical_charging_violations: int = 0
    terminal_violation: bool = False

    @property
    def energy_violations(self) -> int:
        return self.energy_floor_violations + int(self.terminal_violation)

    @property
    def total(self) -> int:
        return self.energy_violations + self.accuracy_violations + self.critical_charging_violations

    @property
    def is_clean(self) -> bool:
        return self.total == 0

    def __add__(self, other: 'ViolationReport') -> 'ViolationReport':
        return ViolationReport(
            energy_floor_violations=self.energy_floor_violations + other.energy_floor_violations,
            accuracy_violations=self.accuracy_violations + other.accuracy_violations,
            critical_charging_violations=(
                self.critical_charging_violations + other.critical_charging_violations
            ),
            terminal_violation=self.terminal_violation or other.terminal_violation,
        )


@dataclass(frozen=True)
class Plan:
    """Charging flags, consumption and projected battery levels over a horizon"""
    charge_flags: Tuple[bool, ...]
    consumption_j: Tuple[float, ...]
    projected_battery_j: Tuple[float, ...]
    first_interval_index: int = 0
    feasible: bool = True
    violations: Optional[ViolationReport] = None
    iterations: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'charge_flags', tuple(bool(f) for f in self.charge_flags))
        object.__setattr__(self, 'consumption_j', tuple(float(c) for c in self.consumption_j))
        object.__setattr__(self, 'projected_battery_j', tuple(float(e) for e in self.projected_battery_j))

        lengths = {len(self.charge_flags), len(self.consumption_j), len(self.projected_battery_j)}
        if len(lengths) != 1:
            raise ValueError(
                "Plan vectors must have equal length, got "
                f"{len(self.charge_flags)}/{len(self.consumption_j)}/{len(self.projected_battery_j)}"
            )
        if any(c < 0 for c in self.consumption_j):
            raise ValueError("Plan consumption cannot be negative")

    @property
    def horizon(self) -> int:
        return len(self.charge_flags)

    @property
    def charging_intervals(self) -> int:
        return sum(self.charge_flags)

    @property
    def final_energy_j(self) -> float:
        return self.projected_battery_j[-1] if self.projected_battery_j else 0.0

    def min_gap(self) -> int:
        return min_intercharge_gap(self.charge_flags)


def critical_mask(
    activities: Sequence[ActivityLabel], critical_set: AbstractSet[ActivityLabel]
) -> Tuple[bool, ...]:
    return tuple(label in critical_set for label in activities)


def count_violations(
    plan: Plan,
    critical: Sequence[bool],
    profile: EnergyAccuracyProfile,
    a_min: float,
    config: EnergyConfig,
) -> ViolationReport:
    """Violation counts against a per-interval critical mask"""
    if len(critical) != plan.horizon:
        raise ValueError(f"Critical mask length {len(critical)} != plan horizon {plan.horizon}")

    floor = sum(1 for level in plan.projected_battery_j if level < config.e_min_j - EPSILON)
    accuracy = sum(
        1 for used in plan.consumption_j if profile.accuracy_of(used) < a_min - EPSILON
    )
    charging_on_critical = sum(
        1 for flag, is_critical in zip(plan.charge_flags, critical) if flag and is_critical
    )
    terminal = bool(plan.projected_battery_j) and plan.final_energy_j < config.e_target_j - EPSILON

    return ViolationReport(
        energy_floor_violations=floor,
        accuracy_violations=accuracy,
        critical_charging_violations=charging_on_critical,
        terminal_violation=terminal,
    )


def check_constraints(
    plan: Plan,
    activities: Sequence[ActivityLabel],
    profile: EnergyAccuracyProfile,
    a_min: float,
    critical_set: AbstractSet[ActivityLabel],
    config: EnergyConfig,
) -> ViolationReport:
    """Count battery, accuracy and critical-activity violations of a plan"""
    if len(activities) != plan.horizon:
        raise ValueError(f"Activity vector length {len(activities)} != plan horizon {plan.horizon}")
    return count_violations(plan, critical_mask(activities, critical_set), profile, a_min, config)
