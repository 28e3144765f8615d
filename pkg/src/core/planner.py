"""
Charging Planner
The adaptive charging-optimization loop, rolling-horizon replanning and the
expected critical-activity mask
"""
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import AbstractSet, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .energy import (
    EPSILON,
    ActivityLabel,
    BatteryState,
    EnergyAccuracyProfile,
    EnergyConfig,
    Plan,
    count_violations,
    min_intercharge_gap,
    project_levels,
)
from .errors import TraceFormatError
from .harvest import ActivitySchedule

logger = logging.getLogger(__name__)

DEFAULT_CRITICAL = frozenset({ActivityLabel.EXERCISE})
PLAN_COLUMNS = ["interval", "charge", "consumption_j", "projected_battery_j"]


@dataclass(frozen=True)
class PlanningProblem:
    """One instance of the charging optimization over the remaining horizon"""
    predictions_j: Tuple[float, ...]
    initial_state: BatteryState
    config: EnergyConfig
    profile: EnergyAccuracyProfile
    a_min: float
    critical_mask: Tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, 'predictions_j', tuple(float(p) for p in self.predictions_j))
        object.__setattr__(self, 'critical_mask', tuple(bool(c) for c in self.critical_mask))
        if not self.predictions_j:
            raise ValueError("Planning horizon must contain at least one interval")
        if len(self.critical_mask) != len(self.predictions_j):
            raise ValueError(
                f"Critical mask length {len(self.critical_mask)} != horizon {len(self.predictions_j)}"
            )
        if any(p < 0 for p in self.predictions_j):
            raise ValueError("Harvest predictions cannot be negative")
        # Raises InfeasibleError when the accuracy target is out of reach
        self.profile.min_consumption_for(self.a_min)

    @property
    def horizon(self) -> int:
        return len(self.predictions_j)

    @property
    def first_interval_index(self) -> int:
        return self.initial_state.interval_index


class ChargeSearch:
    """
    Charging assignments for a fixed consumption schedule

    Assignments are enumerated in lexicographic order. A branch is cut as
    soon as its uncharged prefix drops below the requirement. Intervals in
    `fixed` are charged in every assignment.
    """

    def __init__(self, harvest: Sequence[float], config: EnergyConfig, consumption: Sequence[float],
                 blocked: Sequence[bool], initial_j: float, fixed: Optional[Sequence[bool]] = None):
        self.harvest = [float(h) for h in harvest]
        self.config = config
        self.consumption = [float(c) for c in consumption]
        self.horizon = len(self.harvest)
        self.fixed = [bool(f) for f in fixed] if fixed is not None else [False] * self.horizon
        self.blocked = [bool(b) or f for b, f in zip(blocked, self.fixed)]
        self.initial_j = initial_j
        self.required = [config.e_min_j] * (self.horizon - 1) + [config.e_target_j]

    def step(self, level: float, t: int, charging: bool) -> float:
        config = self.config
        raw = (
            level
            + config.harvest_efficiency * self.harvest[t]
            + (config.e_charge_per_interval_j if charging or self.fixed[t] else 0.0)
            - self.consumption[t]
        )
        return min(max(raw, 0.0), config.e_max_j)

    def free(self) -> List[int]:
        return [t for t in range(self.horizon) if not self.blocked[t]]

    def flags_for(self, assignment: Sequence[int]) -> List[bool]:
        chosen = set(assignment)
        return [self.fixed[t] or t in chosen for t in range(self.horizon)]

    def feasible(self, flags: Sequence[bool], consumption: Optional[Sequence[float]] = None) -> bool:
        levels, _ = project_levels(
            self.initial_j, self.config, self.harvest, flags,
            self.consumption if consumption is None else consumption,
        )
        return all(level >= need - EPSILON for level, need in zip(levels, self.required))

    def lower_bound(self) -> int:
        """Additional charging intervals needed ignoring the e_max clamp"""
        config = self.config
        missing = (
            config.e_target_j
            + sum(self.consumption)
            - self.initial_j
            - config.harvest_efficiency * sum(self.harvest)
            - config.e_charge_per_interval_j * sum(self.fixed)
        )
        return max(0, math.ceil(missing / config.e_charge_per_interval_j - EPSILON))

    def assignments(self, count: int) -> Iterator[Tuple[int, ...]]:
        """Feasible sets of `count` charging intervals, lexicographic order"""
        yield from self._extend(0, self.initial_j, count, ())

    def _extend(self, start: int, level: float, remaining: int,
                chosen: Tuple[int, ...]) -> Iterator[Tuple[int, ...]]:
        if remaining == 0:
            for t in range(start, self.horizon):
                level = self.step(level, t, False)
                if level < self.required[t] - EPSILON:
                    return
            yield chosen
            return

        walk = level
        for p in range(start, self.horizon - remaining + 1):
            if not self.blocked[p]:
                charged = self.step(walk, p, True)
                if charged >= self.required[p] - EPSILON:
                    yield from self._extend(p + 1, charged, remaining - 1, chosen + (p,))
            walk = self.step(walk, p, False)
            if walk < self.required[p] - EPSILON:
                # Every later first-charge leaves interval p uncharged too
                return

    def single_run(self, count: int, latest: bool = False) -> Optional[Tuple[int, ...]]:
        """Earliest (or latest) feasible block of `count` consecutive free intervals"""
        starts = range(self.horizon - count + 1)
        for start in (reversed(starts) if latest else starts):
            run = tuple(range(start, start + count))
            if all(not self.blocked[t] for t in run) and self.feasible(self.flags_for(run)):
                return run
        return None

    def widest(self, count: int, prefer_latest: bool = False) -> Optional[Tuple[int, ...]]:
        """
        Feasible assignment of `count` intervals with the largest minimum gap
        between charging sessions

        Ties go to the lexicographically earliest assignment, or the latest
        with prefer_latest.
        """
        if not any(self.fixed):
            run = self.single_run(count, prefer_latest)
            if run is not None:
                return run
        best: Optional[Tuple[int, ...]] = None
        best_gap = -1
        for assignment in self.assignments(count):
            gap = min_intercharge_gap(self.flags_for(assignment), self.horizon)
            if gap > best_gap or (prefer_latest and gap == best_gap):
                best, best_gap = assignment, gap
                if gap >= self.horizon and not prefer_latest:
                    break
        return best


class _Projection:
    """Mutable working state of one planning run"""

    def __init__(self, problem: PlanningProblem):
        self.problem = problem
        horizon = problem.horizon
        config = problem.config
        self.flags = [False] * horizon
        self.consumption = [problem.profile.max_consumption_j] * horizon
        self.required = [config.e_min_j] * (horizon - 1) + [config.e_target_j]
        self.levels: List[float] = []
        self.refresh()

    def refresh(self) -> None:
        self.levels, _ = project_levels(
            self.problem.initial_state.energy_j,
            self.problem.config,
            self.problem.predictions_j,
            self.flags,
            self.consumption,
        )

    def short(self, t: int) -> bool:
        return self.levels[t] < self.required[t] - EPSILON

    def first_violation(self, start: int = 0) -> Optional[int]:
        for t in range(start, len(self.levels)):
            if self.short(t):
                return t
        return None

    def free(self, t: int) -> bool:
        return not self.flags[t] and not self.problem.critical_mask[t]


def _reduce_consumption(work: _Projection, violation: int, floor_j: float) -> None:
    """
    Step consumption down one breakpoint at a time, highest consumption first
    (earliest on ties), on intervals up to the violation until it is resolved
    """
    profile = work.problem.profile
    absorbed = set()
    while work.short(violation):
        eligible = [
            t for t in range(violation + 1)
            if work.consumption[t] > floor_j + EPSILON and t not in absorbed
        ]
        if not eligible:
            return
        target = max(eligible, key=lambda t: (work.consumption[t], -t))
        before = work.levels[violation]
        previous = work.consumption[target]
        work.consumption[target] = profile.step_down(previous, floor_j)
        work.refresh()
        if work.levels[violation] <= before + EPSILON:
            # A full battery between target and the violation swallows the saving
            work.consumption[target] = previous
            work.refresh()
            absorbed.add(target)


def _schedule_charging(work: _Projection, violation: int, floor_j: float) -> None:
    """
    Charge for at least ceil(deficit / E_I) intervals outside critical
    activities

    Placements are checked with consumption at the floor; later violations
    are then met by reducing consumption. The smallest count that makes the
    whole horizon feasible is placed as one block of consecutive intervals,
    the latest one that works. When critical intervals leave no such block
    the sessions are spread as far apart as possible.
    """
    problem = work.problem
    config = problem.config
    consumption = [floor_j] * problem.horizon
    search = ChargeSearch(
        problem.predictions_j, config, consumption, problem.critical_mask,
        problem.initial_state.energy_j, fixed=work.flags,
    )
    free = search.free()
    if free and search.feasible(search.flags_for(free)):
        levels, _ = project_levels(
            problem.initial_state.energy_j, config, problem.predictions_j, work.flags, consumption
        )
        deficit = config.e_target_j - levels[-1]
        first = max(1, math.ceil(deficit / config.e_charge_per_interval_j - EPSILON))
        for count in range(first, len(free) + 1):
            chosen = search.widest(count, prefer_latest=True)
            if chosen is not None:
                for t in chosen:
                    work.flags[t] = True
                work.refresh()
                # Savings a drained or full battery swallowed before may count now
                _reduce_consumption(work, violation, floor_j)
                break
    if work.short(violation):
        _backfill(work, violation)


def _backfill(work: _Projection, violation: int) -> None:
    """Best effort when no placement meets every requirement: nearest free intervals first"""
    config = work.problem.config
    horizon = work.problem.horizon
    deficit = config.e_target_j - work.levels[-1]
    sessions = max(1, math.ceil(deficit / config.e_charge_per_interval_j - EPSILON))

    chosen = [t for t in range(violation, horizon) if work.free(t)][:sessions]
    if len(chosen) < sessions:
        earlier = [t for t in range(violation - 1, -1, -1) if work.free(t)]
        chosen += earlier[:sessions - len(chosen)]
    for t in chosen:
        work.flags[t] = True
    work.refresh()

    while work.short(violation):
        earlier = next((t for t in range(violation, -1, -1) if work.free(t)), None)
        if earlier is None:
            return
        work.flags[earlier] = True
        work.refresh()


def plan_horizon(problem: PlanningProblem) -> Plan:
    """
    Plan charging and consumption over the remaining horizon

    Consumption starts at the maximum-accuracy level. While the projected
    battery misses its requirement (E_min, or E_target at the horizon end) the
    first such interval is handled: consumption is reduced toward the accuracy
    floor, then charging covers the remaining deficit. The first violation
    moves strictly later every iteration, so the loop runs at most
    horizon-length times. Unresolvable violations leave a best-effort plan
    with feasible=False.
    """
    work = _Projection(problem)
    floor_j = problem.profile.min_consumption_for(problem.a_min)

    iterations = 0
    unresolved: List[int] = []
    cursor = 0
    while True:
        violation = work.first_violation(cursor)
        if violation is None:
            break
        iterations += 1

        _reduce_consumption(work, violation, floor_j)
        if work.short(violation):
            _schedule_charging(work, violation, floor_j)
        if work.short(violation):
            unresolved.append(violation)
        cursor = violation + 1

    plan = Plan(
        charge_flags=tuple(work.flags),
        consumption_j=tuple(work.consumption),
        projected_battery_j=tuple(work.levels),
        first_interval_index=problem.first_interval_index,
        iterations=iterations,
    )
    report = count_violations(plan, problem.critical_mask, problem.profile, problem.a_min, problem.config)
    if unresolved:
        logger.debug(
            f"Plan from interval {problem.first_interval_index} infeasible at offsets {unresolved}"
        )
    logger.debug(
        f"Planned {problem.horizon} intervals in {iterations} iterations: "
        f"{plan.charging_intervals} charging, final {plan.final_energy_j:.1f} J"
    )
    return replace(plan, violations=report, feasible=report.is_clean)


def replan(
    previous: Plan,
    observed_harvest_j: float,
    new_state: BatteryState,
    problem_rest: PlanningProblem,
) -> Plan:
    """
    Re-run the planner on the shortened horizon from the observed state

    Excess harvest shows up as higher consumption or fewer charging intervals
    in the new plan; shortfalls as more charging or lower consumption.
    """
    if problem_rest.horizon != previous.horizon - 1:
        raise ValueError(
            f"Remaining horizon {problem_rest.horizon} should be one shorter than {previous.horizon}"
        )
    if problem_rest.initial_state != new_state:
        raise ValueError("Remaining problem must start from the observed battery state")
    if observed_harvest_j < 0:
        raise ValueError(f"Harvested energy cannot be negative: {observed_harvest_j}")

    expected = previous.projected_battery_j[0]
    logger.debug(
        f"Interval {new_state.interval_index - 1}: harvested {observed_harvest_j:.2f} J, "
        f"battery {new_state.energy_j:.2f} J (planned {expected:.2f} J)"
    )
    return plan_horizon(problem_rest)


@dataclass(frozen=True)
class CriticalMask:
    flags: Tuple[bool, ...]
    cold_start: bool = False

    def with_observation(self, t: int, activity: ActivityLabel,
                         critical_set: AbstractSet[ActivityLabel] = DEFAULT_CRITICAL) -> 'CriticalMask':
        """Overwrite interval t with what the user is actually doing"""
        flags = list(self.flags)
        flags[t] = activity in critical_set
        return CriticalMask(tuple(flags), self.cold_start)


def expected_activity_mask(
    history: Optional[ActivitySchedule],
    horizon: int,
    critical_set: AbstractSet[ActivityLabel] = DEFAULT_CRITICAL,
    threshold: float = 0.5,
    start_hour: int = 0,
) -> CriticalMask:
    """
    Mark hour-of-day slots where a critical activity happened on at least
    `threshold` of the observed days
    """
    if history is None or history.days == 0 or len(history) == 0:
        return CriticalMask(tuple([False] * horizon), cold_start=True)

    per_day = history.intervals_per_day
    full_days = len(history) // per_day
    if full_days == 0:
        return CriticalMask(tuple([False] * horizon), cold_start=True)

    labels = np.array(
        [label in critical_set for label in history.labels[:full_days * per_day]], dtype=bool
    ).reshape(full_days, per_day)
    frequency = labels.mean(axis=0)
    flags = tuple(bool(frequency[(start_hour + t) % per_day] >= threshold - EPSILON) for t in range(horizon))
    return CriticalMask(flags)


def plan_to_frame(plan: Plan) -> pd.DataFrame:
    return pd.DataFrame({
        "interval": np.arange(plan.horizon) + plan.first_interval_index,
        "charge": [int(f) for f in plan.charge_flags],
        "consumption_j": plan.consumption_j,
        "projected_battery_j": plan.projected_battery_j,
    }, columns=PLAN_COLUMNS)


def save_plan_csv(plan: Plan, path: Union[str, Path]) -> None:
    plan_to_frame(plan).to_csv(path, index=False)


def load_plan_csv(path: Union[str, Path]) -> Plan:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise TraceFormatError(f"Plan file {path} is empty")
    if list(frame.columns) != PLAN_COLUMNS:
        raise TraceFormatError(f"Plan file {path} must have columns {PLAN_COLUMNS}", line=1)
    first = int(frame["interval"].iloc[0]) if len(frame) else 0
    return Plan(
        charge_flags=tuple(bool(c) for c in frame["charge"]),
        consumption_j=tuple(frame["consumption_j"].astype(float)),
        projected_battery_j=tuple(frame["projected_battery_j"].astype(float)),
        first_interval_index=first,
    )
