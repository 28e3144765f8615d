"""
Baseline Policies
On-demand reactive charging, energy-neutral allocation and the exhaustive
minimum-charging oracle
"""
import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

from .energy import (
    EPSILON,
    BatteryState,
    EnergyAccuracyProfile,
    EnergyConfig,
    Plan,
    count_violations,
    project_levels,
)
from .harvest import HarvestTrace
from .planner import ChargeSearch, PlanningProblem, plan_horizon

logger = logging.getLogger(__name__)


def on_demand_decide(
    state: BatteryState,
    config: EnergyConfig,
    currently_charging: bool,
    profile: EnergyAccuracyProfile,
    a_fixed: float,
) -> Tuple[bool, float]:
    """
    Reactive rule: start charging below E_min, keep charging until E_target

    Consumption always targets the fixed accuracy. Critical activities are
    not consulted.
    """
    consumption = profile.min_consumption_for(a_fixed)
    if state.energy_j < config.e_min_j:
        return True, consumption
    if currently_charging and state.energy_j < config.e_target_j:
        return True, consumption
    return False, consumption


def energy_neutral_allocate(
    daily_harvest_j: float, horizon: int, profile: EnergyAccuracyProfile
) -> List[float]:
    """Spread the day's harvest evenly, capped at the profile's top consumption"""
    if daily_harvest_j < 0:
        raise ValueError(f"Daily harvest cannot be negative: {daily_harvest_j}")
    if horizon < 1:
        raise ValueError(f"Horizon must be >= 1, got {horizon}")
    share = min(daily_harvest_j / horizon, profile.max_consumption_j)
    return [share] * horizon


def _raise_consumption(search: ChargeSearch, flags: Sequence[bool], profile: EnergyAccuracyProfile,
                       floor_j: float) -> List[float]:
    """Greedy accuracy pass: earliest interval first, highest level that stays feasible"""
    consumption = [floor_j] * search.horizon
    levels = profile.levels_from(floor_j)
    for t in range(search.horizon):
        for candidate in reversed(levels):
            if candidate <= consumption[t] + EPSILON:
                break
            trial = consumption[:t] + [candidate] + consumption[t + 1:]
            if search.feasible(flags, trial):
                consumption = trial
                break
    return consumption


def optimal_oracle(
    actual_harvest: HarvestTrace,
    config: EnergyConfig,
    profile: EnergyAccuracyProfile,
    a_min: float,
    critical_mask: Sequence[bool],
    initial_state: Optional[BatteryState] = None,
) -> Plan:
    """
    Minimum-charging plan with full knowledge of the harvest

    Assignments are enumerated by increasing number of charging intervals.
    Among the feasible ones of minimum size the largest minimum inter-charge
    gap wins, the lexicographically earliest on ties. Consumption is then
    raised greedily wherever the battery allows.

    Returns the planner's best-effort plan with feasible=False when no
    assignment works.
    """
    horizon = len(actual_harvest)
    if len(critical_mask) != horizon:
        raise ValueError(f"Critical mask length {len(critical_mask)} != horizon {horizon}")
    initial_state = initial_state or BatteryState(config.e_target_j)
    floor_j = profile.min_consumption_for(a_min)
    search = ChargeSearch(
        actual_harvest.values, config, [floor_j] * horizon, critical_mask, initial_state.energy_j
    )

    free = search.free()
    if not search.feasible(search.flags_for(free)):
        # Charging everywhere at the floor is the most energy any plan can keep
        logger.debug(f"Oracle: no assignment is feasible from {initial_state.energy_j:.1f} J")
        best_effort = plan_horizon(PlanningProblem(
            predictions_j=actual_harvest.values,
            initial_state=initial_state,
            config=config,
            profile=profile,
            a_min=a_min,
            critical_mask=tuple(critical_mask),
        ))
        return replace(best_effort, feasible=False)

    chosen: Optional[Tuple[int, ...]] = None
    for count in range(search.lower_bound(), len(free) + 1):
        chosen = search.widest(count)
        if chosen is not None:
            break

    flags = search.flags_for(chosen)
    consumption = _raise_consumption(search, flags, profile, floor_j)
    levels, _ = project_levels(initial_state.energy_j, config, actual_harvest.values, flags, consumption)
    plan = Plan(
        charge_flags=tuple(flags),
        consumption_j=tuple(consumption),
        projected_battery_j=tuple(levels),
        first_interval_index=initial_state.interval_index,
    )
    report = count_violations(plan, critical_mask, profile, a_min, config)
    logger.debug(f"Oracle: {len(chosen)} charging intervals, min gap {plan.min_gap()}")
    return replace(plan, feasible=report.is_clean, violations=report)
