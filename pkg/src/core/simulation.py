"""
Simulation Engine
Runs charging policies interval by interval over multi-day traces, applying
the actual harvest to the battery and recording what each policy did
"""
import hashlib
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import AbstractSet, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .baselines import energy_neutral_allocate, on_demand_decide, optimal_oracle
from .config_manager import POLICY_NAMES, AppConfig
from .energy import (
    ActivityLabel,
    BatteryState,
    EnergyAccuracyProfile,
    EnergyConfig,
    Plan,
    ViolationReport,
    battery_step,
    count_violations,
    critical_mask,
    min_intercharge_gap,
)
from .errors import ConfigError
from .harvest import ActivitySchedule, HarvestTrace, UserTraces, synthesize_user
from .planner import (
    DEFAULT_CRITICAL,
    CriticalMask,
    PlanningProblem,
    expected_activity_mask,
    plan_horizon,
    replan,
)
from .predictor import (
    TreeEnsemble,
    TypicalDay,
    build_dataset,
    fit_arrays,
    forecast_horizon,
    typical_day,
    worst_case,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DayTraces:
    """
    One day of a user's traces plus the history a policy may look at

    history_j and schedule cover the whole experiment; policies only read
    entries before offset + t at interval t.
    """
    day: int
    offset: int
    harvest_j: Tuple[float, ...]
    activities: Tuple[ActivityLabel, ...]
    history_j: Tuple[float, ...]
    schedule: ActivitySchedule
    date: datetime

    @property
    def horizon(self) -> int:
        return len(self.harvest_j)


@dataclass(frozen=True)
class DayResult:
    """What happened on one simulated day"""
    policy: str
    user: int
    day: int
    date: datetime
    battery_j: Tuple[float, ...]
    charge_flags: Tuple[bool, ...]
    consumption_j: Tuple[float, ...]
    accuracies: Tuple[float, ...]
    harvest_j: float
    overflow_j: float
    unmet_j: float
    violations: ViolationReport
    charging_energy_j: float
    min_gap: int
    infeasible: bool = False

    @property
    def month(self) -> int:
        return self.date.month

    @property
    def charging_intervals(self) -> int:
        return sum(self.charge_flags)

    @property
    def savings_j(self) -> float:
        """Harvest that actually reached the battery"""
        return self.harvest_j - self.overflow_j

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def total_consumption_j(self) -> float:
        return float(sum(self.consumption_j))


@dataclass
class ExperimentResult:
    """Per-user, per-day results of every policy on identical traces"""
    days: List[DayResult]
    policies: Tuple[str, ...]
    users: int
    seed: int
    config_snapshot: Dict
    trace_hashes: Dict[Tuple[str, int], str] = field(default_factory=dict)
    training_days: int = 0
    plans: Dict[Tuple[str, int, int], Plan] = field(default_factory=dict)


class Policy:
    """Decides charging and consumption at the start of every interval"""
    name = "policy"

    def begin_day(self, day: DayTraces, state: BatteryState) -> None:
        pass

    def decide(self, t: int, state: BatteryState) -> Tuple[bool, float]:
        raise NotImplementedError

    @property
    def infeasible_today(self) -> bool:
        return False

    @property
    def day_plan(self) -> Optional[Plan]:
        return None


class AdaEMPolicy(Policy):
    """Robust rolling-horizon planner: replans every interval from the observed state"""
    name = "adaem"

    def __init__(self, config: EnergyConfig, profile: EnergyAccuracyProfile, a_min: float,
                 model: Optional[TreeEnsemble] = None, robustness_k: float = 1.0,
                 ideal: bool = False, critical_set: AbstractSet[ActivityLabel] = DEFAULT_CRITICAL,
                 mask_threshold: float = 0.5, history_days: int = 30):
        if model is None and not ideal:
            raise ValueError("A fitted predictor is needed unless predictions are ideal")
        self.config = config
        self.profile = profile
        self.a_min = a_min
        self.model = model
        self.k = 0.0 if ideal else robustness_k
        self.ideal = ideal
        self.critical_set = critical_set
        self.mask_threshold = mask_threshold
        self.history_days = history_days
        self._day: Optional[DayTraces] = None
        self._mask: Optional[CriticalMask] = None
        self._typical: Optional[TypicalDay] = None
        self._plan: Optional[Plan] = None
        self._first_plan: Optional[Plan] = None
        self._infeasible = False

    def begin_day(self, day: DayTraces, state: BatteryState) -> None:
        self._day = day
        first = max(0, day.day - self.history_days)
        history = day.schedule.slice_days(first, day.day) if day.day > first else None
        self._mask = expected_activity_mask(
            history, day.horizon, self.critical_set, self.mask_threshold
        )
        self._typical = typical_day(history)
        self._plan = None
        self._first_plan = None
        self._infeasible = False

    def _predictions(self, t: int) -> List[float]:
        day = self._day
        if self.ideal:
            return list(day.harvest_j[t:])
        now = day.offset + t
        expected = self._typical or TypicalDay.repeat(
            day.schedule.labels[now], day.schedule.outdoor[now], day.schedule.intervals_per_day
        )
        forecasts = forecast_horizon(
            self.model, day.history_j, day.schedule, now, day.horizon - t, expected
        )
        return [worst_case(f, self.k) for f in forecasts]

    def decide(self, t: int, state: BatteryState) -> Tuple[bool, float]:
        day = self._day
        self._mask = self._mask.with_observation(t, day.activities[t], self.critical_set)
        problem = PlanningProblem(
            predictions_j=tuple(self._predictions(t)),
            initial_state=BatteryState(state.energy_j, t),
            config=self.config,
            profile=self.profile,
            a_min=self.a_min,
            critical_mask=self._mask.flags[t:],
        )
        if self._plan is None:
            plan = plan_horizon(problem)
            self._first_plan = plan
        else:
            plan = replan(self._plan, day.harvest_j[t - 1], problem.initial_state, problem)
        self._plan = plan
        self._infeasible = self._infeasible or not plan.feasible
        return plan.charge_flags[0], plan.consumption_j[0]

    @property
    def infeasible_today(self) -> bool:
        return self._infeasible

    @property
    def day_plan(self) -> Optional[Plan]:
        return self._first_plan


class OnDemandPolicy(Policy):
    """Charge below E_min until E_target; fixed accuracy; blind to activities"""
    name = "on-demand"

    def __init__(self, config: EnergyConfig, profile: EnergyAccuracyProfile, a_fixed: float):
        self.config = config
        self.profile = profile
        self.a_fixed = a_fixed
        self.charging = False

    def decide(self, t: int, state: BatteryState) -> Tuple[bool, float]:
        charge, consumption = on_demand_decide(state, self.config, self.charging, self.profile, self.a_fixed)
        self.charging = charge
        return charge, consumption


class EnergyNeutralPolicy(Policy):
    """Spend exactly the day's harvest, never charge"""
    name = "energy-neutral"

    def __init__(self, config: EnergyConfig, profile: EnergyAccuracyProfile):
        self.config = config
        self.profile = profile
        self._allocation: List[float] = []

    def begin_day(self, day: DayTraces, state: BatteryState) -> None:
        daily = self.config.harvest_efficiency * sum(day.harvest_j)
        self._allocation = energy_neutral_allocate(daily, day.horizon, self.profile)

    def decide(self, t: int, state: BatteryState) -> Tuple[bool, float]:
        return False, self._allocation[t]


class OraclePolicy(Policy):
    """Follow the exhaustive plan computed with the day's actual harvest and activities"""
    name = "oracle"

    def __init__(self, config: EnergyConfig, profile: EnergyAccuracyProfile, a_min: float,
                 critical_set: AbstractSet[ActivityLabel] = DEFAULT_CRITICAL):
        self.config = config
        self.profile = profile
        self.a_min = a_min
        self.critical_set = critical_set
        self._plan: Optional[Plan] = None

    def begin_day(self, day: DayTraces, state: BatteryState) -> None:
        self._plan = optimal_oracle(
            HarvestTrace(day.harvest_j),
            self.config,
            self.profile,
            self.a_min,
            critical_mask(day.activities, self.critical_set),
            BatteryState(state.energy_j, 0),
        )

    def decide(self, t: int, state: BatteryState) -> Tuple[bool, float]:
        return self._plan.charge_flags[t], self._plan.consumption_j[t]

    @property
    def infeasible_today(self) -> bool:
        return self._plan is not None and not self._plan.feasible

    @property
    def day_plan(self) -> Optional[Plan]:
        return self._plan


def run_day(
    policy: Policy,
    day: DayTraces,
    initial_state: BatteryState,
    config: EnergyConfig,
    profile: EnergyAccuracyProfile,
    a_min: float,
    critical_set: AbstractSet[ActivityLabel] = DEFAULT_CRITICAL,
    user: int = 0,
) -> Tuple[DayResult, BatteryState]:
    """
    Simulate one day; returns the result and the state carried to the next day
    """
    horizon = config.horizon_intervals
    if day.horizon < horizon or len(day.activities) < horizon:
        raise ValueError(f"Day {day.day} covers {day.horizon} intervals, horizon is {horizon}")

    state = BatteryState(initial_state.energy_j, 0)
    policy.begin_day(day, state)

    battery = [state.energy_j]
    flags: List[bool] = []
    consumption: List[float] = []
    accuracies: List[float] = []
    overflow_total = 0.0
    unmet_total = 0.0
    for t in range(horizon):
        charge, used = policy.decide(t, state)
        charge_input = config.e_charge_per_interval_j if charge else 0.0
        available = state.energy_j + config.harvest_efficiency * day.harvest_j[t] + charge_input
        # A drained battery delivers what it holds; the rest of the demand goes unserved
        delivered = min(float(used), max(0.0, available))
        unmet_total += used - delivered
        state, overflow = battery_step(state, config, day.harvest_j[t], charge, delivered)
        overflow_total += overflow
        battery.append(state.energy_j)
        flags.append(bool(charge))
        consumption.append(delivered)
        accuracies.append(profile.accuracy_of(delivered))

    realized = Plan(charge_flags=flags, consumption_j=consumption, projected_battery_j=battery[1:])
    report = count_violations(
        realized, critical_mask(day.activities[:horizon], critical_set), profile, a_min, config
    )
    result = DayResult(
        policy=policy.name,
        user=user,
        day=day.day,
        date=day.date,
        battery_j=tuple(battery),
        charge_flags=tuple(flags),
        consumption_j=tuple(consumption),
        accuracies=tuple(accuracies),
        harvest_j=config.harvest_efficiency * float(sum(day.harvest_j[:horizon])),
        overflow_j=overflow_total,
        unmet_j=unmet_total,
        violations=report,
        charging_energy_j=config.e_charge_per_interval_j * sum(flags),
        min_gap=min_intercharge_gap(flags, horizon),
        infeasible=policy.infeasible_today,
    )
    if report.total:
        logger.debug(f"{policy.name} user {user} day {day.day}: {report.total} violations")
    return result, BatteryState(state.energy_j, 0)


def trace_digest(harvest: Sequence[float], schedule: ActivitySchedule) -> str:
    """SHA-256 of the harvest values and activity labels a run consumed"""
    digest = hashlib.sha256()
    digest.update(np.asarray(harvest, dtype=np.float64).tobytes())
    digest.update(",".join(label.value for label in schedule.labels).encode())
    digest.update(bytes(schedule.outdoor))
    return digest.hexdigest()


def make_policy(name: str, app_config: AppConfig, model: Optional[TreeEnsemble]) -> Policy:
    profile = app_config.accuracy_profile
    energy = app_config.energy
    a_min = app_config.planner.a_min
    if name == "adaem":
        return AdaEMPolicy(
            energy,
            profile,
            a_min,
            model=model,
            robustness_k=app_config.predictor.robustness_k,
            ideal=app_config.simulation.ideal_predictions,
            critical_set=app_config.critical_set,
            mask_threshold=app_config.planner.mask_threshold,
            history_days=app_config.planner.history_days,
        )
    if name == "on-demand":
        return OnDemandPolicy(energy, profile, app_config.on_demand_accuracy)
    if name == "energy-neutral":
        return EnergyNeutralPolicy(energy, profile)
    if name == "oracle":
        return OraclePolicy(energy, profile, a_min, app_config.critical_set)
    raise ConfigError(f"unknown policy {name!r}", key="simulation.policies")


def train_user_model(traces: UserTraces, app_config: AppConfig) -> TreeEnsemble:
    """Fit the harvest predictor on the leading training days of one user"""
    per_day = app_config.schedule.intervals_per_day
    stop = app_config.simulation.training_days * per_day
    X, y = build_dataset(traces.harvest.values, traces.schedule, 0, stop, app_config.feature_layout)
    return fit_arrays(X, y, app_config.ensemble_params, app_config.feature_layout)


def simulate_policy(
    name: str,
    traces: UserTraces,
    app_config: AppConfig,
    model: Optional[TreeEnsemble] = None,
    first_day: int = 0,
) -> Tuple[List[DayResult], str, List[Optional[Plan]]]:
    """Run one policy for one user over days [first_day, end), carrying the battery across days"""
    energy = app_config.energy
    profile = app_config.accuracy_profile
    per_day = app_config.schedule.intervals_per_day
    harvest = traces.harvest.values
    schedule = traces.schedule

    policy = make_policy(name, app_config, model)
    state = BatteryState(energy.e_target_j)
    results: List[DayResult] = []
    plans: List[Optional[Plan]] = []
    for day_index in range(first_day, schedule.days):
        offset = day_index * per_day
        day = DayTraces(
            day=day_index,
            offset=offset,
            harvest_j=harvest[offset:offset + per_day],
            activities=schedule.labels[offset:offset + per_day],
            history_j=harvest,
            schedule=schedule,
            date=schedule.start + timedelta(days=day_index),
        )
        result, state = run_day(
            policy, day, state, energy, profile, app_config.planner.a_min,
            app_config.critical_set, user=traces.user,
        )
        results.append(result)
        plans.append(policy.day_plan)

    logger.info(
        f"{name} user {traces.user}: {len(results)} days, "
        f"{sum(r.charging_intervals for r in results)} charging intervals"
    )
    return results, trace_digest(harvest, schedule), plans


def run_experiment(
    app_config: AppConfig,
    users: Optional[int] = None,
    days: Optional[int] = None,
    policies: Optional[Sequence[str]] = None,
    seed: Optional[int] = None,
    user_traces: Optional[Sequence[UserTraces]] = None,
    model: Optional[TreeEnsemble] = None,
    jobs: Optional[int] = None,
) -> ExperimentResult:
    """
    Simulate every policy for every user on identical traces

    `days` counts evaluation days; synthetic traces also cover the leading
    training days. Given traces are split the same way.
    """
    sim = app_config.simulation
    users = sim.users if users is None else users
    days = sim.days if days is None else days
    policies = tuple(sim.policies if policies is None else policies)
    seed = sim.seed if seed is None else seed
    jobs = sim.jobs if jobs is None else jobs
    training_days = sim.training_days

    for name in policies:
        if name not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {name!r}", key="simulation.policies")

    if user_traces is None:
        user_traces = [
            synthesize_user(
                seed, user, training_days + days,
                app_config.harvest, app_config.climate, app_config.template_for(user),
            )
            for user in range(users)
        ]
    else:
        user_traces = list(user_traces)
        users = len(user_traces)
    for traces in user_traces:
        if traces.days <= training_days:
            raise ConfigError(
                f"user {traces.user} has {traces.days} days, all inside the training split",
                key="simulation.training_days",
            )

    needs_model = "adaem" in policies and not sim.ideal_predictions
    models: Dict[int, Optional[TreeEnsemble]] = {}
    for traces in user_traces:
        if needs_model and model is None:
            if training_days < 1:
                raise ConfigError("the predictor needs at least one training day",
                                  key="simulation.training_days")
            models[traces.user] = train_user_model(traces, app_config)
        else:
            models[traces.user] = model

    tasks = [(name, traces) for name in policies for traces in user_traces]
    outputs = Parallel(n_jobs=jobs)(
        delayed(simulate_policy)(name, traces, app_config, models[traces.user], training_days)
        for name, traces in tasks
    )

    all_days: List[DayResult] = []
    hashes: Dict[Tuple[str, int], str] = {}
    plans: Dict[Tuple[str, int, int], Plan] = {}
    for (name, traces), (results, digest, day_plans) in zip(tasks, outputs):
        all_days.extend(results)
        hashes[(name, traces.user)] = digest
        for result, plan in zip(results, day_plans):
            if plan is not None:
                plans[(name, traces.user, result.day)] = plan

    return ExperimentResult(
        days=all_days,
        policies=policies,
        users=users,
        seed=seed,
        config_snapshot=app_config.to_dict(),
        trace_hashes=hashes,
        training_days=training_days,
        plans=plans,
    )
