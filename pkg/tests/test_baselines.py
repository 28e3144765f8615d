"""Reactive, energy-neutral and oracle baselines"""
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from src.core.baselines import energy_neutral_allocate, on_demand_decide, optimal_oracle
from src.core.energy import BatteryState, EnergyAccuracyProfile, EnergyConfig, ViolationReport, battery_step
from src.core.harvest import HarvestTrace
from src.core.planner import PlanningProblem, plan_horizon

TWO_POINT = EnergyAccuracyProfile(((1.0, 0.80), (4.0, 0.95)))


def brute_force_minimum(harvest, config, floor_j, critical, initial_j):
    """Smallest number of charging intervals that keeps every bound at the floor consumption"""
    horizon = len(harvest)
    best = None
    for flags in itertools.product((False, True), repeat=horizon):
        if any(f and c for f, c in zip(flags, critical)):
            continue
        count = sum(flags)
        if best is not None and count >= best:
            continue
        level, ok = initial_j, True
        for t in range(horizon):
            raw = level + config.harvest_efficiency * harvest[t] + (config.e_charge_per_interval_j if flags[t] else 0.0)
            level = min(max(raw - floor_j, 0.0), config.e_max_j)
            need = config.e_target_j if t == horizon - 1 else config.e_min_j
            if level < need - 1e-9:
                ok = False
                break
        if ok:
            best = count
    return best


class TestOnDemand:

    def test_starts_below_e_min(self, energy_config, profile):
        charge, consumption = on_demand_decide(BatteryState(15.9), energy_config, False, profile, 0.90)
        assert charge
        assert consumption == pytest.approx(3.0)

    def test_keeps_charging_until_target(self, energy_config, profile):
        charge, _ = on_demand_decide(BatteryState(80.0), energy_config, True, profile, 0.90)
        assert charge

    def test_stops_at_target(self, energy_config, profile):
        charge, _ = on_demand_decide(BatteryState(96.0), energy_config, True, profile, 0.90)
        assert not charge

    def test_idle_above_e_min(self, energy_config, profile):
        charge, _ = on_demand_decide(BatteryState(50.0), energy_config, False, profile, 0.90)
        assert not charge

    @given(harvest=st.lists(st.floats(min_value=0.0, max_value=6.0), min_size=1, max_size=96),
           start=st.floats(min_value=0.0, max_value=160.0))
    def test_hysteresis(self, harvest, start):
        config = EnergyConfig()
        profile = EnergyAccuracyProfile()
        state = BatteryState(start)
        charging = False
        for value in harvest:
            charge, consumption = on_demand_decide(state, config, charging, profile, 0.90)
            if charging and state.energy_j < config.e_target_j:
                assert charge
            if state.energy_j < config.e_min_j:
                assert charge
            charging = charge
            state, _ = battery_step(state, config, value, charge, consumption)


class TestEnergyNeutral:

    def test_uniform_split(self, profile):
        assert energy_neutral_allocate(48.0, 24, profile) == [2.0] * 24

    def test_no_harvest(self, profile):
        allocation = energy_neutral_allocate(0.0, 24, profile)
        assert allocation == [0.0] * 24
        assert profile.accuracy_of(allocation[0]) == profile.floor_accuracy

    def test_capped_at_top_consumption(self, profile):
        allocation = energy_neutral_allocate(240.0, 24, profile)
        assert allocation == [4.0] * 24
        assert 240.0 - sum(allocation) == pytest.approx(144.0)

    @given(daily=st.floats(min_value=0.0, max_value=500.0), horizon=st.integers(min_value=1, max_value=48))
    def test_never_spends_more_than_harvested(self, daily, horizon):
        allocation = energy_neutral_allocate(daily, horizon, EnergyAccuracyProfile())
        assert sum(allocation) <= daily + 1e-9

    @pytest.mark.parametrize("daily, horizon", [(-1.0, 24), (10.0, 0)])
    def test_bad_arguments(self, profile, daily, horizon):
        with pytest.raises(ValueError):
            energy_neutral_allocate(daily, horizon, profile)


class TestOracle:

    def test_no_charging_needed(self, energy_config, profile):
        plan = optimal_oracle(HarvestTrace(tuple([5.0] * 24)), energy_config, profile, 0.90, [False] * 24)
        assert plan.charging_intervals == 0
        assert plan.consumption_j == (4.0,) * 24
        assert plan.violations == ViolationReport()

    def test_six_interval_day(self):
        config = EnergyConfig(e_target_j=40.0, horizon_intervals=6)
        harvest = [0.0] * 6
        plan = optimal_oracle(HarvestTrace(tuple(harvest)), config, TWO_POINT, 0.80, [False] * 6,
                              BatteryState(40.0))
        assert plan.feasible
        assert plan.charging_intervals == brute_force_minimum(harvest, config, 1.0, [False] * 6, 40.0) == 1
        assert plan.final_energy_j >= 40.0
        assert min(plan.projected_battery_j) >= 16.0

    def test_infeasible_day(self, energy_config, profile):
        plan = optimal_oracle(HarvestTrace(tuple([0.0] * 24)), energy_config, profile, 0.90, [True] * 24,
                              BatteryState(20.0))
        assert not plan.feasible
        assert not plan.violations.is_clean

    def test_full_accuracy_day(self):
        config = EnergyConfig(e_target_j=40.0, horizon_intervals=8)
        critical = [False] * 8
        plan = optimal_oracle(HarvestTrace(tuple([0.0] * 8)), config, TWO_POINT, 0.95, critical,
                              BatteryState(20.0))
        assert plan.feasible
        count = brute_force_minimum([0.0] * 8, config, 4.0, critical, 20.0)
        assert plan.charging_intervals == count

    @settings(max_examples=120, deadline=None)
    @given(
        harvest=st.lists(st.floats(min_value=0.0, max_value=12.0), min_size=2, max_size=10),
        critical_bits=st.integers(min_value=0, max_value=1023),
        initial=st.floats(min_value=16.0, max_value=160.0),
    )
    def test_matches_full_enumeration(self, harvest, critical_bits, initial):
        config = EnergyConfig()
        profile = EnergyAccuracyProfile()
        critical = [bool(critical_bits >> t & 1) for t in range(len(harvest))]
        plan = optimal_oracle(HarvestTrace(tuple(harvest)), config, profile, 0.90, critical,
                              BatteryState(initial))
        best = brute_force_minimum(harvest, config, 3.0, critical, initial)
        if best is None:
            assert not plan.feasible
        else:
            assert plan.feasible
            assert plan.violations.is_clean
            assert plan.charging_intervals == best

    @settings(max_examples=60, deadline=None)
    @given(
        harvest=st.lists(st.floats(min_value=0.0, max_value=12.0), min_size=24, max_size=24),
        initial=st.floats(min_value=16.0, max_value=160.0),
        critical_start=st.integers(min_value=0, max_value=20),
    )
    def test_never_charges_more_than_the_planner(self, harvest, initial, critical_start):
        config = EnergyConfig()
        profile = EnergyAccuracyProfile()
        critical = [critical_start <= t < critical_start + 3 for t in range(24)]
        planned = plan_horizon(PlanningProblem(
            predictions_j=tuple(harvest),
            initial_state=BatteryState(initial),
            config=config,
            profile=profile,
            a_min=0.90,
            critical_mask=tuple(critical),
        ))
        oracle = optimal_oracle(HarvestTrace(tuple(harvest)), config, profile, 0.90, critical,
                                BatteryState(initial))
        if planned.feasible:
            assert oracle.feasible
            assert oracle.charging_intervals <= planned.charging_intervals

    def test_mask_length_must_match(self, energy_config, profile):
        with pytest.raises(ValueError):
            optimal_oracle(HarvestTrace(tuple([0.0] * 24)), energy_config, profile, 0.90, [False] * 23)
