"""Day-by-day simulation of the policies"""
from datetime import datetime

import pytest
from hypothesis import given, settings, strategies as st

from src.core.energy import ActivityLabel, BatteryState, EnergyAccuracyProfile, EnergyConfig
from src.core.errors import ConfigError
from src.core.harvest import synthesize_user
from src.core.metrics import daily_frame
from src.core.simulation import (
    AdaEMPolicy,
    DayTraces,
    EnergyNeutralPolicy,
    OnDemandPolicy,
    OraclePolicy,
    make_policy,
    run_day,
    run_experiment,
)
from tests.conftest import make_schedule, small_app_config


def day_traces(harvest, activities=None):
    activities = activities or [ActivityLabel.OTHER] * len(harvest)
    return DayTraces(
        day=0,
        offset=0,
        harvest_j=tuple(harvest),
        activities=tuple(activities),
        history_j=tuple(harvest),
        schedule=make_schedule(activities),
        date=datetime(2020, 6, 1),
    )


def simulate(policy, harvest, activities=None, energy=96.0):
    config = EnergyConfig()
    profile = EnergyAccuracyProfile()
    return run_day(policy, day_traces(harvest, activities), BatteryState(energy), config, profile, 0.90)


def assert_books_balance(result):
    delta = result.battery_j[-1] - result.battery_j[0]
    expected = result.savings_j + result.charging_energy_j - result.total_consumption_j
    assert delta == pytest.approx(expected, abs=1e-9)


class TestRunDay:

    @pytest.mark.parametrize("harvest", [
        [0.0] * 24,
        [0.0] * 8 + [20.0] * 8 + [0.0] * 8,
    ])
    def test_ideal_planner_meets_every_constraint(self, harvest):
        policy = AdaEMPolicy(EnergyConfig(), EnergyAccuracyProfile(), 0.90, ideal=True)
        result, state = simulate(policy, harvest)
        assert result.violations.is_clean
        assert not result.infeasible
        assert state.energy_j >= 96.0
        assert_books_balance(result)

    def test_ideal_planner_charges_on_a_dark_day(self):
        policy = AdaEMPolicy(EnergyConfig(), EnergyAccuracyProfile(), 0.90, ideal=True)
        result, _ = simulate(policy, [0.0] * 24)
        assert result.charging_intervals == 3
        assert result.charging_energy_j == 90.0
        assert len(result.battery_j) == 25

    def test_on_demand_idle_above_e_min(self):
        policy = OnDemandPolicy(EnergyConfig(), EnergyAccuracyProfile(), 0.90)
        result, state = simulate(policy, [0.0] * 24)
        assert result.charging_intervals == 0
        assert state.energy_j == pytest.approx(24.0)
        assert result.violations.terminal_violation

    def test_on_demand_charges_through_exercise(self):
        activities = [ActivityLabel.EXERCISE] * 24
        policy = OnDemandPolicy(EnergyConfig(), EnergyAccuracyProfile(), 0.90)
        result, _ = simulate(policy, [0.0] * 24, activities, energy=20.0)
        assert result.charging_intervals > 0
        assert result.violations.critical_charging_violations == result.charging_intervals

    def test_energy_neutral_dark_day(self):
        policy = EnergyNeutralPolicy(EnergyConfig(), EnergyAccuracyProfile())
        result, _ = simulate(policy, [0.0] * 24)
        assert result.consumption_j == (0.0,) * 24
        assert result.accuracies == (0.80,) * 24
        assert result.charging_intervals == 0
        assert result.violations.accuracy_violations == 24

    def test_oracle_flags_impossible_days(self):
        activities = [ActivityLabel.EXERCISE] * 24
        policy = OraclePolicy(EnergyConfig(), EnergyAccuracyProfile(), 0.90)
        result, _ = simulate(policy, [0.0] * 24, activities, energy=20.0)
        assert result.infeasible
        assert result.violations.total > 0
        assert_books_balance(result)

    def test_underflow_is_recorded(self):
        policy = EnergyNeutralPolicy(EnergyConfig(), EnergyAccuracyProfile())
        result, state = simulate(policy, [0.0] * 23 + [48.0], energy=0.0)
        assert result.unmet_j == pytest.approx(46.0)
        assert state.energy_j == pytest.approx(46.0)
        assert result.consumption_j == (0.0,) * 23 + (2.0,)
        assert result.accuracies[:23] == (0.80,) * 23
        assert result.accuracies[23] == pytest.approx(0.85)
        assert min(result.battery_j) == 0.0
        assert_books_balance(result)

    @settings(max_examples=40, deadline=None)
    @given(
        harvest=st.lists(st.floats(min_value=0.0, max_value=6.0), min_size=24, max_size=24),
        energy=st.floats(min_value=0.0, max_value=20.0),
    )
    def test_a_drained_battery_only_spends_what_it_holds(self, harvest, energy):
        policy = EnergyNeutralPolicy(EnergyConfig(), EnergyAccuracyProfile())
        result, _ = simulate(policy, harvest, energy=energy)
        demanded = 24 * min(sum(harvest) / 24, 4.0)
        assert sum(result.consumption_j) + result.unmet_j == pytest.approx(demanded, abs=1e-9)
        assert all(level >= 0.0 for level in result.battery_j)
        assert_books_balance(result)

    def test_short_trace(self):
        policy = OnDemandPolicy(EnergyConfig(), EnergyAccuracyProfile(), 0.90)
        with pytest.raises(ValueError):
            simulate(policy, [0.0] * 23)

    def test_forecasting_planner_needs_a_model(self):
        with pytest.raises(ValueError):
            AdaEMPolicy(EnergyConfig(), EnergyAccuracyProfile(), 0.90)

    def test_unknown_policy(self):
        with pytest.raises(ConfigError):
            make_policy("greedy", small_app_config(), None)


class TestRunExperiment:

    def test_result_count(self):
        config = small_app_config(days=30, ideal_predictions=True)
        result = run_experiment(config, policies=["adaem", "on-demand", "energy-neutral"])
        assert len(result.days) == 180
        assert {d.policy for d in result.days} == {"adaem", "on-demand", "energy-neutral"}
        assert min(d.day for d in result.days) == config.simulation.training_days
        for day in result.days:
            assert len(day.battery_j) == 25
            assert day.charging_energy_j == 30.0 * day.charging_intervals
            assert_books_balance(day)

    def test_every_policy_sees_the_same_traces(self):
        result = run_experiment(small_app_config(ideal_predictions=True))
        for user in range(2):
            digests = {result.trace_hashes[(policy, user)] for policy in result.policies}
            assert len(digests) == 1

    def test_same_seed_same_result(self):
        first = daily_frame(run_experiment(small_app_config(days=3)))
        second = daily_frame(run_experiment(small_app_config(days=3)))
        assert first.equals(second)

    def test_seed_changes_the_traces(self):
        a = run_experiment(small_app_config(ideal_predictions=True), policies=["on-demand"], seed=1)
        b = run_experiment(small_app_config(ideal_predictions=True), policies=["on-demand"], seed=2)
        assert a.trace_hashes != b.trace_hashes

    def test_oracle_plans_are_kept(self):
        result = run_experiment(small_app_config(days=2), policies=["oracle"], users=1)
        assert sorted(result.plans) == [("oracle", 0, 7), ("oracle", 0, 8)]

    def test_traces_inside_the_training_split(self):
        traces = [synthesize_user(0, 0, 7)]
        with pytest.raises(ConfigError):
            run_experiment(small_app_config(), user_traces=traces)

    def test_unknown_policy(self):
        with pytest.raises(ConfigError):
            run_experiment(small_app_config(), policies=["greedy"])

    def test_summer_saves_more_than_winter(self):
        config = small_app_config(days=358, ideal_predictions=True)
        result = run_experiment(config, users=1, policies=["energy-neutral", "on-demand"])
        daily = daily_frame(result)
        assert daily["month"].nunique() == 12
        for policy, rows in daily.groupby("policy"):
            medians = rows.groupby("month")["savings_j"].median()
            assert medians[6] >= medians[12], policy
            assert medians[7] >= medians[1], policy

    def test_parallel_matches_sequential(self):
        config = small_app_config(days=2, ideal_predictions=True)
        sequential = daily_frame(run_experiment(config, jobs=1))
        parallel = daily_frame(run_experiment(config, jobs=2))
        assert sequential.equals(parallel)
