"""Battery dynamics, the energy/accuracy profile and constraint checking"""
import pytest
from hypothesis import given, strategies as st

from src.core.energy import (
    ActivityLabel,
    BatteryState,
    EnergyAccuracyProfile,
    EnergyConfig,
    Plan,
    ViolationReport,
    accuracy_of,
    battery_step,
    charging_session_starts,
    check_constraints,
    min_consumption_for,
    min_intercharge_gap,
    project_levels,
)
from src.core.errors import ConfigError, InfeasibleError

TWO_POINT = EnergyAccuracyProfile(((1.0, 0.80), (4.0, 0.95)))


def flags_at(starts, horizon=24):
    flags = [False] * horizon
    for t in starts:
        flags[t] = True
    return flags


class TestBatteryStep:

    def test_harvest_minus_consumption(self, energy_config):
        state, overflow = battery_step(BatteryState(100.0), energy_config, 5.0, False, 3.0)
        assert state.energy_j == pytest.approx(102.0)
        assert overflow == 0.0
        assert state.interval_index == 1

    def test_charging_adds_one_interval_of_charge(self, energy_config):
        state, overflow = battery_step(BatteryState(16.0), energy_config, 0.0, True, 2.0)
        assert state.energy_j == pytest.approx(44.0)
        assert overflow == 0.0

    def test_clamps_at_e_max(self, energy_config):
        state, overflow = battery_step(BatteryState(158.0), energy_config, 10.0, False, 0.0)
        assert state.energy_j == 160.0
        assert overflow == pytest.approx(8.0)

    def test_harvest_efficiency_scales_harvest_only(self):
        config = EnergyConfig(harvest_efficiency=0.5)
        state, _ = battery_step(BatteryState(50.0), config, 10.0, True, 0.0)
        assert state.energy_j == pytest.approx(85.0)

    @pytest.mark.parametrize("harvest, consumption", [(-1.0, 0.0), (0.0, -0.5)])
    def test_negative_inputs_rejected(self, energy_config, harvest, consumption):
        with pytest.raises(ValueError):
            battery_step(BatteryState(50.0), energy_config, harvest, False, consumption)

    @given(
        start=st.floats(min_value=0.0, max_value=160.0),
        low=st.floats(min_value=0.0, max_value=50.0),
        extra=st.floats(min_value=0.0, max_value=50.0),
        charging=st.booleans(),
        consumption=st.floats(min_value=0.0, max_value=4.0),
    )
    def test_more_harvest_never_leaves_less_energy(self, start, low, extra, charging, consumption):
        config = EnergyConfig()
        a, _ = battery_step(BatteryState(start), config, low, charging, consumption)
        b, _ = battery_step(BatteryState(start), config, low + extra, charging, consumption)
        assert a.energy_j <= b.energy_j

    @given(steps=st.lists(
        st.tuples(st.floats(min_value=0.0, max_value=5.0), st.booleans(), st.floats(min_value=0.0, max_value=5.0)),
        min_size=1, max_size=30,
    ))
    def test_energy_is_conserved_away_from_the_bounds(self, steps):
        config = EnergyConfig(capacity_j=1e6, e_min_j=0.0, e_max_j=1e6, e_target_j=100.0)
        state = BatteryState(500.0)
        for harvest, charging, consumption in steps:
            state, overflow = battery_step(state, config, harvest, charging, consumption)
            assert overflow == 0.0
        expected = 500.0 + sum(h + (30.0 if c else 0.0) - u for h, c, u in steps)
        assert state.energy_j == pytest.approx(expected, abs=1e-9)

    def test_project_levels_matches_repeated_steps(self, energy_config):
        harvest = [0.0, 40.0, 80.0, 0.0]
        flags = [True, False, False, False]
        consumption = [4.0, 3.0, 2.0, 1.0]
        levels, overflow = project_levels(150.0, energy_config, harvest, flags, consumption)

        state = BatteryState(150.0)
        expected_levels, expected_overflow = [], []
        for h, f, c in zip(harvest, flags, consumption):
            state, spill = battery_step(state, energy_config, h, f, c)
            expected_levels.append(state.energy_j)
            expected_overflow.append(spill)
        assert levels == pytest.approx(expected_levels)
        assert overflow == pytest.approx(expected_overflow)


class TestAccuracyProfile:

    @pytest.mark.parametrize("consumption, accuracy", [(2.5, 0.875), (4.0, 0.95), (0.5, 0.80), (9.0, 0.95)])
    def test_interpolation(self, consumption, accuracy):
        assert accuracy_of(TWO_POINT, consumption) == pytest.approx(accuracy)

    @pytest.mark.parametrize("a_min, consumption", [(0.90, 3.0), (0.80, 1.0), (0.95, 4.0)])
    def test_minimum_consumption(self, a_min, consumption):
        assert min_consumption_for(TWO_POINT, a_min) == pytest.approx(consumption)

    def test_unreachable_accuracy(self):
        with pytest.raises(InfeasibleError):
            min_consumption_for(TWO_POINT, 0.99)

    def test_target_below_floor_needs_first_breakpoint(self):
        assert min_consumption_for(TWO_POINT, 0.5) == 1.0

    @given(a_min=st.floats(min_value=0.80, max_value=0.95))
    def test_minimum_consumption_reaches_the_target(self, a_min):
        profile = EnergyAccuracyProfile()
        assert profile.accuracy_of(profile.min_consumption_for(a_min)) >= a_min - 1e-9

    @given(a=st.floats(min_value=0.0, max_value=6.0), b=st.floats(min_value=0.0, max_value=6.0))
    def test_accuracy_is_monotone(self, a, b):
        profile = EnergyAccuracyProfile()
        low, high = sorted((a, b))
        assert profile.accuracy_of(low) <= profile.accuracy_of(high)

    def test_levels_and_step_down(self, profile):
        assert profile.levels_from(3.0) == (3.0, 4.0)
        assert profile.levels_from(2.5) == (2.5, 3.0, 4.0)
        assert profile.step_down(4.0, 2.5) == 3.0
        assert profile.step_down(3.0, 2.5) == 2.5
        assert profile.step_down(2.5, 2.5) == 2.5

    @pytest.mark.parametrize("breakpoints", [
        (),
        ((2.0, 0.8), (1.0, 0.9)),
        ((1.0, 0.9), (2.0, 0.8)),
        ((1.0, 1.2),),
    ])
    def test_bad_breakpoints(self, breakpoints):
        with pytest.raises(ConfigError) as excinfo:
            EnergyAccuracyProfile(breakpoints)
        assert excinfo.value.key == "breakpoints"


class TestEnergyConfig:

    def test_defaults(self, energy_config):
        assert energy_config.e_min_j == 16.0
        assert energy_config.e_target_j == 96.0
        assert energy_config.e_charge_per_interval_j == 30.0

    @pytest.mark.parametrize("overrides, key", [
        ({"e_min_j": 100.0}, "e_target_j"),
        ({"e_max_j": 50.0}, "e_max_j"),
        ({"capacity_j": 100.0}, "capacity_j"),
        ({"harvest_efficiency": 1.5}, "harvest_efficiency"),
        ({"horizon_intervals": 0}, "horizon_intervals"),
        ({"e_charge_per_interval_j": 0.0}, "e_charge_per_interval_j"),
    ])
    def test_rejects_inconsistent_values(self, overrides, key):
        with pytest.raises(ConfigError) as excinfo:
            EnergyConfig(**overrides)
        assert excinfo.value.key == key
        assert str(excinfo.value).startswith(f"{key}: ")


class TestIntercharge:

    def test_gap_between_session_starts(self):
        assert min_intercharge_gap(flags_at([2, 8, 20])) == 6

    def test_no_charging_gives_horizon(self):
        assert min_intercharge_gap([False] * 24) == 24

    def test_consecutive_flags_are_one_session(self):
        flags = flags_at([2, 3, 4, 22])
        assert charging_session_starts(flags) == [2, 22]
        assert min_intercharge_gap(flags) == 20

    @given(
        flags=st.lists(st.booleans(), min_size=1, max_size=30),
        padding=st.integers(min_value=0, max_value=10),
    )
    def test_trailing_idle_intervals_do_not_change_the_gap(self, flags, padding):
        horizon = len(flags) + padding
        assert min_intercharge_gap(flags, horizon) == min_intercharge_gap(flags + [False] * padding, horizon)


class TestCheckConstraints:

    def plan(self, levels, flags=None, consumption=None):
        horizon = len(levels)
        return Plan(
            charge_flags=flags or [False] * horizon,
            consumption_j=consumption or [3.0] * horizon,
            projected_battery_j=levels,
        )

    def test_clean_plan(self, energy_config, profile):
        report = check_constraints(
            self.plan([96.0] * 24), [ActivityLabel.OTHER] * 24, profile, 0.90,
            {ActivityLabel.EXERCISE}, energy_config,
        )
        assert report == ViolationReport()
        assert report.is_clean

    def test_energy_floor(self, energy_config, profile):
        levels = [96.0] * 24
        levels[5] = 15.0
        report = check_constraints(
            self.plan(levels), [ActivityLabel.OTHER] * 24, profile, 0.90,
            {ActivityLabel.EXERCISE}, energy_config,
        )
        assert report.energy_floor_violations >= 1
        assert not report.terminal_violation

    def test_terminal_target(self, energy_config, profile):
        levels = [96.0] * 23 + [90.0]
        report = check_constraints(
            self.plan(levels), [ActivityLabel.OTHER] * 24, profile, 0.90,
            {ActivityLabel.EXERCISE}, energy_config,
        )
        assert report.terminal_violation
        assert report.energy_violations == 1

    def test_charging_during_critical_activity(self, energy_config, profile):
        activities = [ActivityLabel.OTHER] * 24
        activities[7] = ActivityLabel.EXERCISE
        report = check_constraints(
            self.plan([96.0] * 24, flags=flags_at([7])), activities, profile, 0.90,
            {ActivityLabel.EXERCISE}, energy_config,
        )
        assert report.critical_charging_violations >= 1

    def test_accuracy_below_target(self, energy_config, profile):
        consumption = [3.0] * 24
        consumption[0] = 1.0
        report = check_constraints(
            self.plan([96.0] * 24, consumption=consumption), [ActivityLabel.OTHER] * 24, profile, 0.90,
            {ActivityLabel.EXERCISE}, energy_config,
        )
        assert report.accuracy_violations == 1
        assert report.total == 1

    def test_length_mismatch(self, energy_config, profile):
        with pytest.raises(ValueError):
            check_constraints(
                self.plan([96.0] * 24), [ActivityLabel.OTHER] * 23, profile, 0.90,
                {ActivityLabel.EXERCISE}, energy_config,
            )

    def test_reports_add_up(self):
        total = ViolationReport(1, 2, 0, False) + ViolationReport(0, 1, 3, True)
        assert total == ViolationReport(1, 3, 3, True)
        assert total.total == 8


def test_activity_labels_parse_case_insensitively():
    assert ActivityLabel.parse(" Exercise ") is ActivityLabel.EXERCISE
    with pytest.raises(ValueError):
        ActivityLabel.parse("swimming")
