import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wraphaptics import _plant_core_py
from wraphaptics.errors import InvalidParameterError
from wraphaptics.pneumatics import (COMPILED_PLANT_CORE, Channel,
                                    ChannelKind, ChannelSpec, PlantConfig,
                                    PressureChannelState, calibrate_tau,
                                    run_commands, settle_time, step)

SLEEVE = ChannelSpec.sleeve()
RING = ChannelSpec.ring()
CONFIG = PlantConfig()


class TestCalibrateTau:
    def test_sleeve_rise(self):
        # oracle: step the ODE at dt=1 ms until P >= 2.9 (95% of the 1->3 step)
        tau = calibrate_tau(ChannelKind.SLEEVE, 1.0, 3.0, 0.72)
        assert tau == pytest.approx(0.72 / math.log(20), abs=1e-12)
        assert tau == pytest.approx(0.2404, abs=5e-4)
        state = PressureChannelState(pressure=1.0, commanded=3.0)
        spec = ChannelSpec(ChannelKind.SLEEVE, 3.5, tau_up=tau, tau_down=tau / 2)
        steps = 0
        while state.pressure < 2.9:
            state = step(state, spec, CONFIG)
            steps += 1
        assert steps * CONFIG.dt == pytest.approx(0.72, abs=0.002)

    def test_sleeve_fall(self):
        tau = calibrate_tau(ChannelKind.SLEEVE, 3.0, 1.0, 0.18)
        assert tau == pytest.approx(0.0601, abs=5e-5)
        state = PressureChannelState(pressure=3.0, commanded=1.0)
        spec = ChannelSpec(ChannelKind.SLEEVE, 3.5, tau_up=tau * 2, tau_down=tau)
        steps = 0
        while state.pressure > 1.1:
            state = step(state, spec, CONFIG)
            steps += 1
        assert steps * CONFIG.dt == pytest.approx(0.18, abs=0.002)

    def test_ring_rise(self):
        tau = calibrate_tau(ChannelKind.RING, 1.0, 3.0, 0.38)
        assert tau == pytest.approx(0.1268, abs=5e-5)

    def test_degenerate_transition_rejected(self):
        with pytest.raises(InvalidParameterError):
            calibrate_tau(ChannelKind.RING, 2.0, 2.0, 0.5)

    def test_nonpositive_settle_rejected(self):
        with pytest.raises(InvalidParameterError):
            calibrate_tau(ChannelKind.RING, 1.0, 3.0, 0.0)
        with pytest.raises(InvalidParameterError):
            calibrate_tau(ChannelKind.RING, 1.0, 3.0, -1.0)


class TestStep:
    def test_fixed_point(self):
        state = PressureChannelState(pressure=2.0, commanded=2.0)
        assert step(state, SLEEVE, CONFIG).pressure == 2.0

    def test_sleeve_rise_time(self):
        state = PressureChannelState(pressure=1.0, commanded=3.0)
        for _ in range(720):
            state = step(state, SLEEVE, CONFIG)
        assert 2.9 <= state.pressure <= 3.0

    def test_sleeve_fall_time(self):
        state = PressureChannelState(pressure=3.0, commanded=1.0)
        for _ in range(180):
            state = step(state, SLEEVE, CONFIG)
        assert 1.0 <= state.pressure <= 1.1

    def test_command_clamped(self):
        state = PressureChannelState(pressure=3.0, commanded=99.0)
        for _ in range(5000):
            state = step(state, SLEEVE, CONFIG)
        assert state.pressure <= SLEEVE.max_pressure

    def test_time_advances(self):
        state = PressureChannelState(pressure=1.0, commanded=1.5, time=0.25)
        assert step(state, SLEEVE, CONFIG).time == pytest.approx(0.251)


class TestSettleTime:
    def test_ring_deflate(self):
        assert settle_time(RING, 3.0, 1.0) == pytest.approx(0.12, rel=0.10)

    def test_ring_inflate(self):
        assert settle_time(RING, 1.0, 3.0) == pytest.approx(0.38, rel=0.10)

    def test_sleeve_inflate(self):
        assert settle_time(SLEEVE, 1.0, 3.0) == pytest.approx(0.72, rel=0.10)

    def test_sleeve_deflate(self):
        assert settle_time(SLEEVE, 3.0, 1.0) == pytest.approx(0.18, rel=0.10)

    def test_from_equals_to_rejected(self):
        with pytest.raises(InvalidParameterError):
            settle_time(RING, 2.0, 2.0)

    def test_unreachable_target_rejected(self):
        with pytest.raises(InvalidParameterError):
            settle_time(SLEEVE, 1.0, 4.0)  # beyond sleeve max 3.5

    def test_calibration_round_trip_within_one_dt(self):
        # settle_time must recover the settle time used in calibrate_tau
        for spec, rise, fall in ((SLEEVE, 0.72, 0.18), (RING, 0.38, 0.12)):
            assert abs(settle_time(spec, 1.0, 3.0) - rise) <= CONFIG.dt + 1e-12
            assert abs(settle_time(spec, 3.0, 1.0) - fall) <= CONFIG.dt + 1e-12

    def test_fill_from_empty_regime_is_loosely_consistent(self):
        # The 0->1.5 psi fill reflects volume filling, a regime the
        # first-order model does not capture; measured deviations are 16%
        # (sleeve) and 31% (ring), so the loose band is 35%.
        assert settle_time(SLEEVE, 0.0, 1.5) == pytest.approx(0.86, rel=0.35)
        assert settle_time(RING, 0.0, 1.5) == pytest.approx(0.55, rel=0.35)


class TestSpecInvariants:
    def test_tau_ordering_enforced(self):
        with pytest.raises(InvalidParameterError):
            ChannelSpec(ChannelKind.RING, 5.0, tau_up=0.01, tau_down=0.02)
        with pytest.raises(InvalidParameterError):
            ChannelSpec(ChannelKind.RING, 5.0, tau_up=0.02, tau_down=0.0)

    def test_max_pressures(self):
        assert SLEEVE.max_pressure == 3.5
        assert RING.max_pressure == 5.0

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            PlantConfig(dt=0.0)
        with pytest.raises(InvalidParameterError):
            PlantConfig(sensor_noise_sd=-1.0)


command_lists = st.lists(st.floats(min_value=-2.0, max_value=8.0,
                                   allow_nan=False), min_size=1, max_size=200)


class TestProperties:
    @given(commands=command_lists,
           p0=st.floats(min_value=0.0, max_value=5.0, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_pressure_always_bounded(self, commands, p0):
        state = PressureChannelState(pressure=min(p0, RING.max_pressure),
                                     commanded=0.0)
        _, pressures = run_commands(state, RING, CONFIG, np.array(commands))
        assert np.all(pressures >= 0.0)
        assert np.all(pressures <= RING.max_pressure)

    @given(p0=st.floats(min_value=0.0, max_value=5.0, allow_nan=False),
           cmd=st.floats(min_value=0.0, max_value=5.0, allow_nan=False),
           n=st.integers(min_value=1, max_value=500))
    @settings(max_examples=100, deadline=None)
    def test_monotone_approach_under_constant_command(self, p0, cmd, n):
        state = PressureChannelState(pressure=p0, commanded=cmd)
        _, pressures = run_commands(state, RING, CONFIG, np.full(n, cmd))
        gaps = np.abs(pressures - min(cmd, RING.max_pressure))
        first_gap = abs(p0 - min(cmd, RING.max_pressure))
        all_gaps = np.concatenate([[first_gap], gaps])
        assert np.all(np.diff(all_gaps) <= 1e-15)

    @given(commands=command_lists)
    @settings(max_examples=50, deadline=None)
    def test_determinism(self, commands):
        state = PressureChannelState(pressure=1.0, commanded=1.0)
        cmds = np.array(commands)
        _, first = run_commands(state, SLEEVE, CONFIG, cmds)
        _, second = run_commands(state, SLEEVE, CONFIG, cmds)
        assert np.array_equal(first, second)


class TestKernelParity:
    @pytest.mark.skipif(not COMPILED_PLANT_CORE,
                        reason="compiled kernel not built")
    def test_compiled_matches_python_bitwise(self):
        from wraphaptics import _plant_core

        rng = np.random.default_rng(7)
        commands = rng.uniform(-1.0, 6.0, size=5000)
        out_c = np.empty_like(commands)
        out_py = np.empty_like(commands)
        final_c = _plant_core.step_sequence(
            1.3, commands, RING.tau_up, RING.tau_down, RING.max_pressure,
            0.001, out_c)
        final_py = _plant_core_py.step_sequence(
            1.3, commands, RING.tau_up, RING.tau_down, RING.max_pressure,
            0.001, out_py)
        assert final_c == final_py
        assert np.array_equal(out_c, out_py)


class TestSensorNoise:
    def test_zero_noise_reads_exact(self):
        from wraphaptics.pneumatics import measured_pressure

        state = PressureChannelState(pressure=2.2, commanded=2.2)
        rng = np.random.default_rng(0)
        assert measured_pressure(state, CONFIG, rng) == 2.2

    def test_seeded_noise_deterministic(self):
        from wraphaptics.pneumatics import measured_pressure

        config = PlantConfig(sensor_noise_sd=0.05)
        state = PressureChannelState(pressure=2.0, commanded=2.0)
        a = measured_pressure(state, config, np.random.default_rng(3))
        b = measured_pressure(state, config, np.random.default_rng(3))
        assert a == b
        assert a != 2.0


class TestChannel:
    def test_command_clamps_eagerly(self):
        ch = Channel.at_rest(SLEEVE, pressure=1.0)
        ch.command(10.0)
        assert ch.state.commanded == SLEEVE.max_pressure

    def test_run_returns_trace(self):
        ch = Channel.at_rest(RING, pressure=1.0)
        ch.command(3.0)
        trace = ch.run(CONFIG, 500)
        assert len(trace) == 500
        assert trace[-1] > 2.9
