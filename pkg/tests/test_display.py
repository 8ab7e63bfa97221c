import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wraphaptics import display
from wraphaptics.display import (DisplayGeometry, Layout, LayoutMode, Location,
                                 apply_frame, frame_from_json, frame_to_json,
                                 map_uncertainty, render)
from wraphaptics.errors import ConfigurationError, InvalidParameterError
from wraphaptics.pneumatics import Channel, ChannelSpec, PlantConfig


class TestGeometry:
    def test_circumference_computed(self):
        geo = DisplayGeometry(arm_radius_cm=4.0, length_cm=40.64)
        assert geo.circumference_cm == pytest.approx(2 * math.pi * 4.0, abs=1e-12)
        assert geo.cell_size_cm == 2.54

    def test_inconsistent_circumference_rejected(self):
        with pytest.raises(InvalidParameterError):
            DisplayGeometry(arm_radius_cm=4.0, length_cm=10.0,
                            circumference_cm=30.0)

    def test_explicit_consistent_circumference_accepted(self):
        geo = DisplayGeometry(arm_radius_cm=4.0, length_cm=10.0,
                              circumference_cm=2 * math.pi * 4.0)
        assert geo.circumference_cm == pytest.approx(8 * math.pi)


class TestMapUncertainty:
    def test_endpoints(self):
        assert map_uncertainty(0.0) == 1.0
        assert map_uncertainty(1.0) == 3.0

    def test_midpoint(self):
        assert map_uncertainty(0.5) == 2.0

    def test_clamps_out_of_range(self):
        assert map_uncertainty(-0.3) == 1.0
        assert map_uncertainty(1.7) == 3.0

    def test_nan_rejected(self):
        with pytest.raises(InvalidParameterError):
            map_uncertainty(float("nan"))


class TestRender:
    def test_global_zero_uncertainty(self):
        frame = render(Layout.global_(), [0.0, 0.0, 0.0])
        for loc in Location:
            assert frame.at(loc) == (1.0, 1.0, 1.0)

    def test_local_unit_vector(self):
        frame = render(Layout.local(), [1.0, 0.0, 0.0])
        assert frame.at(Location.BASE) == (3.0,)
        assert frame.at(Location.MIDDLE) == (1.0,)
        assert frame.at(Location.END_EFFECTOR) == (1.0,)

    def test_global_mixed_vector(self):
        # affine map per channel, the P_o=2 / P_H=2.75 trial pattern
        frame = render(Layout.global_(), [0.5, 0.875, 0.5])
        for loc in Location:
            assert frame.at(loc) == (2.0, 2.75, 2.0)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidParameterError):
            render(Layout.global_(), [0.1, 0.2])

    def test_local_layout_requires_one_channel_per_location(self):
        with pytest.raises(InvalidParameterError):
            Layout(mode=LayoutMode.LOCAL, num_channels=2)

    def test_global_identical_tuples_everywhere(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            u = rng.uniform(0, 1, 3)
            frame = render(Layout.global_(), u.tolist())
            tuples = {frame.at(loc) for loc in Location}
            assert len(tuples) == 1

    def test_argmax_preserved_for_1000_random_vectors(self):
        rng = np.random.default_rng(42)
        layout = Layout.global_()
        for _ in range(1000):
            u = rng.uniform(0, 1, 3)
            frame = render(layout, u.tolist())
            assert int(np.argmax(frame.at(Location.BASE))) == int(np.argmax(u))

    @given(u=st.lists(st.floats(0, 1, allow_nan=False), min_size=3, max_size=3),
           j=st.integers(0, 2), v=st.floats(0, 1, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_local_independence(self, u, j, v):
        # pressure at location i is independent of u_j for j != i
        layout = Layout.local()
        before = render(layout, u)
        altered = list(u)
        altered[j] = v
        after = render(layout, altered)
        for i, loc in enumerate(layout.locations):
            if i != j:
                assert before.at(loc) == after.at(loc)


class TestApplyFrame:
    def _channels(self):
        spec = ChannelSpec.ring()
        layout = Layout.local()
        return {(loc, 0): Channel.at_rest(spec, pressure=1.0)
                for loc in layout.locations}

    def test_sets_commands(self):
        channels = self._channels()
        frame = render(Layout.local(), [0.0, 0.0, 0.0])
        apply_frame(frame, channels)
        assert all(ch.state.commanded == 1.0 for ch in channels.values())

    def test_excess_command_clamped_at_spec_max(self):
        channels = self._channels()
        frame = display.RenderFrame(time=0.0, pressures=(
            (Location.BASE, (99.0,)), (Location.MIDDLE, (1.0,)),
            (Location.END_EFFECTOR, (1.0,))))
        apply_frame(frame, channels)
        assert channels[(Location.BASE, 0)].state.commanded == 5.0

    def test_missing_channel_is_configuration_error(self):
        channels = self._channels()
        del channels[(Location.MIDDLE, 0)]
        frame = render(Layout.local(), [0.0, 0.0, 0.0])
        with pytest.raises(ConfigurationError):
            apply_frame(frame, channels)

    def test_plant_tracks_alternating_frames(self):
        # 1 Hz alternation between 1 and 3 psi; sleeve settles within 95%
        # each half cycle (0.72 s and 0.18 s are both < 1 s)
        spec = ChannelSpec.sleeve()
        config = PlantConfig()
        channel = Channel.at_rest(spec, pressure=1.0)
        channels = {(loc, i): channel for loc in Location for i in range(3)}
        layout = Layout.global_()
        for cycle in range(4):
            target_u = 1.0 if cycle % 2 == 0 else 0.0
            frame = render(layout, [target_u] * 3, time=float(cycle))
            apply_frame(frame, channels)
            channel.run(config, int(1.0 / config.dt))
            target = map_uncertainty(target_u)
            assert abs(channel.state.pressure - target) <= 0.05 * 2.0


class TestFrameJson:
    def test_schema_shape(self):
        frame = render(Layout.global_(), [0.5, 0.875, 0.5], time=1.25)
        payload = json.loads(frame_to_json(frame))
        assert payload["t"] == 1.25
        assert [loc["id"] for loc in payload["locations"]] == [
            "base", "middle", "end_effector"]
        assert payload["locations"][0]["pressures"] == [2.0, 2.75, 2.0]

    def test_round_trip(self):
        frame = render(Layout.local(), [0.25, 1.0, 0.0], time=3.5)
        again = frame_from_json(frame_to_json(frame))
        assert again == frame

    def test_serialization_is_byte_stable(self):
        a = frame_to_json(render(Layout.global_(), [0.1, 0.2, 0.3], time=0.5))
        b = frame_to_json(render(Layout.global_(), [0.1, 0.2, 0.3], time=0.5))
        assert a == b
