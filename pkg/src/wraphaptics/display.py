"""Wrapped display assemblies: geometry, Local/Global layouts, and the
uncertainty-to-pressure mapping.

Uncertainty in [0, 1] maps affinely onto 1-3 psi (deflated to inflated).
A Local layout gives each arm location its own channel; a Global layout
renders every channel at every location.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .errors import ConfigurationError, InvalidParameterError
from .pneumatics import Channel

CELL_SIZE_CM = 2.54
MIN_RENDER_PSI = 1.0
MAX_RENDER_PSI = 3.0


class LayoutMode(Enum):
    LOCAL = "local"
    GLOBAL = "global"


class Location(Enum):
    BASE = "base"
    MIDDLE = "middle"
    END_EFFECTOR = "end_effector"


DEFAULT_LOCATIONS = (Location.BASE, Location.MIDDLE, Location.END_EFFECTOR)

# Geometric metadata only; does not enter the dynamics.
RING_SEPARATION_CM = 1.9
MAX_MOUNT_CONTRACTION = 0.10


@dataclass(frozen=True)
class DisplayGeometry:
    """Pouch-array geometry of one wrapped display."""

    arm_radius_cm: float
    length_cm: float
    rings_per_group: int = 3
    cell_size_cm: float = CELL_SIZE_CM
    circumference_cm: float | None = None

    def __post_init__(self):
        if self.cell_size_cm <= 0.0:
            raise InvalidParameterError("cell_size_cm must be positive")
        if self.arm_radius_cm <= 0.0:
            raise InvalidParameterError("arm_radius_cm must be positive")
        expected = 2.0 * math.pi * self.arm_radius_cm
        if self.circumference_cm is None:
            object.__setattr__(self, "circumference_cm", expected)
        elif abs(self.circumference_cm - expected) > 1e-9:
            raise InvalidParameterError(
                f"circumference {self.circumference_cm} != 2*pi*R = {expected}")


@dataclass(frozen=True)
class Layout:
    """Placement of K channels over arm locations."""

    mode: LayoutMode
    num_channels: int
    locations: tuple[Location, ...] = DEFAULT_LOCATIONS

    def __post_init__(self):
        if self.num_channels < 1:
            raise InvalidParameterError("layout needs at least one channel")
        if self.mode is LayoutMode.LOCAL and len(self.locations) != self.num_channels:
            raise InvalidParameterError(
                "a Local layout carries exactly one channel per location")

    @classmethod
    def local(cls, locations: Sequence[Location] = DEFAULT_LOCATIONS) -> "Layout":
        return cls(mode=LayoutMode.LOCAL, num_channels=len(locations),
                   locations=tuple(locations))

    @classmethod
    def global_(cls, num_channels: int = 3,
                locations: Sequence[Location] = DEFAULT_LOCATIONS) -> "Layout":
        return cls(mode=LayoutMode.GLOBAL, num_channels=num_channels,
                   locations=tuple(locations))

    def channels_at(self, location: Location) -> tuple[int, ...]:
        if location not in self.locations:
            raise InvalidParameterError(f"{location} not part of this layout")
        if self.mode is LayoutMode.GLOBAL:
            return tuple(range(self.num_channels))
        return (self.locations.index(location),)


@dataclass(frozen=True)
class RenderFrame:
    """Per-location per-ring target pressures at one instant."""

    time: float
    pressures: tuple[tuple[Location, tuple[float, ...]], ...]

    def at(self, location: Location) -> tuple[float, ...]:
        for loc, values in self.pressures:
            if loc is location:
                return values
        raise InvalidParameterError(f"{location} not in frame")


def map_uncertainty(u: float) -> float:
    """Affine uncertainty-to-pressure map: 0 -> 1 psi, 1 -> 3 psi.

    Inputs outside [0, 1] are clamped (learner normalization can
    transiently overshoot)."""
    if math.isnan(u):
        raise InvalidParameterError("uncertainty must not be NaN")
    u = min(max(u, 0.0), 1.0)
    return MIN_RENDER_PSI + (MAX_RENDER_PSI - MIN_RENDER_PSI) * u


def render(layout: Layout, channel_uncertainties: Sequence[float],
           time: float = 0.0) -> RenderFrame:
    """Turn per-channel uncertainties into per-location target pressures."""
    if len(channel_uncertainties) != layout.num_channels:
        raise InvalidParameterError(
            f"expected {layout.num_channels} uncertainties, "
            f"got {len(channel_uncertainties)}")
    mapped = tuple(map_uncertainty(u) for u in channel_uncertainties)
    pressures = tuple(
        (loc, tuple(mapped[c] for c in layout.channels_at(loc)))
        for loc in layout.locations
    )
    return RenderFrame(time=time, pressures=pressures)


def apply_frame(frame: RenderFrame,
                channels: Mapping[tuple[Location, int], Channel]) -> None:
    """Command the plant channels named by the frame; pressures then evolve
    via pneumatics stepping (commands are clamped at each channel's limit)."""
    for location, targets in frame.pressures:
        for ring_index, psi in enumerate(targets):
            key = (location, ring_index)
            if key not in channels:
                raise ConfigurationError(f"no plant channel for {key}")
            channels[key].command(psi)


def frame_to_json(frame: RenderFrame) -> str:
    """Canonical JSON for the WebSocket frame schema:
    {"t": number, "locations": [{"id": ..., "pressures": [...]}]}."""
    payload = frame_to_payload(frame)
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def frame_to_payload(frame: RenderFrame) -> dict:
    return {
        "t": frame.time,
        "locations": [
            {"id": loc.value, "pressures": list(values)}
            for loc, values in frame.pressures
        ],
    }


def frame_from_payload(payload: Mapping) -> RenderFrame:
    pressures = tuple(
        (Location(entry["id"]), tuple(float(p) for p in entry["pressures"]))
        for entry in payload["locations"]
    )
    return RenderFrame(time=float(payload["t"]), pressures=pressures)


def frame_from_json(text: str) -> RenderFrame:
    return frame_from_payload(json.loads(text))
