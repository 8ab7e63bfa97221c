"""Pressure dynamics of wrapped-display channels.

Each channel is an asymmetric first-order lag: the pressure relaxes toward
the commanded value with a rise time constant when inflating and a faster
fall constant when deflating. Time constants are calibrated from measured
step-response times under a 95%-of-step settling convention, which makes
the calibration closed form (tau = settle_time / ln 20).

The step loop is provided by a compiled kernel when available, with a
bit-identical pure-Python fallback selected at import.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import InvalidParameterError

try:
    from ._plant_core import step_sequence as _step_sequence

    COMPILED_PLANT_CORE = True
except ImportError:
    from ._plant_core_py import step_sequence as _step_sequence

    COMPILED_PLANT_CORE = False

LN20 = math.log(20.0)

# Measured step-response times and pressure limits for the two pouch
# geometries (seconds, psi gauge).
SLEEVE_RISE_1_TO_3_S = 0.72
SLEEVE_FALL_3_TO_1_S = 0.18
SLEEVE_MAX_PSI = 3.5
RING_RISE_1_TO_3_S = 0.38
RING_FALL_3_TO_1_S = 0.12
RING_MAX_PSI = 5.0

# Fill-from-empty times (crossing 1.5 psi from fully deflated). These sit
# in a volume-filling regime the first-order model does not capture; they
# are checked only loosely in tests, never used for calibration.
SLEEVE_FILL_S = 0.86
RING_FILL_S = 0.55

_SETTLE_TIME_CAP_S = 60.0


class ChannelKind(Enum):
    SLEEVE = "sleeve"
    RING = "ring"


def calibrate_tau(kind: ChannelKind, from_psi: float, to_psi: float,
                  settle_time: float) -> float:
    """Time constant that makes a first-order response from ``from_psi``
    toward ``to_psi`` enter the 95%-of-step band exactly at ``settle_time``.
    """
    if settle_time <= 0.0:
        raise InvalidParameterError(f"settle_time must be positive, got {settle_time}")
    if from_psi == to_psi:
        raise InvalidParameterError("transition requires from_psi != to_psi")
    if not isinstance(kind, ChannelKind):
        raise InvalidParameterError(f"unknown channel kind: {kind!r}")
    return settle_time / LN20


@dataclass(frozen=True)
class ChannelSpec:
    """Static parameters of one display degree of freedom."""

    kind: ChannelKind
    max_pressure: float
    tau_up: float
    tau_down: float
    ambient_pressure: float = 0.0

    def __post_init__(self):
        if not self.tau_up > self.tau_down > 0.0:
            raise InvalidParameterError(
                f"require tau_up > tau_down > 0, got {self.tau_up}, {self.tau_down}")
        if self.max_pressure <= 0.0:
            raise InvalidParameterError("max_pressure must be positive")

    @classmethod
    def sleeve(cls) -> "ChannelSpec":
        return cls(
            kind=ChannelKind.SLEEVE,
            max_pressure=SLEEVE_MAX_PSI,
            tau_up=calibrate_tau(ChannelKind.SLEEVE, 1.0, 3.0, SLEEVE_RISE_1_TO_3_S),
            tau_down=calibrate_tau(ChannelKind.SLEEVE, 3.0, 1.0, SLEEVE_FALL_3_TO_1_S),
        )

    @classmethod
    def ring(cls) -> "ChannelSpec":
        return cls(
            kind=ChannelKind.RING,
            max_pressure=RING_MAX_PSI,
            tau_up=calibrate_tau(ChannelKind.RING, 1.0, 3.0, RING_RISE_1_TO_3_S),
            tau_down=calibrate_tau(ChannelKind.RING, 3.0, 1.0, RING_FALL_3_TO_1_S),
        )


@dataclass(frozen=True)
class PressureChannelState:
    """Instantaneous state of one channel (psi gauge, seconds)."""

    pressure: float
    commanded: float
    time: float = 0.0


@dataclass(frozen=True)
class PlantConfig:
    dt: float = 0.001
    seed: int = 0
    sensor_noise_sd: float = 0.0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise InvalidParameterError("dt must be positive")
        if self.sensor_noise_sd < 0.0:
            raise InvalidParameterError("sensor_noise_sd must be non-negative")


def step(state: PressureChannelState, spec: ChannelSpec,
         config: PlantConfig) -> PressureChannelState:
    """One explicit-Euler step of the asymmetric lag.

    The commanded pressure is clamped to [0, max_pressure] before
    integration; the relaxation factor is capped at 1 so pressure can
    never overshoot the command regardless of dt.
    """
    # Same arithmetic, in the same order, as the step_sequence kernels.
    cmd = state.commanded
    if cmd < 0.0:
        cmd = 0.0
    elif cmd > spec.max_pressure:
        cmd = spec.max_pressure
    tau = spec.tau_up if cmd > state.pressure else spec.tau_down
    alpha = config.dt / tau
    if alpha > 1.0:
        alpha = 1.0
    pressure = state.pressure + alpha * (cmd - state.pressure)
    return PressureChannelState(pressure=pressure, commanded=state.commanded,
                                time=state.time + config.dt)


def run_commands(state: PressureChannelState, spec: ChannelSpec,
                 config: PlantConfig,
                 commands: np.ndarray) -> tuple[PressureChannelState, np.ndarray]:
    """Step the channel through a per-step command sequence.

    Returns the final state and the pressure after every step. Dispatches
    to the compiled kernel when it was built.
    """
    commands = np.ascontiguousarray(commands, dtype=np.float64)
    out = np.empty_like(commands)
    final = _step_sequence(state.pressure, commands, spec.tau_up, spec.tau_down,
                           spec.max_pressure, config.dt, out)
    last_cmd = float(commands[-1]) if len(commands) else state.commanded
    new_state = PressureChannelState(pressure=float(final), commanded=last_cmd,
                                     time=state.time + len(commands) * config.dt)
    return new_state, out


def settle_time(spec: ChannelSpec, from_psi: float, to_psi: float,
                config: PlantConfig | None = None) -> float:
    """Simulated time until the pressure is within 5% of the step magnitude
    of ``to_psi``, starting from ``from_psi`` with a constant command."""
    if from_psi == to_psi:
        raise InvalidParameterError("settle_time requires from_psi != to_psi")
    for name, value in (("from_psi", from_psi), ("to_psi", to_psi)):
        if not 0.0 <= value <= spec.max_pressure:
            raise InvalidParameterError(
                f"{name}={value} outside [0, {spec.max_pressure}] psi")
    config = config or PlantConfig()
    band = 0.05 * abs(to_psi - from_psi)

    state = PressureChannelState(pressure=from_psi, commanded=to_psi)
    steps_done = 0
    chunk = 4096
    commands = np.full(chunk, to_psi)
    while steps_done * config.dt < _SETTLE_TIME_CAP_S:
        state, pressures = run_commands(state, spec, config, commands)
        inside = np.nonzero(np.abs(pressures - to_psi) <= band)[0]
        if inside.size:
            return (steps_done + int(inside[0]) + 1) * config.dt
        steps_done += chunk
    raise InvalidParameterError("channel did not settle within the simulation cap")


def measured_pressure(state: PressureChannelState, config: PlantConfig,
                      rng: np.random.Generator) -> float:
    """Sensor reading: true pressure plus optional Gaussian noise."""
    if config.sensor_noise_sd == 0.0:
        return state.pressure
    return state.pressure + config.sensor_noise_sd * rng.standard_normal()


@dataclass
class Channel:
    """A channel spec plus its evolving state; the unit the display and
    service modules command and step."""

    spec: ChannelSpec
    state: PressureChannelState

    @classmethod
    def at_rest(cls, spec: ChannelSpec, pressure: float = 0.0) -> "Channel":
        return cls(spec=spec, state=PressureChannelState(pressure=pressure,
                                                         commanded=pressure))

    def command(self, psi: float) -> None:
        clamped = min(max(psi, 0.0), self.spec.max_pressure)
        self.state = replace(self.state, commanded=clamped)

    def step(self, config: PlantConfig) -> PressureChannelState:
        self.state = step(self.state, self.spec, config)
        return self.state

    def run(self, config: PlantConfig, n_steps: int) -> np.ndarray:
        """Hold the current command for n_steps; returns the pressure trace."""
        commands = np.full(n_steps, self.state.commanded)
        self.state, pressures = run_commands(self.state, self.spec, config, commands)
        return pressures
