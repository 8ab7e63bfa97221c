"""Kinesthetic teaching sessions over defined tasks.

A session trains an ensemble on expert demonstrations with withheld
segments, lets a teacher (scripted policy or streamed UI poses) traverse
the task while uncertainty is rendered to the display at 20 Hz, then
retrains on the teacher's second demonstration and scores it: Teaching
Time, Correct Segment, and the two Improvement metrics (uncertainty
reduction and welding feature error against the maximum possible error).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import display, learner
from .display import Layout, Location
from .errors import ConfigurationError, InvalidParameterError
from .learner import (ACTION_DT, ArmState, DemoLabel, Demonstration,
                      EnsembleModel, TrainConfig, demonstration_from_poses)
from .pneumatics import Channel, ChannelSpec, PlantConfig

FRAME_PERIOD_S = 0.05  # 20 Hz render cadence
IDLE_SPEED_M_S = 0.001
PLANT_REST_PSI = 1.0  # deflated-but-ready baseline, maps to 0% uncertainty

N_EXPERT_DEMOS = 5
_DENSE_PATH_SAMPLES = 1024


class TaskKind(Enum):
    PATH = "path"
    WELDING = "welding"


class FeedbackMode(Enum):
    NONE = "none"
    GUI = "gui"
    LOCAL = "local"
    GLOBAL = "global"


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    known: bool


@dataclass(frozen=True)
class WeldFeatureTargets:
    """Target feature values: edge distance (m), height (m), orientation (rad)."""

    edge_distance: float
    height: float
    orientation: float

    def as_array(self) -> np.ndarray:
        return np.array([self.edge_distance, self.height, self.orientation])


@dataclass(frozen=True)
class WorkspaceBounds:
    x: tuple[float, float] = (-0.5, 3.5)
    y: tuple[float, float] = (-0.5, 1.5)
    theta: tuple[float, float] = (-math.pi, math.pi)


@dataclass(frozen=True)
class TaskSpec:
    name: str
    kind: TaskKind
    waypoints: tuple[ArmState, ...]
    segments: tuple[Segment, ...]
    path_length: float
    duration: float
    feature_targets: WeldFeatureTargets | None = None
    e_max: float | None = None
    workspace: WorkspaceBounds = WorkspaceBounds()

    def __post_init__(self):
        if self.path_length <= 0.0:
            raise InvalidParameterError("path_length must be positive")
        segs = sorted(self.segments, key=lambda s: s.start)
        edge = 0.0
        for seg in segs:
            if abs(seg.start - edge) > 1e-9 or seg.end <= seg.start:
                raise InvalidParameterError("segments must partition [0, 1]")
            edge = seg.end
        if abs(edge - 1.0) > 1e-9:
            raise InvalidParameterError("segments must cover the whole path")
        if self.kind is TaskKind.WELDING:
            if self.feature_targets is None:
                raise InvalidParameterError("welding task needs feature targets")
            if self.e_max is None or self.e_max <= 0.0:
                raise InvalidParameterError("welding task needs e_max > 0")

    def unknown_regions(self) -> tuple[tuple[float, float], ...]:
        return tuple((s.start, s.end) for s in self.segments if not s.known)


# ---------------------------------------------------------------------------
# Nominal-path geometry


class _Path:
    """Dense polyline over the task waypoints with arc-length parameterization."""

    def __init__(self, task: TaskSpec):
        pts = np.array([[w.x, w.y] for w in task.waypoints])
        thetas = np.unwrap(np.array([w.theta for w in task.waypoints]))
        if len(pts) == 1:
            pts = np.vstack([pts, pts])
            thetas = np.append(thetas, thetas[-1])
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        self.total = float(s[-1]) if s[-1] > 0 else 1.0
        self.fractions = s / (s[-1] if s[-1] > 0 else 1.0)
        self.pts = pts
        self.thetas = thetas
        dense_f = np.linspace(0.0, 1.0, _DENSE_PATH_SAMPLES)
        self.dense_f = dense_f
        self.dense_xy = np.column_stack([
            np.interp(dense_f, self.fractions, pts[:, 0]),
            np.interp(dense_f, self.fractions, pts[:, 1]),
        ])

    def pose_at(self, frac: float) -> ArmState:
        frac = min(max(frac, 0.0), 1.0)
        x = float(np.interp(frac, self.fractions, self.pts[:, 0]))
        y = float(np.interp(frac, self.fractions, self.pts[:, 1]))
        th = float(np.interp(frac, self.fractions, self.thetas))
        return ArmState(x, y, th)

    def fraction_at(self, x: float, y: float) -> float:
        d = np.linalg.norm(self.dense_xy - np.array([x, y]), axis=1)
        return float(self.dense_f[int(np.argmin(d))])


_PATH_CACHE: dict[TaskSpec, _Path] = {}


def _path_of(task: TaskSpec) -> _Path:
    if task not in _PATH_CACHE:
        _PATH_CACHE[task] = _Path(task)
    return _PATH_CACHE[task]


def pose_at_fraction(task: TaskSpec, frac: float) -> ArmState:
    if task.kind is TaskKind.WELDING:
        return task.waypoints[0]
    return _path_of(task).pose_at(frac)


def fraction_at_pose(task: TaskSpec, state: ArmState) -> float:
    """Project a pose onto the nominal path; welding tasks have no spatial
    progress so callers must track the time fraction themselves."""
    if task.kind is TaskKind.WELDING:
        raise InvalidParameterError("welding progress is time-based, not spatial")
    return _path_of(task).fraction_at(state.x, state.y)


def nominal_states(task: TaskSpec, n: int = 200) -> np.ndarray:
    """States sampled uniformly along the nominal path (for U_1/U_2 means)."""
    return np.array([pose_at_fraction(task, f).as_array()
                     for f in np.linspace(0.0, 1.0, n)])


# ---------------------------------------------------------------------------
# Built-in tasks


def three_segment_task(name: str = "three_segment",
                       detour_radius: float = 0.5) -> TaskSpec:
    """Straight-detour-straight path; the detour (middle segment) is the
    part withheld from the expert training set."""
    waypoints = []
    for x in np.linspace(0.0, 1.0, 21):
        waypoints.append(ArmState(float(x), 0.0, 0.0))
    cx, r = 1.0 + detour_radius, detour_radius
    for phi in np.linspace(math.pi, 0.0, 41)[1:]:
        x = cx + r * math.cos(phi)
        y = r * math.sin(phi)
        heading = math.atan2(-math.cos(phi), math.sin(phi))
        waypoints.append(ArmState(float(x), float(y), float(heading)))
    for x in np.linspace(1.0 + 2 * r, 2.0 + 2 * r, 21)[1:]:
        waypoints.append(ArmState(float(x), 0.0, 0.0))

    arc = math.pi * r
    total = 1.0 + arc + 1.0
    b0, b1 = 1.0 / total, (1.0 + arc) / total
    segments = (
        Segment(0.0, b0, known=True),
        Segment(b0, b1, known=False),
        Segment(b1, 1.0, known=True),
    )
    return TaskSpec(name=name, kind=TaskKind.PATH, waypoints=tuple(waypoints),
                    segments=segments, path_length=total,
                    duration=total / 0.5)


def welding_task(name: str = "welding",
                 targets: WeldFeatureTargets | None = None,
                 path_length: float = 1.0, duration: float = 10.0,
                 workspace: WorkspaceBounds | None = None) -> TaskSpec:
    """Mock welding task: hold the three features (edge distance, height,
    orientation) at their targets while progress flows along the seam.

    Poses are feature-space coordinates (x = edge distance, y = height,
    theta = orientation); e_max integrates the largest per-feature
    deviation the workspace allows over the nominal path length."""
    targets = targets or WeldFeatureTargets(edge_distance=0.05, height=0.02,
                                            orientation=0.0)
    workspace = workspace or WorkspaceBounds(x=(0.0, 0.25), y=(0.0, 0.2),
                                             theta=(-math.pi, math.pi))
    max_dev = (
        max(abs(workspace.x[0] - targets.edge_distance),
            abs(workspace.x[1] - targets.edge_distance))
        + max(abs(workspace.y[0] - targets.height),
              abs(workspace.y[1] - targets.height))
        + max(abs(_wrap(workspace.theta[0] - targets.orientation)),
              abs(_wrap(workspace.theta[1] - targets.orientation)))
    )
    segments = tuple(Segment(i / 3.0, (i + 1) / 3.0, known=False) for i in range(3))
    pose = ArmState(targets.edge_distance, targets.height, targets.orientation)
    return TaskSpec(name=name, kind=TaskKind.WELDING, waypoints=(pose,),
                    segments=segments, path_length=path_length,
                    duration=duration, feature_targets=targets,
                    e_max=max_dev, workspace=workspace)


_wrap = learner.wrap_angle

BUILTIN_TASKS: dict[str, Callable[[], TaskSpec]] = {
    "three_segment": three_segment_task,
    "welding": welding_task,
}


# ---------------------------------------------------------------------------
# Expert demonstrations


def expert_demo(task: TaskSpec, seed: int, noise_sd: float = 0.004,
                label: DemoLabel = DemoLabel.EXPERT) -> Demonstration:
    """One scripted expert traversal of the full nominal path."""
    rng = np.random.default_rng(seed)
    n = max(int(round(task.duration / ACTION_DT)) + 1, 2)
    times = np.arange(n) * ACTION_DT
    fracs = np.linspace(0.0, 1.0, n)
    poses = []
    for f in fracs:
        p = pose_at_fraction(task, float(f))
        poses.append(ArmState(p.x + rng.normal(0.0, noise_sd),
                              p.y + rng.normal(0.0, noise_sd),
                              p.theta + rng.normal(0.0, noise_sd)))
    return demonstration_from_poses(times, poses, label=label)


def filter_to_known(task: TaskSpec, demo: Demonstration) -> Demonstration:
    """Drop samples whose state projects into a withheld segment."""
    known = [(s.start, s.end) for s in task.segments if s.known]
    kept = []
    for sample in demo.samples:
        frac = fraction_at_pose(task, sample.state)
        if any(a <= frac <= b for a, b in known):
            kept.append(sample)
    return Demonstration(samples=tuple(kept), label=demo.label)


def expert_training_demos(task: TaskSpec, seed: int,
                          n: int = N_EXPERT_DEMOS,
                          noise_sd: float = 0.004) -> list[Demonstration]:
    """Expert demonstrations with the unknown segments removed, mirroring
    training the robot without the withheld parts of the task."""
    demos = []
    for i in range(n):
        full = expert_demo(task, seed=seed * 7919 + i, noise_sd=noise_sd)
        demos.append(filter_to_known(task, full))
    return demos


# ---------------------------------------------------------------------------
# Scripted uncertainty schedule (welding prompts)


@dataclass(frozen=True)
class UncertaintySchedule:
    """Seeded permutation assigning each welding feature to one path third."""

    assignment: tuple[int, int, int]  # feature index per third
    seed: int

    def feature_vector_at(self, fraction: float) -> tuple[float, float, float]:
        fraction = min(max(fraction, 0.0), 1.0)
        third = min(int(fraction * 3.0), 2)
        vec = [0.0, 0.0, 0.0]
        vec[self.assignment[third]] = 1.0
        return tuple(vec)

    def active_feature(self, fraction: float) -> int:
        fraction = min(max(fraction, 0.0), 1.0)
        return self.assignment[min(int(fraction * 3.0), 2)]


def uncertainty_schedule(task: TaskSpec, seed: int) -> UncertaintySchedule:
    if task.kind is not TaskKind.WELDING:
        raise InvalidParameterError("uncertainty schedules apply to welding tasks")
    rng = np.random.default_rng(seed)
    perm = tuple(int(i) for i in rng.permutation(3))
    return UncertaintySchedule(assignment=perm, seed=seed)


# ---------------------------------------------------------------------------
# Feedback rendering (shared by scripted sessions and the service)


def make_channels(mode: FeedbackMode) -> tuple[list[Channel], dict]:
    """Three ring-display DoF channels plus the (location, ring) wiring for
    the given layout: Local shares one DoF across a location's rings, Global
    shares DoF j across ring j of every location."""
    dof = [Channel.at_rest(ChannelSpec.ring(), pressure=PLANT_REST_PSI)
           for _ in range(3)]
    wiring: dict[tuple[Location, int], Channel] = {}
    locations = display.DEFAULT_LOCATIONS
    if mode is FeedbackMode.LOCAL:
        for i, loc in enumerate(locations):
            wiring[(loc, 0)] = dof[i]
    else:
        for loc in locations:
            for j in range(3):
                wiring[(loc, j)] = dof[j]
    return dof, wiring


class FeedbackRenderer:
    """Incremental uncertainty-to-frame pipeline, throttled to 20 Hz of
    sample time so replays are deterministic."""

    def __init__(self, mode: FeedbackMode, task: TaskSpec,
                 model: EnsembleModel | None = None,
                 schedule: UncertaintySchedule | None = None,
                 plant_config: PlantConfig | None = None,
                 period: float = FRAME_PERIOD_S):
        if mode is not FeedbackMode.NONE and model is None and schedule is None:
            raise ConfigurationError("feedback needs an ensemble or a schedule")
        self.mode = mode
        self.task = task
        self.model = model
        self.schedule = schedule
        self.plant_config = plant_config or PlantConfig()
        self.period = period
        self.layout = (Layout.local() if mode is FeedbackMode.LOCAL
                       else Layout.global_())
        self.dof, self.wiring = make_channels(mode)
        self._last_frame_t: float | None = None
        self._last_step_t: float | None = None

    def uncertainty_vector(self, pose: ArmState, fraction: float) -> np.ndarray:
        if self.schedule is not None:
            return np.asarray(self.schedule.feature_vector_at(fraction))
        if self.task.kind is TaskKind.WELDING:
            return learner.feature_uncertainty(self.model, pose)
        u = learner.uncertainty(self.model, pose)
        return np.full(3, u)

    def feed(self, t: float, pose: ArmState,
             fraction: float | None = None) -> dict | None:
        """Advance the plant to time t and emit a frame payload when one is
        due. GUI frames carry a percent; haptic frames carry pressures."""
        if self.mode is FeedbackMode.NONE:
            return None
        if fraction is None:
            fraction = fraction_at_pose(self.task, pose)
        self._advance_plant(t)
        if self._last_frame_t is not None and t - self._last_frame_t < self.period - 1e-9:
            return None
        self._last_frame_t = t
        u_vec = self.uncertainty_vector(pose, fraction)
        if self.mode is FeedbackMode.GUI:
            if self.task.kind is TaskKind.WELDING:
                payload = {"t": t, "percent": [100.0 * float(u) for u in u_vec]}
            else:
                payload = {"t": t, "percent": 100.0 * float(u_vec[0])}
            return payload
        frame = display.render(self.layout, u_vec.tolist(), time=t)
        display.apply_frame(frame, self.wiring)
        return display.frame_to_payload(frame)

    def _advance_plant(self, t: float) -> None:
        if self._last_step_t is None:
            self._last_step_t = t
            return
        n_steps = int((t - self._last_step_t) / self.plant_config.dt + 1e-9)
        if n_steps > 0:
            for ch in self.dof:
                ch.run(self.plant_config, n_steps)
            self._last_step_t += n_steps * self.plant_config.dt

    def perceived(self, third: int | None = None) -> float | np.ndarray | None:
        """What a teacher feels right now: actual DoF pressures for haptic
        modes (Local exposes only the location the hand is at)."""
        if self.mode in (FeedbackMode.NONE, FeedbackMode.GUI):
            return None
        pressures = np.array([ch.state.pressure for ch in self.dof])
        if self.mode is FeedbackMode.LOCAL and third is not None:
            return pressures[min(max(third, 0), 2)]
        return pressures


# ---------------------------------------------------------------------------
# Scripted teachers


@dataclass
class FixedRegionTeacher:
    """Open-loop teacher: traverses the full path for demo 1, then re-teaches
    preset path-fraction regions regardless of feedback."""

    regions: tuple[tuple[float, float], ...] = ((0.0, 0.4),)
    noise_sd: float = 0.0

    def select_regions(self, perceived, rng) -> tuple[tuple[float, float], ...]:
        return self.regions


@dataclass
class FeedbackIgnoringTeacher:
    """Re-teaches a window of fixed arc budget placed blindly (seeded)."""

    budget_fraction: float = 0.4
    noise_sd: float = 0.0

    def select_regions(self, perceived, rng) -> tuple[tuple[float, float], ...]:
        start = float(rng.uniform(0.0, 1.0 - self.budget_fraction))
        return ((start, start + self.budget_fraction),)


@dataclass
class PressureReactiveTeacher:
    """Re-teaches where the perceived pressure exceeded the threshold,
    centering the same arc budget on the hot region. Perceived GUI percents
    are fed to the teacher on the equivalent psi scale."""

    threshold_psi: float = 2.0
    budget_fraction: float = 0.4
    noise_sd: float = 0.0

    def select_regions(self, perceived, rng) -> tuple[tuple[float, float], ...]:
        hot = [frac for frac, value in perceived
               if value is not None and value > self.threshold_psi]
        if not hot:
            start = float(rng.uniform(0.0, 1.0 - self.budget_fraction))
            return ((start, start + self.budget_fraction),)
        center = float(np.mean(hot))
        half = self.budget_fraction / 2.0
        start = min(max(center - half, 0.0), 1.0 - self.budget_fraction)
        return ((start, start + self.budget_fraction),)


def _scalar_feedback(value) -> float:
    if isinstance(value, np.ndarray):
        return float(value.max())
    return float(value)


@dataclass
class TruncatingTeacher(FixedRegionTeacher):
    """Ends demo 1 early; used to exercise the truncated-session flag."""

    stop_at_fraction: float = 0.5


# ---------------------------------------------------------------------------
# Session records and metrics


@dataclass(frozen=True)
class FrameEvent:
    time: float
    payload: dict


@dataclass(frozen=True)
class SessionRecord:
    task_name: str
    feedback: FeedbackMode
    seed: int
    demos: tuple[Demonstration, ...]
    frames: tuple[FrameEvent, ...]
    wall_times: tuple[float, ...]
    truncated: bool = False


@dataclass(frozen=True)
class Metrics:
    teaching_time: float
    correct_segment: float | None = None
    improvement_u: float | None = None
    improvement_weld: float | None = None
    u1: float | None = None
    u2: float | None = None
    e_init: float | None = None
    e_final: float | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def correct_segment(demo2: Demonstration,
                    regions: Sequence[tuple[float, float]],
                    task: TaskSpec) -> float:
    """Percent of demo-2 arc length spent inside the given path regions."""
    if not regions:
        raise InvalidParameterError("uncertain region must be nonempty")
    total = 0.0
    inside = 0.0
    samples = demo2.samples
    for a, b in zip(samples, samples[1:]):
        ds = math.hypot(b.state.x - a.state.x, b.state.y - a.state.y)
        if ds == 0.0:
            continue
        frac = fraction_at_pose(task, ArmState(
            0.5 * (a.state.x + b.state.x), 0.5 * (a.state.y + b.state.y)))
        total += ds
        if any(lo <= frac <= hi for lo, hi in regions):
            inside += ds
    if total == 0.0:
        return 0.0
    return 100.0 * inside / total


def improvement_uncertainty(u1: float, u2: float) -> float:
    """Percent reduction in mean uncertainty after the second demonstration."""
    if u1 <= 0.0:
        raise InvalidParameterError("U_1 must be positive")
    return (u1 - u2) / u1 * 100.0


def weld_error(trajectory: Demonstration, task: TaskSpec) -> float:
    """Progress-normalized integral of summed absolute feature deviations
    (orientation deviation angle-wrapped)."""
    if task.kind is not TaskKind.WELDING:
        raise InvalidParameterError("weld_error applies to welding tasks")
    targets = task.feature_targets.as_array()
    samples = trajectory.samples
    if len(samples) < 2:
        raise InvalidParameterError("trajectory needs >= 2 samples")
    span = samples[-1].t - samples[0].t
    deviations = []
    for s in samples:
        dev = (abs(s.state.x - targets[0]) + abs(s.state.y - targets[1])
               + abs(_wrap(s.state.theta - targets[2])))
        deviations.append(dev)
    total = 0.0
    for i in range(len(samples) - 1):
        dt = samples[i + 1].t - samples[i].t
        d_prog = task.path_length * dt / span
        total += 0.5 * (deviations[i] + deviations[i + 1]) * d_prog
    return total / task.path_length


def improvement_weld(e_init: float, e_final: float, e_max: float) -> float:
    if e_max <= 0.0:
        raise InvalidParameterError("e_max must be positive")
    return (e_init - e_final) / e_max * 100.0


def idle_time(demo: Demonstration) -> float:
    """Seconds where end-effector speed is below 1 mm/s (pauses included in
    teaching time)."""
    total = 0.0
    for a, b in zip(demo.samples, demo.samples[1:]):
        dt = b.t - a.t
        ds = math.hypot(b.state.x - a.state.x, b.state.y - a.state.y)
        if dt > 0 and ds / dt < IDLE_SPEED_M_S:
            total += dt
    return total


# ---------------------------------------------------------------------------
# Session runner


def _traverse(task: TaskSpec, fracs: np.ndarray, t0: float, noise_sd: float,
              rng: np.random.Generator) -> tuple[np.ndarray, list[ArmState]]:
    times = t0 + np.arange(len(fracs)) * ACTION_DT
    poses = []
    for f in fracs:
        p = pose_at_fraction(task, float(f))
        if noise_sd > 0.0:
            p = ArmState(p.x + rng.normal(0.0, noise_sd),
                         p.y + rng.normal(0.0, noise_sd),
                         p.theta + rng.normal(0.0, noise_sd))
        poses.append(p)
    return times, poses


def run_session(task: TaskSpec, teacher, feedback: FeedbackMode, seed: int,
                train_config: TrainConfig | None = None) -> SessionRecord:
    """Scripted closed-loop session: demo 1 traverses the full path with
    live rendering; demo 2 covers the teacher-selected regions."""
    if task.kind is not TaskKind.PATH:
        raise InvalidParameterError("run_session drives spatial path tasks")
    rng = np.random.default_rng(seed)
    train_config = train_config or TrainConfig(seed=seed)
    model = learner.train(expert_training_demos(task, seed=seed), train_config)

    renderer = FeedbackRenderer(feedback, task, model=model)
    n = max(int(round(task.duration / ACTION_DT)) + 1, 2)
    fracs = np.linspace(0.0, 1.0, n)
    stop_frac = getattr(teacher, "stop_at_fraction", None)
    truncated = False
    if stop_frac is not None and stop_frac < 1.0:
        fracs = fracs[fracs <= stop_frac]
        truncated = True
    noise_sd = getattr(teacher, "noise_sd", 0.0)
    times, poses = _traverse(task, fracs, 0.0, noise_sd, rng)

    frames: list[FrameEvent] = []
    perceived: list[tuple[float, float | None]] = []
    for t, pose, frac in zip(times, poses, fracs):
        payload = renderer.feed(float(t), pose, fraction=float(frac))
        if payload is not None:
            frames.append(FrameEvent(time=float(t), payload=payload))
        if feedback is FeedbackMode.GUI:
            # GUI shows a percent; expose it to teachers on the psi scale so
            # one reaction threshold covers all modalities.
            u = float(renderer.uncertainty_vector(pose, float(frac))[0])
            value = display.map_uncertainty(u)
        else:
            felt = renderer.perceived(third=min(int(frac * 3), 2))
            value = None if felt is None else _scalar_feedback(felt)
        perceived.append((float(frac), value))
    demo1 = demonstration_from_poses(times, poses, label=DemoLabel.USER_FIRST)

    regions = teacher.select_regions(perceived, rng)
    demo2_fracs = []
    for lo, hi in regions:
        span_n = max(int(round((hi - lo) * n)), 2)
        demo2_fracs.extend(np.linspace(lo, hi, span_n))
    t2, poses2 = _traverse(task, np.array(demo2_fracs), 0.0, noise_sd, rng)
    demo2 = demonstration_from_poses(t2, poses2, label=DemoLabel.USER_SECOND)

    return SessionRecord(
        task_name=task.name, feedback=feedback, seed=seed,
        demos=(demo1, demo2), frames=tuple(frames),
        wall_times=(demo1.duration, demo2.duration), truncated=truncated)


def compute_metrics(record: SessionRecord, task: TaskSpec,
                    train_config: TrainConfig | None = None) -> Metrics:
    """Recompute all metrics from the record alone (pure given the task)."""
    train_config = train_config or TrainConfig(seed=record.seed)
    demo2 = record.demos[-1]
    teaching_time = record.wall_times[-1]

    if task.kind is TaskKind.WELDING:
        e_init = weld_error(record.demos[0], task)
        e_final = weld_error(demo2, task)
        return Metrics(teaching_time=teaching_time,
                       improvement_weld=improvement_weld(e_init, e_final, task.e_max),
                       e_init=e_init, e_final=e_final)

    expert = expert_training_demos(task, seed=record.seed)
    model1 = learner.train(expert, train_config)
    states = nominal_states(task)
    u1 = float(learner.uncertainty_batch(model1, states).mean())
    model2 = learner.train(expert + [demo2], train_config)
    u2 = float(learner.uncertainty_batch(model2, states).mean())
    return Metrics(
        teaching_time=teaching_time,
        correct_segment=correct_segment(demo2, task.unknown_regions(), task),
        improvement_u=improvement_uncertainty(u1, u2),
        u1=u1, u2=u2)
