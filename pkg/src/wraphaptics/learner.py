"""Ensemble behavior cloning over kinesthetic demonstrations.

Five small regressors (MLP, two tanh hidden layers of 32 units) are each
trained on a bootstrap resample of the demonstrated (state, action) pairs.
Prediction spread across members estimates the learner's uncertainty,
normalized by the running maximum of raw variance over the training states
so the display always receives a fraction in [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import (ConfigurationError, InvalidParameterError, StateError,
                     TrainingError)

ACTION_DT = 0.05  # demonstrations are resampled to this grid before training
_NORMALIZER_FLOOR = 1e-12

FEATURE_NAMES = ("edge_distance", "height", "orientation")


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class ArmState:
    """Planar end-effector pose; theta stored wrapped to (-pi, pi]."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


class DemoLabel(Enum):
    EXPERT = "expert"
    USER_FIRST = "user_first"
    USER_SECOND = "user_second"


@dataclass(frozen=True)
class DemoSample:
    t: float
    state: ArmState
    action: tuple[float, float, float]


@dataclass(frozen=True)
class Demonstration:
    samples: tuple[DemoSample, ...]
    label: DemoLabel = DemoLabel.EXPERT

    def __post_init__(self):
        times = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidParameterError("sample timestamps must strictly increase")

    def states_array(self) -> np.ndarray:
        return np.array([s.state.as_array() for s in self.samples])

    def actions_array(self) -> np.ndarray:
        return np.array([s.action for s in self.samples])

    @property
    def duration(self) -> float:
        if not self.samples:
            return 0.0
        return self.samples[-1].t - self.samples[0].t


def demonstration_from_poses(times: Sequence[float], poses: Sequence[ArmState],
                             label: DemoLabel = DemoLabel.EXPERT) -> Demonstration:
    """Build a demonstration from a pose stream, resampled to the ACTION_DT
    grid; actions are next-pose deltas (angle delta wrapped)."""
    if len(times) != len(poses) or len(times) < 2:
        raise InvalidParameterError("need >= 2 timestamped poses")
    t = np.asarray(times, dtype=float)
    xs = np.array([p.x for p in poses])
    ys = np.array([p.y for p in poses])
    thetas = np.unwrap(np.array([p.theta for p in poses]))
    grid = np.arange(t[0], t[-1] + 1e-9, ACTION_DT)
    if len(grid) < 2:
        grid = np.array([t[0], t[-1]])
    gx = np.interp(grid, t, xs)
    gy = np.interp(grid, t, ys)
    gth = np.interp(grid, t, thetas)
    samples = []
    for i in range(len(grid) - 1):
        action = (float(gx[i + 1] - gx[i]), float(gy[i + 1] - gy[i]),
                  wrap_angle(float(gth[i + 1] - gth[i])))
        samples.append(DemoSample(t=float(grid[i]),
                                  state=ArmState(float(gx[i]), float(gy[i]),
                                                 float(gth[i])),
                                  action=action))
    return Demonstration(samples=tuple(samples), label=label)


def demonstration_to_jsonl(demo: Demonstration, fp: IO[str] | None = None) -> str:
    """One sample per line: {t, x, y, theta, ax, ay, atheta}."""
    lines = []
    for s in demo.samples:
        lines.append(json.dumps(
            {"t": s.t, "x": s.state.x, "y": s.state.y, "theta": s.state.theta,
             "ax": s.action[0], "ay": s.action[1], "atheta": s.action[2]},
            sort_keys=True, separators=(",", ":")))
    text = "\n".join(lines) + ("\n" if lines else "")
    if fp is not None:
        fp.write(text)
    return text


def demonstration_from_jsonl(text: str,
                             label: DemoLabel = DemoLabel.EXPERT) -> Demonstration:
    samples = []
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        samples.append(DemoSample(
            t=rec["t"], state=ArmState(rec["x"], rec["y"], rec["theta"]),
            action=(rec["ax"], rec["ay"], rec["atheta"])))
    return Demonstration(samples=tuple(samples), label=label)


# ---------------------------------------------------------------------------
# MLP members


@dataclass(frozen=True)
class TrainConfig:
    n_members: int = 5
    epochs: int = 600
    lr: float = 0.01
    bootstrap: bool = True
    seed: int = 0
    hidden: int = 32

    def __post_init__(self):
        if self.n_members < 2:
            raise InvalidParameterError("ensemble needs >= 2 members")


def mlp_init(rng: np.random.Generator, in_dim: int = 3, hidden: int = 32,
             out_dim: int = 3) -> list[np.ndarray]:
    """Xavier-initialized parameters [W1, b1, W2, b2, W3, b3]."""
    def layer(n_in, n_out):
        scale = math.sqrt(2.0 / (n_in + n_out))
        return (rng.normal(0.0, scale, size=(n_in, n_out)), np.zeros(n_out))

    w1, b1 = layer(in_dim, hidden)
    w2, b2 = layer(hidden, hidden)
    w3, b3 = layer(hidden, out_dim)
    return [w1, b1, w2, b2, w3, b3]


def mlp_forward(params: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    w1, b1, w2, b2, w3, b3 = params
    h1 = np.tanh(x @ w1 + b1)
    h2 = np.tanh(h1 @ w2 + b2)
    return h2 @ w3 + b3


def mlp_loss_and_grads(params: Sequence[np.ndarray], x: np.ndarray,
                       y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean-squared error over all batch elements and output dimensions,
    with analytic gradients (checked against finite differences in tests)."""
    w1, b1, w2, b2, w3, b3 = params
    n, out_dim = y.shape

    a1 = x @ w1 + b1
    h1 = np.tanh(a1)
    a2 = h1 @ w2 + b2
    h2 = np.tanh(a2)
    pred = h2 @ w3 + b3

    err = pred - y
    loss = float((err ** 2).mean())

    d_pred = 2.0 * err / (n * out_dim)
    g_w3 = h2.T @ d_pred
    g_b3 = d_pred.sum(axis=0)
    d_h2 = d_pred @ w3.T
    d_a2 = d_h2 * (1.0 - h2 ** 2)
    g_w2 = h1.T @ d_a2
    g_b2 = d_a2.sum(axis=0)
    d_h1 = d_a2 @ w2.T
    d_a1 = d_h1 * (1.0 - h1 ** 2)
    g_w1 = x.T @ d_a1
    g_b1 = d_a1.sum(axis=0)
    return loss, [g_w1, g_b1, g_w2, g_b2, g_w3, g_b3]


def _adam_train(params: list[np.ndarray], x: np.ndarray, y: np.ndarray,
                epochs: int, lr: float) -> list[np.ndarray]:
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    for step_i in range(1, epochs + 1):
        loss, grads = mlp_loss_and_grads(params, x, y)
        if not math.isfinite(loss):
            raise TrainingError(f"loss diverged at epoch {step_i}")
        for j, g in enumerate(grads):
            m[j] = beta1 * m[j] + (1 - beta1) * g
            v[j] = beta2 * v[j] + (1 - beta2) * g * g
            m_hat = m[j] / (1 - beta1 ** step_i)
            v_hat = v[j] / (1 - beta2 ** step_i)
            params[j] = params[j] - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


@dataclass
class EnsembleModel:
    members: list[list[np.ndarray]]
    input_mean: np.ndarray
    input_std: np.ndarray
    normalizer: float
    feature_normalizer: float
    config: TrainConfig
    member_seeds: tuple[int, ...] = ()

    def normalize(self, states: np.ndarray) -> np.ndarray:
        return (states - self.input_mean) / self.input_std

    def member_predictions(self, states: np.ndarray) -> np.ndarray:
        """Stacked predictions, shape (n_members, n_states, action_dim)."""
        xn = self.normalize(np.atleast_2d(states))
        return np.stack([mlp_forward(p, xn) for p in self.members])


def member_variance(preds: np.ndarray) -> np.ndarray:
    """Per-dimension variance across members, shape (n_states, action_dim).

    Computed on member-0-shifted values so an ensemble of identical members
    yields exactly zero (np.var leaves ~1e-34 residue from mean rounding,
    which the normalizer floor would inflate)."""
    shifted = preds - preds[0]
    mean = shifted.mean(axis=0)
    var = (shifted * shifted).mean(axis=0) - mean * mean
    return np.maximum(var, 0.0)


def _gather_transitions(demos: Iterable[Demonstration]) -> tuple[np.ndarray, np.ndarray]:
    states, actions = [], []
    for demo in demos:
        if demo.samples:
            states.append(demo.states_array())
            actions.append(demo.actions_array())
    if not states:
        raise InvalidParameterError("no transitions in the given demonstrations")
    return np.concatenate(states), np.concatenate(actions)


def train(demos: Sequence[Demonstration],
          config: TrainConfig = TrainConfig()) -> EnsembleModel:
    """Fit the ensemble on all transitions in ``demos``.

    Each member sees its own bootstrap resample (with replacement) and its
    own weight initialization; the run is deterministic per config.seed.
    """
    if not demos:
        raise InvalidParameterError("at least one demonstration is required")
    x_raw, y = _gather_transitions(demos)
    mean = x_raw.mean(axis=0)
    std = x_raw.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    x = (x_raw - mean) / std

    members = []
    member_seeds = []
    for i in range(config.n_members):
        member_seed = config.seed * 1000003 + i
        member_seeds.append(member_seed)
        rng = np.random.default_rng(member_seed)
        if config.bootstrap:
            idx = rng.integers(0, len(x), size=len(x))
        else:
            idx = np.arange(len(x))
        params = mlp_init(rng, in_dim=x.shape[1], hidden=config.hidden,
                          out_dim=y.shape[1])
        members.append(_adam_train(params, x[idx], y[idx],
                                   epochs=config.epochs, lr=config.lr))

    model = EnsembleModel(members=members, input_mean=mean, input_std=std,
                          normalizer=1.0, feature_normalizer=1.0,
                          config=config, member_seeds=tuple(member_seeds))
    preds = model.member_predictions(x_raw)
    per_dim_var = member_variance(preds)  # (n_states, action_dim)
    raw = per_dim_var.mean(axis=1)
    model.normalizer = max(float(raw.max()), _NORMALIZER_FLOOR)
    model.feature_normalizer = max(float(per_dim_var.max()), _NORMALIZER_FLOOR)
    return model


def _require_trained(model) -> EnsembleModel:
    if not isinstance(model, EnsembleModel) or not model.members:
        raise StateError("model is not trained")
    return model


def uncertainty(model: EnsembleModel, state: ArmState) -> float:
    """Normalized prediction spread at one state, clamped to [0, 1]."""
    return float(uncertainty_batch(model, state.as_array()[None, :])[0])


def uncertainty_batch(model: EnsembleModel, states: np.ndarray) -> np.ndarray:
    model = _require_trained(model)
    preds = model.member_predictions(states)
    raw = member_variance(preds).mean(axis=1)
    return np.clip(raw / model.normalizer, 0.0, 1.0)


def feature_uncertainty(source, state: ArmState | None = None, *,
                        fraction: float | None = None) -> np.ndarray:
    """Per-feature uncertainty vector (edge distance, height, orientation).

    ``source`` is either a trained ensemble (per-output-dimension spread,
    each normalized by its own running max) or a scripted schedule (the
    teaching module's UncertaintySchedule), which needs the current path
    fraction instead of a state."""
    if isinstance(source, EnsembleModel):
        if state is None:
            raise ConfigurationError("learned feature uncertainty needs a state")
        model = _require_trained(source)
        preds = model.member_predictions(state.as_array()[None, :])
        per_dim = member_variance(preds)[0]
        # One shared normalizer across dimensions so the cross-feature
        # ordering equals the raw spread ordering (per-dimension maxima let
        # the best-fit dimension's tiny max dominate the ratios far from
        # data). Squash instead of clamp: a hard clamp would tie saturated
        # features at 1 and erase the argmax the display needs.
        ratio = per_dim / model.feature_normalizer
        return ratio / (1.0 + ratio)
    if hasattr(source, "feature_vector_at"):
        if fraction is None:
            raise ConfigurationError("a scripted schedule needs the path fraction")
        return np.asarray(source.feature_vector_at(fraction), dtype=float)
    raise ConfigurationError(
        "feature uncertainty needs a trained ensemble or a scripted schedule")


# ---------------------------------------------------------------------------
# Checkpoints


def model_to_json(model: EnsembleModel) -> str:
    """Versioned JSON weight dump."""
    payload = {
        "format": "wraphaptics-ensemble-v1",
        "config": {
            "n_members": model.config.n_members,
            "epochs": model.config.epochs,
            "lr": model.config.lr,
            "bootstrap": model.config.bootstrap,
            "seed": model.config.seed,
            "hidden": model.config.hidden,
        },
        "input_mean": model.input_mean.tolist(),
        "input_std": model.input_std.tolist(),
        "normalizer": model.normalizer,
        "feature_normalizer": model.feature_normalizer,
        "member_seeds": list(model.member_seeds),
        "members": [[p.tolist() for p in member] for member in model.members],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def model_from_json(text: str) -> EnsembleModel:
    payload = json.loads(text)
    if payload.get("format") != "wraphaptics-ensemble-v1":
        raise InvalidParameterError(
            f"unknown checkpoint format {payload.get('format')!r}")
    cfg = TrainConfig(**payload["config"])
    return EnsembleModel(
        members=[[np.asarray(p) for p in member] for member in payload["members"]],
        input_mean=np.asarray(payload["input_mean"]),
        input_std=np.asarray(payload["input_std"]),
        normalizer=payload["normalizer"],
        feature_normalizer=payload["feature_normalizer"],
        config=cfg,
        member_seeds=tuple(payload["member_seeds"]),
    )
