"""HTTP/WebSocket service over sessions, experiments, and exports.

Sessions and experiments persist as append-only JSONL event logs (one file
per id under the data directory); every metric is recomputable by replaying
a log. Live render frames fan out on a WebSocket at the display module's
frame schema, throttled to 20 Hz of demo time.
"""

from __future__ import annotations

import json
import os
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from . import learner, pneumatics, psychophysics as psy, teaching
from .learner import ArmState, DemoLabel, TrainConfig, demonstration_from_poses
from .teaching import (BUILTIN_TASKS, FeedbackMode, FeedbackRenderer,
                       FrameEvent, SessionRecord, TaskKind, TaskSpec,
                       compute_metrics, uncertainty_schedule)

DATA_DIR_ENV = "WRAPHAPTICS_DATA_DIR"
RT_FLAG_THRESHOLD_S = 5.0

SESSION_STATUSES = ("idle", "demo1", "demo2", "complete")


# ---------------------------------------------------------------------------
# Event log


class EventLog:
    """Append-only JSONL event stream with strictly increasing seq."""

    def __init__(self, path: Path):
        self.path = path
        self.seq = 0
        path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, time_s: float, kind: str, data: dict) -> int:
        self.seq += 1
        envelope = {"seq": self.seq, "time": time_s, "type": kind, "data": data}
        with self.path.open("a") as fp:
            fp.write(json.dumps(envelope, sort_keys=True,
                                separators=(",", ":")) + "\n")
        return self.seq


def read_events(path: Path) -> list[dict]:
    events = []
    with path.open() as fp:
        for line in fp:
            if line.strip():
                events.append(json.loads(line))
    return events


# ---------------------------------------------------------------------------
# Live state


@dataclass
class LiveSession:
    id: str
    task: TaskSpec
    feedback: FeedbackMode
    seed: int
    created_at: float
    log: EventLog
    renderer: FeedbackRenderer
    status: str = "idle"
    samples: dict[str, list[tuple[float, ArmState]]] = field(
        default_factory=lambda: {"demo1": [], "demo2": []})
    metrics: dict | None = None
    last_time: float = 0.0


@dataclass
class LiveExperiment:
    id: str
    kind: str
    seed: int
    protocol: psy.PairProtocol | psy.TripletProtocol
    log: EventLog
    next_index: int = 0
    issued_at: float | None = None
    ready_at: float | None = None
    responses: list[dict] = field(default_factory=list)


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Request bodies


class CreateSessionBody(BaseModel):
    task: str
    feedback_mode: str = "global"
    seed: int = 0
    client_token: str | None = None


class PoseSampleBody(BaseModel):
    t: float
    x: float
    y: float
    theta: float = 0.0


class StreamSamplesBody(BaseModel):
    samples: list[PoseSampleBody]
    client_token: str | None = None


class AdvanceBody(BaseModel):
    client_token: str | None = None


class CreateExperimentBody(BaseModel):
    kind: str
    seed: int = 0
    client_token: str | None = None


class SubmitResponseBody(BaseModel):
    trial_id: int
    answer: str
    rt_seconds: float
    client_token: str | None = None


# ---------------------------------------------------------------------------
# App factory


def create_app(data_dir: str | os.PathLike | None = None,
               train_config: TrainConfig | None = None,
               clock: Callable[[], float] = time.monotonic) -> FastAPI:
    data_path = Path(data_dir or os.environ.get(DATA_DIR_ENV, "wraphaptics_data"))
    app = FastAPI(title="wraphaptics service")
    app.state.data_dir = data_path
    app.state.clock = clock
    app.state.train_config = train_config
    app.state.sessions: dict[str, LiveSession] = {}
    app.state.experiments: dict[str, LiveExperiment] = {}
    app.state.frame_sockets: dict[str, list[WebSocket]] = {}
    app.state.idempotency: dict[tuple[str, str], dict] = {}

    def log_path(kind: str, item_id: str) -> Path:
        return data_path / kind / f"{item_id}.jsonl"

    def cached(scope: str, token: str | None):
        if token is None:
            return None
        return app.state.idempotency.get((scope, token))

    def remember(scope: str, token: str | None, response: dict) -> dict:
        if token is not None:
            app.state.idempotency[(scope, token)] = response
        return response

    def get_session(session_id: str) -> LiveSession:
        session = app.state.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def get_experiment(experiment_id: str) -> LiveExperiment:
        exp = app.state.experiments.get(experiment_id)
        if exp is None:
            raise HTTPException(status_code=404, detail="unknown experiment")
        return exp

    # -- sessions ----------------------------------------------------------

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        hit = cached("sessions", body.client_token)
        if hit is not None:
            return hit
        if body.task not in BUILTIN_TASKS:
            raise HTTPException(status_code=404, detail=f"unknown task {body.task!r}")
        try:
            feedback = FeedbackMode(body.feedback_mode)
        except ValueError:
            raise HTTPException(status_code=422,
                                detail=f"unknown feedback mode {body.feedback_mode!r}")
        task = BUILTIN_TASKS[body.task]()
        session_id = uuid.uuid4().hex[:12]
        cfg = app.state.train_config or TrainConfig(seed=body.seed)

        if task.kind is TaskKind.WELDING:
            renderer = FeedbackRenderer(
                feedback, task, schedule=uncertainty_schedule(task, body.seed))
        else:
            model = learner.train(
                teaching.expert_training_demos(task, seed=body.seed), cfg)
            renderer = FeedbackRenderer(feedback, task, model=model)

        log = EventLog(log_path("sessions", session_id))
        session = LiveSession(id=session_id, task=task, feedback=feedback,
                              seed=body.seed, created_at=app.state.clock(),
                              log=log, renderer=renderer)
        app.state.sessions[session_id] = session
        log.append(0.0, "session_created",
                   {"task": body.task, "feedback": feedback.value,
                    "seed": body.seed})
        response = {"id": session_id, "status": session.status,
                    "task": body.task, "feedback": feedback.value,
                    "seed": body.seed}
        return remember("sessions", body.client_token, response)

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        session = get_session(session_id)
        return {
            "id": session.id, "status": session.status,
            "task": session.task.name, "feedback": session.feedback.value,
            "seed": session.seed,
            "sample_counts": {k: len(v) for k, v in session.samples.items()},
            "event_count": session.log.seq,
        }

    @app.post("/sessions/{session_id}/advance")
    async def advance_session(session_id: str, body: AdvanceBody | None = None):
        body = body or AdvanceBody()
        scope = f"advance:{session_id}"
        hit = cached(scope, body.client_token)
        if hit is not None:
            return hit
        session = get_session(session_id)
        order = SESSION_STATUSES
        idx = order.index(session.status)
        if idx + 1 >= len(order):
            raise HTTPException(status_code=409, detail="session already complete")
        new_status = order[idx + 1]
        session.log.append(session.last_time, "phase_change",
                           {"from": session.status, "to": new_status})
        session.status = new_status
        if new_status == "complete":
            _finalize_session(session)
        response = {"id": session.id, "status": session.status,
                    "metrics": session.metrics}
        return remember(scope, body.client_token, response)

    def _finalize_session(session: LiveSession) -> None:
        record = _record_from_samples(session)
        if record is None:
            session.metrics = None
            return
        cfg = app.state.train_config or TrainConfig(seed=session.seed)
        metrics = compute_metrics(record, session.task, cfg)
        session.metrics = metrics.as_dict()
        session.log.append(session.last_time, "metric", session.metrics)

    def _record_from_samples(session: LiveSession) -> SessionRecord | None:
        demos = []
        for phase, label in (("demo1", DemoLabel.USER_FIRST),
                             ("demo2", DemoLabel.USER_SECOND)):
            buffer = session.samples[phase]
            if len(buffer) < 2:
                return None
            times = [t for t, _ in buffer]
            poses = [p for _, p in buffer]
            demos.append(demonstration_from_poses(times, poses, label=label))
        return SessionRecord(
            task_name=session.task.name, feedback=session.feedback,
            seed=session.seed, demos=tuple(demos), frames=(),
            wall_times=tuple(d.duration for d in demos))

    @app.post("/sessions/{session_id}/samples")
    async def stream_samples(session_id: str, body: StreamSamplesBody):
        scope = f"samples:{session_id}"
        hit = cached(scope, body.client_token)
        if hit is not None:
            return hit
        session = get_session(session_id)
        if session.status not in ("demo1", "demo2"):
            raise HTTPException(
                status_code=409,
                detail=f"samples only accepted in a demo phase, not {session.status}")
        acks = []
        for sample in body.samples:
            pose = ArmState(sample.x, sample.y, sample.theta)
            session.samples[session.status].append((sample.t, pose))
            session.last_time = sample.t
            seq = session.log.append(
                sample.t, "demo_sample",
                {"t": sample.t, "x": sample.x, "y": sample.y,
                 "theta": sample.theta, "phase": session.status})
            acks.append(seq)
            fraction = None
            if session.task.kind is TaskKind.WELDING:
                fraction = min(max(sample.t / session.task.duration, 0.0), 1.0)
            payload = session.renderer.feed(sample.t, pose, fraction=fraction)
            if payload is not None:
                session.log.append(sample.t, "frame", payload)
                await _broadcast(session.id, payload)
        response = {"acks": acks}
        return remember(scope, body.client_token, response)

    async def _broadcast(session_id: str, payload: dict) -> None:
        sockets = app.state.frame_sockets.get(session_id, [])
        dead = []
        for ws in sockets:
            try:
                await ws.send_text(_canonical(payload))
            except Exception:
                dead.append(ws)
        for ws in dead:
            sockets.remove(ws)

    @app.get("/sessions/{session_id}/metrics")
    def session_metrics(session_id: str):
        session = get_session(session_id)
        if session.status != "complete":
            raise HTTPException(status_code=409,
                                detail="metrics available once complete")
        return {"id": session.id, "metrics": session.metrics}

    @app.websocket("/sessions/{session_id}/frames")
    async def frames_socket(websocket: WebSocket, session_id: str):
        if session_id not in app.state.sessions:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        app.state.frame_sockets.setdefault(session_id, []).append(websocket)
        try:
            while True:
                await websocket.receive_text()
        except WebSocketDisconnect:
            pass
        finally:
            sockets = app.state.frame_sockets.get(session_id, [])
            if websocket in sockets:
                sockets.remove(websocket)

    # -- experiments -------------------------------------------------------

    @app.post("/experiments")
    def create_experiment(body: CreateExperimentBody):
        hit = cached("experiments", body.client_token)
        if hit is not None:
            return hit
        if body.kind == "pair":
            protocol = psy.generate_pair_protocol(body.seed)
        elif body.kind == "triplet":
            protocol = psy.generate_triplet_protocol(body.seed)
        else:
            raise HTTPException(status_code=422,
                                detail=f"unknown protocol kind {body.kind!r}")
        experiment_id = uuid.uuid4().hex[:12]
        log = EventLog(log_path("experiments", experiment_id))
        exp = LiveExperiment(id=experiment_id, kind=body.kind, seed=body.seed,
                             protocol=protocol, log=log)
        app.state.experiments[experiment_id] = exp
        log.append(0.0, "protocol",
                   {"kind": body.kind, "seed": body.seed,
                    "protocol": json.loads(psy.protocol_to_json(protocol))})
        _issue_current_trial(exp)
        response = {"id": experiment_id, "kind": body.kind, "seed": body.seed,
                    "total_trials": len(protocol.trials)}
        return remember("experiments", body.client_token, response)

    def _trial_payload(exp: LiveExperiment, index: int) -> dict:
        trial = exp.protocol.trials[index]
        if exp.kind == "pair":
            return {"trial_id": trial.trial_id, "first": trial.first,
                    "second": trial.second, "choices": ["first", "second"]}
        pressures = trial.pressures(exp.protocol.reference, exp.protocol.high)
        return {"trial_id": trial.trial_id,
                "pressures": {ch.value: p for ch, p in pressures.items()},
                "choices": [ch.value for ch in psy.TripletChannel]}

    def _trial_settle_s(exp: LiveExperiment, index: int) -> float:
        """Steady-state delay before the green light: worst-case channel
        settle time for the pressures this trial renders."""
        spec = (pneumatics.ChannelSpec.sleeve() if exp.kind == "pair"
                else pneumatics.ChannelSpec.ring())
        if index == 0:
            previous = [teaching.PLANT_REST_PSI] * 3
        else:
            prev_trial = exp.protocol.trials[index - 1]
            previous = _rendered_pressures(exp, prev_trial)
        current = _rendered_pressures(exp, exp.protocol.trials[index])
        worst = 0.0
        for before, after in zip(previous, current):
            if before != after:
                worst = max(worst, pneumatics.settle_time(spec, before, after))
        return worst

    def _rendered_pressures(exp: LiveExperiment, trial) -> list[float]:
        if exp.kind == "pair":
            return [trial.first] * 3
        pressures = trial.pressures(exp.protocol.reference, exp.protocol.high)
        return [pressures[ch] for ch in psy.TripletChannel]

    def _issue_current_trial(exp: LiveExperiment) -> None:
        if exp.next_index >= len(exp.protocol.trials):
            exp.issued_at = None
            exp.ready_at = None
            return
        now = app.state.clock()
        exp.issued_at = now
        exp.ready_at = now + _trial_settle_s(exp, exp.next_index)
        exp.log.append(float(exp.next_index), "trial",
                       _trial_payload(exp, exp.next_index))

    @app.get("/experiments/{experiment_id}")
    def experiment_info(experiment_id: str):
        exp = get_experiment(experiment_id)
        done = exp.next_index >= len(exp.protocol.trials)
        now = app.state.clock()
        next_trial = None
        if not done:
            next_trial = _trial_payload(exp, exp.next_index)
            next_trial["ready"] = now >= exp.ready_at
            next_trial["ready_in_s"] = max(exp.ready_at - now, 0.0)
        return {"id": exp.id, "kind": exp.kind, "seed": exp.seed,
                "total_trials": len(exp.protocol.trials),
                "answered": exp.next_index, "complete": done,
                "next": next_trial}

    @app.post("/experiments/{experiment_id}/responses")
    def submit_response(experiment_id: str, body: SubmitResponseBody):
        scope = f"responses:{experiment_id}"
        hit = cached(scope, body.client_token)
        if hit is not None:
            return hit
        exp = get_experiment(experiment_id)
        if exp.next_index >= len(exp.protocol.trials):
            raise HTTPException(status_code=409, detail="experiment complete")
        trial = exp.protocol.trials[exp.next_index]
        if body.trial_id != trial.trial_id:
            raise HTTPException(
                status_code=409,
                detail=f"trial {body.trial_id} is not pending "
                       f"(expected {trial.trial_id})")
        if body.rt_seconds <= 0.0:
            raise HTTPException(status_code=422, detail="rt must be positive")

        now = app.state.clock()
        server_rt = now - exp.ready_at
        flagged = abs(body.rt_seconds - server_rt) > RT_FLAG_THRESHOLD_S

        if exp.kind == "pair":
            if body.answer not in ("first", "second"):
                raise HTTPException(status_code=422, detail="answer must be a slot")
            response = psy.PairResponse(trial_id=trial.trial_id,
                                        choice=body.answer,
                                        response_time=body.rt_seconds)
            verdict = psy.pair_correct(trial, response)
        else:
            try:
                answer = psy.TripletChannel(body.answer)
            except ValueError:
                raise HTTPException(status_code=422,
                                    detail=f"unknown channel {body.answer!r}")
            response = psy.TripletResponse(trial_id=trial.trial_id,
                                           answer=answer,
                                           response_time=body.rt_seconds)
            verdict = answer is trial.target

        record = {"trial_id": trial.trial_id, "answer": body.answer,
                  "correct": verdict, "rt_seconds": body.rt_seconds,
                  "server_rt_seconds": server_rt, "flagged": flagged}
        exp.responses.append(record)
        exp.log.append(float(exp.next_index), "response", record)
        exp.next_index += 1
        _issue_current_trial(exp)
        result = {"trial_id": trial.trial_id, "correct": verdict,
                  "flagged": flagged,
                  "complete": exp.next_index >= len(exp.protocol.trials)}
        return remember(scope, body.client_token, result)

    # -- export ------------------------------------------------------------

    @app.get("/export/{item_id}")
    def export(item_id: str, format: str = Query("jsonl")):
        for kind in ("sessions", "experiments"):
            path = log_path(kind, item_id)
            if path.exists():
                if format == "jsonl":
                    return PlainTextResponse(path.read_text(),
                                             media_type="application/jsonl")
                if format == "csv":
                    return PlainTextResponse(_export_csv(kind, item_id, path),
                                             media_type="text/csv")
                raise HTTPException(status_code=422,
                                    detail=f"unknown format {format!r}")
        raise HTTPException(status_code=404, detail="unknown id")

    def _export_csv(kind: str, item_id: str, path: Path) -> str:
        if kind == "experiments":
            return experiment_csv_from_events(read_events(path))
        session = app.state.sessions.get(item_id)
        metrics = session.metrics if session else _metrics_from_log(path)
        header = "teaching_time,correct_segment,improvement_u,improvement_weld,u1,u2,e_init,e_final"
        if not metrics:
            return header + "\n"
        row = ",".join(_csv_num(metrics.get(k)) for k in header.split(","))
        return header + "\n" + row + "\n"

    def _metrics_from_log(path: Path) -> dict | None:
        for event in read_events(path):
            if event["type"] == "metric":
                return event["data"]
        return None

    return app


def _csv_num(value) -> str:
    if value is None:
        return ""
    return format(value, "g")


def experiment_csv_from_events(events: list[dict]) -> str:
    """Rebuild the psychophysics response-log CSV from an experiment log."""
    protocol_event = next(e for e in events if e["type"] == "protocol")
    protocol = psy.protocol_from_json(_canonical(protocol_event["data"]["protocol"]))
    rows = []
    for event in events:
        if event["type"] != "response":
            continue
        data = event["data"]
        if isinstance(protocol, psy.PairProtocol):
            response = psy.PairResponse(trial_id=data["trial_id"],
                                        choice=data["answer"],
                                        response_time=data["rt_seconds"])
            rows.extend(psy.pair_response_rows(protocol, [response]))
        else:
            response = psy.TripletResponse(
                trial_id=data["trial_id"],
                answer=psy.TripletChannel(data["answer"]),
                response_time=data["rt_seconds"])
            rows.extend(psy.triplet_response_rows(protocol, [response]))
    return psy.write_responses_csv(rows)


def replay_session_log(text: str, train_config: TrainConfig | None = None,
                       ) -> tuple[SessionRecord, dict | None]:
    """Rebuild a SessionRecord from an exported session log and recompute
    its metrics; replay(log) must reproduce the logged metrics exactly."""
    events = [json.loads(line) for line in text.splitlines() if line.strip()]
    created = next(e for e in events if e["type"] == "session_created")
    task = BUILTIN_TASKS[created["data"]["task"]]()
    feedback = FeedbackMode(created["data"]["feedback"])
    seed = created["data"]["seed"]

    buffers = {"demo1": [], "demo2": []}
    frames = []
    for event in events:
        if event["type"] == "demo_sample":
            d = event["data"]
            buffers[d["phase"]].append(
                (d["t"], ArmState(d["x"], d["y"], d["theta"])))
        elif event["type"] == "frame":
            frames.append(FrameEvent(time=event["time"], payload=event["data"]))
    demos = []
    for phase, label in (("demo1", DemoLabel.USER_FIRST),
                         ("demo2", DemoLabel.USER_SECOND)):
        if len(buffers[phase]) < 2:
            return (SessionRecord(task_name=task.name, feedback=feedback,
                                  seed=seed, demos=(), frames=tuple(frames),
                                  wall_times=(), truncated=True), None)
        times = [t for t, _ in buffers[phase]]
        poses = [p for _, p in buffers[phase]]
        demos.append(demonstration_from_poses(times, poses, label=label))
    record = SessionRecord(task_name=task.name, feedback=feedback, seed=seed,
                           demos=tuple(demos), frames=tuple(frames),
                           wall_times=tuple(d.duration for d in demos))
    cfg = train_config or TrainConfig(seed=seed)
    metrics = compute_metrics(record, task, cfg)
    return record, metrics.as_dict()
