"""Command-line entry points: serve, simulate, protocol, fit, export."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import psychophysics as psy
from . import service, teaching
from .learner import TrainConfig
from .service import DATA_DIR_ENV
from .teaching import BUILTIN_TASKS, FeedbackMode


@click.group()
def main():
    """Wrapped haptic display simulator and analysis tools."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--data-dir", default=None,
              help=f"Event log directory (default ${DATA_DIR_ENV} or ./wraphaptics_data)")
@click.option("--ui-dir", default=None, type=click.Path(exists=True, file_okay=False),
              help="Serve the built browser sandbox (frontend/) at /ui.")
def serve(host: str, port: int, data_dir: str | None, ui_dir: str | None):
    """Run the HTTP/WebSocket service."""
    import uvicorn

    app = service.create_app(data_dir=data_dir)
    if ui_dir is not None:
        from starlette.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--task", "task_name", default="three_segment", show_default=True,
              type=click.Choice(sorted(BUILTIN_TASKS)))
@click.option("--feedback", default="global", show_default=True,
              type=click.Choice([m.value for m in FeedbackMode]))
@click.option("--teacher", default="reactive", show_default=True,
              type=click.Choice(["reactive", "ignoring"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--epochs", default=600, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write the session record as JSONL events.")
def simulate(task_name: str, feedback: str, teacher: str, seed: int,
             epochs: int, out: str | None):
    """Run a scripted closed-loop teaching session and print its metrics."""
    task = BUILTIN_TASKS[task_name]()
    policy = (teaching.PressureReactiveTeacher() if teacher == "reactive"
              else teaching.FeedbackIgnoringTeacher())
    mode = FeedbackMode(feedback)
    config = TrainConfig(seed=seed, epochs=epochs)
    record = teaching.run_session(task, policy, mode, seed=seed,
                                  train_config=config)
    metrics = teaching.compute_metrics(record, task, config)
    for key, value in metrics.as_dict().items():
        click.echo(f"{key}: {value:.4f}")
    if out:
        with open(out, "w") as fp:
            seq = 0
            for demo in record.demos:
                for s in demo.samples:
                    seq += 1
                    fp.write(json.dumps(
                        {"seq": seq, "time": s.t, "type": "demo_sample",
                         "data": {"t": s.t, "x": s.state.x, "y": s.state.y,
                                  "theta": s.state.theta,
                                  "phase": demo.label.value}},
                        sort_keys=True, separators=(",", ":")) + "\n")
            for frame in record.frames:
                seq += 1
                fp.write(json.dumps(
                    {"seq": seq, "time": frame.time, "type": "frame",
                     "data": frame.payload},
                    sort_keys=True, separators=(",", ":")) + "\n")
        click.echo(f"wrote {out}")


@main.command()
@click.option("--kind", default="pair", show_default=True,
              type=click.Choice(["pair", "triplet"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default="-", help="Output path (default stdout).")
def protocol(kind: str, seed: int, out: str):
    """Generate a seeded forced-choice protocol as canonical JSON."""
    if kind == "pair":
        proto = psy.generate_pair_protocol(seed)
    else:
        proto = psy.generate_triplet_protocol(seed)
    text = psy.protocol_to_json(proto)
    if out == "-":
        click.echo(text)
    else:
        Path(out).write_text(text + "\n")
        click.echo(f"wrote {out}")


@main.command()
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--reference", default=psy.REFERENCE_PSI, show_default=True,
              type=float)
def fit(csv_path: str, reference: float):
    """Fit the psychometric sigmoid to an exported pair-response CSV and
    print k, JND, and Weber fraction."""
    rows = psy.read_responses_csv(Path(csv_path).read_text())
    proportions = psy.proportions_from_rows(rows, reference=reference)
    result = psy.fit_sigmoid(proportions, reference=reference)
    click.echo(f"k: {result.k:.4f} 1/psi")
    click.echo(f"jnd: {result.jnd:.4f} psi")
    click.echo(f"weber: {result.weber:.3f} %")


@main.command()
@click.argument("item_id")
@click.option("--format", "fmt", default="jsonl", show_default=True,
              type=click.Choice(["jsonl", "csv"]))
@click.option("--data-dir", default=None)
@click.option("--out", default="-", help="Output path (default stdout).")
def export(item_id: str, fmt: str, data_dir: str | None, out: str):
    """Export a stored session or experiment log."""
    base = Path(data_dir or os.environ.get(DATA_DIR_ENV, "wraphaptics_data"))
    for kind in ("sessions", "experiments"):
        path = base / kind / f"{item_id}.jsonl"
        if path.exists():
            if fmt == "jsonl":
                text = path.read_text()
            elif kind == "experiments":
                text = service.experiment_csv_from_events(service.read_events(path))
            else:
                text = _session_metrics_csv(path)
            if out == "-":
                sys.stdout.write(text)
            else:
                Path(out).write_text(text)
                click.echo(f"wrote {out}")
            return
    raise click.ClickException(f"no session or experiment with id {item_id!r}")


def _session_metrics_csv(path: Path) -> str:
    header = ("teaching_time,correct_segment,improvement_u,improvement_weld,"
              "u1,u2,e_init,e_final")
    metrics = None
    for event in service.read_events(path):
        if event["type"] == "metric":
            metrics = event["data"]
    if not metrics:
        return header + "\n"
    row = ",".join(service._csv_num(metrics.get(k)) for k in header.split(","))
    return header + "\n" + row + "\n"


if __name__ == "__main__":
    main()
