"""Command-line interface: validate, run, estimate, eval-trigger, serve."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from mfa import dsl, evalharness, runner
from mfa.core import StateKind, estimate_workload, validate
from mfa.errors import MfaError
from mfa.runner import EventKind, SessionStatus
from mfa.triggers import build_trigger


def _load_validated(path: str):
    try:
        automaton = dsl.parse_file(path)
    except dsl.ParseFailure as failure:
        for error in failure.errors:
            click.echo(f"{path}:{error}", err=True)
        sys.exit(1)
    report = validate(automaton)
    for issue in report.warnings:
        click.echo(f"warning [{issue.code}] {issue.location}: {issue.message}", err=True)
    if not report.ok:
        for issue in report.errors:
            click.echo(f"error [{issue.code}] {issue.location}: {issue.message}", err=True)
        sys.exit(1)
    return automaton


@click.group()
def main():
    """Declarative multi-model dialogue automata."""


@main.command(name="validate")
@click.argument("definition", type=click.Path(exists=True, dir_okay=False))
def validate_cmd(definition):
    """Parse and validate a definition file."""
    _load_validated(definition)
    click.echo(f"{definition}: ok")


@main.command()
@click.argument("definition", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True, help="Tie-breaking RNG seed.")
@click.option("--script", "script_path", type=click.Path(exists=True, dir_okay=False), help="File with one user input per line (otherwise interactive).")
@click.option("--transcript", "transcript_path", type=click.Path(dir_okay=False), help="Write the event transcript as JSON lines.")
@click.option("--sink-dir", type=click.Path(file_okay=False), help="Directory for writer sinks (default: current directory).")
@click.option("--budget", type=int, default=runner.DEFAULT_STEP_BUDGET, show_default=True, help="Max machine states per user turn.")
def run(definition, seed, script_path, transcript_path, sink_dir, budget):
    """Run a dialogue, interactively or from a script."""
    automaton = _load_validated(definition)
    options = {"step_budget": budget, "sink_root": sink_dir}
    if script_path:
        script = [line for line in Path(script_path).read_text(encoding="utf-8").splitlines() if line.strip()]
        events = runner.run_scripted(automaton, script, seed, **options)
        for event in events:
            if event.kind is EventKind.DISPLAY:
                click.echo(f"[{event.state}] {event.payload}")
    else:
        session = runner.start(automaton, seed, **options)
        click.echo(f"{automaton.name}: type {runner.QUIT_COMMAND} to leave")
        while session.active:
            if session.awaiting_user:
                try:
                    text = click.prompt("you", prompt_suffix="> ")
                except (EOFError, click.Abort):
                    break
                events = runner.step(session, text)
            else:
                events = runner.step(session)
            for event in events:
                if event.kind is EventKind.DISPLAY:
                    click.echo(f"[{event.state}] {event.payload}")
        events = session.transcript
    last = events[-1] if events else None
    if last is not None and last.kind is EventKind.TERMINATED:
        click.echo(f"-- {last.payload['reason']} --")
    if transcript_path:
        Path(transcript_path).write_text(runner.transcript_to_jsonl(events), encoding="utf-8")
    if last is not None and last.kind is EventKind.TERMINATED and last.payload["status"] == SessionStatus.ERROR.value:
        sys.exit(2)


@main.command()
@click.argument("definition", type=click.Path(exists=True, dir_okay=False))
@click.option("--cost-dialer", type=float, default=1.0, show_default=True, help="Average seconds per dialer state.")
@click.option("--cost-writer", type=float, default=0.0, show_default=True, help="Average seconds per writer state.")
def estimate(definition, cost_dialer, cost_writer):
    """Bound the machine work between two user turns."""
    automaton = _load_validated(definition)
    result = estimate_workload(
        automaton, {StateKind.DIALER: cost_dialer, StateKind.WRITER: cost_writer}
    )
    if result.unbounded:
        click.echo("max machine chain: unbounded (machine-only cycle reachable)")
        return
    click.echo(f"max machine chain: {result.max_machine_chain}")
    for (exit_point, entry), length in sorted(result.per_pair.items(), key=str):
        click.echo(f"  {exit_point or '<start>'} -> {entry or '<end>'}: {length}")
    if result.estimated_latency is not None:
        click.echo(f"estimated latency: {result.estimated_latency:.2f} s")


@main.command(name="eval-trigger")
@click.argument("trigger_id")
@click.option("--defs", "defs_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Definition file declaring the trigger.")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False), help="Labeled CSV (text,label).")
@click.option("--distractors", type=click.Path(exists=True, dir_okay=False), help="Distractor CSV (text).")
@click.option("--pct", type=float, default=0.0, show_default=True, help="Distractor share of the final dataset.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Write the full report as JSON.")
def eval_trigger(trigger_id, defs_path, dataset, distractors, pct, seed, out_path):
    """Measure a trigger's accuracy and latency on a labeled dataset."""
    automaton = _load_validated(defs_path)
    defn = automaton.trigger_defs.get(trigger_id)
    if defn is None:
        click.echo(f"error: no trigger {trigger_id!r} in {defs_path}", err=True)
        sys.exit(1)
    try:
        sentences = evalharness.load_dataset(dataset)
        if distractors:
            sentences = evalharness.augment(sentences, evalharness.load_distractors(distractors), pct, seed)
        report = evalharness.evaluate(build_trigger(defn), sentences)
    except MfaError as exc:
        click.echo(f"error [{exc.code}]: {exc}", err=True)
        sys.exit(1)
    click.echo(evalharness.render_grid([report]), nl=False)
    click.echo(f"threshold {report.threshold:.0f}%: {'pass' if report.meets_threshold else 'FAIL'}")
    if out_path:
        Path(out_path).write_text(report.to_json(), encoding="utf-8")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--defs", "defs_dir", type=click.Path(file_okay=False, exists=True), help="Directory of .mfa files to preload.")
@click.option("--token", help="Require this bearer token on every request.")
@click.option("--sink-dir", type=click.Path(file_okay=False), help="Directory for writer sinks.")
@click.option("--cors", "cors_origin", default="*", show_default=True, help="Allowed CORS origin for the UI.")
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False, exists=True), help="Serve a built UI from this directory at /ui.")
def serve(host, port, defs_dir, token, sink_dir, cors_origin, ui_dir):
    """Expose automata and sessions over HTTP (JSON + SSE)."""
    import uvicorn

    from mfa.service import create_app

    app = create_app(token=token, sink_root=sink_dir, cors_origins=(cors_origin,), defs_dir=defs_dir)
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
