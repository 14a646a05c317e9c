"""Command-line entry points: run the refinement pipeline, score documents,
and serve the review console.
"""

import json
import sys
from pathlib import Path
from typing import Optional, Tuple

import click

from .cot import PromptKind
from .gateway import MockProvider, ProviderConfig, ScriptedTranscript
from .judge import (
    CsuqResponse,
    DocKind,
    batch_score,
    render_report_figure,
    score_csuq,
    write_report_csv,
    write_report_json,
)
from .pipeline import (
    GateDecision,
    GatePolicy,
    SessionConfig,
    SessionStatus,
    SessionStore,
    StageId,
    Verdict,
    provider_for,
    run_to_completion,
    start_session,
)

# Spec'd exit codes: 0 completed, 1 usage error, 2 stage failure.
click.UsageError.exit_code = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2


@click.group()
def main():
    """Refine prompts through a four-stage requirements-engineering pipeline."""


def _read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    p = Path(path)
    if not p.exists():
        raise click.UsageError(f"input file not found: {path}")
    return p.read_text(encoding="utf-8")


def _interactive_gate(session, artifact) -> GateDecision:
    stage = artifact.stage.value
    while True:
        click.echo(f"[gate] {stage} artifact ready (attempt {artifact.attempt}).", err=True)
        line = click.prompt("approve or 'reject: <feedback>'", err=True).strip()
        if line.lower() == "approve":
            return GateDecision(Verdict.APPROVE)
        if line.lower().startswith("reject:"):
            feedback = line.split(":", 1)[1].strip()
            if feedback:
                return GateDecision(Verdict.REJECT, feedback)
        click.echo("expected 'approve' or 'reject: <feedback>'", err=True)


@main.command()
@click.option("--kind", type=click.Choice(["user", "system"]), required=True)
@click.option("--input", "input_path", required=True, help="Initial prompt file, or - for stdin.")
@click.option("--gate", type=click.Choice(["auto", "interactive", "serve"]), default="auto")
@click.option("--skip", "skips", multiple=True, help="Stage to skip (repeatable).")
@click.option("--question-budget", type=int, default=3)
@click.option("--refine", type=int, default=1, help="Critic refinement rounds.")
@click.option("--template-marker", default=None)
@click.option("--provider", "provider_name", default=None)
@click.option("--endpoint", default="")
@click.option("--model", default="default")
@click.option("--mock", "mock_path", default=None, help="Scripted transcript JSON file.")
@click.option("--out", "out_path", default=None)
@click.option("--store", "store_dir", default=None, help="Session store directory.")
@click.option("--port", type=int, default=8374, help="Service port for --gate serve.")
def run(kind, input_path, gate, skips, question_budget, refine, template_marker,
        provider_name, endpoint, model, mock_path, out_path, store_dir, port):
    """Run the four-stage pipeline on an initial prompt."""
    if mock_path and provider_name:
        raise click.UsageError("--mock conflicts with --provider")
    valid_stages = {s.value for s in StageId}
    for name in skips:
        if name not in valid_stages:
            raise click.UsageError(
                f"unknown stage {name!r}; choose from {sorted(valid_stages)}"
            )
    initial_prompt = _read_input(input_path)
    try:
        config = SessionConfig(
            prompt_kind=PromptKind(kind),
            initial_prompt=initial_prompt,
            provider=ProviderConfig(
                endpoint_url=endpoint,
                model=model,
                provider=provider_name or "openai",
            ),
            gate_policy=GatePolicy(gate),
            skip_stages=frozenset(StageId(s) for s in skips),
            question_budget=question_budget,
            refinement_rounds=refine,
            template_marker=template_marker,
            mock_transcript_path=mock_path,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    session = start_session(config)
    store = SessionStore(store_dir) if store_dir else None

    if gate == "serve":
        _run_served(session, store_dir or ".promptforge-store", port)
    else:
        provider = provider_for(config)
        handler = _interactive_gate if gate == "interactive" else None
        run_to_completion(session, provider, gate_handler=handler, store=store)

    if session.status is SessionStatus.COMPLETED:
        if out_path:
            Path(out_path).write_text(session.final_prompt, encoding="utf-8")
        else:
            click.echo(session.final_prompt)
        sys.exit(EXIT_OK)
    failure = session.failure
    detail = f"{failure.stage.value} after {failure.attempts} attempts: {failure.rule}" if failure else "unknown"
    click.echo(f"pipeline failed: {detail}", err=True)
    sys.exit(EXIT_FAILED)


def _run_served(session, store_dir: str, port: int) -> None:
    import threading

    import uvicorn

    from .service import SessionRunner, create_app

    app = create_app(store_dir)
    store = app.state.store
    store.save(session)
    runner = SessionRunner(session, store)
    app.state.runners[session.id] = runner
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    click.echo(
        f"session {session.id} awaiting gates at http://127.0.0.1:{port}/api/sessions/{session.id}",
        err=True,
    )
    runner.start()
    runner.join()
    server.should_exit = True
    thread.join(timeout=5)


@main.group(invoke_without_command=True)
@click.option("--kind", type=click.Choice(["prd", "sdd"]), default=None)
@click.option("--in", "in_path", default=None)
@click.option("--out", "out_path", default=None)
@click.option("--mock", "mock_path", default=None)
@click.option("--endpoint", default="")
@click.option("--model", default="default")
@click.option("--figures/--no-figures", default=True)
@click.pass_context
def judge(ctx, kind, in_path, out_path, mock_path, endpoint, model, figures):
    """Score documents with the rubric judge, or aggregate CSUQ responses."""
    if ctx.invoked_subcommand is not None:
        return
    if kind is None or in_path is None:
        raise click.UsageError("judge requires --kind and --in (or the csuq subcommand)")
    doc_kind = DocKind(kind)
    if mock_path:
        provider = MockProvider(ScriptedTranscript.from_file(mock_path))
    else:
        provider = provider_for_judge(endpoint, model)
    directory = Path(in_path)
    if not directory.is_dir():
        raise click.UsageError(f"not a directory: {in_path}")
    rows = batch_score(provider, directory, doc_kind)
    out = Path(out_path) if out_path else Path("report.csv")
    write_report_csv(rows, doc_kind, out)
    write_report_json(rows, doc_kind, out.with_suffix(".json"))
    if figures:
        render_report_figure(rows, doc_kind, out.with_suffix(".png"))
    click.echo(f"wrote {out} ({len(rows)} rows)")


def provider_for_judge(endpoint: str, model: str):
    from .gateway import HttpProvider

    return HttpProvider(ProviderConfig(endpoint_url=endpoint, model=model))


@judge.command()
@click.option("--in", "in_path", required=True, help="JSON array of 19 integers.")
@click.option("--mapping", "mapping_path", default=None, help="JSON subscale item map.")
def csuq(in_path, mapping_path):
    """Compute the four questionnaire subscale scores."""
    try:
        items = json.loads(Path(in_path).read_text(encoding="utf-8"))
        resp = CsuqResponse(items=tuple(items))
    except (OSError, ValueError) as exc:
        raise click.UsageError(f"bad responses file: {exc}")
    mapping = None
    if mapping_path:
        raw = json.loads(Path(mapping_path).read_text(encoding="utf-8"))
        mapping = {k: tuple(v) for k, v in raw.items()}
    try:
        scores = score_csuq(resp, mapping)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    click.echo(
        f"overall {scores.overall:g} usability {scores.usability:g} "
        f"information {scores.information_quality:g} "
        f"interface {scores.interface_quality:g}"
    )


@main.command()
@click.option("--port", type=int, default=8374)
@click.option("--store", "store_dir", default=".promptforge-store")
@click.option("--ui", "ui_dir", default=None, help="Directory of built console assets.")
def serve(port, store_dir, ui_dir):
    """Run the review service (and console, when --ui is given)."""
    import uvicorn

    from .service import create_app

    app = create_app(store_dir, ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="info")


if __name__ == "__main__":
    main()
