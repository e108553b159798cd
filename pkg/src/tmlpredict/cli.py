"""Command-line interface: ingest, build-benchmark, run, evaluate, serve, report, ask.

Batch commands run in-process over the configured corpus; `ask` is a thin
HTTP client for a running service. Configuration precedence is CLI flag >
environment variable (TMLPREDICT_*) > config file.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from .config import ENV_LISTEN_ADDR, ConfigError, RunConfig, load_run_config
from .pipeline import (
    PipelineError,
    build_benchmark,
    build_runtime,
    evaluate_run,
    run_benchmark,
    verify_blocks,
)
from .scenario import Scenario


def _runtime(config_path: str | None, **overrides):
    try:
        config = load_run_config(config_path, overrides=overrides)
        return build_runtime(config)
    except (ConfigError, Exception) as exc:
        raise click.ClickException(str(exc)) from exc


_CONFIG_OPT = click.option(
    "--config", "config_path", type=click.Path(), default=None,
    help="Run config JSON (paths, budgets, seed).",
)
_SEED_OPT = click.option("--seed", type=int, default=None, help="Override the seed.")


@click.group()
def main() -> None:
    """Predictive multilingual evaluation over a restricted evidence corpus."""


@main.command()
@_CONFIG_OPT
def ingest(config_path: str | None) -> None:
    """Build the corpus and knowledge-base store; report coverage stats."""
    runtime = _runtime(config_path)
    corpus = runtime.corpus
    click.echo(f"tasks: {', '.join(corpus.tasks())}")
    for task in corpus.tasks():
        combined = corpus.combined[task]
        reduced = corpus.reduced.get(task)
        click.echo(
            f"  {task}: combined {combined.record_count()} records / "
            f"{len(combined.languages())} languages; reduced "
            f"{reduced.record_count() if reduced else 0} records / "
            f"{len(reduced.languages()) if reduced else 0} languages"
        )
    click.echo(f"removed papers: {sorted(corpus.removed_papers)}")
    click.echo(f"languages with typology vectors: {len(runtime.typology.vectors)}")
    click.echo(f"close/distant threshold: {runtime.split.tau:.6f}")
    if runtime.kb_store is not None:
        click.echo(f"knowledge base: {len(runtime.kb_store)} documents")


@main.command("build-benchmark")
@_CONFIG_OPT
@_SEED_OPT
@click.option("--tasks", default=None, help="Comma-separated task subset.")
@click.option("--scenarios", default=None, help="Comma-separated scenario subset (S1..S5).")
@click.option("--n-numeric", type=int, default=25, show_default=True)
@click.option("--n-comparative", type=int, default=25, show_default=True)
@click.option("--out", "out_subdir", default="benchmark", show_default=True)
@click.option("--verify/--no-verify", default=True, show_default=True,
              help="Re-classify every generated question against its block.")
def build_benchmark_cmd(
    config_path: str | None,
    seed: int | None,
    tasks: str | None,
    scenarios: str | None,
    n_numeric: int,
    n_comparative: int,
    out_subdir: str,
    verify: bool,
) -> None:
    """Emit question files per instantiable (task, scenario) block."""
    runtime = _runtime(config_path, seed=seed)
    out_dir = Path(runtime.config.out_dir) / out_subdir
    task_list = tasks.split(",") if tasks else None
    scenario_list = (
        [Scenario(s.strip()) for s in scenarios.split(",")] if scenarios else None
    )
    try:
        written = build_benchmark(
            runtime, out_dir, tasks=task_list, scenarios=scenario_list,
            n_numeric=n_numeric, n_comparative=n_comparative,
        )
    except PipelineError as exc:
        raise click.ClickException(str(exc)) from exc
    for path in written:
        click.echo(str(path))
    if verify:
        checked = verify_blocks(runtime, out_dir)
        click.echo(f"verified: {checked} questions re-classify to their blocks")


@main.command()
@_CONFIG_OPT
@_SEED_OPT
@click.option("--questions", required=True, type=click.Path(exists=True),
              help="Question file or directory of block files.")
@click.option("--run-id", default="run", show_default=True)
def run(config_path: str | None, seed: int | None, questions: str, run_id: str) -> None:
    """Execute one conversation per question with the configured backends."""
    runtime = _runtime(config_path, seed=seed)
    run_dir = Path(runtime.config.out_dir) / "runs" / run_id
    started = time.monotonic()
    results = run_benchmark(runtime, questions, run_dir)
    elapsed = time.monotonic() - started
    n = sum(1 for line in results.read_text(encoding="utf-8").splitlines() if line)
    click.echo(f"{n} conversations -> {results} ({elapsed:.1f}s)")


@main.command()
@_CONFIG_OPT
@click.option("--run-id", default="run", show_default=True)
@click.option("--judge/--no-judge", default=True, show_default=True)
@click.option("--diagnostics/--no-diagnostics", default=True, show_default=True)
@click.option("--thresholds", type=click.Path(exists=True), default=None,
              help='JSON file, e.g. {"max_mae": 20, "min_accuracy": 0.2}.')
def evaluate(
    config_path: str | None,
    run_id: str,
    judge: bool,
    diagnostics: bool,
    thresholds: str | None,
) -> None:
    """Score a run against ground truth; nonzero exit on threshold violation."""
    runtime = _runtime(config_path)
    run_dir = Path(runtime.config.out_dir) / "runs" / run_id
    threshold_values = (
        json.loads(Path(thresholds).read_text(encoding="utf-8")) if thresholds else None
    )
    try:
        summary = evaluate_run(
            runtime, run_dir, judge=judge, diagnostics=diagnostics,
            thresholds=threshold_values,
        )
    except PipelineError as exc:
        raise click.ClickException(str(exc)) from exc
    mae = summary.get("mae_overall")
    accuracy = summary.get("accuracy_overall")
    click.echo(
        f"MAE {mae if mae is None else round(mae, 3)} | "
        f"accuracy {accuracy if accuracy is None else round(accuracy, 3)} | "
        f"coverage {round(summary.get('coverage', 0.0), 3)}"
    )
    click.echo(f"summary: {run_dir / 'summary.json'}")
    if threshold_values and not summary.get("thresholds_ok", True):
        click.echo("acceptance thresholds violated", err=True)
        sys.exit(1)


@main.command()
@_CONFIG_OPT
@click.option("--run-id", default="run", show_default=True)
def report(config_path: str | None, run_id: str) -> None:
    """Render the per-task / per-scenario breakdown tables for a run."""
    runtime = _runtime(config_path)
    summary_path = Path(runtime.config.out_dir) / "runs" / run_id / "summary.json"
    if not summary_path.exists():
        raise click.ClickException(
            f"no summary at {summary_path}; run `evaluate` first"
        )
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    tables = summary["breakdown"]

    def fmt(value) -> str:
        return "-" if value is None else f"{value:.2f}"

    click.echo(f"overall: MAE {fmt(tables['overall']['mae'])} | "
               f"accuracy {fmt(tables['overall']['accuracy'])} | "
               f"coverage {fmt(tables['overall']['coverage'])}")
    for section in ("per_task", "per_scenario"):
        click.echo(section.replace("_", " ") + ":")
        for cell, stats in tables[section].items():
            click.echo(
                f"  {cell:<24} MAE {fmt(stats['mae']):>7}  "
                f"acc {fmt(stats['accuracy']):>6}  "
                f"(n={stats['n_scored'] + stats['n_comparative']})"
            )
    if tables.get("per_metric_mae"):
        click.echo("per metric MAE:")
        for metric, stats in tables["per_metric_mae"].items():
            click.echo(f"  {metric:<24} MAE {fmt(stats['mae']):>7}  (n={stats['n_scored']})")


@main.command()
@_CONFIG_OPT
@click.option("--host", default=None, help="Listen host (env TMLPREDICT_LISTEN_ADDR).")
@click.option("--port", type=int, default=8000, show_default=True)
def serve(config_path: str | None, host: str | None, port: int) -> None:
    """Start the HTTP service."""
    import os

    import uvicorn

    from .service import create_app

    runtime = _runtime(config_path)
    data_dir = Path(runtime.config.out_dir)
    app = create_app(runtime, data_dir)
    listen = host or os.environ.get(ENV_LISTEN_ADDR, "127.0.0.1")
    uvicorn.run(app, host=listen, port=port)


@main.command()
@click.option("--server", default="http://127.0.0.1:8000", show_default=True)
@click.option("--task", required=True)
@click.option("--language", default=None)
@click.option("--model-family", default=None)
@click.option("--query-type", default="numeric_prediction", show_default=True)
@click.option("--text", default="")
@click.option("--follow-up", "follow_up_id", default=None,
              help="Conversation id to continue instead of starting fresh.")
@click.option("--timeout", type=float, default=60.0, show_default=True)
def ask(
    server: str,
    task: str,
    language: str | None,
    model_family: str | None,
    query_type: str,
    text: str,
    follow_up_id: str | None,
    timeout: float,
) -> None:
    """Thin client: post a query to a running service and stream its events."""
    import httpx

    client = httpx.Client(base_url=server, timeout=10.0)
    if follow_up_id:
        response = client.post(
            f"/conversations/{follow_up_id}/messages", json={"text": text}
        )
        if response.status_code == 409:
            raise click.ClickException("turn in progress; try again shortly")
        response.raise_for_status()
        conversation_id = follow_up_id
    else:
        response = client.post(
            "/conversations",
            json={
                "text": text,
                "task": task,
                "language": language,
                "model_family": model_family,
                "query_type": query_type,
            },
        )
        response.raise_for_status()
        conversation_id = response.json()["conversation_id"]
    click.echo(f"conversation: {conversation_id}")

    cursor = 0
    deadline = time.monotonic() + timeout
    final = None
    while time.monotonic() < deadline:
        events = client.get(
            f"/conversations/{conversation_id}/events",
            params={"cursor": cursor, "wait": 2.0},
        ).json()
        for event in events["events"]:
            etype = event["type"]
            payload = event["payload"]
            if etype == "thought_created":
                click.echo(f"  + {payload['node_id']}: {payload['hypothesis']}")
            elif etype == "state_changed":
                click.echo(f"  - {payload['node_id']} -> {payload['to']}")
            elif etype == "aggregated":
                final = payload["final_response"]
        cursor = events["next_cursor"]
        if final is not None:
            break
    if final is None:
        raise click.ClickException("timed out waiting for the final response")
    prediction = final.get("prediction", {})
    kind = prediction.get("kind")
    if kind == "numeric":
        click.echo(
            f"prediction: {prediction['metric_name']} = {prediction['value_text']}"
        )
    elif kind == "comparative":
        click.echo(f"prediction: best model = {prediction['answer_label']}")
    else:
        click.echo("prediction: none (no evidence)")
    click.echo(f"citations: {len(final.get('citations', []))}")


if __name__ == "__main__":
    main()
