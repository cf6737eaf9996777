"""Command-line entry points.

  scidea run     one researcher query end to end, ranked ideas to JSON
  scidea batch   dataset-scale evaluation grid, CSV + markdown + figures
  scidea replay  deterministic re-execution of a recorded session journal
  scidea serve   the HTTP session service

Exit codes: 0 success, 1 pipeline or replay failure (stage named on stderr),
2 argument errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from .config import build_gateway, build_manager, deterministic_session_id, load_config
from .domain import EmbeddingStrategy, PromptStrategy
from .errors import ScideaError
from .refinement import StopReason
from .replay import replay_events
from .report import render_figures, render_markdown, run_grid, write_csv
from .retrieval import load_dataset
from .service import build_app, ranked_view
from .session import SessionJournal

STRATEGY_CHOICES = ("zs", "zscot", "fs2", "fs3", "fs5")
EMBEDDING_CHOICES = ("none", "token", "sentence")

_EMBEDDING_BY_LABEL = {
    "none": EmbeddingStrategy.NONE,
    "token": EmbeddingStrategy.TOKEN_LEVEL,
    "sentence": EmbeddingStrategy.SENTENCE_LEVEL,
}


@click.group()
def main() -> None:
    """Context-aware scientific ideation pipeline."""


def _fail(stage: str, exc: ScideaError) -> None:
    click.echo(f"pipeline failed at {stage}: {exc.code}: {exc.message}", err=True)
    sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True), help="Provider config (TOML or JSON).")
@click.option("--orcid", required=True, help="Researcher ORCID identifier.")
@click.option("--query", required=True, help="Free-text research question.")
@click.option("--strategy", type=click.Choice(STRATEGY_CHOICES), default="zs", show_default=True)
@click.option("--embedding", type=click.Choice(EMBEDDING_CHOICES), default="token", show_default=True)
@click.option("--theta-n", type=float, default=None, help="Novelty threshold (default from config).")
@click.option("--theta-s", type=float, default=None, help="Surprise threshold (default from config).")
@click.option("--model", default="", help="Model id from the config (default: config default_model).")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Ranked-ideas JSON output file.")
@click.option("--feedback", multiple=True, help="Researcher feedback entry; repeatable, each triggers another iteration round.")
@click.option("--data-dir", type=click.Path(), default=None, help="Session/journal directory (default from config).")
def run(
    config_path: str,
    orcid: str,
    query: str,
    strategy: str,
    embedding: str,
    theta_n: Optional[float],
    theta_s: Optional[float],
    model: str,
    out_path: str,
    feedback: tuple[str, ...],
    data_dir: Optional[str],
) -> None:
    """Run create -> facets -> gap -> iterations -> rank for one query."""
    config = load_config(config_path)
    prompt_strategy = PromptStrategy.parse(strategy)
    embedding_strategy = _EMBEDDING_BY_LABEL[embedding]
    theta_n = config.theta_n if theta_n is None else theta_n
    theta_s = config.theta_s if theta_s is None else theta_s

    manager = build_manager(
        config,
        prompt_strategy,
        embedding_strategy,
        model_id=model,
        data_dir=Path(data_dir) if data_dir else None,
    )
    session_id = deterministic_session_id(orcid, query) if config.deterministic else None

    stage = "create"
    try:
        session = manager.create_session(orcid, query, session_id=session_id)
        session_id = session.id
        manager.set_thresholds(session_id, theta_n, theta_s)
        stage = "facets"
        manager.run_facets(session_id)
        stage = "gap"
        manager.run_gap(session_id)
        stage = "iterate"
        reports = []
        session, report = manager.run_iteration(session_id)
        reports.append(report)
        while report.stop_reason in (None, StopReason.NONE):
            session, report = manager.run_iteration(session_id)
            reports.append(report)
        for entry in feedback:
            stage = "feedback"
            manager.submit_feedback(session_id, entry)
            stage = "iterate"
            session, report = manager.run_iteration(session_id)
            reports.append(report)
            while report.stop_reason in (None, StopReason.NONE):
                session, report = manager.run_iteration(session_id)
                reports.append(report)
        stage = "rank"
        session = manager.run_rank(session_id)
    except ScideaError as exc:
        _fail(stage, exc)

    output = {
        "session_id": session_id,
        "orcid": orcid,
        "query": query,
        "keyphrases": list(session.profile.keyphrases),
        "thresholds": session.thresholds.to_dict(),
        "strategy": prompt_strategy.label,
        "embedding_strategy": embedding_strategy.value,
        "model_id": model or config.default_model,
        "gap": session.gap,
        "iterations": [r.to_dict() for r in reports],
        "ranked_ideas": ranked_view(session),
        "feedback_log": list(session.feedback_log),
        "warnings": list(session.warnings),
        "status": session.status.value,
    }
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(output, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    click.echo(f"wrote {out} ({len(output['ranked_ideas'])} ideas)")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--models", default="", help="Comma-separated model ids (default: every model in the config).")
@click.option("--strategies", default="zs", show_default=True, help="Comma-separated strategy labels.")
@click.option("--embeddings", default="none", show_default=True, help="Comma-separated embedding labels.")
@click.option("--out-csv", "out_csv", required=True, type=click.Path())
@click.option("--markdown", is_flag=True, help="Also write a markdown table next to the CSV.")
@click.option("--figures/--no-figures", default=True, show_default=True, help="Render bar charts next to the CSV.")
@click.option("--workers", type=int, default=4, show_default=True)
@click.option("--limit", type=int, default=0, help="Evaluate only the first N profiles (0 = all).")
@click.option("--data-dir", type=click.Path(), default=None)
def batch(
    config_path: str,
    dataset_path: str,
    models: str,
    strategies: str,
    embeddings: str,
    out_csv: str,
    markdown: bool,
    figures: bool,
    workers: int,
    limit: int,
    data_dir: Optional[str],
) -> None:
    """Run the evaluation grid over a researcher dataset."""
    config = load_config(config_path)
    try:
        records = load_dataset(dataset_path)
    except ScideaError as exc:
        _fail("dataset", exc)
    if not records:
        click.echo("no records in dataset", err=True)
        sys.exit(1)
    if limit > 0:
        records = records[:limit]

    model_ids = [m.strip() for m in models.split(",") if m.strip()] or list(config.models)
    for model_id in model_ids:
        if model_id not in config.models:
            raise click.UsageError(f"unknown model id {model_id!r}")
    try:
        strategy_list = [PromptStrategy.parse(label) for label in strategies.split(",") if label.strip()]
    except ScideaError as exc:
        raise click.UsageError(exc.message)
    embedding_list = []
    for label in embeddings.split(","):
        label = label.strip().lower()
        if not label:
            continue
        if label not in _EMBEDDING_BY_LABEL:
            raise click.UsageError(f"unknown embedding {label!r}")
        embedding_list.append(_EMBEDDING_BY_LABEL[label])
    if not strategy_list or not embedding_list:
        raise click.UsageError("at least one strategy and one embedding are required")

    work_dir = Path(data_dir) if data_dir else config.data_dir
    gateway = build_gateway(config, work_dir)
    rows = run_grid(records, config, model_ids, strategy_list, embedding_list, gateway, workers=workers)
    out = Path(out_csv)
    write_csv(rows, out)
    click.echo(f"wrote {out} ({len(rows)} cells)")
    if markdown:
        md_path = out.with_suffix(".md")
        md_path.write_text(render_markdown(rows) + "\n", encoding="utf-8")
        click.echo(f"wrote {md_path}")
    if figures:
        for figure_path in render_figures(rows, out):
            click.echo(f"wrote {figure_path}")
    if all(row.count == 0 for row in rows):
        click.echo("every cell failed", err=True)
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--journal", "journal_path", required=True, type=click.Path(exists=True))
@click.option("--cache", "cache_path", type=click.Path(), default=None, help="Call cache (default: calls_cache.json next to the journal).")
def replay(config_path: str, journal_path: str, cache_path: Optional[str]) -> None:
    """Re-execute a session journal purely from cached calls and verify it."""
    from .gateway import CallCache

    from .session import check_contiguous

    config = load_config(config_path)
    journal_file = Path(journal_path)
    try:
        events = SessionJournal.read_events(journal_file)
        check_contiguous(events)
    except ScideaError as exc:
        click.echo(f"replay failed: {exc.code}: {exc.message}", err=True)
        sys.exit(1)

    cache_file = Path(cache_path) if cache_path else journal_file.parent / "calls_cache.json"
    if not cache_file.exists():
        click.echo(f"replay failed: call cache not found at {cache_file}", err=True)
        sys.exit(1)
    gateway = build_gateway(config, journal_file.parent, cache_only=True)
    gateway.cache = CallCache(cache_file)

    outcome = replay_events(events, gateway)
    if outcome.ok:
        click.echo(outcome.message)
        return
    click.echo(outcome.message, err=True)
    for line in outcome.diff:
        click.echo(line, err=True)
    sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--strategy", type=click.Choice(STRATEGY_CHOICES), default="zs", show_default=True)
@click.option("--embedding", type=click.Choice(EMBEDDING_CHOICES), default="token", show_default=True)
@click.option("--data-dir", type=click.Path(), default=None)
def serve(config_path: str, host: str, port: int, strategy: str, embedding: str, data_dir: Optional[str]) -> None:
    """Serve the session HTTP API."""
    import uvicorn

    config = load_config(config_path)
    manager = build_manager(
        config,
        PromptStrategy.parse(strategy),
        _EMBEDDING_BY_LABEL[embedding],
        data_dir=Path(data_dir) if data_dir else None,
    )
    app = build_app(manager)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
