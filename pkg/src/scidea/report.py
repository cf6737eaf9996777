"""Batch evaluation grid: run every (model, strategy, embedding) cell over a
dataset of researcher profiles and report per-cell criterion averages.

Output is a CSV whose leading columns mirror the comparison-table layout
(model, size, prompt, four criteria, avg), followed by the embedding
strategy, the number of ideas averaged, and any per-cell errors. A markdown
rendering and per-embedding bar charts can be written alongside the CSV.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import AppConfig
from .domain import (
    AhaThresholds,
    EmbeddingStrategy,
    PromptStrategy,
    ResearcherProfile,
    RubricScore,
    Session,
    SessionStatus,
    overall_score,
)
from .errors import ScideaError
from .gateway import Gateway
from .refinement import run_iteration
from .retrieval import DatasetRecord
from .service import partition_facets
from .stages import evaluate_idea, extract_facets, identify_gap

CSV_COLUMNS = (
    "model",
    "size",
    "prompt",
    "novelty",
    "excitement",
    "feasibility",
    "effectiveness",
    "avg",
    "embedding",
    "count",
    "errors",
)


@dataclass(frozen=True)
class BatchReportRow:
    model: str
    size: str
    prompt: str
    novelty: float
    excitement: float
    feasibility: float
    effectiveness: float
    avg: float
    embedding: str = "NONE"
    count: int = 0
    errors: str = ""

    def __post_init__(self) -> None:
        if self.count > 0:
            expected = (self.novelty + self.excitement + self.feasibility + self.effectiveness) / 4.0
            if abs(self.avg - expected) > 1e-9:
                raise ScideaError(
                    "OUT_OF_RANGE", f"avg {self.avg} is not the mean of the criteria", field="avg"
                )

    def as_csv(self) -> list[str]:
        def num(x: float) -> str:
            return f"{x:.4f}" if self.count else ""

        return [
            self.model,
            self.size,
            self.prompt,
            num(self.novelty),
            num(self.excitement),
            num(self.feasibility),
            num(self.effectiveness),
            num(self.avg),
            self.embedding,
            str(self.count),
            self.errors,
        ]


def _profile_query(record: DatasetRecord) -> str:
    if record.researcher_query_keyword:
        return ", ".join(record.researcher_query_keyword)
    return f"research directions for {record.researcher_name}"


def evaluate_profile(
    record: DatasetRecord,
    row_index: int,
    config,
    gateway: Gateway,
    thresholds: AhaThresholds,
) -> list[RubricScore]:
    """One profile through facets -> gap -> one iterate/score/dive cycle ->
    per-idea evaluation; returns the rubric scores of all resulting ideas."""
    profile = ResearcherProfile(
        name=record.researcher_name,
        orcid=record.orcid,
        query=_profile_query(record),
        keyphrases=record.researcher_query_keyword,
    )
    session = Session(
        id=f"batch-{row_index}",
        profile=profile,
        author_publications=record.research_full_paper,
        related_publications=record.similar_full_paper,
        thresholds=thresholds,
        status=SessionStatus.RETRIEVED,
    )
    publications = list(record.research_full_paper) + list(record.similar_full_paper)
    if not publications:
        raise ScideaError("EMPTY_INPUT", "profile has no publications", row=row_index)
    facets = tuple(extract_facets(pub, config.strategy, gateway, config.model_id) for pub in publications)
    session = Session(
        id=session.id,
        profile=profile,
        author_publications=record.research_full_paper,
        related_publications=record.similar_full_paper,
        facets=facets,
        thresholds=thresholds,
        status=SessionStatus.FACETED,
    )
    author_facets, related_facets = partition_facets(session)
    gap, _warnings = identify_gap(
        author_facets,
        related_facets,
        config.strategy,
        gateway,
        config.model_id,
        titles=session.publication_titles(),
    )
    session = Session(
        id=session.id,
        profile=profile,
        author_publications=record.research_full_paper,
        related_publications=record.similar_full_paper,
        facets=facets,
        gap=gap,
        thresholds=thresholds,
        status=SessionStatus.GAPPED,
    )
    session, _report = run_iteration(session, config, gateway, journal=None)
    return [evaluate_idea(sc.candidate, gateway, config.model_id) for sc in session.candidates]


def run_cell(
    records: Sequence[DatasetRecord],
    app_config: AppConfig,
    model_id: str,
    strategy: PromptStrategy,
    embedding: EmbeddingStrategy,
    gateway: Gateway,
) -> BatchReportRow:
    config = app_config.refinement(strategy, embedding, model_id)
    thresholds = AhaThresholds(app_config.theta_n, app_config.theta_s)
    scores: list[RubricScore] = []
    errors: list[str] = []
    for index, record in enumerate(records):
        try:
            scores.extend(evaluate_profile(record, index, config, gateway, thresholds))
        except ScideaError as exc:
            errors.append(f"row {index}: {exc.code}")
    spec = app_config.models[model_id]
    if not scores:
        errors.append("no ideas scored")
        return BatchReportRow(
            model=spec.display_name,
            size=spec.size,
            prompt=strategy.label,
            novelty=0.0,
            excitement=0.0,
            feasibility=0.0,
            effectiveness=0.0,
            avg=0.0,
            embedding=embedding.value,
            count=0,
            errors="; ".join(errors),
        )
    n = len(scores)
    novelty = sum(s.novelty for s in scores) / n
    excitement = sum(s.excitement for s in scores) / n
    feasibility = sum(s.feasibility for s in scores) / n
    effectiveness = sum(s.effectiveness for s in scores) / n
    return BatchReportRow(
        model=spec.display_name,
        size=spec.size,
        prompt=strategy.label,
        novelty=novelty,
        excitement=excitement,
        feasibility=feasibility,
        effectiveness=effectiveness,
        avg=(novelty + excitement + feasibility + effectiveness) / 4.0,
        embedding=embedding.value,
        count=n,
        errors="; ".join(errors),
    )


def run_grid(
    records: Sequence[DatasetRecord],
    app_config: AppConfig,
    model_ids: Sequence[str],
    strategies: Sequence[PromptStrategy],
    embeddings: Sequence[EmbeddingStrategy],
    gateway: Gateway,
    workers: int = 4,
) -> list[BatchReportRow]:
    cells = [
        (model_id, strategy, embedding)
        for model_id in model_ids
        for strategy in strategies
        for embedding in embeddings
    ]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(
            pool.map(lambda cell: run_cell(records, app_config, cell[0], cell[1], cell[2], gateway), cells)
        )
    rows.sort(key=lambda r: (r.model, r.size, r.prompt, r.embedding))
    return rows


def write_csv(rows: Sequence[BatchReportRow], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


def render_markdown(rows: Sequence[BatchReportRow]) -> str:
    """One table per embedding strategy, mirroring the comparison-table layout."""
    lines: list[str] = []
    for embedding in sorted({row.embedding for row in rows}):
        lines.append(f"## Embedding: {embedding}")
        lines.append("")
        lines.append("| Model | Size | Prompt | Novelty | Excitement | Feasibility | Effectiveness | Avg |")
        lines.append("|---|---|---|---|---|---|---|---|")
        for row in rows:
            if row.embedding != embedding:
                continue
            if row.count:
                lines.append(
                    f"| {row.model} | {row.size} | {row.prompt} | {row.novelty:.2f} | {row.excitement:.2f} "
                    f"| {row.feasibility:.2f} | {row.effectiveness:.2f} | {row.avg:.2f} |"
                )
            else:
                lines.append(f"| {row.model} | {row.size} | {row.prompt} | - | - | - | - | - |")
        lines.append("")
    return "\n".join(lines)


def render_figures(rows: Sequence[BatchReportRow], out_stem: Path) -> list[Path]:
    """Grouped bar chart of per-cell averages, one file per embedding."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written: list[Path] = []
    for embedding in sorted({row.embedding for row in rows}):
        subset = [row for row in rows if row.embedding == embedding and row.count]
        if not subset:
            continue
        models = sorted({row.model for row in subset})
        prompts = sorted({row.prompt for row in subset})
        fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(models)), 4.0))
        width = 0.8 / max(1, len(prompts))
        for offset, prompt in enumerate(prompts):
            xs, ys = [], []
            for position, model in enumerate(models):
                cell = next((r for r in subset if r.model == model and r.prompt == prompt), None)
                if cell is None:
                    continue
                xs.append(position + offset * width)
                ys.append(cell.avg)
            ax.bar(xs, ys, width=width, label=prompt)
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(models))])
        ax.set_xticklabels(models)
        ax.set_ylabel("Average score (1-10)")
        ax.set_title(f"Judge averages by model and prompt ({embedding.lower()} embedding)")
        ax.set_ylim(0, 10)
        ax.legend(fontsize=8)
        fig.tight_layout()
        out_path = out_stem.with_name(f"{out_stem.stem}_{embedding.lower()}.png")
        fig.savefig(out_path, dpi=120)
        plt.close(fig)
        written.append(out_path)
    return written
