"""The iterate-score-dive loop and its stopping rules.

One iteration generates candidates from the gap (with all researcher
feedback entries bound as focus points), embeds and scores each against
every earlier candidate, flags Aha moments, and deep-dives each flagged
candidate into a refined descendant that is then re-scored like any other
candidate. Because a dive's parent is among its novelty priors, a dive that
merely restates its parent scores near-zero novelty and cannot re-flag.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import scoring
from .domain import (
    AhaScore,
    EmbeddingStrategy,
    FacetSet,
    IdeaCandidate,
    PromptStrategy,
    Provenance,
    ScoredCandidate,
    Session,
    SessionStatus,
    ZS,
)
from .errors import ScideaError
from .gateway import ChatRequest, Gateway
from .prompts import PromptBinding, PromptStage, format_focus_points, parse_tagged_idea, render_prompt
from .session import SessionJournal
from .stages import SEED, generate_ideas, stage_temperature


class StopReason(str, Enum):
    MAX_ITERATIONS = "MAX_ITERATIONS"
    THRESHOLD_MET = "THRESHOLD_MET"
    RESEARCHER_ACCEPT = "RESEARCHER_ACCEPT"
    NONE = "NONE"


@dataclass(frozen=True)
class RefinementConfig:
    """Loop parameters; model/encoder wiring lives on the gateway."""

    strategy: PromptStrategy = ZS
    embedding_strategy: EmbeddingStrategy = EmbeddingStrategy.TOKEN_LEVEL
    model_id: str = "default"
    scoring_model_id: str = ""
    encoder_id: str = "hashed"
    ideas_per_call: int = 5
    max_iterations: int = 3
    min_aha: int = 1

    def scoring_model(self) -> str:
        return self.scoring_model_id or self.model_id


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    generated: int
    aha_flagged: int
    deep_dives: int
    stop_reason: Optional[StopReason] = None

    def __post_init__(self) -> None:
        if not 0 <= self.aha_flagged <= self.generated:
            raise ScideaError("OUT_OF_RANGE", "aha_flagged must not exceed generated", field="aha_flagged")
        if not 0 <= self.deep_dives <= max(self.aha_flagged, 0):
            raise ScideaError("OUT_OF_RANGE", "deep_dives must not exceed aha_flagged", field="deep_dives")

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "generated": self.generated,
            "aha_flagged": self.aha_flagged,
            "deep_dives": self.deep_dives,
            "stop_reason": self.stop_reason.value if self.stop_reason else None,
        }


@dataclass(frozen=True)
class DeepDiveResult:
    candidate: IdeaCandidate
    failed: bool = False


def candidate_text(candidate: IdeaCandidate) -> str:
    return f"{candidate.title}. {candidate.description}"


def scoring_context(gap: str, earlier: Sequence[IdeaCandidate]) -> str:
    """Conditioning text for surprise: the gap plus earlier idea titles in
    generation order."""
    lines = [gap] + [c.title for c in earlier]
    return "\n".join(lines)


def deep_dive(
    idea: IdeaCandidate,
    context: str,
    gateway: Gateway,
    model_id: str,
    *,
    new_id: Optional[int] = None,
    iteration: Optional[int] = None,
    focus_points: Sequence[str] = (),
) -> DeepDiveResult:
    """Refine one flagged candidate through the deep-dive template.

    The refined idea is read from the response's <idea> span and returned as
    a new candidate with provenance DEEP_DIVE linked to its parent. A
    response without a usable span keeps the original idea and reports
    failed=True (a DIVE_FAILED marker for the caller to record)."""
    slots = {"idea": f"{idea.title}: {idea.description}", "context": context}
    if focus_points:
        slots["researcher_focus_points"] = format_focus_points(focus_points)
    prompt = render_prompt(PromptBinding(PromptStage.AHA_DIVE, ZS, slots))
    request = ChatRequest.user(
        prompt, temperature=stage_temperature("AHA_DIVE"), seed=SEED, model_id=model_id
    )
    response = gateway.complete_chat(request, stage="AHA_DIVE")
    try:
        refined = parse_tagged_idea(response)
    except ScideaError as exc:
        if exc.code == "NO_IDEA_SPAN":
            return DeepDiveResult(candidate=idea, failed=True)
        raise
    return DeepDiveResult(
        candidate=IdeaCandidate(
            id=new_id if new_id is not None else idea.id,
            title=refined,
            description=refined,
            iteration=iteration if iteration is not None else idea.iteration,
            provenance=Provenance.DEEP_DIVE,
            parent_id=idea.id,
        )
    )


def _score_candidate(
    candidate: IdeaCandidate,
    prior_vecs: list[np.ndarray],
    context: str,
    thresholds,
    config: RefinementConfig,
    gateway: Gateway,
) -> tuple[AhaScore, Optional[np.ndarray]]:
    if config.embedding_strategy is EmbeddingStrategy.NONE:
        return AhaScore.unscored(), None
    vec = gateway.embed_text(candidate_text(candidate), config.embedding_strategy, config.encoder_id)
    novelty = scoring.novelty_score(vec, prior_vecs)
    surprise: Optional[float] = None
    skipped: Optional[str] = None
    try:
        scored = gateway.score_continuation(context, candidate_text(candidate), config.scoring_model())
        surprise = scoring.surprise_score(scored)
    except ScideaError as exc:
        if exc.code != "LOGPROBS_UNSUPPORTED":
            raise
        skipped = "LOGPROBS_UNSUPPORTED"
    is_aha = False
    if surprise is not None:
        is_aha = scoring.detect_aha(novelty, surprise, thresholds)
    return (
        AhaScore(
            novelty=novelty,
            surprise=surprise,
            is_aha=is_aha,
            embedding_strategy=config.embedding_strategy,
            surprise_skipped=skipped,
        ),
        vec,
    )


def _designated_facets(session: Session) -> FacetSet:
    author_ids = {p.id for p in session.author_publications}
    for facets in session.facets:
        if facets.publication_id in author_ids:
            return facets
    if session.facets:
        return session.facets[0]
    raise ScideaError("EMPTY_FACETS", "session has no facets; run facet extraction first")


def _analogous_facets(session: Session) -> Optional[FacetSet]:
    related_ids = {p.id for p in session.related_publications}
    for facets in session.facets:
        if facets.publication_id in related_ids:
            return facets
    return None


def run_iteration(
    session: Session,
    config: RefinementConfig,
    gateway: Gateway,
    journal: Optional[SessionJournal] = None,
) -> tuple[Session, IterationReport]:
    """Run one generate-score-dive cycle and append the results.

    The session is only advanced if every stage succeeds; journal events
    (IDEATED, SCORED, DIVED) are emitted after the cycle completes so a
    failed attempt leaves persisted state untouched (the gateway call journal
    still records the attempted requests).
    """
    if session.status not in (SessionStatus.GAPPED, SessionStatus.IDEATING):
        raise ScideaError(
            "ILLEGAL_TRANSITION",
            f"iteration requires status GAPPED or IDEATING, session is {session.status.value}",
            status=session.status.value,
        )
    iteration = session.iteration + 1
    titles = session.publication_titles()
    designated = _designated_facets(session)
    analogous = _analogous_facets(session)
    generated, warnings = generate_ideas(
        session.gap,
        designated,
        analogous,
        config.strategy,
        gateway,
        config.model_id,
        iteration=iteration,
        id_start=session.next_candidate_id(),
        author_title=titles.get(designated.publication_id, ""),
        analogous_title=titles.get(analogous.publication_id, "") if analogous else "",
        focus_points=session.feedback_log,
        max_ideas=config.ideas_per_call,
    )

    earlier: list[IdeaCandidate] = [sc.candidate for sc in session.candidates]
    prior_vecs: list[np.ndarray] = []
    if config.embedding_strategy is not EmbeddingStrategy.NONE:
        prior_vecs = [
            gateway.embed_text(candidate_text(c), config.embedding_strategy, config.encoder_id) for c in earlier
        ]

    scored_new: list[ScoredCandidate] = []
    for candidate in generated:
        context = scoring_context(session.gap, earlier)
        aha, vec = _score_candidate(candidate, prior_vecs, context, session.thresholds, config, gateway)
        scored_new.append(ScoredCandidate(candidate=candidate, aha=aha))
        earlier.append(candidate)
        if vec is not None:
            prior_vecs.append(vec)

    flagged = [sc for sc in scored_new if sc.aha.is_aha]
    dives: list[tuple[ScoredCandidate, DeepDiveResult]] = []
    next_id = (max((c.id for c in earlier), default=-1)) + 1
    for sc in flagged:
        context = scoring_context(session.gap, earlier)
        result = deep_dive(
            sc.candidate,
            context,
            gateway,
            config.model_id,
            new_id=next_id,
            iteration=iteration,
            focus_points=session.feedback_log,
        )
        if result.failed:
            dives.append((sc, result))
            continue
        aha, vec = _score_candidate(result.candidate, prior_vecs, context, session.thresholds, config, gateway)
        dives.append((ScoredCandidate(candidate=result.candidate, aha=aha), result))
        earlier.append(result.candidate)
        if vec is not None:
            prior_vecs.append(vec)
        next_id += 1

    new_candidates = list(scored_new)
    dive_warnings: list[str] = []
    successful_dives = 0
    for scored_dive, result in dives:
        if result.failed:
            dive_warnings.append(f"DIVE_FAILED: candidate {result.candidate.id}")
        else:
            new_candidates.append(scored_dive)
            successful_dives += 1

    updated = replace(
        session.with_status(SessionStatus.IDEATING),
        candidates=session.candidates + tuple(new_candidates),
        iteration=iteration,
        warnings=session.warnings + tuple(warnings) + tuple(dive_warnings),
    )
    stop, reason = should_stop(updated, config)
    report = IterationReport(
        iteration=iteration,
        generated=len(generated),
        aha_flagged=len(flagged),
        deep_dives=successful_dives,
        stop_reason=reason if stop else StopReason.NONE,
    )

    if journal is not None:
        journal.append(
            "IDEATED",
            {
                "iteration": iteration,
                "candidates": [sc.candidate.to_dict() for sc in scored_new],
                "warnings": warnings,
                "strategy": config.strategy.to_dict(),
                "embedding_strategy": config.embedding_strategy.value,
                "model_id": config.model_id,
                "scoring_model_id": config.scoring_model(),
                "encoder_id": config.encoder_id,
                "ideas_per_call": config.ideas_per_call,
            },
        )
        journal.append(
            "SCORED",
            {"scores": [{"candidate_id": sc.candidate.id, "aha": sc.aha.to_dict()} for sc in scored_new]},
        )
        for scored_dive, result in dives:
            if result.failed:
                journal.append("DIVED", {"failed": True, "parent_id": result.candidate.id})
            else:
                journal.append(
                    "DIVED",
                    {
                        "failed": False,
                        "parent_id": scored_dive.candidate.parent_id,
                        "candidate": scored_dive.candidate.to_dict(),
                        "aha": scored_dive.aha.to_dict(),
                    },
                )
    return updated, report


def apply_feedback(session: Session, feedback: str) -> Session:
    """Append researcher feedback; later ideation and dive prompts carry
    every entry verbatim as focus points."""
    if session.status is SessionStatus.CLOSED:
        raise ScideaError("SESSION_CLOSED", "cannot apply feedback to a closed session", session_id=session.id)
    if not feedback.strip():
        raise ScideaError("EMPTY_FEEDBACK", "feedback must be non-empty")
    return replace(
        session.with_status(SessionStatus.IDEATING),
        feedback_log=session.feedback_log + (feedback,),
    )


def should_stop(session: Session, config: RefinementConfig) -> tuple[bool, StopReason]:
    """Stopping rules, checked in order: iteration budget, Aha quota,
    researcher acceptance."""
    if session.iteration >= config.max_iterations:
        return True, StopReason.MAX_ITERATIONS
    if len(session.aha_candidates()) >= config.min_aha:
        return True, StopReason.THRESHOLD_MET
    if session.accepted_candidate_id is not None:
        return True, StopReason.RESEARCHER_ACCEPT
    return False, StopReason.NONE
