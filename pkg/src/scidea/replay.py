"""Deterministic re-execution of a recorded session.

Replay walks the journal in order: data events (creation, retrieval,
selection, thresholds, feedback, acceptance, close) are applied verbatim,
while every stage event is re-executed against the gateway in cache-only
mode using the parameters recorded in its payload. The final re-executed
state must equal the state folded directly from the journal, field by field;
any divergence, sequence gap, or cache miss fails the replay.
"""

from __future__ import annotations

import difflib
import json
from dataclasses import dataclass
from typing import Optional

from .domain import EmbeddingStrategy, PromptStrategy, Session
from .errors import ScideaError
from .gateway import Gateway
from .refinement import RefinementConfig, run_iteration
from .session import SessionEvent, apply_event, check_contiguous, fold_events
from .service import facet_publications, partition_facets
from .stages import extract_facets, identify_gap, rank_ideas

_VERBATIM_KINDS = {"CREATED", "RETRIEVED", "SELECTED", "THRESHOLDS_SET", "FEEDBACK", "ACCEPTED", "CLOSED"}
# Emitted by re-execution of the IDEATED event; skipped when walking.
_DERIVED_KINDS = {"SCORED", "DIVED"}


@dataclass
class ReplayOutcome:
    ok: bool
    message: str
    diff: list[str]


def _apply(state: Optional[Session], event: SessionEvent, kind: str, payload: dict) -> Session:
    clone = SessionEvent(
        session_id=event.session_id,
        sequence=event.sequence,
        timestamp=event.timestamp,
        kind=kind,
        payload=payload,
    )
    return apply_event(state, clone)


def _iteration_config(payload: dict) -> RefinementConfig:
    return RefinementConfig(
        strategy=PromptStrategy.from_dict(payload["strategy"]),
        embedding_strategy=EmbeddingStrategy(payload["embedding_strategy"]),
        model_id=payload["model_id"],
        scoring_model_id=payload.get("scoring_model_id", ""),
        encoder_id=payload.get("encoder_id", "hashed"),
        ideas_per_call=payload.get("ideas_per_call", 5),
    )


def replay_events(events: list[SessionEvent], gateway: Gateway) -> ReplayOutcome:
    """Re-execute a journal against a cache-only gateway and compare states."""
    try:
        check_contiguous(events)
    except ScideaError as exc:
        return ReplayOutcome(ok=False, message=exc.message, diff=[])
    if not events:
        return ReplayOutcome(ok=False, message="journal contains no events", diff=[])

    reference = fold_events(events)
    state: Optional[Session] = None
    for event in events:
        try:
            state = _replay_one(state, event, gateway)
        except ScideaError as exc:
            if exc.code == "CACHE_MISS":
                return ReplayOutcome(
                    ok=False, message=f"cache miss at sequence {event.sequence}", diff=[]
                )
            return ReplayOutcome(
                ok=False, message=f"replay failed at sequence {event.sequence}: {exc.code}: {exc.message}", diff=[]
            )
    assert state is not None

    if state.to_dict() == reference.to_dict():
        return ReplayOutcome(ok=True, message="replay identical", diff=[])
    left = json.dumps(reference.to_dict(), indent=2, sort_keys=True).splitlines()
    right = json.dumps(state.to_dict(), indent=2, sort_keys=True).splitlines()
    diff = list(difflib.unified_diff(left, right, fromfile="journal", tofile="replayed", lineterm=""))
    return ReplayOutcome(ok=False, message="replayed state diverges from journal", diff=diff)


def _replay_one(state: Optional[Session], event: SessionEvent, gateway: Gateway) -> Session:
    kind = event.kind
    if kind in _VERBATIM_KINDS:
        return apply_event(state, event)
    if kind in _DERIVED_KINDS:
        # Regenerated by the preceding IDEATED re-execution.
        if state is None:
            raise ScideaError("ILLEGAL_TRANSITION", f"event {kind} before CREATED")
        return state
    if state is None:
        raise ScideaError("ILLEGAL_TRANSITION", f"event {kind} before CREATED")

    payload = event.payload
    if kind == "FACETED":
        strategy = PromptStrategy.from_dict(payload["strategy"])
        model_id = payload["model_id"]
        facets = [
            extract_facets(pub, strategy, gateway, model_id) for pub in facet_publications(state)
        ]
        return _apply(state, event, "FACETED", {"facets": [f.to_dict() for f in facets]})
    if kind == "GAPPED":
        strategy = PromptStrategy.from_dict(payload["strategy"])
        author_facets, related_facets = partition_facets(state)
        gap, warnings = identify_gap(
            author_facets,
            related_facets,
            strategy,
            gateway,
            payload["model_id"],
            titles=state.publication_titles(),
        )
        return _apply(state, event, "GAPPED", {"gap": gap, "warnings": warnings})
    if kind == "IDEATED":
        config = _iteration_config(payload)
        updated, _report = run_iteration(state, config, gateway, journal=None)
        return updated
    if kind == "RANKED":
        strategy = PromptStrategy.from_dict(payload["strategy"])
        ranked = rank_ideas([sc.candidate for sc in state.candidates], strategy, gateway, payload["model_id"])
        return _apply(
            state,
            event,
            "RANKED",
            {"scores": [{"candidate_id": c.id, "rubric": r.to_dict()} for c, r in ranked]},
        )
    raise ScideaError("OUT_OF_RANGE", f"unknown event kind {kind!r}", field="kind")
