"""Event-sourced session persistence.

One JSON-lines journal file per session under a data directory, with an
index file mapping session ids to journal paths. Session state is a pure
fold over events, so any journal prefix reconstructs a legal state and a
crash between two appends loses at most the in-flight event.

Timestamps come from an injected clock: the system clock in the service,
or a logical clock for byte-deterministic runs.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

from .domain import (
    AhaScore,
    AhaThresholds,
    FacetSet,
    IdeaCandidate,
    Publication,
    ResearcherProfile,
    RubricScore,
    ScoredCandidate,
    Session,
    SessionStatus,
)
from .errors import ScideaError
from . import scoring

EVENT_KINDS = (
    "CREATED",
    "RETRIEVED",
    "SELECTED",
    "FACETED",
    "GAPPED",
    "IDEATED",
    "SCORED",
    "DIVED",
    "FEEDBACK",
    "THRESHOLDS_SET",
    "RANKED",
    "ACCEPTED",
    "CLOSED",
)


@dataclass(frozen=True)
class SessionEvent:
    """One immutable journal entry; sequence is strictly increasing per session."""

    session_id: str
    sequence: int
    timestamp: str
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "sequence": self.sequence,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SessionEvent":
        return cls(
            session_id=data["session_id"],
            sequence=data["sequence"],
            timestamp=data["timestamp"],
            kind=data["kind"],
            payload=data.get("payload", {}),
        )


Clock = Callable[[], str]


def system_clock() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class LogicalClock:
    """Deterministic clock: a fixed epoch advanced one second per call."""

    def __init__(self, start: str = "2000-01-01T00:00:00Z") -> None:
        self._base = datetime.strptime(start, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
        self._ticks = 0
        self._lock = threading.Lock()

    def __call__(self) -> str:
        with self._lock:
            stamp = self._base + timedelta(seconds=self._ticks)
            self._ticks += 1
        return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def _canonical(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class SessionJournal:
    """Append-only JSON-lines log for one session."""

    def __init__(self, session_id: str, path: Path, clock: Clock = system_clock) -> None:
        self.session_id = session_id
        self.path = Path(path)
        self.clock = clock
        self._lock = threading.Lock()
        self._sequence = len(self.read_events(self.path)) if self.path.exists() else 0

    def append(self, kind: str, payload: dict[str, Any]) -> SessionEvent:
        if kind not in EVENT_KINDS:
            raise ScideaError("OUT_OF_RANGE", f"unknown event kind {kind!r}", field="kind")
        with self._lock:
            event = SessionEvent(
                session_id=self.session_id,
                sequence=self._sequence,
                timestamp=self.clock(),
                kind=kind,
                payload=payload,
            )
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(_canonical(event.to_dict()) + "\n")
                fh.flush()
            self._sequence += 1
            return event

    @staticmethod
    def read_events(path: Path | str) -> list[SessionEvent]:
        path = Path(path)
        if not path.exists():
            raise ScideaError("IO_ERROR", f"journal not found: {path}", path=str(path))
        events = []
        for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
            if not line.strip():
                continue
            try:
                events.append(SessionEvent.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ScideaError(
                    "IO_ERROR", f"journal line {line_number} is malformed: {exc}", path=str(path)
                ) from exc
        return events


def check_contiguous(events: Iterable[SessionEvent]) -> None:
    """Replay precondition: sequences must run 0..n-1 without gaps."""
    for expected, event in enumerate(events):
        if event.sequence != expected:
            raise ScideaError(
                "IO_ERROR",
                f"journal sequence gap: expected {expected}, found {event.sequence}",
                expected=expected,
                found=event.sequence,
            )


def _recompute_aha(candidates: tuple[ScoredCandidate, ...], thresholds: AhaThresholds) -> tuple[ScoredCandidate, ...]:
    updated = []
    for sc in candidates:
        aha = sc.aha
        if aha.novelty is not None and aha.surprise is not None:
            flag = scoring.detect_aha(aha.novelty, aha.surprise, thresholds)
            aha = replace(aha, is_aha=flag)
        updated.append(replace(sc, aha=aha))
    return tuple(updated)


def apply_event(state: Optional[Session], event: SessionEvent) -> Session:
    """Fold one event into the session state."""
    kind = event.kind
    payload = event.payload
    if kind == "CREATED":
        if state is not None:
            raise ScideaError("ILLEGAL_TRANSITION", "session already created", status=state.status.value)
        return Session(
            id=event.session_id,
            profile=ResearcherProfile.from_dict(payload["profile"]),
            thresholds=AhaThresholds.from_dict(payload["thresholds"]),
        )
    if state is None:
        raise ScideaError("ILLEGAL_TRANSITION", f"event {kind} before CREATED")

    if kind == "RETRIEVED":
        profile = state.profile
        keyphrases = payload.get("keyphrases")
        if keyphrases:
            profile = replace(profile, keyphrases=tuple(keyphrases))
        return replace(
            state.with_status(SessionStatus.RETRIEVED),
            profile=profile,
            author_publications=tuple(Publication.from_dict(p) for p in payload.get("author_publications", ())),
            related_publications=tuple(Publication.from_dict(p) for p in payload.get("related_publications", ())),
            warnings=state.warnings + tuple(payload.get("warnings", ())),
        )
    if kind == "SELECTED":
        return replace(state, selected_publication_ids=tuple(payload["publication_ids"]))
    if kind == "THRESHOLDS_SET":
        thresholds = AhaThresholds.from_dict(payload)
        return replace(state, thresholds=thresholds, candidates=_recompute_aha(state.candidates, thresholds))
    if kind == "FACETED":
        return replace(
            state.with_status(SessionStatus.FACETED),
            facets=tuple(FacetSet.from_dict(f) for f in payload["facets"]),
        )
    if kind == "GAPPED":
        return replace(
            state.with_status(SessionStatus.GAPPED),
            gap=payload["gap"],
            warnings=state.warnings + tuple(payload.get("warnings", ())),
        )
    if kind == "IDEATED":
        new = tuple(
            ScoredCandidate(candidate=IdeaCandidate.from_dict(c), aha=AhaScore.unscored())
            for c in payload["candidates"]
        )
        return replace(
            state.with_status(SessionStatus.IDEATING),
            candidates=state.candidates + new,
            iteration=payload.get("iteration", state.iteration + 1),
            warnings=state.warnings + tuple(payload.get("warnings", ())),
        )
    if kind == "SCORED":
        by_id = {entry["candidate_id"]: AhaScore.from_dict(entry["aha"]) for entry in payload["scores"]}
        updated = tuple(
            replace(sc, aha=by_id.get(sc.candidate.id, sc.aha)) for sc in state.candidates
        )
        return replace(state, candidates=updated)
    if kind == "DIVED":
        if payload.get("failed"):
            return replace(
                state,
                warnings=state.warnings + (f"DIVE_FAILED: candidate {payload['parent_id']}",),
            )
        dived = ScoredCandidate(
            candidate=IdeaCandidate.from_dict(payload["candidate"]),
            aha=AhaScore.from_dict(payload["aha"]),
        )
        return replace(state, candidates=state.candidates + (dived,))
    if kind == "FEEDBACK":
        return replace(
            state.with_status(SessionStatus.IDEATING),
            feedback_log=state.feedback_log + (payload["text"],),
        )
    if kind == "RANKED":
        by_id = {entry["candidate_id"]: entry["rubric"] for entry in payload["scores"]}
        updated = tuple(
            replace(sc, rubric=RubricScore.from_dict(by_id[sc.candidate.id]) if sc.candidate.id in by_id else sc.rubric)
            for sc in state.candidates
        )
        return replace(state.with_status(SessionStatus.RANKED), candidates=updated)
    if kind == "ACCEPTED":
        return replace(state, accepted_candidate_id=payload["candidate_id"])
    if kind == "CLOSED":
        return state.with_status(SessionStatus.CLOSED)
    raise ScideaError("OUT_OF_RANGE", f"unknown event kind {kind!r}", field="kind")


def fold_events(events: Iterable[SessionEvent]) -> Session:
    state: Optional[Session] = None
    for event in events:
        state = apply_event(state, event)
    if state is None:
        raise ScideaError("IO_ERROR", "journal contains no events")
    return state


def load_session(journal_path: Path | str) -> Session:
    return fold_events(SessionJournal.read_events(journal_path))


class SessionStore:
    """Directory of session journals with per-session single-writer locks."""

    def __init__(self, data_dir: Path | str, clock: Clock = system_clock) -> None:
        self.data_dir = Path(data_dir)
        self.clock = clock
        self._locks: dict[str, threading.Lock] = {}
        self._journals: dict[str, SessionJournal] = {}
        self._registry_lock = threading.Lock()
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._index_path = self.data_dir / "index.json"

    def _read_index(self) -> dict[str, str]:
        if self._index_path.exists():
            return json.loads(self._index_path.read_text(encoding="utf-8"))
        return {}

    def _write_index(self, index: dict[str, str]) -> None:
        tmp = self._index_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")
        tmp.replace(self._index_path)

    def journal_path(self, session_id: str) -> Path:
        index = self._read_index()
        if session_id not in index:
            raise ScideaError("NOT_FOUND", f"unknown session {session_id!r}", session_id=session_id)
        return self.data_dir / index[session_id]

    def create_journal(self, session_id: str) -> SessionJournal:
        with self._registry_lock:
            index = self._read_index()
            if session_id in index:
                raise ScideaError("ILLEGAL_TRANSITION", f"session {session_id!r} already exists", session_id=session_id)
            filename = f"{session_id}.jsonl"
            index[session_id] = filename
            self._write_index(index)
            journal = SessionJournal(session_id, self.data_dir / filename, self.clock)
            self._journals[session_id] = journal
            self._locks[session_id] = threading.Lock()
            return journal

    def journal(self, session_id: str) -> SessionJournal:
        with self._registry_lock:
            if session_id not in self._journals:
                path = self.journal_path(session_id)
                self._journals[session_id] = SessionJournal(session_id, path, self.clock)
                self._locks.setdefault(session_id, threading.Lock())
            return self._journals[session_id]

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            if session_id not in self._locks:
                self.journal_path(session_id)  # raises NOT_FOUND
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def session_ids(self) -> list[str]:
        return sorted(self._read_index())

    def load(self, session_id: str) -> Session:
        return load_session(self.journal_path(session_id))
