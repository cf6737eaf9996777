"""Session orchestration and the HTTP API.

SessionManager is the headless core: it wires retrieval, the gateway, and
the pipeline stages onto journaled sessions under a per-session single-writer
lock. build_app wraps it in a FastAPI application speaking the JSON contract
(`POST /sessions`, `GET /sessions/{id}`, select/thresholds/advance/feedback
routes, `GET /sessions/{id}/ideas`, `GET /healthz`). Errors use the
``{"error": {"code", "message", "details"}}`` envelope; optional bearer auth
comes from the SCIDEA_API_TOKEN environment variable.
"""

from __future__ import annotations

import os
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Any, Optional, Sequence

from .domain import (
    EmbeddingStrategy,
    FacetSet,
    PromptStrategy,
    ResearcherProfile,
    Session,
    SessionStatus,
    validate_thresholds,
)
from .errors import ScideaError
from .gateway import Gateway
from .refinement import IterationReport, RefinementConfig, run_iteration
from .retrieval import SourceClient, extract_keyphrases, resolve_profile, search_related
from .session import SessionJournal, SessionStore
from .stages import extract_facets, identify_gap, rank_ideas

DEFAULT_RELATED_LIMIT = 10


def facet_publications(session: Session) -> list:
    """Publications whose facets feed the pipeline: the selected author
    publications (all author publications when nothing was selected), then
    every related publication, in retrieval order."""
    if session.selected_publication_ids:
        selected = [p for p in session.selected_publications() if p in session.author_publications]
    else:
        selected = list(session.author_publications)
    return selected + list(session.related_publications)


def partition_facets(session: Session) -> tuple[list[FacetSet], list[FacetSet]]:
    """Split session facets into (author, related) by publication origin."""
    author_ids = {p.id for p in session.author_publications}
    author = [f for f in session.facets if f.publication_id in author_ids]
    related = [f for f in session.facets if f.publication_id not in author_ids]
    return author, related


class SessionManager:
    """Drives journaled sessions through the pipeline stages."""

    def __init__(
        self,
        store: SessionStore,
        gateway: Gateway,
        sources: Sequence[SourceClient],
        config: RefinementConfig,
        related_limit: int = DEFAULT_RELATED_LIMIT,
        facet_workers: int = 4,
    ) -> None:
        self.store = store
        self.gateway = gateway
        self.sources = list(sources)
        self.config = config
        self.related_limit = related_limit
        self.facet_workers = facet_workers
        self._active: dict[str, str] = {}

    # -- helpers -------------------------------------------------------------

    def _session(self, session_id: str) -> Session:
        return self.store.load(session_id)

    def _require_status(self, session: Session, allowed: tuple[SessionStatus, ...], action: str) -> None:
        if session.status not in allowed:
            raise ScideaError(
                "ILLEGAL_TRANSITION",
                f"action {action} is not legal while session is {session.status.value}",
                status=session.status.value,
                action=action,
            )

    def _strategy(self, override: Optional[PromptStrategy]) -> PromptStrategy:
        return override or self.config.strategy

    # -- operations ----------------------------------------------------------

    def create_session(self, orcid: str, query: str, session_id: Optional[str] = None) -> Session:
        """Resolve the researcher, extend context via keyphrases, and fetch
        related work; source failures degrade to warnings."""
        if not query.strip():
            raise ScideaError("EMPTY_QUERY", "query must be non-empty")
        resolution = resolve_profile(orcid, self.sources)
        warnings = list(resolution.warnings)
        keyphrases: list[str] = []
        try:
            keyphrases = extract_keyphrases(query, self.gateway, self.config.model_id)
        except ScideaError as exc:
            warnings.append(f"keyphrase extraction failed ({exc.code}); using the raw query")
            keyphrases = [query.strip()]
        related, search_warnings = search_related(keyphrases, self.sources, self.related_limit)
        warnings.extend(search_warnings)
        related_ids = {p.id for p in resolution.publications}
        related = [p for p in related if p.id not in related_ids]

        session_id = session_id or uuid.uuid4().hex[:12]
        profile = ResearcherProfile(
            name=resolution.name, orcid=resolution.orcid, query=query.strip(), keyphrases=tuple(keyphrases)
        )
        journal = self.store.create_journal(session_id)
        journal.append(
            "CREATED",
            {"profile": profile.to_dict(), "thresholds": self.default_thresholds().to_dict()},
        )
        journal.append(
            "RETRIEVED",
            {
                "author_publications": [p.to_dict() for p in resolution.publications],
                "related_publications": [p.to_dict() for p in related],
                "keyphrases": keyphrases,
                "warnings": warnings,
            },
        )
        return self._session(session_id)

    @staticmethod
    def default_thresholds():
        return validate_thresholds(0.7, 2.0)

    def select(self, session_id: str, publication_ids: Sequence[str]) -> Session:
        with self.store.lock(session_id):
            session = self._session(session_id)
            self._require_status(
                session,
                (SessionStatus.RETRIEVED, SessionStatus.FACETED, SessionStatus.GAPPED),
                "SELECT",
            )
            known = {p.id for p in session.author_publications + session.related_publications}
            for pid in publication_ids:
                if pid not in known:
                    raise ScideaError("NOT_FOUND", f"unknown publication {pid!r}", publication_id=pid)
            if tuple(publication_ids) != session.selected_publication_ids:
                self.store.journal(session_id).append("SELECTED", {"publication_ids": list(publication_ids)})
            return self._session(session_id)

    def set_thresholds(self, session_id: str, theta_n: float, theta_s: float) -> Session:
        thresholds = validate_thresholds(theta_n, theta_s)
        with self.store.lock(session_id):
            session = self._session(session_id)
            if session.status is SessionStatus.CLOSED:
                raise ScideaError("SESSION_CLOSED", "session is closed", session_id=session_id)
            self.store.journal(session_id).append("THRESHOLDS_SET", thresholds.to_dict())
            return self._session(session_id)

    def run_facets(self, session_id: str, strategy: Optional[PromptStrategy] = None) -> Session:
        """Extract facets for every selected author publication and every
        related publication, concurrently, in publication order."""
        strategy = self._strategy(strategy)
        with self.store.lock(session_id):
            session = self._session(session_id)
            self._require_status(session, (SessionStatus.RETRIEVED,), "RUN_FACETS")
            publications = facet_publications(session)
            if not publications:
                raise ScideaError("EMPTY_INPUT", "no publications to extract facets from", session_id=session_id)
            self._active[session_id] = "RUN_FACETS"
            try:
                with ThreadPoolExecutor(max_workers=self.facet_workers) as pool:
                    facets = list(
                        pool.map(
                            lambda pub: extract_facets(pub, strategy, self.gateway, self.config.model_id),
                            publications,
                        )
                    )
            finally:
                self._active.pop(session_id, None)
            self.store.journal(session_id).append(
                "FACETED",
                {
                    "facets": [f.to_dict() for f in facets],
                    "strategy": strategy.to_dict(),
                    "model_id": self.config.model_id,
                },
            )
            return self._session(session_id)

    def run_gap(self, session_id: str, strategy: Optional[PromptStrategy] = None) -> Session:
        strategy = self._strategy(strategy)
        with self.store.lock(session_id):
            session = self._session(session_id)
            self._require_status(session, (SessionStatus.FACETED,), "RUN_GAP")
            author_facets, related_facets = partition_facets(session)
            self._active[session_id] = "RUN_GAP"
            try:
                gap, warnings = identify_gap(
                    author_facets,
                    related_facets,
                    strategy,
                    self.gateway,
                    self.config.model_id,
                    titles=session.publication_titles(),
                )
            finally:
                self._active.pop(session_id, None)
            self.store.journal(session_id).append(
                "GAPPED",
                {
                    "gap": gap,
                    "warnings": warnings,
                    "strategy": strategy.to_dict(),
                    "model_id": self.config.model_id,
                },
            )
            return self._session(session_id)

    def run_iteration(
        self,
        session_id: str,
        strategy: Optional[PromptStrategy] = None,
        embedding_strategy: Optional[EmbeddingStrategy] = None,
    ) -> tuple[Session, IterationReport]:
        config = self.config
        if strategy is not None:
            config = replace(config, strategy=strategy)
        if embedding_strategy is not None:
            config = replace(config, embedding_strategy=embedding_strategy)
        with self.store.lock(session_id):
            session = self._session(session_id)
            self._require_status(session, (SessionStatus.GAPPED, SessionStatus.IDEATING), "RUN_ITERATION")
            self._active[session_id] = "RUN_ITERATION"
            try:
                updated, report = run_iteration(session, config, self.gateway, self.store.journal(session_id))
            finally:
                self._active.pop(session_id, None)
            return self._session(session_id), report

    def run_rank(self, session_id: str, strategy: Optional[PromptStrategy] = None) -> Session:
        strategy = self._strategy(strategy)
        with self.store.lock(session_id):
            session = self._session(session_id)
            self._require_status(session, (SessionStatus.IDEATING,), "RUN_RANK")
            if not session.candidates:
                raise ScideaError(
                    "ILLEGAL_TRANSITION",
                    "ranking requires at least one candidate",
                    status=session.status.value,
                    action="RUN_RANK",
                )
            candidates = [sc.candidate for sc in session.candidates]
            self._active[session_id] = "RUN_RANK"
            try:
                ranked = rank_ideas(candidates, strategy, self.gateway, self.config.model_id)
            finally:
                self._active.pop(session_id, None)
            self.store.journal(session_id).append(
                "RANKED",
                {
                    "scores": [
                        {"candidate_id": candidate.id, "rubric": rubric.to_dict()} for candidate, rubric in ranked
                    ],
                    "order": [candidate.id for candidate, _rubric in ranked],
                    "strategy": strategy.to_dict(),
                    "model_id": self.config.model_id,
                },
            )
            return self._session(session_id)

    def submit_feedback(self, session_id: str, feedback: str) -> Session:
        with self.store.lock(session_id):
            session = self._session(session_id)
            if session.status is SessionStatus.CLOSED:
                raise ScideaError("SESSION_CLOSED", "session is closed", session_id=session_id)
            if not feedback.strip():
                raise ScideaError("EMPTY_FEEDBACK", "feedback must be non-empty")
            self.store.journal(session_id).append("FEEDBACK", {"text": feedback})
            return self._session(session_id)

    def accept(self, session_id: str, candidate_id: int) -> Session:
        with self.store.lock(session_id):
            session = self._session(session_id)
            self._require_status(session, (SessionStatus.RANKED,), "ACCEPT")
            if candidate_id not in {sc.candidate.id for sc in session.candidates}:
                raise ScideaError("NOT_FOUND", f"unknown candidate {candidate_id}", candidate_id=candidate_id)
            self.store.journal(session_id).append("ACCEPTED", {"candidate_id": candidate_id})
            return self._session(session_id)

    def close(self, session_id: str) -> Session:
        with self.store.lock(session_id):
            session = self._session(session_id)
            if session.status is SessionStatus.CLOSED:
                raise ScideaError("SESSION_CLOSED", "session is already closed", session_id=session_id)
            self.store.journal(session_id).append("CLOSED", {})
            return self._session(session_id)

    # -- views ---------------------------------------------------------------

    def iteration_reports(self, session_id: str) -> list[dict[str, Any]]:
        """Derive per-iteration reports from the journal."""
        events = SessionJournal.read_events(self.store.journal_path(session_id))
        reports: list[dict[str, Any]] = []
        current: Optional[dict[str, Any]] = None
        flagged_ids: set[int] = set()
        for event in events:
            if event.kind == "IDEATED":
                current = {
                    "iteration": event.payload.get("iteration"),
                    "generated": len(event.payload.get("candidates", [])),
                    "aha_flagged": 0,
                    "deep_dives": 0,
                }
                reports.append(current)
            elif event.kind == "SCORED" and current is not None:
                for entry in event.payload.get("scores", []):
                    if entry.get("aha", {}).get("is_aha"):
                        current["aha_flagged"] += 1
                        flagged_ids.add(entry["candidate_id"])
            elif event.kind == "DIVED" and current is not None and not event.payload.get("failed"):
                current["deep_dives"] += 1
        return reports

    def snapshot(self, session_id: str) -> dict[str, Any]:
        session = self._session(session_id)
        view = session.to_dict()
        view["iteration_reports"] = self.iteration_reports(session_id)
        view["pending_action"] = self._active.get(session_id)
        view["ranked_ideas"] = ranked_view(session)
        return view

    def ideas(self, session_id: str) -> list[dict[str, Any]]:
        return ranked_view(self._session(session_id))


def ranked_view(session: Session) -> list[dict[str, Any]]:
    """Candidates with scores, ordered by rubric overall descending (ties by
    candidate id) when ranked, else by candidate id."""
    entries = []
    for sc in session.candidates:
        entries.append(
            {
                "id": sc.candidate.id,
                "title": sc.candidate.title,
                "description": sc.candidate.description,
                "iteration": sc.candidate.iteration,
                "provenance": sc.candidate.provenance.value,
                "parent_id": sc.candidate.parent_id,
                "novelty": sc.aha.novelty,
                "surprise": sc.aha.surprise,
                "is_aha": sc.aha.is_aha,
                "embedding_strategy": sc.aha.embedding_strategy.value,
                "surprise_skipped": sc.aha.surprise_skipped,
                "rubric": sc.rubric.to_dict() if sc.rubric else None,
            }
        )
    if any(entry["rubric"] for entry in entries):
        entries.sort(key=lambda e: (-(e["rubric"]["overall"] if e["rubric"] else float("-inf")), e["id"]))
    return entries


# ---------------------------------------------------------------------------
# FastAPI application
# ---------------------------------------------------------------------------


from pydantic import BaseModel


class CreateSessionBody(BaseModel):
    orcid: str
    query: str


class SelectBody(BaseModel):
    publication_ids: list[str]


class ThresholdsBody(BaseModel):
    theta_n: float
    theta_s: float


class FeedbackBody(BaseModel):
    feedback: str


class AdvanceBody(BaseModel):
    action: str
    publication_ids: Optional[list[str]] = None
    theta_n: Optional[float] = None
    theta_s: Optional[float] = None
    strategy: Optional[str] = None
    embedding_strategy: Optional[str] = None
    candidate_id: Optional[int] = None


_STATUS_BY_CODE = {
    "MALFORMED_ID": 400,
    "EMPTY_QUERY": 400,
    "EMPTY_FEEDBACK": 400,
    "OUT_OF_RANGE": 400,
    "NOT_FOUND": 404,
    "SESSION_CLOSED": 409,
    "ILLEGAL_TRANSITION": 409,
    "CACHE_MISS": 409,
}


def build_app(manager: SessionManager):
    from fastapi import Depends, FastAPI, Header, HTTPException, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="scidea session service")

    def require_token(authorization: Optional[str] = Header(default=None)) -> None:
        token = os.environ.get("SCIDEA_API_TOKEN", "")
        if not token:
            return
        if authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="invalid or missing bearer token")

    @app.exception_handler(ScideaError)
    async def scidea_error_handler(_request: Request, exc: ScideaError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content=exc.to_payload())

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", dependencies=[Depends(require_token)])
    def create_session(body: CreateSessionBody):
        session = manager.create_session(body.orcid, body.query)
        return manager.snapshot(session.id)

    @app.get("/sessions/{session_id}", dependencies=[Depends(require_token)])
    def get_session(session_id: str):
        return manager.snapshot(session_id)

    @app.post("/sessions/{session_id}/select", dependencies=[Depends(require_token)])
    def select(session_id: str, body: SelectBody):
        manager.select(session_id, body.publication_ids)
        return manager.snapshot(session_id)

    @app.post("/sessions/{session_id}/thresholds", dependencies=[Depends(require_token)])
    def thresholds(session_id: str, body: ThresholdsBody):
        manager.set_thresholds(session_id, body.theta_n, body.theta_s)
        return manager.snapshot(session_id)

    @app.post("/sessions/{session_id}/feedback", dependencies=[Depends(require_token)])
    def feedback(session_id: str, body: FeedbackBody):
        manager.submit_feedback(session_id, body.feedback)
        return manager.snapshot(session_id)

    @app.get("/sessions/{session_id}/ideas", dependencies=[Depends(require_token)])
    def ideas(session_id: str):
        return {"ideas": manager.ideas(session_id)}

    @app.post("/sessions/{session_id}/advance", dependencies=[Depends(require_token)])
    def advance(session_id: str, body: AdvanceBody):
        action = body.action.upper()
        strategy = PromptStrategy.parse(body.strategy) if body.strategy else None
        if action == "SELECT":
            manager.select(session_id, body.publication_ids or [])
        elif action == "SET_THRESHOLDS":
            if body.theta_n is None or body.theta_s is None:
                raise ScideaError("OUT_OF_RANGE", "theta_n and theta_s are required", field="thresholds")
            manager.set_thresholds(session_id, body.theta_n, body.theta_s)
        elif action == "RUN_FACETS":
            manager.run_facets(session_id, strategy)
        elif action == "RUN_GAP":
            manager.run_gap(session_id, strategy)
        elif action == "RUN_ITERATION":
            embedding = (
                EmbeddingStrategy(body.embedding_strategy.upper()) if body.embedding_strategy else None
            )
            manager.run_iteration(session_id, strategy, embedding)
        elif action == "RUN_RANK":
            manager.run_rank(session_id, strategy)
        elif action == "ACCEPT":
            if body.candidate_id is None:
                raise ScideaError("OUT_OF_RANGE", "candidate_id is required", field="candidate_id")
            manager.accept(session_id, body.candidate_id)
        elif action == "CLOSE":
            manager.close(session_id)
        else:
            raise ScideaError("OUT_OF_RANGE", f"unknown action {body.action!r}", field="action")
        return manager.snapshot(session_id)

    return app
