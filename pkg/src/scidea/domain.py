"""Domain types shared across the pipeline, plus pure validation helpers.

All types here are immutable values (frozen dataclasses) and are safe to share
across threads. Canonical serialization is JSON with snake_case field names;
``to_dict`` / ``from_dict`` on each type implement that round trip. Session
mutation happens only in the session layer under a single-writer rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, Optional, Sequence

from .errors import ScideaError

ORCID_PATTERN = re.compile(r"\d{4}-\d{4}-\d{4}-\d{3}[\dX]$")

RUBRIC_MEAN_TOLERANCE = 1e-9
# Floating-point slack when validating computed scores against closed ranges.
_EPS = 1e-9


class Source(str, Enum):
    CORE = "CORE"
    ARXIV = "ARXIV"
    SEMANTIC_SCHOLAR = "SEMANTIC_SCHOLAR"
    DATASET = "DATASET"


class Origin(str, Enum):
    AUTHOR = "AUTHOR"
    RELATED = "RELATED"


class Provenance(str, Enum):
    GENERATED = "GENERATED"
    DEEP_DIVE = "DEEP_DIVE"
    FEEDBACK_REVISED = "FEEDBACK_REVISED"


class EmbeddingStrategy(str, Enum):
    NONE = "NONE"
    TOKEN_LEVEL = "TOKEN_LEVEL"
    SENTENCE_LEVEL = "SENTENCE_LEVEL"


class StrategyKind(str, Enum):
    ZS = "ZS"
    ZSCOT = "ZSCOT"
    FS = "FS"


class SessionStatus(str, Enum):
    CREATED = "CREATED"
    RETRIEVED = "RETRIEVED"
    FACETED = "FACETED"
    GAPPED = "GAPPED"
    IDEATING = "IDEATING"
    RANKED = "RANKED"
    CLOSED = "CLOSED"


# Forward-only transition order; IDEATING may be re-entered from any status
# at or after GAPPED (the iterate/rank/feedback loop).
_STATUS_ORDER = {
    SessionStatus.CREATED: 0,
    SessionStatus.RETRIEVED: 1,
    SessionStatus.FACETED: 2,
    SessionStatus.GAPPED: 3,
    SessionStatus.IDEATING: 4,
    SessionStatus.RANKED: 5,
    SessionStatus.CLOSED: 6,
}


def status_rank(status: SessionStatus) -> int:
    return _STATUS_ORDER[status]


def is_legal_transition(current: SessionStatus, target: SessionStatus) -> bool:
    """Forward moves only, except IDEATING which may repeat.

    CLOSED is terminal. IDEATING may be (re-)entered from any live status:
    the iterate/rank/feedback loop returns to it. Every other move must
    strictly increase the status order.
    """
    if current is SessionStatus.CLOSED:
        return False
    if target is SessionStatus.IDEATING:
        return True
    return _STATUS_ORDER[target] > _STATUS_ORDER[current]


def _require(condition: bool, code: str, message: str, **details: Any) -> None:
    if not condition:
        raise ScideaError(code, message, **details)


@dataclass(frozen=True)
class ResearcherProfile:
    """Researcher identity plus the free-text research question."""

    name: str
    orcid: str
    query: str
    keyphrases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _require(
            bool(ORCID_PATTERN.fullmatch(self.orcid)),
            "MALFORMED_ID",
            f"not a valid ORCID identifier: {self.orcid!r}",
            orcid=self.orcid,
        )
        _require(bool(self.query.strip()), "EMPTY_QUERY", "query must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "orcid": self.orcid,
            "query": self.query,
            "keyphrases": list(self.keyphrases),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ResearcherProfile":
        return cls(
            name=data["name"],
            orcid=data["orcid"],
            query=data["query"],
            keyphrases=tuple(data.get("keyphrases", ())),
        )


@dataclass(frozen=True)
class Publication:
    """One retrieved publication. ``full_text`` holds the richest text the
    source provided (full text, else abstract), possibly empty."""

    id: str
    title: str
    full_text: str
    source: Source
    origin: Origin

    def __post_init__(self) -> None:
        _require(bool(self.title.strip()), "EMPTY_INPUT", "publication title must be non-empty", id=self.id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "full_text": self.full_text,
            "source": self.source.value,
            "origin": self.origin.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Publication":
        return cls(
            id=data["id"],
            title=data["title"],
            full_text=data.get("full_text", ""),
            source=Source(data["source"]),
            origin=Origin(data["origin"]),
        )


def normalized_title(title: str) -> str:
    """Dedup key: lowercase with whitespace collapsed."""
    return " ".join(title.lower().split())


@dataclass(frozen=True)
class FacetSet:
    """Structured summary of one publication: what it does, how, how it was
    judged, and where it points next."""

    purpose: str
    mechanism: str
    evaluation: str
    future_work: str
    publication_id: str = ""

    def __post_init__(self) -> None:
        for name in ("purpose", "mechanism", "evaluation", "future_work"):
            _require(
                bool(getattr(self, name).strip()),
                "MISSING_FACET",
                f"facet {name!r} must be non-empty",
                facet=name,
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "purpose": self.purpose,
            "mechanism": self.mechanism,
            "evaluation": self.evaluation,
            "future_work": self.future_work,
            "publication_id": self.publication_id,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FacetSet":
        return cls(
            purpose=data["purpose"],
            mechanism=data["mechanism"],
            evaluation=data["evaluation"],
            future_work=data["future_work"],
            publication_id=data.get("publication_id", ""),
        )


@dataclass(frozen=True)
class IdeaCandidate:
    """A generated idea. ``parent_id`` links a deep-dive refinement back to
    the flagged candidate it descends from."""

    id: int
    title: str
    description: str
    iteration: int
    provenance: Provenance
    parent_id: Optional[int] = None

    def __post_init__(self) -> None:
        _require(bool(self.title.strip()), "EMPTY_INPUT", "idea title must be non-empty", id=self.id)
        _require(bool(self.description.strip()), "EMPTY_INPUT", "idea description must be non-empty", id=self.id)
        _require(self.iteration >= 0, "OUT_OF_RANGE", "iteration must be >= 0", field="iteration")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "iteration": self.iteration,
            "provenance": self.provenance.value,
            "parent_id": self.parent_id,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "IdeaCandidate":
        return cls(
            id=data["id"],
            title=data["title"],
            description=data["description"],
            iteration=data["iteration"],
            provenance=Provenance(data["provenance"]),
            parent_id=data.get("parent_id"),
        )


@dataclass(frozen=True)
class AhaThresholds:
    """Detection thresholds: theta_n on novelty, theta_s on surprise."""

    theta_n: float
    theta_s: float

    def __post_init__(self) -> None:
        _require(
            0.0 <= self.theta_n <= 2.0,
            "OUT_OF_RANGE",
            f"theta_n must be in [0, 2], got {self.theta_n}",
            field="theta_n",
        )
        _require(
            self.theta_s >= 0.0,
            "OUT_OF_RANGE",
            f"theta_s must be >= 0, got {self.theta_s}",
            field="theta_s",
        )

    def to_dict(self) -> dict[str, Any]:
        return {"theta_n": self.theta_n, "theta_s": self.theta_s}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AhaThresholds":
        return cls(theta_n=data["theta_n"], theta_s=data["theta_s"])


def validate_thresholds(theta_n: float, theta_s: float) -> AhaThresholds:
    """Range-check and construct detection thresholds.

    theta_n must lie in [0, 2] (novelty = 1 - max cosine, and cosine may be
    negative); theta_s must be non-negative (it bounds a mean negative
    log-likelihood in nats).
    """
    return AhaThresholds(theta_n=theta_n, theta_s=theta_s)


@dataclass(frozen=True)
class AhaScore:
    """Novelty/surprise assessment of one candidate.

    With embedding_strategy NONE nothing is scored: novelty and surprise are
    absent and is_aha is always False. ``surprise_skipped`` records why a
    surprise value is missing when novelty was computed (e.g. the scoring
    provider cannot return log-probabilities) - never a silent zero.
    """

    novelty: Optional[float]
    surprise: Optional[float]
    is_aha: bool
    embedding_strategy: EmbeddingStrategy
    surprise_skipped: Optional[str] = None

    def __post_init__(self) -> None:
        if self.embedding_strategy is EmbeddingStrategy.NONE:
            _require(
                self.novelty is None and self.surprise is None and not self.is_aha,
                "OUT_OF_RANGE",
                "unscored candidates carry no novelty/surprise and is_aha false",
                field="embedding_strategy",
            )
            return
        if self.novelty is not None:
            _require(
                -_EPS <= self.novelty <= 2.0 + _EPS,
                "OUT_OF_RANGE",
                f"novelty must be in [0, 2], got {self.novelty}",
                field="novelty",
            )
        if self.surprise is not None:
            _require(
                self.surprise >= -_EPS,
                "OUT_OF_RANGE",
                f"surprise must be >= 0, got {self.surprise}",
                field="surprise",
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "novelty": self.novelty,
            "surprise": self.surprise,
            "is_aha": self.is_aha,
            "embedding_strategy": self.embedding_strategy.value,
            "surprise_skipped": self.surprise_skipped,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AhaScore":
        return cls(
            novelty=data.get("novelty"),
            surprise=data.get("surprise"),
            is_aha=data["is_aha"],
            embedding_strategy=EmbeddingStrategy(data["embedding_strategy"]),
            surprise_skipped=data.get("surprise_skipped"),
        )

    @classmethod
    def unscored(cls) -> "AhaScore":
        return cls(novelty=None, surprise=None, is_aha=False, embedding_strategy=EmbeddingStrategy.NONE)


def overall_score(novelty: float, excitement: float, feasibility: float, effectiveness: float) -> float:
    """Arithmetic mean of the four rubric criteria, each required in [1, 10]."""
    for name, value in (
        ("novelty", novelty),
        ("excitement", excitement),
        ("feasibility", feasibility),
        ("effectiveness", effectiveness),
    ):
        if not 1.0 <= value <= 10.0:
            raise ScideaError("OUT_OF_RANGE", f"{name} must be in [1, 10], got {value}", field=name)
    return (novelty + excitement + feasibility + effectiveness) / 4.0


@dataclass(frozen=True)
class RubricScore:
    """Judge ratings on a 1-10 scale; overall is the mean of the four
    criteria. ``corrected`` flags that a reported overall deviated from the
    mean and was recomputed during parsing; it is metadata, not a score."""

    novelty: float
    excitement: float
    feasibility: float
    effectiveness: float
    overall: float
    corrected: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        expected = overall_score(self.novelty, self.excitement, self.feasibility, self.effectiveness)
        _require(
            abs(self.overall - expected) <= RUBRIC_MEAN_TOLERANCE,
            "OUT_OF_RANGE",
            f"overall {self.overall} is not the mean of the criteria ({expected})",
            field="overall",
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "novelty": self.novelty,
            "excitement": self.excitement,
            "feasibility": self.feasibility,
            "effectiveness": self.effectiveness,
            "overall": self.overall,
            "corrected": self.corrected,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RubricScore":
        return cls(
            novelty=data["novelty"],
            excitement=data["excitement"],
            feasibility=data["feasibility"],
            effectiveness=data["effectiveness"],
            overall=data["overall"],
            corrected=data.get("corrected", False),
        )


@dataclass(frozen=True)
class PromptStrategy:
    """Prompting strategy: zero-shot, zero-shot chain-of-thought, or k-shot
    few-shot with k in {2, 3, 5}."""

    kind: StrategyKind
    shots: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind is StrategyKind.FS:
            _require(
                self.shots in (2, 3, 5),
                "OUT_OF_RANGE",
                f"few-shot strategies support 2, 3, or 5 shots, got {self.shots}",
                field="shots",
            )
        else:
            _require(
                self.shots is None,
                "OUT_OF_RANGE",
                f"shots is only valid for few-shot strategies, got {self.shots}",
                field="shots",
            )

    @property
    def label(self) -> str:
        """Report label: ZS, ZSCoT, 2FS, 3FS, or 5FS."""
        if self.kind is StrategyKind.ZS:
            return "ZS"
        if self.kind is StrategyKind.ZSCOT:
            return "ZSCoT"
        return f"{self.shots}FS"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "shots": self.shots}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PromptStrategy":
        return cls(kind=StrategyKind(data["kind"]), shots=data.get("shots"))

    @classmethod
    def parse(cls, label: str) -> "PromptStrategy":
        """Parse CLI-style labels: zs, zscot, fs2/fs3/fs5 (or 2fs/3fs/5fs)."""
        norm = label.strip().lower().replace("-", "")
        if norm == "zs":
            return cls(StrategyKind.ZS)
        if norm == "zscot":
            return cls(StrategyKind.ZSCOT)
        m = re.fullmatch(r"(?:fs(\d+)|(\d+)fs)", norm)
        if m:
            return cls(StrategyKind.FS, shots=int(m.group(1) or m.group(2)))
        raise ScideaError("OUT_OF_RANGE", f"unknown strategy label: {label!r}", field="strategy")


ZS = PromptStrategy(StrategyKind.ZS)
ZSCOT = PromptStrategy(StrategyKind.ZSCOT)
FS2 = PromptStrategy(StrategyKind.FS, shots=2)
FS3 = PromptStrategy(StrategyKind.FS, shots=3)
FS5 = PromptStrategy(StrategyKind.FS, shots=5)


@dataclass(frozen=True)
class ScoredCandidate:
    """A candidate with its attached assessments."""

    candidate: IdeaCandidate
    aha: AhaScore
    rubric: Optional[RubricScore] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "candidate": self.candidate.to_dict(),
            "aha": self.aha.to_dict(),
            "rubric": self.rubric.to_dict() if self.rubric else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScoredCandidate":
        return cls(
            candidate=IdeaCandidate.from_dict(data["candidate"]),
            aha=AhaScore.from_dict(data["aha"]),
            rubric=RubricScore.from_dict(data["rubric"]) if data.get("rubric") else None,
        )


@dataclass(frozen=True)
class Session:
    """Journaled state of one ideation run, reconstructed by folding events."""

    id: str
    profile: ResearcherProfile
    author_publications: tuple[Publication, ...] = ()
    related_publications: tuple[Publication, ...] = ()
    selected_publication_ids: tuple[str, ...] = ()
    facets: tuple[FacetSet, ...] = ()
    gap: str = ""
    candidates: tuple[ScoredCandidate, ...] = ()
    thresholds: AhaThresholds = AhaThresholds(0.7, 2.0)
    feedback_log: tuple[str, ...] = ()
    iteration: int = 0
    status: SessionStatus = SessionStatus.CREATED
    accepted_candidate_id: Optional[int] = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        known = {p.id for p in self.author_publications} | {p.id for p in self.related_publications}
        for pid in self.selected_publication_ids:
            _require(
                pid in known,
                "NOT_FOUND",
                f"selected publication {pid!r} was never retrieved",
                publication_id=pid,
            )

    def with_status(self, target: SessionStatus) -> "Session":
        if not is_legal_transition(self.status, target):
            raise ScideaError(
                "ILLEGAL_TRANSITION",
                f"cannot move from {self.status.value} to {target.value}",
                status=self.status.value,
                target=target.value,
            )
        return replace(self, status=target)

    def selected_publications(self) -> tuple[Publication, ...]:
        by_id = {p.id: p for p in self.author_publications + self.related_publications}
        return tuple(by_id[pid] for pid in self.selected_publication_ids)

    def publication_titles(self) -> dict[str, str]:
        return {p.id: p.title for p in self.author_publications + self.related_publications}

    def aha_candidates(self) -> tuple[ScoredCandidate, ...]:
        return tuple(sc for sc in self.candidates if sc.aha.is_aha)

    def next_candidate_id(self) -> int:
        return max((sc.candidate.id for sc in self.candidates), default=-1) + 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "profile": self.profile.to_dict(),
            "author_publications": [p.to_dict() for p in self.author_publications],
            "related_publications": [p.to_dict() for p in self.related_publications],
            "selected_publication_ids": list(self.selected_publication_ids),
            "facets": [f.to_dict() for f in self.facets],
            "gap": self.gap,
            "candidates": [sc.to_dict() for sc in self.candidates],
            "thresholds": self.thresholds.to_dict(),
            "feedback_log": list(self.feedback_log),
            "iteration": self.iteration,
            "status": self.status.value,
            "accepted_candidate_id": self.accepted_candidate_id,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Session":
        return cls(
            id=data["id"],
            profile=ResearcherProfile.from_dict(data["profile"]),
            author_publications=tuple(Publication.from_dict(p) for p in data.get("author_publications", ())),
            related_publications=tuple(Publication.from_dict(p) for p in data.get("related_publications", ())),
            selected_publication_ids=tuple(data.get("selected_publication_ids", ())),
            facets=tuple(FacetSet.from_dict(f) for f in data.get("facets", ())),
            gap=data.get("gap", ""),
            candidates=tuple(ScoredCandidate.from_dict(c) for c in data.get("candidates", ())),
            thresholds=AhaThresholds.from_dict(data["thresholds"]),
            feedback_log=tuple(data.get("feedback_log", ())),
            iteration=data.get("iteration", 0),
            status=SessionStatus(data["status"]),
            accepted_candidate_id=data.get("accepted_candidate_id"),
            warnings=tuple(data.get("warnings", ())),
        )


def dataclass_field_names(obj: Any) -> Sequence[str]:
    return [f.name for f in fields(obj)]
