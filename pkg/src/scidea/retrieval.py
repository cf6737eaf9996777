"""Publication retrieval: identifier resolution, keyphrase-driven search over
academic APIs, and dataset-file ingestion.

HTTP responses are cached on disk under ``cache/<sha256>.json`` keyed by
(endpoint, normalized query), so identical calls are byte-identical and test
runs never touch the network. Each source client is rate-limited by a token
bucket (default one request per second). API keys come from environment
variables named ``SCIDEA_<SOURCE>_KEY``.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Protocol, Sequence

import requests

from .domain import ORCID_PATTERN, Origin, Publication, Source, normalized_title
from .errors import ScideaError
from .prompts import PromptBinding, PromptStage, parse_keyphrases, render_prompt
from .stages import SEED, stage_temperature

DEFAULT_RATE_PER_SECOND = 1.0


class SourceClient(Protocol):
    """One academic source: ORCID lookup plus keyphrase search."""

    source: Source

    def fetch_by_orcid(self, orcid: str) -> tuple[str, list[Publication]]:
        """Returns (researcher display name or '', author publications)."""
        ...

    def search(self, keyphrase: str, limit: int) -> list[Publication]: ...


class DiskCache:
    """cache/<sha256>.json payload store with atomic per-key writes."""

    def __init__(self, directory: Optional[Path]) -> None:
        self._dir = Path(directory) if directory else None
        self._lock = threading.Lock()

    @staticmethod
    def key(endpoint: str, query: str) -> str:
        normalized = " ".join(query.lower().split())
        return hashlib.sha256(f"{endpoint}|{normalized}".encode("utf-8")).hexdigest()

    def get(self, key: str) -> Any:
        if not self._dir:
            return None
        path = self._dir / f"{key}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, payload: Any) -> None:
        if not self._dir:
            return
        with self._lock:
            self._dir.mkdir(parents=True, exist_ok=True)
            tmp = self._dir / f"{key}.tmp"
            tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
            tmp.replace(self._dir / f"{key}.json")


class TokenBucket:
    """Blocking rate limiter; capacity one burst per source by default."""

    def __init__(self, rate_per_second: float = DEFAULT_RATE_PER_SECOND, capacity: float = 1.0) -> None:
        self.rate = rate_per_second
        self.capacity = capacity
        self._tokens = capacity
        self._updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._updated) * self.rate)
                self._updated = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


class _HttpSource:
    """Shared plumbing: cached, rate-limited GET returning parsed JSON/text."""

    def __init__(
        self,
        cache: Optional[DiskCache] = None,
        session: Optional[requests.Session] = None,
        rate_per_second: float = DEFAULT_RATE_PER_SECOND,
        timeout: float = 30.0,
    ) -> None:
        self._cache = cache or DiskCache(None)
        self._session = session or requests.Session()
        self._bucket = TokenBucket(rate_per_second)
        self._timeout = timeout

    def _get(self, endpoint: str, cache_query: str, *, params: dict | None = None, headers: dict | None = None, as_text: bool = False) -> Any:
        key = DiskCache.key(endpoint, cache_query)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        self._bucket.acquire()
        try:
            response = self._session.get(endpoint, params=params, headers=headers, timeout=self._timeout)
        except requests.RequestException as exc:
            raise ScideaError("SOURCE_UNAVAILABLE", f"request failed: {exc}", source=self.source.value) from exc
        if response.status_code != 200:
            raise ScideaError(
                "SOURCE_UNAVAILABLE",
                f"{self.source.value} returned {response.status_code}",
                source=self.source.value,
                status=response.status_code,
            )
        payload = response.text if as_text else response.json()
        self._cache.put(key, payload)
        return payload

    source: Source  # set by subclasses


_ATOM = "{http://www.w3.org/2005/Atom}"


class ArxivClient(_HttpSource):
    """Atom XML search API. No ORCID lookup; participates in search only."""

    source = Source.ARXIV
    base_url = "http://export.arxiv.org/api/query"

    def fetch_by_orcid(self, orcid: str) -> tuple[str, list[Publication]]:
        return "", []

    def search(self, keyphrase: str, limit: int) -> list[Publication]:
        query = f'all:"{keyphrase}"'
        payload = self._get(
            self.base_url,
            query,
            params={"search_query": query, "start": 0, "max_results": limit},
            as_text=True,
        )
        return self._parse_atom(payload)

    def _parse_atom(self, xml_text: str) -> list[Publication]:
        try:
            root = ET.fromstring(xml_text)
        except ET.ParseError as exc:
            raise ScideaError("SOURCE_UNAVAILABLE", f"arXiv returned malformed XML: {exc}", source=self.source.value) from exc
        publications = []
        for entry in root.findall(f"{_ATOM}entry"):
            entry_id = (entry.findtext(f"{_ATOM}id") or "").strip()
            title = " ".join((entry.findtext(f"{_ATOM}title") or "").split())
            summary = (entry.findtext(f"{_ATOM}summary") or "").strip()
            if not title:
                continue
            publications.append(
                Publication(
                    id=entry_id or f"arxiv:{normalized_title(title)}",
                    title=title,
                    full_text=summary,
                    source=self.source,
                    origin=Origin.RELATED,
                )
            )
        return publications


class SemanticScholarClient(_HttpSource):
    source = Source.SEMANTIC_SCHOLAR
    base_url = "https://api.semanticscholar.org/graph/v1"
    api_key_env = "SCIDEA_SEMANTIC_SCHOLAR_KEY"

    def _headers(self) -> dict:
        import os

        key = os.environ.get(self.api_key_env, "")
        return {"x-api-key": key} if key else {}

    def fetch_by_orcid(self, orcid: str) -> tuple[str, list[Publication]]:
        author_url = f"{self.base_url}/author/ORCID:{orcid}"
        author = self._get(author_url, orcid, params={"fields": "name"}, headers=self._headers())
        papers = self._get(
            f"{author_url}/papers",
            f"{orcid}/papers",
            params={"fields": "title,abstract", "limit": 100},
            headers=self._headers(),
        )
        publications = []
        for item in papers.get("data", []):
            title = (item.get("title") or "").strip()
            if not title:
                continue
            publications.append(
                Publication(
                    id=f"s2:{item.get('paperId', normalized_title(title))}",
                    title=title,
                    full_text=(item.get("abstract") or "").strip(),
                    source=self.source,
                    origin=Origin.AUTHOR,
                )
            )
        return (author.get("name") or "").strip(), publications

    def search(self, keyphrase: str, limit: int) -> list[Publication]:
        payload = self._get(
            f"{self.base_url}/paper/search",
            f"search/{keyphrase}",
            params={"query": keyphrase, "fields": "title,abstract", "limit": limit},
            headers=self._headers(),
        )
        publications = []
        for item in payload.get("data", []):
            title = (item.get("title") or "").strip()
            if not title:
                continue
            publications.append(
                Publication(
                    id=f"s2:{item.get('paperId', normalized_title(title))}",
                    title=title,
                    full_text=(item.get("abstract") or "").strip(),
                    source=self.source,
                    origin=Origin.RELATED,
                )
            )
        return publications


class CoreClient(_HttpSource):
    source = Source.CORE
    base_url = "https://api.core.ac.uk/v3"
    api_key_env = "SCIDEA_CORE_KEY"

    def _headers(self) -> dict:
        import os

        key = os.environ.get(self.api_key_env, "")
        return {"Authorization": f"Bearer {key}"} if key else {}

    def _works(self, query: str, limit: int, origin: Origin) -> list[Publication]:
        payload = self._get(
            f"{self.base_url}/search/works",
            query,
            params={"q": query, "limit": limit},
            headers=self._headers(),
        )
        publications = []
        for item in payload.get("results", []):
            title = (item.get("title") or "").strip()
            if not title:
                continue
            text = (item.get("fullText") or item.get("abstract") or "").strip()
            publications.append(
                Publication(
                    id=f"core:{item.get('id', normalized_title(title))}",
                    title=title,
                    full_text=text,
                    source=self.source,
                    origin=origin,
                )
            )
        return publications

    def fetch_by_orcid(self, orcid: str) -> tuple[str, list[Publication]]:
        return "", self._works(f'authors.orcid:"{orcid}"', 100, Origin.AUTHOR)

    def search(self, keyphrase: str, limit: int) -> list[Publication]:
        return self._works(keyphrase, limit, Origin.RELATED)


class FixtureSource:
    """In-memory source for tests: scripted ORCID and keyphrase responses."""

    def __init__(
        self,
        source: Source,
        by_orcid: Optional[dict[str, tuple[str, list[Publication]]]] = None,
        by_keyphrase: Optional[dict[str, list[Publication]]] = None,
        fail: bool = False,
    ) -> None:
        self.source = source
        self._by_orcid = by_orcid or {}
        self._by_keyphrase = by_keyphrase or {}
        self._fail = fail
        self.calls = 0

    def fetch_by_orcid(self, orcid: str) -> tuple[str, list[Publication]]:
        self.calls += 1
        if self._fail:
            raise ScideaError("SOURCE_UNAVAILABLE", f"{self.source.value} is down", source=self.source.value)
        return self._by_orcid.get(orcid, ("", []))

    def search(self, keyphrase: str, limit: int) -> list[Publication]:
        self.calls += 1
        if self._fail:
            raise ScideaError("SOURCE_UNAVAILABLE", f"{self.source.value} is down", source=self.source.value)
        return self._by_keyphrase.get(keyphrase, [])[:limit]


@dataclass(frozen=True)
class RetrievalResult:
    """Outcome of identifier resolution: a profile skeleton (name + orcid),
    deduplicated publications, and per-source degradation warnings."""

    name: str
    orcid: str
    publications: tuple[Publication, ...]
    warnings: tuple[str, ...]


def _dedup(publications: Sequence[Publication]) -> list[Publication]:
    seen: set[str] = set()
    unique = []
    for pub in publications:
        key = normalized_title(pub.title)
        if key in seen:
            continue
        seen.add(key)
        unique.append(pub)
    return unique


def resolve_profile(orcid: str, sources: Sequence[SourceClient]) -> RetrievalResult:
    """Resolve an ORCID to author publications across sources.

    Unavailable sources degrade to warnings; remaining results are merged in
    source order and deduplicated by normalized title.
    """
    if not ORCID_PATTERN.fullmatch(orcid.strip()):
        raise ScideaError("MALFORMED_ID", f"not a valid ORCID identifier: {orcid!r}", orcid=orcid)
    orcid = orcid.strip()
    warnings: list[str] = []
    name = ""
    merged: list[Publication] = []

    def fetch(client: SourceClient) -> tuple[str, list[Publication]] | ScideaError:
        try:
            return client.fetch_by_orcid(orcid)
        except ScideaError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, len(sources))) as pool:
        results = list(pool.map(fetch, sources))
    for client, result in zip(sources, results):
        if isinstance(result, ScideaError):
            warnings.append(f"{client.source.value}: {result.message}")
            continue
        source_name, pubs = result
        if source_name and not name:
            name = source_name
        merged.extend(pubs)
    publications = _dedup(merged)
    if not publications:
        warnings.append("no publications found for this identifier")
    return RetrievalResult(name=name, orcid=orcid, publications=tuple(publications), warnings=tuple(warnings))


def extract_keyphrases(query: str, gateway, model_id: str) -> list[str]:
    """Ask the model for keyphrases representing the query's research topic."""
    if not query.strip():
        raise ScideaError("EMPTY_QUERY", "query must be non-empty")
    from .gateway import ChatRequest

    prompt = render_prompt(PromptBinding(PromptStage.KEYPHRASE, _any_strategy(), {"query": query.strip()}))
    response = gateway.complete_chat(
        ChatRequest.user(prompt, temperature=stage_temperature("KEYPHRASE"), seed=SEED, model_id=model_id),
        stage="KEYPHRASE",
    )
    return parse_keyphrases(response)


def _any_strategy():
    from .domain import ZS

    return ZS


def search_related(
    keyphrases: Sequence[str],
    sources: Sequence[SourceClient],
    limit: int,
) -> tuple[list[Publication], list[str]]:
    """Union of per-source keyphrase hits, deduplicated and truncated.

    Results are merged deterministically in (source order, keyphrase order,
    item order); every publication records its source and origin RELATED.
    Returns (publications, warnings).
    """
    if not keyphrases:
        raise ScideaError("EMPTY_QUERY", "at least one keyphrase is required")
    if limit < 1:
        raise ScideaError("OUT_OF_RANGE", "limit must be >= 1", field="limit")
    warnings: list[str] = []
    merged: list[Publication] = []

    def search_one(client: SourceClient) -> list[Publication] | ScideaError:
        hits: list[Publication] = []
        for keyphrase in keyphrases:
            try:
                hits.extend(client.search(keyphrase, limit))
            except ScideaError as exc:
                return exc
        return hits

    with ThreadPoolExecutor(max_workers=max(1, len(sources))) as pool:
        results = list(pool.map(search_one, sources))
    for client, result in zip(sources, results):
        if isinstance(result, ScideaError):
            warnings.append(f"{client.source.value}: {result.message}")
            continue
        merged.extend(result)
    related = [
        Publication(id=p.id, title=p.title, full_text=p.full_text, source=p.source, origin=Origin.RELATED)
        for p in _dedup(merged)[:limit]
    ]
    return related, warnings


# ---------------------------------------------------------------------------
# Dataset ingestion
# ---------------------------------------------------------------------------

# Canonical record keys with accepted snake_case aliases.
_DATASET_KEYS = {
    "Researcher Name": ("researcher_name",),
    "ORCID": ("orcid",),
    "Researcher Query Keyword": ("researcher_query_keyword",),
    "Research Full Paper": ("research_full_paper",),
    "Similar Full Paper": ("similar_full_paper",),
}


@dataclass(frozen=True)
class DatasetRecord:
    """One researcher profile row from a dataset file."""

    researcher_name: str
    orcid: str
    researcher_query_keyword: tuple[str, ...]
    research_full_paper: tuple[Publication, ...] = ()
    similar_full_paper: tuple[Publication, ...] = ()


def _lookup(row: dict, canonical: str) -> Any:
    if canonical in row:
        return row[canonical]
    for alias in _DATASET_KEYS[canonical]:
        if alias in row:
            return row[alias]
    return None


def _dataset_publication(entry: Any, row_index: int, role: str, item_index: int, origin: Origin) -> Publication:
    if isinstance(entry, str):
        text = entry.strip()
        title = text.splitlines()[0][:120] if text else f"untitled {role} paper {item_index}"
        return Publication(
            id=f"dataset:{row_index}:{role}:{item_index}",
            title=title,
            full_text=text,
            source=Source.DATASET,
            origin=origin,
        )
    if isinstance(entry, dict):
        lowered = {str(k).strip().lower(): v for k, v in entry.items()}
        title = str(lowered.get("title") or "").strip()
        if not title:
            raise ScideaError(
                "SCHEMA_ERROR",
                f"row {row_index}: {role} paper {item_index} lacks a title",
                row=row_index,
                key="title",
            )
        text = str(lowered.get("full_text") or lowered.get("fulltext") or lowered.get("text") or lowered.get("abstract") or "")
        pub_id = str(lowered.get("id") or f"dataset:{row_index}:{role}:{item_index}")
        return Publication(id=pub_id, title=title, full_text=text, source=Source.DATASET, origin=origin)
    raise ScideaError(
        "SCHEMA_ERROR",
        f"row {row_index}: {role} paper {item_index} is neither text nor an object",
        row=row_index,
        key=role,
    )


def _parse_record(row: Any, row_index: int) -> DatasetRecord:
    if not isinstance(row, dict):
        raise ScideaError("SCHEMA_ERROR", f"row {row_index} is not an object", row=row_index, key="")
    for canonical in _DATASET_KEYS:
        if _lookup(row, canonical) is None:
            raise ScideaError(
                "SCHEMA_ERROR",
                f"row {row_index} is missing key {canonical!r}",
                row=row_index,
                key=canonical,
            )
    keywords = _lookup(row, "Researcher Query Keyword")
    if isinstance(keywords, str):
        keywords = [kw.strip() for kw in keywords.split(",") if kw.strip()]
    research = _lookup(row, "Research Full Paper") or []
    similar = _lookup(row, "Similar Full Paper") or []
    return DatasetRecord(
        researcher_name=str(_lookup(row, "Researcher Name")),
        orcid=str(_lookup(row, "ORCID")),
        researcher_query_keyword=tuple(str(kw) for kw in keywords),
        research_full_paper=tuple(
            _dataset_publication(entry, row_index, "author", i, Origin.AUTHOR) for i, entry in enumerate(research)
        ),
        similar_full_paper=tuple(
            _dataset_publication(entry, row_index, "similar", i, Origin.RELATED) for i, entry in enumerate(similar)
        ),
    )


def load_dataset(path: Path | str) -> list[DatasetRecord]:
    """Load researcher records from a JSON-lines file or a single JSON array."""
    path = Path(path)
    if not path.exists():
        raise ScideaError("IO_ERROR", f"dataset file not found: {path}", path=str(path))
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScideaError("IO_ERROR", f"cannot read dataset file: {exc}", path=str(path)) from exc
    stripped = text.strip()
    if not stripped:
        return []
    rows: list[Any]
    if stripped.startswith("["):
        try:
            rows = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ScideaError("IO_ERROR", f"dataset is not valid JSON: {exc}", path=str(path)) from exc
    else:
        rows = []
        for line_number, line in enumerate(stripped.splitlines()):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ScideaError(
                    "IO_ERROR", f"dataset line {line_number} is not valid JSON: {exc}", path=str(path)
                ) from exc
    return [_parse_record(row, index) for index, row in enumerate(rows)]
