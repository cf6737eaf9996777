"""Gateway core: request/response types, the call cache, and dispatch.

Every upstream call is keyed by a SHA-256 hash of its canonical JSON form and
journaled, which gives three properties the rest of the pipeline leans on:
identical requests are served from cache (one upstream call), a recorded run
can be replayed with the gateway in cache-only mode, and the journal carries
the (stage, temperature, seed) triple for protocol audits.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..domain import EmbeddingStrategy
from ..errors import ScideaError
from .encoders import Encoder, split_sentences
from .providers import Provider

# Token budget per embedded text (and per sentence for sentence-level pooling).
MAX_EMBED_TOKENS = 512


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion request."""

    messages: tuple[tuple[str, str], ...]
    temperature: float
    seed: int
    model_id: str
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.messages:
            raise ScideaError("EMPTY_INPUT", "chat request needs at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ScideaError(
                "OUT_OF_RANGE",
                f"temperature must be in [0, 2], got {self.temperature}",
                field="temperature",
            )
        if self.max_tokens <= 0:
            raise ScideaError("OUT_OF_RANGE", "max_tokens must be positive", field="max_tokens")

    @classmethod
    def user(cls, prompt: str, *, temperature: float, seed: int, model_id: str, max_tokens: int = 1024) -> "ChatRequest":
        return cls(
            messages=(("user", prompt),),
            temperature=temperature,
            seed=seed,
            model_id=model_id,
            max_tokens=max_tokens,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "messages": [[role, text] for role, text in self.messages],
            "temperature": self.temperature,
            "seed": self.seed,
            "model_id": self.model_id,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class ScoredContinuation:
    """Per-token natural-log probabilities of a continuation given a context."""

    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.logprobs):
            raise ScideaError(
                "DIMENSION_MISMATCH",
                f"{len(self.tokens)} tokens but {len(self.logprobs)} logprobs",
            )
        for lp in self.logprobs:
            if lp > 0.0:
                raise ScideaError("OUT_OF_RANGE", f"logprob {lp} is positive", field="logprobs")

    def to_dict(self) -> dict[str, Any]:
        return {"tokens": list(self.tokens), "logprobs": list(self.logprobs)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScoredContinuation":
        return cls(tokens=tuple(data["tokens"]), logprobs=tuple(data["logprobs"]))


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_hash(request: ChatRequest) -> str:
    return hashlib.sha256(canonical_json(request.to_dict()).encode("utf-8")).hexdigest()


def score_request_hash(context: str, continuation: str, model_id: str) -> str:
    payload = {"kind": "score", "context": context, "continuation": continuation, "model_id": model_id}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


class CallCache:
    """Keyed store of upstream responses, optionally persisted to disk.

    Last-write-wins under concurrent writers is benign because identical keys
    always carry identical values.
    """

    def __init__(self, path: Optional[Path] = None) -> None:
        self._path = Path(path) if path else None
        self._entries: dict[str, Any] = {}
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            self._entries = json.loads(self._path.read_text(encoding="utf-8"))

    def get(self, key: str) -> Any:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, value: Any) -> None:
        with self._lock:
            self._entries[key] = value
            if self._path:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                tmp = self._path.with_suffix(".tmp")
                tmp.write_text(canonical_json(self._entries), encoding="utf-8")
                tmp.replace(self._path)

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self._entries

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


@dataclass
class GatewayStats:
    upstream_calls: int = 0
    cache_hits: int = 0


class Gateway:
    """Dispatches to registered providers and encoders.

    cache_only=True turns the gateway into a pure replayer: any request whose
    hash is missing from the cache raises CACHE_MISS instead of going
    upstream.
    """

    def __init__(
        self,
        cache: Optional[CallCache] = None,
        journal_path: Optional[Path] = None,
        cache_enabled: bool = True,
        cache_only: bool = False,
        max_concurrency: int = 4,
    ) -> None:
        self.cache = cache if cache is not None else CallCache()
        self.cache_enabled = cache_enabled
        self.cache_only = cache_only
        self.stats = GatewayStats()
        self._providers: dict[str, Provider] = {}
        self._encoders: dict[str, Encoder] = {}
        self._journal_path = Path(journal_path) if journal_path else None
        self._lock = threading.Lock()
        self._slots = threading.Semaphore(max_concurrency)

    def register_provider(self, model_id: str, provider: Provider) -> None:
        self._providers[model_id] = provider

    def register_encoder(self, encoder: Encoder) -> None:
        self._encoders[encoder.id] = encoder

    def provider_for(self, model_id: str) -> Provider:
        provider = self._providers.get(model_id)
        if provider is None:
            raise ScideaError("PROVIDER_ERROR", f"no provider registered for model {model_id!r}", model_id=model_id)
        return provider

    def encoder_for(self, encoder_id: str) -> Encoder:
        encoder = self._encoders.get(encoder_id)
        if encoder is None:
            raise ScideaError("ENCODER_ERROR", f"no encoder registered as {encoder_id!r}", encoder_id=encoder_id)
        return encoder

    def _journal(self, entry: dict[str, Any]) -> None:
        if not self._journal_path:
            return
        with self._lock:
            self._journal_path.parent.mkdir(parents=True, exist_ok=True)
            with self._journal_path.open("a", encoding="utf-8") as fh:
                fh.write(canonical_json(entry) + "\n")

    def complete_chat(self, request: ChatRequest, stage: Optional[str] = None) -> str:
        key = request_hash(request)
        if self.cache_enabled and key in self.cache:
            with self._lock:
                self.stats.cache_hits += 1
            response = self.cache.get(key)
            self._journal(
                {
                    "kind": "chat",
                    "stage": stage,
                    "model_id": request.model_id,
                    "temperature": request.temperature,
                    "seed": request.seed,
                    "request_hash": key,
                    "cached": True,
                }
            )
            return response
        if self.cache_only:
            raise ScideaError("CACHE_MISS", f"no cached response for request {key[:12]}", request_hash=key)
        provider = self.provider_for(request.model_id)
        with self._slots:
            response = provider.complete(request)
        with self._lock:
            self.stats.upstream_calls += 1
        if self.cache_enabled:
            self.cache.put(key, response)
        self._journal(
            {
                "kind": "chat",
                "stage": stage,
                "model_id": request.model_id,
                "temperature": request.temperature,
                "seed": request.seed,
                "request_hash": key,
                "cached": False,
            }
        )
        return response

    def score_continuation(self, context: str, continuation: str, model_id: str) -> ScoredContinuation:
        if not continuation.strip():
            raise ScideaError("EMPTY_CONTINUATION", "cannot score an empty continuation")
        key = score_request_hash(context, continuation, model_id)
        if self.cache_enabled and key in self.cache:
            with self._lock:
                self.stats.cache_hits += 1
            return ScoredContinuation.from_dict(self.cache.get(key))
        if self.cache_only:
            raise ScideaError("CACHE_MISS", f"no cached scoring for request {key[:12]}", request_hash=key)
        provider = self.provider_for(model_id)
        if not provider.supports_logprobs:
            raise ScideaError(
                "LOGPROBS_UNSUPPORTED",
                f"provider for {model_id!r} cannot return log-probabilities",
                model_id=model_id,
            )
        with self._slots:
            scored = provider.score(context, continuation)
        with self._lock:
            self.stats.upstream_calls += 1
        if self.cache_enabled:
            self.cache.put(key, scored.to_dict())
        return scored

    def embed_text(self, text: str, strategy: EmbeddingStrategy, encoder_id: str) -> np.ndarray:
        """Mean-pooled embedding of ``text``.

        TOKEN_LEVEL pools the vectors of the first MAX_EMBED_TOKENS tokens;
        SENTENCE_LEVEL pools one mean vector per sentence (same truncation
        applied per sentence). Pure in (text, strategy, encoder weights).
        """
        if strategy is EmbeddingStrategy.NONE:
            raise ScideaError("OUT_OF_RANGE", "embedding strategy NONE cannot embed", field="strategy")
        if not text.strip():
            raise ScideaError("EMPTY_TEXT", "cannot embed empty text")
        encoder = self.encoder_for(encoder_id)
        if strategy is EmbeddingStrategy.TOKEN_LEVEL:
            return self._pool_tokens(encoder, text)
        sentence_vecs = [self._pool_tokens(encoder, sentence) for sentence in split_sentences(text)]
        return np.mean(np.stack(sentence_vecs), axis=0)

    def _pool_tokens(self, encoder: Encoder, text: str) -> np.ndarray:
        tokens = encoder.tokenize(text)[:MAX_EMBED_TOKENS]
        if not tokens:
            raise ScideaError("ENCODER_ERROR", f"encoder {encoder.id!r} produced no tokens", encoder_id=encoder.id)
        vectors = encoder.token_vectors(tokens)
        return np.mean(np.asarray(vectors, dtype=float), axis=0)
