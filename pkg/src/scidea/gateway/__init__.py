"""Uniform interface to chat-completion, continuation-scoring, and embedding
backends, plus deterministic scripted providers for tests and replay."""

from .core import (
    MAX_EMBED_TOKENS,
    CallCache,
    ChatRequest,
    Gateway,
    ScoredContinuation,
    request_hash,
)
from .encoders import Encoder, HashedEncoder, StubEncoder, split_sentences
from .providers import OpenAICompatProvider, Provider, ScriptedProvider

__all__ = [
    "MAX_EMBED_TOKENS",
    "CallCache",
    "ChatRequest",
    "Encoder",
    "Gateway",
    "HashedEncoder",
    "OpenAICompatProvider",
    "Provider",
    "ScoredContinuation",
    "ScriptedProvider",
    "StubEncoder",
    "request_hash",
    "split_sentences",
]
