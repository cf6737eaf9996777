"""Chat/scoring providers: a deterministic scripted provider for tests and
replay, and an OpenAI-compatible HTTP client for real backends."""

from __future__ import annotations

import os
from typing import TYPE_CHECKING, Callable, Optional, Protocol, Sequence

import requests

from ..errors import ScideaError

if TYPE_CHECKING:
    from .core import ChatRequest, ScoredContinuation


class Provider(Protocol):
    """Backend that can answer chat requests and (optionally) score
    continuations with per-token natural-log probabilities."""

    supports_logprobs: bool

    def complete(self, request: "ChatRequest") -> str: ...

    def score(self, context: str, continuation: str) -> "ScoredContinuation": ...


ChatRule = tuple[Callable[["ChatRequest", str], bool], str]
ScoreRule = tuple[Callable[[str, str], bool], float]


class ScriptedProvider:
    """Deterministic provider driven by an ordered rule list.

    Chat rules match on the request (or its hash) and return a fixed text;
    score rules assign one constant logprob to every whitespace token of the
    continuation. A fixed script plus fixed requests yields byte-identical
    transcripts across runs.
    """

    def __init__(self, supports_logprobs: bool = True, default_logprob: Optional[float] = None) -> None:
        self.supports_logprobs = supports_logprobs
        self.default_logprob = default_logprob
        self.calls = 0
        self.score_calls = 0
        self._chat_rules: list[ChatRule] = []
        self._score_rules: list[ScoreRule] = []

    # -- scripting ---------------------------------------------------------
    def script_hash(self, digest: str, response: str) -> "ScriptedProvider":
        from .core import request_hash

        self._chat_rules.append((lambda req, _text, d=digest: request_hash(req) == d, response))
        return self

    def script_contains(self, needle: str, response: str) -> "ScriptedProvider":
        self._chat_rules.append((lambda _req, text, n=needle: n in text, response))
        return self

    def script_contains_all(self, needles: Sequence[str], response: str) -> "ScriptedProvider":
        self._chat_rules.append((lambda _req, text, ns=tuple(needles): all(n in text for n in ns), response))
        return self

    def script_when(self, predicate: Callable[["ChatRequest", str], bool], response: str) -> "ScriptedProvider":
        self._chat_rules.append((predicate, response))
        return self

    def score_contains(self, needle: str, logprob: float) -> "ScriptedProvider":
        self._score_rules.append((lambda _ctx, cont, n=needle: n in cont, logprob))
        return self

    def score_default(self, logprob: float) -> "ScriptedProvider":
        self.default_logprob = logprob
        return self

    # -- provider interface --------------------------------------------------
    def complete(self, request: "ChatRequest") -> str:
        self.calls += 1
        prompt = "\n".join(text for _role, text in request.messages)
        for predicate, response in self._chat_rules:
            if predicate(request, prompt):
                return response
        raise ScideaError(
            "PROVIDER_ERROR",
            "no scripted response matches this request",
            prompt_head=prompt[:120],
        )

    def score(self, context: str, continuation: str) -> "ScoredContinuation":
        from .core import ScoredContinuation

        if not self.supports_logprobs:
            raise ScideaError("LOGPROBS_UNSUPPORTED", "scripted provider configured without logprobs")
        self.score_calls += 1
        tokens = tuple(continuation.split())
        logprob = self.default_logprob
        for predicate, value in self._score_rules:
            if predicate(context, continuation):
                logprob = value
                break
        if logprob is None:
            raise ScideaError(
                "PROVIDER_ERROR",
                "no scripted logprob matches this continuation",
                continuation_head=continuation[:120],
            )
        return ScoredContinuation(tokens=tokens, logprobs=tuple(logprob for _ in tokens))


class OpenAICompatProvider:
    """HTTP client for OpenAI-compatible chat-completions endpoints.

    Scoring uses the legacy completions endpoint with echo+logprobs, which
    compatible servers expose; servers that do not are reported as
    LOGPROBS_UNSUPPORTED by the gateway via supports_logprobs.
    """

    def __init__(
        self,
        base_url: str,
        api_key_env: Optional[str] = None,
        timeout: float = 120.0,
        supports_logprobs: bool = False,
        session: Optional[requests.Session] = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.supports_logprobs = supports_logprobs
        self._session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._session.post(
                f"{self.base_url}{path}", json=payload, headers=self._headers(), timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise ScideaError("TIMEOUT", f"provider timed out after {self.timeout}s") from exc
        except requests.RequestException as exc:
            raise ScideaError("PROVIDER_ERROR", f"provider request failed: {exc}") from exc
        if response.status_code != 200:
            raise ScideaError(
                "PROVIDER_ERROR",
                f"provider returned {response.status_code}",
                status=response.status_code,
                body=response.text[:500],
            )
        return response.json()

    def complete(self, request: "ChatRequest") -> str:
        payload = {
            "model": request.model_id,
            "messages": [{"role": role, "content": text} for role, text in request.messages],
            "temperature": request.temperature,
            "seed": request.seed,
            "max_tokens": request.max_tokens,
        }
        data = self._post("/chat/completions", payload)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ScideaError("PROVIDER_ERROR", "malformed chat-completions response", body=str(data)[:500]) from exc

    def score(self, context: str, continuation: str) -> "ScoredContinuation":
        from .core import ScoredContinuation

        payload = {
            "model": "",  # model is addressed by the endpoint for compat servers
            "prompt": context + continuation,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
        }
        data = self._post("/completions", payload)
        try:
            lp = data["choices"][0]["logprobs"]
            tokens = lp["tokens"]
            token_logprobs = lp["token_logprobs"]
            offsets = lp["text_offset"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ScideaError(
                "LOGPROBS_UNSUPPORTED", "endpoint did not return echo logprobs", body=str(data)[:500]
            ) from exc
        boundary = len(context)
        picked = [
            (tok, logp)
            for tok, logp, off in zip(tokens, token_logprobs, offsets)
            if off >= boundary and logp is not None
        ]
        if not picked:
            raise ScideaError("EMPTY_CONTINUATION", "no continuation tokens past the context boundary")
        return ScoredContinuation(
            tokens=tuple(tok for tok, _ in picked),
            logprobs=tuple(min(logp, 0.0) for _, logp in picked),
        )
