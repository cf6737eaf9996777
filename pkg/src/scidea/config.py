"""Run configuration: provider registry, encoders, sources, loop defaults.

Config files are TOML or JSON. Relative paths inside a config resolve
against the config file's directory. A deterministic config (mock providers,
logical clock, fixture sources) makes full runs byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .domain import EmbeddingStrategy, Publication, PromptStrategy, Source
from .errors import ScideaError
from .gateway import CallCache, Gateway, HashedEncoder, OpenAICompatProvider, ScriptedProvider, StubEncoder
from .refinement import RefinementConfig
from .retrieval import ArxivClient, CoreClient, DiskCache, FixtureSource, SemanticScholarClient, SourceClient
from .session import LogicalClock, SessionStore, system_clock
from .service import SessionManager


@dataclass
class ModelSpec:
    provider: str  # "mock" or "openai"
    script: Optional[Path] = None
    base_url: str = ""
    api_key_env: Optional[str] = None
    supports_logprobs: bool = False
    default_logprob: Optional[float] = None
    size: str = "-"
    display_name: str = ""


@dataclass
class AppConfig:
    path: Path
    default_model: str
    scoring_model: str
    encoder: str = "hashed"
    deterministic: bool = False
    data_dir: Path = Path("scidea_data")
    related_limit: int = 10
    ideas_per_call: int = 5
    max_iterations: int = 3
    min_aha: int = 1
    theta_n: float = 0.7
    theta_s: float = 2.0
    models: dict[str, ModelSpec] = field(default_factory=dict)
    encoders: dict[str, dict[str, Any]] = field(default_factory=dict)
    sources: list[dict[str, Any]] = field(default_factory=list)

    def refinement(self, strategy: PromptStrategy, embedding: EmbeddingStrategy, model_id: str = "") -> RefinementConfig:
        return RefinementConfig(
            strategy=strategy,
            embedding_strategy=embedding,
            model_id=model_id or self.default_model,
            scoring_model_id=self.scoring_model,
            encoder_id=self.encoder,
            ideas_per_call=self.ideas_per_call,
            max_iterations=self.max_iterations,
            min_aha=self.min_aha,
        )


def load_config(path: Path | str) -> AppConfig:
    path = Path(path)
    if not path.exists():
        raise ScideaError("IO_ERROR", f"config file not found: {path}", path=str(path))
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        raw = tomllib.loads(text)
    else:
        raw = json.loads(text)

    base = path.parent

    def resolve(p: Optional[str]) -> Optional[Path]:
        if not p:
            return None
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    models = {}
    for model_id, spec in raw.get("models", {}).items():
        models[model_id] = ModelSpec(
            provider=spec.get("provider", "mock"),
            script=resolve(spec.get("script")),
            base_url=spec.get("base_url", ""),
            api_key_env=spec.get("api_key_env"),
            supports_logprobs=bool(spec.get("supports_logprobs", False)),
            default_logprob=spec.get("default_logprob"),
            size=str(spec.get("size", "-")),
            display_name=spec.get("display_name", model_id),
        )
    if not models:
        raise ScideaError("IO_ERROR", "config declares no models", path=str(path))
    default_model = raw.get("default_model") or next(iter(models))
    return AppConfig(
        path=path,
        default_model=default_model,
        scoring_model=raw.get("scoring_model", default_model),
        encoder=raw.get("encoder", "hashed"),
        deterministic=bool(raw.get("deterministic", False)),
        data_dir=resolve(raw.get("data_dir")) or base / "scidea_data",
        related_limit=int(raw.get("related_limit", 10)),
        ideas_per_call=int(raw.get("ideas_per_call", 5)),
        max_iterations=int(raw.get("max_iterations", 3)),
        min_aha=int(raw.get("min_aha", 1)),
        theta_n=float(raw.get("theta_n", 0.7)),
        theta_s=float(raw.get("theta_s", 2.0)),
        models=models,
        encoders=raw.get("encoders", {"hashed": {"type": "hashed"}}),
        sources=raw.get("sources", []),
    )


def build_scripted_provider(script_path: Path) -> ScriptedProvider:
    """Provider from a script file: ordered chat rules (hash or substring
    match) plus substring-matched per-token logprob rules."""
    if not script_path.exists():
        raise ScideaError("IO_ERROR", f"mock script not found: {script_path}", path=str(script_path))
    spec = json.loads(script_path.read_text(encoding="utf-8"))
    provider = ScriptedProvider(
        supports_logprobs=bool(spec.get("supports_logprobs", True)),
        default_logprob=spec.get("default_logprob"),
    )
    for rule in spec.get("chat_rules", []):
        if "hash" in rule:
            provider.script_hash(rule["hash"], rule["response"])
        elif "contains_all" in rule:
            provider.script_contains_all(rule["contains_all"], rule["response"])
        elif "contains" in rule:
            provider.script_contains(rule["contains"], rule["response"])
        else:
            raise ScideaError("IO_ERROR", "chat rule needs 'hash', 'contains', or 'contains_all'", path=str(script_path))
    for rule in spec.get("score_rules", []):
        provider.score_contains(rule["contains"], rule["logprob"])
    return provider


def build_gateway(config: AppConfig, data_dir: Path, cache_only: bool = False) -> Gateway:
    data_dir.mkdir(parents=True, exist_ok=True)
    gateway = Gateway(
        cache=CallCache(data_dir / "calls_cache.json"),
        journal_path=data_dir / "calls.jsonl",
        cache_only=cache_only,
    )
    for model_id, spec in config.models.items():
        if spec.provider == "mock":
            if spec.script is None:
                provider = ScriptedProvider(
                    supports_logprobs=spec.supports_logprobs, default_logprob=spec.default_logprob
                )
            else:
                provider = build_scripted_provider(spec.script)
        elif spec.provider == "openai":
            provider = OpenAICompatProvider(
                base_url=spec.base_url,
                api_key_env=spec.api_key_env,
                supports_logprobs=spec.supports_logprobs,
            )
        else:
            raise ScideaError("IO_ERROR", f"unknown provider type {spec.provider!r}", model_id=model_id)
        gateway.register_provider(model_id, provider)
    for encoder_id, spec in config.encoders.items():
        kind = spec.get("type", "hashed")
        if kind == "hashed":
            gateway.register_encoder(
                HashedEncoder(id=encoder_id, dim=int(spec.get("dim", 64)), seed=int(spec.get("seed", 0)))
            )
        elif kind == "stub":
            gateway.register_encoder(
                StubEncoder(id=encoder_id, mapping=spec.get("mapping", {}), dim=int(spec.get("dim", 2)))
            )
        else:
            raise ScideaError("IO_ERROR", f"unknown encoder type {kind!r}", encoder_id=encoder_id)
    return gateway


def _fixture_source(spec: dict[str, Any], base: Path) -> FixtureSource:
    file_path = Path(spec["file"])
    if not file_path.is_absolute():
        file_path = base / file_path
    data = json.loads(file_path.read_text(encoding="utf-8"))
    source = Source(spec.get("source", "CORE"))
    by_orcid = {}
    for orcid, entry in data.get("by_orcid", {}).items():
        pubs = [Publication.from_dict(p) for p in entry.get("publications", [])]
        by_orcid[orcid] = (entry.get("name", ""), pubs)
    by_keyphrase = {
        kp: [Publication.from_dict(p) for p in pubs] for kp, pubs in data.get("by_keyphrase", {}).items()
    }
    return FixtureSource(source, by_orcid=by_orcid, by_keyphrase=by_keyphrase)


def build_sources(config: AppConfig, cache_dir: Optional[Path] = None) -> list[SourceClient]:
    cache = DiskCache(cache_dir) if cache_dir else DiskCache(None)
    sources: list[SourceClient] = []
    for spec in config.sources:
        kind = spec.get("type", "fixture")
        if kind == "fixture":
            sources.append(_fixture_source(spec, config.path.parent))
        elif kind == "arxiv":
            sources.append(ArxivClient(cache=cache))
        elif kind == "semantic_scholar":
            sources.append(SemanticScholarClient(cache=cache))
        elif kind == "core":
            sources.append(CoreClient(cache=cache))
        else:
            raise ScideaError("IO_ERROR", f"unknown source type {kind!r}")
    return sources


def deterministic_session_id(orcid: str, query: str) -> str:
    return hashlib.sha256(f"{orcid}|{query}".encode("utf-8")).hexdigest()[:12]


def build_manager(
    config: AppConfig,
    strategy: PromptStrategy,
    embedding: EmbeddingStrategy,
    model_id: str = "",
    data_dir: Optional[Path] = None,
    cache_only: bool = False,
) -> SessionManager:
    data_dir = Path(data_dir) if data_dir else config.data_dir
    clock = LogicalClock() if config.deterministic else system_clock
    store = SessionStore(data_dir, clock=clock)
    gateway = build_gateway(config, data_dir, cache_only=cache_only)
    sources = build_sources(config, cache_dir=data_dir / "cache")
    return SessionManager(
        store=store,
        gateway=gateway,
        sources=sources,
        config=config.refinement(strategy, embedding, model_id),
        related_limit=config.related_limit,
    )
