"""Prompt templates and response parsers.

Templates live as plain-text resources with ``{{slot}}`` markers under
``templates/``; ``templates/manifest.json`` pins a SHA-256 per file plus a
provenance tag ("verbatim" wording, "derived" assemblies of verbatim pieces,
"reconstructed" bridging between verbatim anchors, or "local" additions).
Rendering is byte-stable for fixed bindings unless the manifest version
changes.

Parsers are lenient about tokenization (markdown fences, JSON embedded in
prose, label reordering) and strict about schema: missing facets, missing
keys, and out-of-range scores are reported with precise positions.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Any, Iterable, Optional

from ..domain import FacetSet, PromptStrategy, RubricScore, StrategyKind, overall_score
from ..errors import ScideaError

# Reported overall values within this distance of the true mean are treated as
# rounding noise; larger deviations are recomputed and flagged.
OVERALL_CORRECTION_TOLERANCE = 0.005

_SLOT = re.compile(r"\{\{(\w+)\}\}")


class PromptStage(str, Enum):
    FACET = "FACET"
    GAP = "GAP"
    IDEATE = "IDEATE"
    AHA_DIVE = "AHA_DIVE"
    RANK = "RANK"
    EVALUATE = "EVALUATE"
    KEYPHRASE = "KEYPHRASE"


# Stages whose template does not vary with the prompting strategy.
_SINGLE_VARIANT = {
    PromptStage.AHA_DIVE: "aha_dive",
    PromptStage.EVALUATE: "evaluate",
    PromptStage.KEYPHRASE: "keyphrase",
}

_VARIANT_FILES = {
    (PromptStage.FACET, "ZS"): "facet_zs",
    (PromptStage.FACET, "ZSCOT"): "facet_zscot",
    (PromptStage.FACET, "FS2"): "facet_fs2",
    (PromptStage.FACET, "FS3"): "facet_fs3",
    (PromptStage.FACET, "FS5"): "facet_fs5",
    (PromptStage.GAP, "ZS"): "gap_zs",
    (PromptStage.GAP, "FS2"): "gap_fs2",
    (PromptStage.GAP, "FS3"): "gap_fs3",
    (PromptStage.GAP, "FS5"): "gap_fs5",
    (PromptStage.IDEATE, "ZS"): "ideate_zs",
    (PromptStage.IDEATE, "ZSCOT"): "ideate_zscot",
    (PromptStage.IDEATE, "FS2"): "ideate_fs2",
    (PromptStage.IDEATE, "FS3"): "ideate_fs3",
    (PromptStage.IDEATE, "FS5"): "ideate_fs5",
    (PromptStage.RANK, "ZS"): "rank_zs",
    (PromptStage.RANK, "ZSCOT"): "rank_zscot",
    (PromptStage.RANK, "FS2"): "rank_fs2",
    (PromptStage.RANK, "FS3"): "rank_fs3",
    (PromptStage.RANK, "FS5"): "rank_fs5",
}

# Stages that accept the optional researcher_focus_points slot (appended as a
# suffix section listing feedback entries verbatim).
_FOCUS_STAGES = {PromptStage.IDEATE, PromptStage.AHA_DIVE}

_verified = False
_verify_lock = threading.Lock()
_template_cache: dict[str, str] = {}


def _strategy_variant(strategy: PromptStrategy) -> str:
    if strategy.kind is StrategyKind.FS:
        return f"FS{strategy.shots}"
    return strategy.kind.value


def _read_resource(filename: str) -> str:
    return resources.files(__package__).joinpath("templates", filename).read_text(encoding="utf-8")


def load_manifest() -> dict[str, Any]:
    return json.loads(_read_resource("manifest.json"))


def verify_templates() -> None:
    """Checksum every template against the manifest; raises IO_ERROR on drift."""
    manifest = load_manifest()
    for name, entry in manifest["templates"].items():
        text = _read_resource(entry["file"])
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        if digest != entry["sha256"]:
            raise ScideaError(
                "IO_ERROR",
                f"template {name!r} does not match its manifest hash",
                template=name,
                expected=entry["sha256"],
                actual=digest,
            )


def template_version() -> str:
    return load_manifest()["version"]


def _template_text(name: str) -> str:
    global _verified
    with _verify_lock:
        if not _verified:
            verify_templates()
            _verified = True
        if name not in _template_cache:
            _template_cache[name] = _read_resource(f"{name}.txt")
        return _template_cache[name]


def template_name_for(stage: PromptStage, strategy: PromptStrategy) -> str:
    if stage in _SINGLE_VARIANT:
        return _SINGLE_VARIANT[stage]
    variant = _strategy_variant(strategy)
    name = _VARIANT_FILES.get((stage, variant))
    if name is None:
        raise ScideaError(
            "UNKNOWN_TEMPLATE",
            f"no template for stage {stage.value} with strategy {variant}",
            stage=stage.value,
            strategy=variant,
        )
    return name


def has_template(stage: PromptStage, strategy: PromptStrategy) -> bool:
    try:
        template_name_for(stage, strategy)
        return True
    except ScideaError:
        return False


def required_slots(stage: PromptStage, strategy: PromptStrategy) -> list[str]:
    return _SLOT.findall(_template_text(template_name_for(stage, strategy)))


@dataclass(frozen=True)
class PromptBinding:
    """A (stage, strategy) pair plus the slot values to substitute."""

    stage: PromptStage
    strategy: PromptStrategy
    slots: dict[str, str]


def render_prompt(binding: PromptBinding) -> str:
    """Substitute the binding's slots into its template, verbatim.

    Every slot the template declares must be bound and non-empty. When the
    binding carries a non-empty researcher_focus_points value and the stage
    accepts it, the focus-points suffix is appended.
    """
    template = _template_text(template_name_for(binding.stage, binding.strategy))
    for slot in _SLOT.findall(template):
        value = binding.slots.get(slot, "")
        if not value.strip():
            raise ScideaError("MISSING_SLOT", f"slot {slot!r} is missing or empty", slot=slot)
    rendered = _SLOT.sub(lambda m: binding.slots[m.group(1)], template)
    focus = binding.slots.get("researcher_focus_points", "")
    if focus.strip() and binding.stage in _FOCUS_STAGES:
        suffix = _template_text("focus_points")
        rendered += _SLOT.sub(lambda m: binding.slots[m.group(1)], suffix)
    return rendered


def render_paper_block(paper_id: str, title: str, facets: FacetSet) -> str:
    """Per-publication facet block used to fill the gap stage's
    paper_summaries slot."""
    block = _template_text("gap_paper_block")
    values = {
        "paper_id": paper_id,
        "paper_title": title,
        "purpose": facets.purpose,
        "mechanism": facets.mechanism,
        "evaluation": facets.evaluation,
        "future_work": facets.future_work,
    }
    return _SLOT.sub(lambda m: values[m.group(1)], block)


def format_focus_points(entries: Iterable[str]) -> str:
    """One '- entry' line per feedback item, entries included verbatim."""
    return "\n".join(f"- {entry}" for entry in entries)


# ---------------------------------------------------------------------------
# Parsers
# ---------------------------------------------------------------------------

_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)

_FACET_ALIASES = {
    "purpose": "purpose",
    "objective": "purpose",
    "objectives": "purpose",
    "mechanism": "mechanism",
    "method": "mechanism",
    "methods": "mechanism",
    "methodology": "mechanism",
    "methodologies": "mechanism",
    "evaluation": "evaluation",
    "future work": "future_work",
    "future_work": "future_work",
    "future directions": "future_work",
}

_FACET_LABEL = re.compile(
    r"^\s*[\{\[\"'*#>-]*\s*(?:\*\*)?(" + "|".join(sorted(_FACET_ALIASES, key=len, reverse=True)) + r")(?:\*\*)?\s*[:：]\s*(.*)$",
    re.IGNORECASE,
)

_FACET_DISPLAY = {
    "purpose": "Purpose",
    "mechanism": "Mechanism",
    "evaluation": "Evaluation",
    "future_work": "Future Work",
}


def _strip_fences(text: str) -> str:
    fenced = _FENCE.findall(text)
    return "\n".join(fenced) if fenced else text


def _clean_facet_value(value: str) -> str:
    return value.strip().rstrip("\\").strip().strip('",').strip()


def parse_facets(response: str, publication_id: str = "") -> FacetSet:
    """Extract the four labeled facet lines, tolerating braces, fences,
    reordering, and body-text label synonyms."""
    if not response.strip():
        raise ScideaError("UNPARSEABLE_RESPONSE", "empty facet response")
    found: dict[str, list[str]] = {}
    current: Optional[str] = None
    for line in _strip_fences(response).splitlines():
        match = _FACET_LABEL.match(line)
        if match:
            current = _FACET_ALIASES[match.group(1).lower()]
            found.setdefault(current, [])
            value = _clean_facet_value(match.group(2))
            if value:
                found[current].append(value)
            continue
        stripped = line.strip().strip("{}").strip()
        if current and stripped:
            found[current].append(_clean_facet_value(stripped))
    values = {key: " ".join(parts).strip() for key, parts in found.items()}
    missing = [_FACET_DISPLAY[key] for key in ("purpose", "mechanism", "evaluation", "future_work") if not values.get(key)]
    if missing:
        raise ScideaError(
            "MISSING_FACET",
            f"facets absent from response: {', '.join(missing)}",
            missing=missing,
        )
    return FacetSet(
        purpose=values["purpose"],
        mechanism=values["mechanism"],
        evaluation=values["evaluation"],
        future_work=values["future_work"],
        publication_id=publication_id,
    )


def _extract_json_value(text: str) -> Any:
    """First JSON value in the text, tolerating fences and surrounding prose."""
    candidates = [_strip_fences(text), text]
    decoder = json.JSONDecoder()
    for candidate in candidates:
        for match in re.finditer(r"[\[{]", candidate):
            try:
                value, _end = decoder.raw_decode(candidate[match.start():])
                return value
            except json.JSONDecodeError:
                continue
    raise ScideaError("UNPARSEABLE_RESPONSE", "no JSON value found in response", raw=text[:500])


@dataclass(frozen=True)
class IdeaDraft:
    """Unscored idea parsed from a generation response."""

    title: str
    description: str


def parse_ideas(response: str) -> list[IdeaDraft]:
    """Parse a JSON object or array of objects with keys idea/description."""
    if not response.strip():
        raise ScideaError("UNPARSEABLE_RESPONSE", "empty idea response")
    value = _extract_json_value(response)
    if isinstance(value, dict):
        value = [value]
    if not isinstance(value, list):
        raise ScideaError("UNPARSEABLE_RESPONSE", "idea response is not an object or array", raw=response[:500])
    drafts = []
    for index, entry in enumerate(value):
        if not isinstance(entry, dict):
            raise ScideaError("UNPARSEABLE_RESPONSE", f"idea entry {index} is not an object", index=index)
        lowered = {str(k).strip().lower(): v for k, v in entry.items()}
        for key in ("idea", "description"):
            if key not in lowered or not str(lowered[key]).strip():
                raise ScideaError("MISSING_KEY", f"idea entry {index} lacks key {key!r}", index=index, key=key)
        drafts.append(IdeaDraft(title=str(lowered["idea"]).strip(), description=str(lowered["description"]).strip()))
    return drafts


_RUBRIC_KEYS = ("novelty", "excitement", "feasibility", "effectiveness")


def parse_rubric(response: str) -> list[RubricScore]:
    """Parse judge scores; keys are case-insensitive ('Overall Score' maps to
    overall). A reported overall deviating from the criterion mean by more
    than OVERALL_CORRECTION_TOLERANCE is recomputed and flagged corrected."""
    if not response.strip():
        raise ScideaError("UNPARSEABLE_RESPONSE", "empty rubric response")
    value = _extract_json_value(response)
    if isinstance(value, dict):
        value = [value]
    if not isinstance(value, list):
        raise ScideaError("UNPARSEABLE_RESPONSE", "rubric response is not an object or array", raw=response[:500])
    scores = []
    for index, entry in enumerate(value):
        if not isinstance(entry, dict):
            raise ScideaError("UNPARSEABLE_RESPONSE", f"rubric entry {index} is not an object", index=index)
        lowered: dict[str, Any] = {}
        for key, item in entry.items():
            norm = str(key).strip().lower()
            if norm in ("overall score", "overall_score"):
                norm = "overall"
            lowered[norm] = item
        criteria: dict[str, float] = {}
        for key in _RUBRIC_KEYS:
            if key not in lowered:
                raise ScideaError("MISSING_KEY", f"rubric entry {index} lacks key {key!r}", index=index, key=key)
            try:
                criteria[key] = float(lowered[key])
            except (TypeError, ValueError):
                raise ScideaError(
                    "UNPARSEABLE_RESPONSE", f"rubric entry {index} key {key!r} is not numeric", index=index, key=key
                )
            if not 1.0 <= criteria[key] <= 10.0:
                raise ScideaError(
                    "OUT_OF_RANGE",
                    f"rubric entry {index} key {key!r} outside [1, 10]: {criteria[key]}",
                    index=index,
                    key=key,
                )
        mean = overall_score(**criteria)
        corrected = True
        if "overall" in lowered:
            try:
                reported = float(lowered["overall"])
            except (TypeError, ValueError):
                reported = float("nan")
            corrected = not abs(reported - mean) <= OVERALL_CORRECTION_TOLERANCE
        scores.append(RubricScore(overall=mean, corrected=corrected, **criteria))
    return scores


_IDEA_SPAN = re.compile(r"<idea>(.*?)</idea>", re.DOTALL | re.IGNORECASE)
_ANSWER_SPAN = re.compile(r"<answer>(.*?)</answer>", re.DOTALL | re.IGNORECASE)


def parse_tagged_idea(response: str) -> str:
    """Content of the first <idea> span, else the last <answer> span."""
    if not response.strip():
        raise ScideaError("NO_IDEA_SPAN", "empty deep-dive response")
    match = _IDEA_SPAN.search(response)
    if match and match.group(1).strip():
        return match.group(1).strip()
    answers = [m.strip() for m in _ANSWER_SPAN.findall(response) if m.strip()]
    if answers:
        return answers[-1]
    raise ScideaError("NO_IDEA_SPAN", "response contains neither <idea> nor <answer> spans")


_ANSWER_LABEL = re.compile(r"[\"']?answer[\"']?\s*:\s*", re.IGNORECASE)


def parse_gap_answer(response: str) -> str:
    """Extract the Answer text from a gap response (JSON or labeled prose)."""
    if not response.strip():
        raise ScideaError("UNPARSEABLE_RESPONSE", "empty gap response")
    try:
        value = _extract_json_value(response)
    except ScideaError:
        value = None
    if isinstance(value, dict):
        for key, item in value.items():
            if str(key).strip().lower() == "answer" and str(item).strip():
                return str(item).strip()
    match = _ANSWER_LABEL.search(response)
    if match:
        remainder = response[match.end():].strip()
        remainder = remainder.strip("`").rstrip("}").strip().strip('"').strip()
        if remainder:
            return remainder
    raise ScideaError("UNPARSEABLE_RESPONSE", "no Answer found in gap response", raw=response[:500])


_LIST_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


def parse_keyphrases(response: str) -> list[str]:
    """Comma-, semicolon-, or newline-separated keyphrases, case-insensitively
    deduplicated with order preserved."""
    if not response.strip():
        raise ScideaError("UNPARSEABLE_RESPONSE", "empty keyphrase response", raw=response)
    seen: set[str] = set()
    phrases: list[str] = []
    for chunk in re.split(r"[,;\n]", _strip_fences(response)):
        phrase = _LIST_BULLET.sub("", chunk).strip().strip('"').strip()
        if not phrase:
            continue
        key = phrase.lower()
        if key in seen:
            continue
        seen.add(key)
        phrases.append(phrase)
    if not phrases:
        raise ScideaError("UNPARSEABLE_RESPONSE", "no keyphrases found in response", raw=response[:500])
    return phrases
