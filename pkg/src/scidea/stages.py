"""LLM-backed pipeline stages with the fixed temperature/seed protocol.

Each stage issues its chat requests at a pinned temperature and seed 1:
facet extraction 0.0, gap identification 0.7, idea generation 0.75, ranking
0.3. Deep dives reuse the ideation temperature and single-idea evaluation
reuses the ranking temperature; keyphrase extraction runs deterministic at
0.0. Every request is journaled with its stage tag so the protocol can be
audited after a run.
"""

from __future__ import annotations

import json
from typing import Optional, Sequence

from .domain import (
    FacetSet,
    IdeaCandidate,
    PromptStrategy,
    Provenance,
    Publication,
    RubricScore,
    StrategyKind,
    ZS,
)
from .errors import ScideaError
from .gateway import ChatRequest, Gateway
from .prompts import (
    PromptBinding,
    PromptStage,
    format_focus_points,
    has_template,
    parse_facets,
    parse_gap_answer,
    parse_ideas,
    parse_rubric,
    render_paper_block,
    render_prompt,
)

SEED = 1

STAGE_TEMPERATURE = {
    "FACET": 0.0,
    "GAP": 0.7,
    "IDEATE": 0.75,
    "RANK": 0.3,
    "AHA_DIVE": 0.75,
    "EVALUATE": 0.3,
    "KEYPHRASE": 0.0,
}

# Soft bounds on the gap summary ("approximately 200 words").
GAP_WORDS_MIN = 100
GAP_WORDS_MAX = 300

# Filler for analogous-paper slots when no related publication is available;
# slot values must be non-empty.
_NOT_AVAILABLE = "Not available."


def stage_temperature(stage: str) -> float:
    return STAGE_TEMPERATURE[stage]


def _chat(gateway: Gateway, prompt: str, stage: str, model_id: str) -> str:
    request = ChatRequest.user(prompt, temperature=stage_temperature(stage), seed=SEED, model_id=model_id)
    return gateway.complete_chat(request, stage=stage)


def extract_facets(
    publication: Publication,
    strategy: PromptStrategy,
    gateway: Gateway,
    model_id: str,
) -> FacetSet:
    """Extract the four facets of one publication at temperature 0."""
    text = f"{publication.title}\n\n{publication.full_text}".strip()
    if not text:
        raise ScideaError("EMPTY_INPUT", "publication has no title or text", publication_id=publication.id)
    prompt = render_prompt(PromptBinding(PromptStage.FACET, strategy, {"paper": text}))
    try:
        response = _chat(gateway, prompt, "FACET", model_id)
        return parse_facets(response, publication_id=publication.id)
    except ScideaError as exc:
        details = {**exc.details, "publication_id": publication.id}
        raise ScideaError(exc.code, exc.message, **details) from exc


def identify_gap(
    author_facets: Sequence[FacetSet],
    related_facets: Sequence[FacetSet],
    strategy: PromptStrategy,
    gateway: Gateway,
    model_id: str,
    titles: Optional[dict[str, str]] = None,
) -> tuple[str, list[str]]:
    """Summarize prior work and name the research gap at temperature 0.7.

    Facet sets are rendered as per-paper blocks, author papers first then
    related, in the given order. ``titles`` maps publication ids to display
    titles (the id itself is shown when absent). Returns (gap text, warnings);
    answers outside the soft 100-300 word band add a LENGTH_WARNING.
    """
    facet_sets = list(author_facets) + list(related_facets)
    if not facet_sets:
        raise ScideaError("EMPTY_FACETS", "gap identification needs at least one facet set")
    titles = titles or {}
    blocks = []
    for index, facets in enumerate(facet_sets, start=1):
        pid = facets.publication_id or str(index)
        blocks.append(render_paper_block(pid, titles.get(facets.publication_id, pid), facets))
    # The gap stage has no chain-of-thought variant; ZSCoT runs fall back to
    # the zero-shot wording.
    gap_strategy = strategy if has_template(PromptStage.GAP, strategy) else ZS
    prompt = render_prompt(PromptBinding(PromptStage.GAP, gap_strategy, {"paper_summaries": "\n\n".join(blocks)}))
    response = _chat(gateway, prompt, "GAP", model_id)
    answer = parse_gap_answer(response)
    warnings = []
    words = len(answer.split())
    if not GAP_WORDS_MIN <= words <= GAP_WORDS_MAX:
        warnings.append(f"LENGTH_WARNING: gap summary has {words} words, expected {GAP_WORDS_MIN}-{GAP_WORDS_MAX}")
    return answer, warnings


def _facet_slots(prefix_title: str, prefix: str, facets: Optional[FacetSet], title: str) -> dict[str, str]:
    if facets is None:
        return {
            prefix_title: title or _NOT_AVAILABLE,
            f"{prefix}_Purpose": _NOT_AVAILABLE,
            f"{prefix}_Mechanism": _NOT_AVAILABLE,
            f"{prefix}_Evaluation": _NOT_AVAILABLE,
            f"{prefix}_Future_Work": _NOT_AVAILABLE,
        }
    return {
        prefix_title: title or facets.publication_id or _NOT_AVAILABLE,
        f"{prefix}_Purpose": facets.purpose,
        f"{prefix}_Mechanism": facets.mechanism,
        f"{prefix}_Evaluation": facets.evaluation,
        f"{prefix}_Future_Work": facets.future_work,
    }


def ideation_slots(
    gap: str,
    author_facets: FacetSet,
    analogous_facets: Optional[FacetSet],
    author_title: str = "",
    analogous_title: str = "",
    focus_points: Sequence[str] = (),
) -> dict[str, str]:
    """Slot map shared by idea generation and its tests."""
    slots = {"novel_work_summary_from_author_paper": gap}
    slots.update(_facet_slots("author_paper_title", "author_facet", author_facets, author_title))
    # The canonical slot name for the author future-work facet carries a
    # plural prefix; mirror it exactly.
    slots["author_facets_Future_Work"] = slots.pop("author_facet_Future_Work")
    slots.update(_facet_slots("analogous_paper_title", "analogous_facets", analogous_facets, analogous_title))
    if focus_points:
        slots["researcher_focus_points"] = format_focus_points(focus_points)
    return slots


def generate_ideas(
    gap: str,
    author_facets: FacetSet,
    analogous_facets: Optional[FacetSet],
    strategy: PromptStrategy,
    gateway: Gateway,
    model_id: str,
    *,
    iteration: int = 0,
    id_start: int = 0,
    author_title: str = "",
    analogous_title: str = "",
    focus_points: Sequence[str] = (),
    max_ideas: Optional[int] = None,
) -> tuple[list[IdeaCandidate], list[str]]:
    """Generate candidates from the gap at temperature 0.75.

    Candidates receive session-scoped monotone ids starting at ``id_start``
    and provenance GENERATED. Researcher focus points (feedback entries) are
    appended to the prompt when present. Returns (candidates, warnings)."""
    if not gap.strip():
        raise ScideaError("EMPTY_GAP", "idea generation requires a non-empty gap")
    slots = ideation_slots(gap, author_facets, analogous_facets, author_title, analogous_title, focus_points)
    prompt = render_prompt(PromptBinding(PromptStage.IDEATE, strategy, slots))
    response = _chat(gateway, prompt, "IDEATE", model_id)
    drafts = parse_ideas(response)
    if max_ideas is not None:
        drafts = drafts[:max_ideas]
    warnings = []
    if not drafts:
        warnings.append("NO_IDEAS: the model returned an empty idea list")
    candidates = [
        IdeaCandidate(
            id=id_start + offset,
            title=draft.title,
            description=draft.description,
            iteration=iteration,
            provenance=Provenance.GENERATED,
        )
        for offset, draft in enumerate(drafts)
    ]
    return candidates, warnings


def format_ideas_for_ranking(candidates: Sequence[IdeaCandidate]) -> str:
    payload = [{"idea": c.title, "description": c.description} for c in candidates]
    return json.dumps(payload, indent=2, ensure_ascii=False)


def rank_ideas(
    candidates: Sequence[IdeaCandidate],
    strategy: PromptStrategy,
    gateway: Gateway,
    model_id: str,
) -> list[tuple[IdeaCandidate, RubricScore]]:
    """Judge all candidates in one call at temperature 0.3.

    The response must contain exactly one rubric object per candidate, in
    candidate order. Output is sorted by overall descending, ties broken by
    candidate id ascending, and is always a permutation of the input."""
    if not candidates:
        raise ScideaError("EMPTY_INPUT", "ranking requires at least one candidate")
    slots = {"generated_ideas": format_ideas_for_ranking(candidates)}
    prompt = render_prompt(PromptBinding(PromptStage.RANK, strategy, slots))
    response = _chat(gateway, prompt, "RANK", model_id)
    scores = parse_rubric(response)
    if len(scores) != len(candidates):
        raise ScideaError(
            "SCORE_COUNT_MISMATCH",
            f"expected {len(candidates)} rubric scores, got {len(scores)}",
            expected=len(candidates),
            got=len(scores),
        )
    paired = list(zip(candidates, scores))
    paired.sort(key=lambda pair: (-pair[1].overall, pair[0].id))
    return paired


def evaluate_idea(
    candidate: IdeaCandidate,
    gateway: Gateway,
    model_id: str,
) -> RubricScore:
    """Score a single idea with the standalone evaluation rubric (batch path)."""
    slots = {"idea": f"{candidate.title}: {candidate.description}"}
    prompt = render_prompt(PromptBinding(PromptStage.EVALUATE, ZS, slots))
    response = _chat(gateway, prompt, "EVALUATE", model_id)
    scores = parse_rubric(response)
    if not scores:
        raise ScideaError("UNPARSEABLE_RESPONSE", "evaluation returned no rubric scores")
    return scores[0]


def strategy_requires_analogous(strategy: PromptStrategy) -> bool:
    """The five-shot ideation template binds only the designated paper."""
    return not (strategy.kind is StrategyKind.FS and strategy.shots == 5)
