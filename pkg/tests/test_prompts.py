import hashlib

import pytest

from scidea.domain import FS2, FS3, FS5, FacetSet, ZS, ZSCOT
from scidea.errors import ScideaError
from scidea.prompts import (
    PromptBinding,
    PromptStage,
    format_focus_points,
    has_template,
    load_manifest,
    parse_facets,
    parse_gap_answer,
    parse_ideas,
    parse_keyphrases,
    parse_rubric,
    parse_tagged_idea,
    render_paper_block,
    render_prompt,
    required_slots,
    template_name_for,
    verify_templates,
)

from golden_corpus import FACET_CASES, IDEA_CASES, IDEA_SPAN_CASES, RUBRIC_CASES

IDEATE_SLOTS = {
    "author_paper_title": "Designated T",
    "author_facet_Purpose": "p",
    "author_facet_Mechanism": "m",
    "author_facet_Evaluation": "e",
    "author_facets_Future_Work": "f",
    "novel_work_summary_from_author_paper": "the gap",
    "analogous_paper_title": "Analogous T",
    "analogous_facets_Purpose": "ap",
    "analogous_facets_Mechanism": "am",
    "analogous_facets_Evaluation": "ae",
    "analogous_facets_Future_Work": "af",
}


class TestTemplateIntegrity:
    def test_manifest_hashes_match(self):
        verify_templates()

    def test_every_template_is_manifested(self):
        manifest = load_manifest()
        assert len(manifest["templates"]) == 24
        for entry in manifest["templates"].values():
            assert entry["provenance"] in ("verbatim", "derived", "reconstructed", "local")

    def test_rendering_is_byte_stable(self):
        binding = PromptBinding(PromptStage.FACET, ZS, {"paper": "Some paper."})
        assert render_prompt(binding) == render_prompt(binding)

    def test_manifest_hash_detects_content(self):
        manifest = load_manifest()
        entry = manifest["templates"]["facet_zs"]
        from importlib import resources

        text = resources.files("scidea.prompts").joinpath("templates", entry["file"]).read_text(encoding="utf-8")
        assert hashlib.sha256(text.encode()).hexdigest() == entry["sha256"]


class TestRenderPrompt:
    def test_facet_zs_contains_format_block(self):
        out = render_prompt(PromptBinding(PromptStage.FACET, ZS, {"paper": "Body text."}))
        assert "Purpose: <subject> <predicate> <object>" in out
        assert "Body text." in out

    def test_ideate_fs3_has_three_worked_examples(self):
        out = render_prompt(PromptBinding(PromptStage.IDEATE, FS3, IDEATE_SLOTS))
        for marker in ("Example 1: Medicine", "Example 2: Renewable Energy", "Example 3: Cybersecurity"):
            assert marker in out
        assert "Explainable AI for Wearable Cardiovascular" in out

    def test_facet_shots_match_declared_count(self):
        for strategy, count in ((FS2, 2), (FS3, 3), (FS5, 5)):
            out = render_prompt(PromptBinding(PromptStage.FACET, strategy, {"paper": "X"}))
            assert out.count("Example ") == count

    def test_facet_zscot_has_step_scaffold(self):
        out = render_prompt(PromptBinding(PromptStage.FACET, ZSCOT, {"paper": "X"}))
        assert "Let's think step by step" in out

    def test_gap_zscot_has_no_template(self):
        assert not has_template(PromptStage.GAP, ZSCOT)
        with pytest.raises(ScideaError) as err:
            render_prompt(PromptBinding(PromptStage.GAP, ZSCOT, {"paper_summaries": "x"}))
        assert err.value.code == "UNKNOWN_TEMPLATE"

    def test_missing_slot(self):
        with pytest.raises(ScideaError) as err:
            render_prompt(PromptBinding(PromptStage.FACET, ZS, {}))
        assert err.value.code == "MISSING_SLOT"
        assert err.value.details["slot"] == "paper"

    def test_ideate_fs5_binds_designated_paper_only(self):
        slots = required_slots(PromptStage.IDEATE, FS5)
        assert "author_paper_title" in slots
        assert not any(slot.startswith("analogous") for slot in slots)

    def test_focus_points_appended_verbatim(self):
        entries = ["incorporate Group Relative Policy Optimization (GRPO)", "prefer low-cost hardware"]
        slots = dict(IDEATE_SLOTS, researcher_focus_points=format_focus_points(entries))
        out = render_prompt(PromptBinding(PromptStage.IDEATE, ZS, slots))
        assert "Researcher focus points:" in out
        for entry in entries:
            assert entry in out

    def test_focus_points_absent_without_feedback(self):
        out = render_prompt(PromptBinding(PromptStage.IDEATE, ZS, IDEATE_SLOTS))
        assert "Researcher focus points:" not in out

    def test_aha_dive_template_anchors(self):
        out = render_prompt(PromptBinding(PromptStage.AHA_DIVE, ZS, {"idea": "I", "context": "C"}))
        assert "An Aha moment has been detected!" in out
        assert "Deep Dive into a Breakthrough Idea" in out
        assert "<idea>" in out

    def test_single_variant_stages_ignore_strategy(self):
        assert template_name_for(PromptStage.EVALUATE, ZS) == template_name_for(PromptStage.EVALUATE, FS5)

    def test_paper_block_rendering(self):
        facets = FacetSet(purpose="p", mechanism="m", evaluation="e", future_work="f", publication_id="p1")
        block = render_paper_block("p1", "Title Here", facets)
        assert "Paper p1:" in block
        assert "Title: Title Here" in block
        assert "Future Work: f" in block


class TestParseFacets:
    @pytest.mark.parametrize("block,expected", FACET_CASES)
    def test_golden_blocks(self, block, expected):
        facets = parse_facets(block)
        assert facets.purpose == expected["purpose"]
        assert facets.mechanism == expected["mechanism"]
        assert facets.evaluation == expected["evaluation"]
        assert facets.future_work == expected["future_work"]

    def test_fenced_block_parses_identically(self):
        block, _ = FACET_CASES[0]
        assert parse_facets(f"```\n{block}\n```") == parse_facets(block)

    def test_missing_facets_all_listed(self):
        with pytest.raises(ScideaError) as err:
            parse_facets("Purpose: a\nMechanism: b")
        assert err.value.code == "MISSING_FACET"
        assert err.value.details["missing"] == ["Evaluation", "Future Work"]

    def test_reordered_labels(self):
        block = "Future Work: f\nEvaluation: e\nMechanism: m\nPurpose: p"
        facets = parse_facets(block)
        assert (facets.purpose, facets.future_work) == ("p", "f")

    def test_body_synonyms_accepted(self):
        block = "Objectives: improve energy efficiency\nMethodology: pruning\nEvaluation: benchmarks\nFuture Work: co-design"
        facets = parse_facets(block)
        assert facets.purpose == "improve energy efficiency"
        assert facets.mechanism == "pruning"


class TestParseIdeas:
    @pytest.mark.parametrize("response,expected", IDEA_CASES)
    def test_golden_blocks(self, response, expected):
        drafts = parse_ideas(response)
        assert [(d.title, d.description) for d in drafts] == expected

    def test_single_object_accepted(self):
        assert len(parse_ideas('{"idea": "A", "description": "B"}')) == 1

    def test_empty_list(self):
        assert parse_ideas("[]") == []

    def test_missing_description(self):
        with pytest.raises(ScideaError) as err:
            parse_ideas('[{"idea": "A"}]')
        assert err.value.code == "MISSING_KEY"
        assert err.value.details == {"index": 0, "key": "description"}

    def test_json_embedded_in_prose(self):
        response = 'Here are my ideas:\n```json\n[{"idea": "A", "description": "B"}]\n```\nHope that helps!'
        assert parse_ideas(response)[0].title == "A"


class TestParseRubric:
    @pytest.mark.parametrize("response,expected", RUBRIC_CASES)
    def test_golden_blocks(self, response, expected):
        scores = parse_rubric(response)
        assert len(scores) == len(expected)
        for score, (n, e, f, eff, overall) in zip(scores, expected):
            assert (score.novelty, score.excitement, score.feasibility, score.effectiveness) == (n, e, f, eff)
            assert score.overall == pytest.approx(overall, abs=1e-9)
            assert score.corrected is False

    def test_deviant_overall_recomputed(self):
        scores = parse_rubric('[{"novelty":9,"excitement":8,"feasibility":5,"effectiveness":7,"overall":9.9}]')
        assert scores[0].overall == pytest.approx(7.25, abs=1e-9)
        assert scores[0].corrected is True

    def test_out_of_range_value(self):
        with pytest.raises(ScideaError) as err:
            parse_rubric('[{"novelty":11,"excitement":8,"feasibility":5,"effectiveness":7,"overall":7.75}]')
        assert err.value.code == "OUT_OF_RANGE"
        assert err.value.details == {"index": 0, "key": "novelty"}

    def test_mean_invariant_always_holds(self):
        scores = parse_rubric('[{"novelty":9,"excitement":8,"feasibility":5,"effectiveness":7,"overall":7.251}]')
        mean = (9 + 8 + 5 + 7) / 4
        assert scores[0].overall == pytest.approx(mean, abs=1e-9)


class TestParseTaggedIdea:
    @pytest.mark.parametrize("response,expected", IDEA_SPAN_CASES)
    def test_golden_spans(self, response, expected):
        assert parse_tagged_idea(response) == expected

    def test_motivating_span(self):
        response = "...<idea>Use SNNs with GRPO for energy-efficient DRL</idea>..."
        assert parse_tagged_idea(response) == "Use SNNs with GRPO for energy-efficient DRL"

    def test_answer_fallback(self):
        assert parse_tagged_idea("<answer>fallback text</answer>") == "fallback text"

    def test_no_span(self):
        with pytest.raises(ScideaError) as err:
            parse_tagged_idea("no tags at all")
        assert err.value.code == "NO_IDEA_SPAN"


class TestParseGapAnswer:
    def test_json_form(self):
        assert parse_gap_answer('{"Answer": "Some gap."}') == "Some gap."

    def test_labeled_form(self):
        text = "Answer:\nQuantum computing has revolutionized cryptography by leveraging QKD."
        assert parse_gap_answer(text).startswith("Quantum computing has revolutionized cryptography")

    def test_unlabeled_rejected(self):
        with pytest.raises(ScideaError) as err:
            parse_gap_answer("just some prose without any labels")
        assert err.value.code == "UNPARSEABLE_RESPONSE"


class TestParseKeyphrases:
    def test_semicolon_separated(self):
        response = "sparsity; energy efficiency; AI optimization"
        assert parse_keyphrases(response) == ["sparsity", "energy efficiency", "AI optimization"]

    def test_case_insensitive_dedup(self):
        assert parse_keyphrases("X, x, X") == ["X"]

    def test_bulleted_list(self):
        assert parse_keyphrases("- alpha\n- beta") == ["alpha", "beta"]

    def test_empty_rejected(self):
        with pytest.raises(ScideaError):
            parse_keyphrases("   ")


class TestRenderParseCoherence:
    """Responses shaped exactly like each template's own format block parse."""

    def test_facet_format_block(self):
        response = "{\n    Purpose: a b c\n    Mechanism: d e f\n    Evaluation: g h i\n    Future Work: j k l\n}"
        assert parse_facets(response).purpose == "a b c"

    def test_ideate_format_block(self):
        assert parse_ideas('{\n    "idea": "T",\n    "description": "D"\n}')[0].title == "T"

    def test_rank_format_block(self):
        response = '[\n    {\n        "novelty": 5,\n        "excitement": 5,\n        "feasibility": 5,\n        "effectiveness": 5,\n        "overall": 5\n    }\n]'
        assert parse_rubric(response)[0].overall == 5.0

    def test_gap_format_block(self):
        assert parse_gap_answer('{\n    "Answer": "text"\n}') == "text"
