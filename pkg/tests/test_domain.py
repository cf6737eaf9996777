import pytest

from scidea.domain import (
    AhaScore,
    AhaThresholds,
    EmbeddingStrategy,
    IdeaCandidate,
    Provenance,
    PromptStrategy,
    Publication,
    ResearcherProfile,
    RubricScore,
    Session,
    SessionStatus,
    Source,
    Origin,
    StrategyKind,
    is_legal_transition,
    overall_score,
    validate_thresholds,
)
from scidea.errors import ScideaError


def make_profile(**overrides):
    defaults = dict(name="Pat", orcid="0000-0002-1825-0097", query="How to do X?")
    defaults.update(overrides)
    return ResearcherProfile(**defaults)


class TestThresholds:
    def test_worked_values_accepted(self):
        thresholds = validate_thresholds(0.7, 2.0)
        assert thresholds.theta_n == 0.7
        assert thresholds.theta_s == 2.0

    def test_negative_theta_n_rejected(self):
        with pytest.raises(ScideaError) as err:
            validate_thresholds(-0.1, 1.0)
        assert err.value.code == "OUT_OF_RANGE"
        assert err.value.details["field"] == "theta_n"

    def test_negative_theta_s_rejected(self):
        with pytest.raises(ScideaError) as err:
            validate_thresholds(0.5, -2.0)
        assert err.value.code == "OUT_OF_RANGE"
        assert err.value.details["field"] == "theta_s"

    def test_theta_n_upper_bound(self):
        assert validate_thresholds(2.0, 0.0).theta_n == 2.0
        with pytest.raises(ScideaError):
            validate_thresholds(2.1, 0.0)


class TestOverallScore:
    def test_worked_examples(self):
        assert overall_score(9, 8, 5, 7) == pytest.approx(7.25, abs=1e-9)
        assert overall_score(7, 9, 4, 5) == pytest.approx(6.25, abs=1e-9)

    def test_identical_inputs(self):
        assert overall_score(10, 10, 10, 10) == 10.0

    def test_out_of_range_input(self):
        with pytest.raises(ScideaError) as err:
            overall_score(0.5, 8, 5, 7)
        assert err.value.code == "OUT_OF_RANGE"
        assert err.value.details["field"] == "novelty"


class TestRubricScore:
    def test_mean_invariant_enforced(self):
        with pytest.raises(ScideaError):
            RubricScore(novelty=9, excitement=8, feasibility=5, effectiveness=7, overall=9.9)

    def test_corrected_flag_excluded_from_equality(self):
        a = RubricScore(9, 8, 5, 7, 7.25, corrected=False)
        b = RubricScore(9, 8, 5, 7, 7.25, corrected=True)
        assert a == b


class TestPromptStrategy:
    def test_shots_only_for_few_shot(self):
        with pytest.raises(ScideaError):
            PromptStrategy(StrategyKind.ZS, shots=3)
        with pytest.raises(ScideaError):
            PromptStrategy(StrategyKind.FS, shots=4)
        assert PromptStrategy(StrategyKind.FS, shots=5).label == "5FS"

    def test_parse_labels(self):
        assert PromptStrategy.parse("zs").kind is StrategyKind.ZS
        assert PromptStrategy.parse("ZSCoT").label == "ZSCoT"
        assert PromptStrategy.parse("fs2").shots == 2
        assert PromptStrategy.parse("3FS").shots == 3
        with pytest.raises(ScideaError):
            PromptStrategy.parse("fs4")


class TestProfile:
    def test_orcid_pattern(self):
        make_profile()  # valid
        make_profile(orcid="0000-0002-1825-009X")
        with pytest.raises(ScideaError) as err:
            make_profile(orcid="1234")
        assert err.value.code == "MALFORMED_ID"

    def test_blank_query_rejected(self):
        with pytest.raises(ScideaError) as err:
            make_profile(query="   ")
        assert err.value.code == "EMPTY_QUERY"


class TestAhaScore:
    def test_unscored_candidates_carry_nothing(self):
        score = AhaScore.unscored()
        assert score.novelty is None and score.surprise is None and not score.is_aha

    def test_none_strategy_with_values_rejected(self):
        with pytest.raises(ScideaError):
            AhaScore(novelty=0.5, surprise=1.0, is_aha=False, embedding_strategy=EmbeddingStrategy.NONE)

    def test_novelty_range(self):
        with pytest.raises(ScideaError):
            AhaScore(novelty=2.5, surprise=1.0, is_aha=False, embedding_strategy=EmbeddingStrategy.TOKEN_LEVEL)


class TestCandidates:
    def test_non_empty_title_and_description(self):
        with pytest.raises(ScideaError):
            IdeaCandidate(id=0, title=" ", description="d", iteration=0, provenance=Provenance.GENERATED)
        with pytest.raises(ScideaError):
            IdeaCandidate(id=0, title="t", description="", iteration=0, provenance=Provenance.GENERATED)

    def test_publication_title_required(self):
        with pytest.raises(ScideaError):
            Publication(id="x", title="  ", full_text="", source=Source.CORE, origin=Origin.AUTHOR)


class TestSession:
    def test_selected_must_be_retrieved(self):
        pub = Publication(id="p1", title="T", full_text="", source=Source.CORE, origin=Origin.AUTHOR)
        Session(id="s", profile=make_profile(), author_publications=(pub,), selected_publication_ids=("p1",))
        with pytest.raises(ScideaError) as err:
            Session(id="s", profile=make_profile(), author_publications=(pub,), selected_publication_ids=("p2",))
        assert err.value.code == "NOT_FOUND"

    def test_forward_only_transitions(self):
        assert is_legal_transition(SessionStatus.CREATED, SessionStatus.RETRIEVED)
        assert not is_legal_transition(SessionStatus.RANKED, SessionStatus.GAPPED)
        assert not is_legal_transition(SessionStatus.RETRIEVED, SessionStatus.CREATED)

    def test_ideating_may_repeat(self):
        assert is_legal_transition(SessionStatus.IDEATING, SessionStatus.IDEATING)
        assert is_legal_transition(SessionStatus.RANKED, SessionStatus.IDEATING)

    def test_closed_is_terminal(self):
        for target in SessionStatus:
            assert not is_legal_transition(SessionStatus.CLOSED, target)

    def test_with_status_raises_on_illegal(self):
        session = Session(id="s", profile=make_profile())
        with pytest.raises(ScideaError) as err:
            session.with_status(SessionStatus.CREATED)
        assert err.value.code == "ILLEGAL_TRANSITION"

    def test_roundtrip_serialization(self):
        pub = Publication(id="p1", title="T", full_text="body", source=Source.ARXIV, origin=Origin.RELATED)
        session = Session(
            id="s",
            profile=make_profile(),
            related_publications=(pub,),
            thresholds=AhaThresholds(0.7, 2.0),
            status=SessionStatus.RETRIEVED,
        )
        assert Session.from_dict(session.to_dict()) == session
