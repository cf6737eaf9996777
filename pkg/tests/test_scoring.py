"""Scoring math against independent brute-force oracles."""

import math
import random

import pytest

from scidea.domain import AhaThresholds
from scidea.errors import ScideaError
from scidea.gateway import ScoredContinuation
from scidea.scoring import cosine_similarity, detect_aha, novelty_score, surprise_score, surprise_sum


# -- oracles: pure-Python loops, no shared code with the implementation ------

def oracle_cosine(a, b):
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    return dot / (math.sqrt(na) * math.sqrt(nb))


def oracle_novelty(candidate, priors):
    if not priors:
        return 1.0
    best = max(oracle_cosine(candidate, prior) for prior in priors)
    return 1.0 - best


def oracle_surprise(logprobs):
    total = 0.0
    for lp in logprobs:
        total += lp
    return -total / len(logprobs)


def random_vector(rng, dim):
    while True:
        vec = [rng.uniform(-1, 1) for _ in range(dim)]
        if any(abs(x) > 1e-6 for x in vec):
            return vec


class TestCosine:
    def test_identity(self):
        assert cosine_similarity([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_forty_five_degrees(self):
        assert cosine_similarity([1, 0], [1, 1]) == pytest.approx(oracle_cosine([1, 0], [1, 1]), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ScideaError) as err:
            cosine_similarity([1, 0], [1, 0, 0])
        assert err.value.code == "DIMENSION_MISMATCH"

    def test_zero_vector(self):
        with pytest.raises(ScideaError) as err:
            cosine_similarity([0, 0], [1, 0])
        assert err.value.code == "ZERO_VECTOR"

    def test_oracle_agreement(self):
        rng = random.Random(7)
        for _ in range(300):
            dim = rng.randint(2, 16)
            a = random_vector(rng, dim)
            b = random_vector(rng, dim)
            assert cosine_similarity(a, b) == pytest.approx(oracle_cosine(a, b), abs=1e-9)
            assert -1.0 - 1e-9 <= cosine_similarity(a, b) <= 1.0 + 1e-9


class TestNovelty:
    def test_candidate_equal_to_prior(self):
        assert novelty_score([1, 2, 3], [[1, 2, 3]]) == pytest.approx(0.0, abs=1e-12)

    def test_empty_priors_convention(self):
        assert novelty_score([1, 2], []) == 1.0

    def test_max_over_priors(self):
        # priors at cosines 0.5 and ~0.2 from the candidate: novelty = 1 - 0.5
        candidate = [1.0, 0.0]
        priors = [[1.0, math.sqrt(3)], [0.2, 1.0]]
        assert novelty_score(candidate, priors) == pytest.approx(0.5, abs=1e-9)

    def test_scale_invariance(self):
        rng = random.Random(11)
        for _ in range(100):
            dim = rng.randint(2, 8)
            candidate = random_vector(rng, dim)
            priors = [random_vector(rng, dim) for _ in range(3)]
            k = rng.uniform(0.01, 100)
            scaled = [k * x for x in candidate]
            assert novelty_score(scaled, priors) == pytest.approx(novelty_score(candidate, priors), abs=1e-9)

    def test_monotone_in_priors(self):
        # Holds for non-empty prior sets; the empty-set value is a fixed
        # convention (1.0) that an anti-correlated first prior may exceed.
        rng = random.Random(13)
        for _ in range(100):
            dim = rng.randint(2, 8)
            candidate = random_vector(rng, dim)
            priors = [random_vector(rng, dim) for _ in range(4)]
            for k in range(2, len(priors) + 1):
                assert novelty_score(candidate, priors[:k]) <= novelty_score(candidate, priors[: k - 1]) + 1e-12

    def test_oracle_agreement(self):
        rng = random.Random(17)
        for _ in range(300):
            dim = rng.randint(2, 12)
            candidate = random_vector(rng, dim)
            priors = [random_vector(rng, dim) for _ in range(rng.randint(1, 6))]
            got = novelty_score(candidate, priors)
            assert got == pytest.approx(oracle_novelty(candidate, priors), abs=1e-9)
            assert -1e-9 <= got <= 2.0 + 1e-9


class TestSurprise:
    def test_certainty_is_zero(self):
        scored = ScoredContinuation(tokens=("a", "b", "c"), logprobs=(0.0, 0.0, 0.0))
        assert surprise_score(scored) == 0.0

    def test_single_token(self):
        scored = ScoredContinuation(tokens=("a",), logprobs=(-3.5,))
        assert surprise_score(scored) == pytest.approx(3.5, abs=1e-12)

    def test_mean_normalization(self):
        scored = ScoredContinuation(tokens=("a", "b", "c"), logprobs=(-1.0, -2.0, -3.0))
        assert surprise_score(scored) == pytest.approx(2.0, abs=1e-12)
        assert surprise_sum(scored) == pytest.approx(6.0, abs=1e-12)

    def test_empty_continuation(self):
        scored = ScoredContinuation(tokens=(), logprobs=())
        with pytest.raises(ScideaError) as err:
            surprise_score(scored)
        assert err.value.code == "EMPTY_CONTINUATION"

    def test_oracle_agreement(self):
        rng = random.Random(19)
        for _ in range(300):
            n = rng.randint(1, 40)
            logprobs = tuple(-rng.uniform(0, 8) for _ in range(n))
            scored = ScoredContinuation(tokens=tuple(f"t{i}" for i in range(n)), logprobs=logprobs)
            got = surprise_score(scored)
            assert got == pytest.approx(oracle_surprise(logprobs), abs=1e-9)
            assert got >= -1e-9


class TestDetectAha:
    def test_worked_values(self):
        thresholds = AhaThresholds(0.7, 2.0)
        assert detect_aha(0.8, 3.5, thresholds) is True

    def test_boundary_is_not_aha(self):
        thresholds = AhaThresholds(0.7, 2.0)
        assert detect_aha(0.7, 2.0, thresholds) is False

    def test_single_conjunct_fails(self):
        thresholds = AhaThresholds(0.7, 2.0)
        assert detect_aha(0.9, 1.9, thresholds) is False
        assert detect_aha(0.6, 3.5, thresholds) is False

    def test_monotone_in_scores(self):
        thresholds = AhaThresholds(0.7, 2.0)
        rng = random.Random(23)
        for _ in range(200):
            novelty = rng.uniform(0, 2)
            surprise = rng.uniform(0, 8)
            if detect_aha(novelty, surprise, thresholds):
                assert detect_aha(novelty + 0.01, surprise + 0.01, thresholds)
            else:
                assert not detect_aha(max(novelty - 0.01, 0.0), max(surprise - 0.01, 0.0), thresholds)

    def test_non_finite_rejected(self):
        with pytest.raises(ScideaError):
            detect_aha(float("nan"), 1.0, AhaThresholds(0.7, 2.0))
