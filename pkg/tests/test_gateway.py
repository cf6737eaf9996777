import math

import numpy as np
import pytest

from scidea.domain import EmbeddingStrategy
from scidea.errors import ScideaError
from scidea.gateway import (
    MAX_EMBED_TOKENS,
    CallCache,
    ChatRequest,
    Gateway,
    HashedEncoder,
    ScoredContinuation,
    ScriptedProvider,
    StubEncoder,
    request_hash,
    split_sentences,
)


def make_request(prompt="hello", temperature=0.0, model_id="mock"):
    return ChatRequest.user(prompt, temperature=temperature, seed=1, model_id=model_id)


class TestChatRequest:
    def test_temperature_range(self):
        with pytest.raises(ScideaError):
            make_request(temperature=2.5)

    def test_messages_required(self):
        with pytest.raises(ScideaError):
            ChatRequest(messages=(), temperature=0.0, seed=1, model_id="m")

    def test_hash_is_stable(self):
        assert request_hash(make_request()) == request_hash(make_request())
        assert request_hash(make_request()) != request_hash(make_request(prompt="other"))


class TestScoredContinuation:
    def test_lengths_must_match(self):
        with pytest.raises(ScideaError):
            ScoredContinuation(tokens=("a", "b"), logprobs=(-1.0,))

    def test_positive_logprob_rejected(self):
        with pytest.raises(ScideaError):
            ScoredContinuation(tokens=("a",), logprobs=(0.1,))


class TestCompleteChat:
    def test_scripted_by_hash(self):
        request = make_request()
        provider = ScriptedProvider().script_hash(request_hash(request), "ok")
        gateway = Gateway()
        gateway.register_provider("mock", provider)
        assert gateway.complete_chat(request) == "ok"

    def test_unregistered_model(self):
        gateway = Gateway()
        with pytest.raises(ScideaError) as err:
            gateway.complete_chat(make_request(model_id="ghost"))
        assert err.value.code == "PROVIDER_ERROR"

    def test_cache_hit_counter(self):
        provider = ScriptedProvider().script_contains("hello", "ok")
        gateway = Gateway()
        gateway.register_provider("mock", provider)
        first = gateway.complete_chat(make_request())
        second = gateway.complete_chat(make_request())
        assert first == second == "ok"
        assert gateway.stats.upstream_calls == 1
        assert gateway.stats.cache_hits == 1
        assert provider.calls == 1

    def test_cache_only_raises_on_miss(self):
        gateway = Gateway(cache_only=True)
        gateway.register_provider("mock", ScriptedProvider().script_contains("hello", "ok"))
        with pytest.raises(ScideaError) as err:
            gateway.complete_chat(make_request())
        assert err.value.code == "CACHE_MISS"

    def test_cache_persists_to_disk(self, tmp_path):
        cache_path = tmp_path / "cache.json"
        gateway = Gateway(cache=CallCache(cache_path))
        gateway.register_provider("mock", ScriptedProvider().script_contains("hello", "ok"))
        gateway.complete_chat(make_request())

        replayer = Gateway(cache=CallCache(cache_path), cache_only=True)
        assert replayer.complete_chat(make_request()) == "ok"


class TestScoreContinuation:
    def test_certainty(self):
        gateway = Gateway()
        gateway.register_provider("mock", ScriptedProvider().score_default(0.0))
        scored = gateway.score_continuation("ctx", "a b c", "mock")
        assert scored.logprobs == (0.0, 0.0, 0.0)

    def test_half_probability_tokens(self):
        gateway = Gateway()
        gateway.register_provider("mock", ScriptedProvider().score_default(math.log(0.5)))
        scored = gateway.score_continuation("ctx", "w x y z", "mock")
        assert len(scored.tokens) == 4
        for lp in scored.logprobs:
            assert lp == pytest.approx(math.log(0.5), abs=1e-12)

    def test_empty_continuation_rejected(self):
        gateway = Gateway()
        gateway.register_provider("mock", ScriptedProvider().score_default(-1.0))
        with pytest.raises(ScideaError) as err:
            gateway.score_continuation("ctx", "   ", "mock")
        assert err.value.code == "EMPTY_CONTINUATION"

    def test_logprobs_unsupported(self):
        gateway = Gateway()
        gateway.register_provider("mock", ScriptedProvider(supports_logprobs=False))
        with pytest.raises(ScideaError) as err:
            gateway.score_continuation("ctx", "a b", "mock")
        assert err.value.code == "LOGPROBS_UNSUPPORTED"

    def test_sum_non_increasing_as_continuation_grows(self):
        gateway = Gateway()
        gateway.register_provider("mock", ScriptedProvider().score_default(-0.7))
        text = "alpha beta gamma delta"
        words = text.split()
        sums = []
        for k in range(1, len(words) + 1):
            scored = gateway.score_continuation("ctx", " ".join(words[:k]), "mock")
            sums.append(sum(scored.logprobs))
        assert all(later <= earlier for earlier, later in zip(sums, sums[1:]))


class TestEmbedding:
    def test_token_mean_pooling(self):
        gateway = Gateway()
        gateway.register_encoder(StubEncoder("stub", {"a": [1, 0], "b": [0, 1]}, dim=2))
        vec = gateway.embed_text("a b", EmbeddingStrategy.TOKEN_LEVEL, "stub")
        assert np.allclose(vec, [0.5, 0.5])

    def test_truncation_to_512_tokens(self):
        mapping = {f"t{i}": [float(i), 1.0] for i in range(600)}
        gateway = Gateway()
        gateway.register_encoder(StubEncoder("stub", mapping, dim=2))
        text = " ".join(f"t{i}" for i in range(600))
        vec = gateway.embed_text(text, EmbeddingStrategy.TOKEN_LEVEL, "stub")
        expected_first = sum(range(MAX_EMBED_TOKENS)) / MAX_EMBED_TOKENS
        assert vec[0] == expected_first
        assert vec[1] == 1.0

    def test_sentence_mean_pooling(self):
        gateway = Gateway()
        gateway.register_encoder(StubEncoder("stub", {"a.": [1, 0], "b.": [0, 1]}, dim=2))
        vec = gateway.embed_text("a. b.", EmbeddingStrategy.SENTENCE_LEVEL, "stub")
        assert np.allclose(vec, [0.5, 0.5])

    def test_none_strategy_rejected(self):
        gateway = Gateway()
        gateway.register_encoder(HashedEncoder())
        with pytest.raises(ScideaError):
            gateway.embed_text("text", EmbeddingStrategy.NONE, "hashed")

    def test_empty_text_rejected(self):
        gateway = Gateway()
        gateway.register_encoder(HashedEncoder())
        with pytest.raises(ScideaError) as err:
            gateway.embed_text("  ", EmbeddingStrategy.TOKEN_LEVEL, "hashed")
        assert err.value.code == "EMPTY_TEXT"

    def test_embedding_is_pure(self):
        gateway = Gateway()
        gateway.register_encoder(HashedEncoder())
        a = gateway.embed_text("sparse training", EmbeddingStrategy.TOKEN_LEVEL, "hashed")
        b = gateway.embed_text("sparse training", EmbeddingStrategy.TOKEN_LEVEL, "hashed")
        assert np.array_equal(a, b)

    def test_hashed_encoder_stable_across_instances(self):
        a = HashedEncoder().token_vectors(["sparsity"])[0]
        b = HashedEncoder().token_vectors(["sparsity"])[0]
        assert np.array_equal(a, b)


class TestSentenceSplitting:
    def test_boundaries(self):
        assert split_sentences("One. Two! Three? Four") == ["One.", "Two!", "Three?", "Four"]

    def test_single_sentence_fallback(self):
        assert split_sentences("no boundary here") == ["no boundary here"]


class TestDeterministicTranscript:
    def test_fixed_script_fixed_requests(self, tmp_path):
        def run(path):
            gateway = Gateway(journal_path=path)
            gateway.register_provider("mock", ScriptedProvider().script_contains("q", "a"))
            gateway.complete_chat(make_request(prompt="q1"), stage="FACET")
            gateway.complete_chat(make_request(prompt="q2"), stage="GAP")
            return path.read_text()

        assert run(tmp_path / "a.jsonl") == run(tmp_path / "b.jsonl")
