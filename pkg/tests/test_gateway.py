"""Gateway behavior: fixtures, deadlines, embeddings, call accounting."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tableqa.errors import (
    DeadlineExceeded,
    EmptyInput,
    EmptyPrompt,
    MalformedRouteOutput,
    ProviderUnavailable,
    UnknownSession,
)
from tableqa.gateway import (
    EmbeddingVector,
    Gateway,
    GenerationParams,
    HashedTokenEmbeddingProvider,
    MockCompletionProvider,
    PromptText,
)
from tableqa.textutil import fingerprint


def make_gateway(fixtures=None, delay=0.0, synthesizer=None):
    provider = MockCompletionProvider(fixtures=fixtures, delay=delay, synthesizer=synthesizer)
    return Gateway(completion_provider=provider)


def test_fixture_lookup_by_canonical_body():
    gw = make_gateway({"classify this query": "Rank"})
    prompt = PromptText(role_tag="route", body="  Classify   THIS query ")
    record = gw.complete(prompt, query_key="q1")
    assert record.output == "Rank"
    assert record.provider_id == "mock"
    assert record.call_index_in_query == 1


def test_fixture_lookup_by_fingerprint():
    body = "generate sql for water usage"
    gw = make_gateway({fingerprint(body): "SELECT 1"})
    record = gw.complete(PromptText(role_tag="sql_gen", body=body), query_key="q1")
    assert record.output == "SELECT 1"


def test_missing_fixture_without_synthesizer_raises():
    gw = make_gateway({})
    with pytest.raises(ProviderUnavailable):
        gw.complete(PromptText(role_tag="answer", body="no fixture here"), query_key="q")


def test_list_fixture_consumed_in_order_last_repeats():
    gw = make_gateway({"prompt": ["first", "second"]})
    prompt = PromptText(role_tag="route", body="prompt")
    outputs = [gw.complete(prompt, query_key="q").output for _ in range(3)]
    assert outputs == ["first", "second", "second"]


def test_empty_prompt_rejected():
    with pytest.raises(EmptyPrompt):
        PromptText(role_tag="route", body="   \n\t ")


def test_unknown_role_tag_rejected():
    with pytest.raises(ValueError):
        PromptText(role_tag="chat", body="hello")


def test_deadline_enforced_against_slow_provider():
    gw = make_gateway({"slow prompt": "late"}, delay=1.0)
    prompt = PromptText(role_tag="answer", body="slow prompt")
    params = GenerationParams(deadline=0.001)
    with pytest.raises(DeadlineExceeded):
        gw.complete(prompt, params, query_key="q")


def test_generous_deadline_passes_slow_provider():
    gw = make_gateway({"slow prompt": "made it"}, delay=0.05)
    prompt = PromptText(role_tag="answer", body="slow prompt")
    record = gw.complete(prompt, GenerationParams(deadline=5.0), query_key="q")
    assert record.output == "made it"
    assert record.latency >= 0.05


def test_generation_params_validation():
    with pytest.raises(ValueError):
        GenerationParams(temperature=1.5)
    with pytest.raises(ValueError):
        GenerationParams(deadline=0)
    with pytest.raises(ValueError):
        GenerationParams(max_output_tokens=0)


def test_call_accounting_counts_per_query_key():
    gw = make_gateway({"a": "1", "b": "2", "c": "3"})
    gw.begin_query("q1")
    assert gw.call_count("q1") == 0
    for body in ("a", "b", "c"):
        gw.complete(PromptText(role_tag="route", body=body), query_key="q1")
    assert gw.call_count("q1") == 3
    indexes = [r.call_index_in_query for r in gw.records("q1")]
    assert indexes == [1, 2, 3]


def test_call_count_unknown_key_raises():
    gw = make_gateway({})
    with pytest.raises(UnknownSession):
        gw.call_count("never-registered")


def test_structured_retry_adds_one_call():
    def parse(output: str):
        if output != "ok":
            raise MalformedRouteOutput(f"bad: {output}")
        return output

    gw = make_gateway({"route me": ["garbage", "ok"]})
    gw.begin_query("q1")
    prompt = PromptText(role_tag="route", body="route me")
    value, record = gw.complete_structured(prompt, parse, query_key="q1")
    assert value == "ok"
    assert gw.call_count("q1") == 2
    assert record.call_index_in_query == 2


def test_structured_retry_exhausted_raises_malformed():
    def parse(output: str):
        raise MalformedRouteOutput("always bad")

    gw = make_gateway({"route me": "junk"})
    gw.begin_query("q1")
    with pytest.raises(MalformedRouteOutput):
        gw.complete_structured(PromptText(role_tag="route", body="route me"), parse, query_key="q1")
    assert gw.call_count("q1") == 2


def test_answer_role_never_retried():
    def parse(output: str):
        raise MalformedRouteOutput("bad answer")

    gw = make_gateway({"answer me": "junk"})
    gw.begin_query("q1")
    with pytest.raises(MalformedRouteOutput):
        gw.complete_structured(PromptText(role_tag="answer", body="answer me"), parse, query_key="q1")
    assert gw.call_count("q1") == 1


def test_embedding_deterministic():
    provider = HashedTokenEmbeddingProvider()
    first = provider.embed("total water consumption in 2023")
    second = provider.embed("total water consumption in 2023")
    assert first == second
    assert first.dimension == 256


def test_embedding_whitespace_case_invariant_cosine_one():
    provider = HashedTokenEmbeddingProvider()
    a = provider.embed("Total   Water Consumption")
    b = provider.embed("total water consumption")
    assert a.cosine(b) == pytest.approx(1.0)


def test_embedding_unrelated_strings_not_identical():
    provider = HashedTokenEmbeddingProvider()
    a = provider.embed("renewable energy share in europe")
    b = provider.embed("office headcount by continent")
    assert a.cosine(b) < 1.0


def test_embedding_empty_input_rejected():
    provider = HashedTokenEmbeddingProvider()
    with pytest.raises(EmptyInput):
        provider.embed("   ")


def test_embedding_vector_dimension_checked():
    with pytest.raises(ValueError):
        EmbeddingVector(values=(1.0, 2.0), dimension=3)


@given(st.text(min_size=1).filter(lambda s: s.strip()))
def test_embed_is_pure_function_of_text(text):
    provider = HashedTokenEmbeddingProvider(dimension=64)
    assert provider.embed(text) == provider.embed(text)


@given(
    st.lists(st.sampled_from(["water", "energy", "office", "city", "total"]), min_size=1, max_size=8)
)
def test_cosine_self_similarity_is_one(tokens):
    provider = HashedTokenEmbeddingProvider(dimension=64)
    vec = provider.embed(" ".join(tokens))
    assert vec.cosine(vec) == pytest.approx(1.0)
