"""Routing: category rules, rewriting, prototype matching, route flow."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tableqa.auth import MinimalUserProfile, TableGrant
from tableqa.errors import (
    EmptyInput,
    EmptyPrototypeStore,
    MalformedDocument,
    MalformedRouteOutput,
    NoAccessibleTables,
    UnclassifiableQuery,
)
from tableqa.gateway import Gateway, MockCompletionProvider
from tableqa.router import (
    Prototype,
    PrototypeMatch,
    QueryRouter,
    RoutedQuery,
    build_route_prompt,
    classify_intention,
    load_prototypes,
    parse_route_output,
    rewrite_query,
)


CATEGORY_EXAMPLES = [
    ("What % of our offices are at 100% renewable electricity?", "percent"),
    ("What is the annual reduction of emissions globally?", "change"),
    ("Which country has the highest Emissions type 1 emissions?", "rank"),
    ("What is scope 1 emission levels for offices in Argentina?", "level"),
    ("Which city had the highest water consumption for Dec 2022?", "rank_time"),
    (
        "Which countries reduced scope 3 emissions consistently in the last 2 years "
        "and increased renewable electricity?",
        "multi",
    ),
    ("What is included in business travel?", "faq"),
]


@pytest.mark.parametrize("query,expected", CATEGORY_EXAMPLES)
def test_category_examples(query, expected):
    assert classify_intention(query) == expected


def test_rank_with_month_name_is_time_scoped():
    assert classify_intention("Which city used the most water in January 2023?") == "rank_time"


def test_rank_without_time_scope_is_plain():
    assert classify_intention("Which country has the lowest electricity consumption?") == "rank"


def test_how_much_is_level():
    assert classify_intention("How much water did the Tokyo office use?") == "level"


def test_two_distinct_signals_make_multi():
    q = "What percent of emissions did we cut after the reduction program?"
    assert classify_intention(q) == "multi"


def test_double_percent_is_still_percent():
    q = "What % of offices hit 100% renewable power?"
    assert classify_intention(q) == "percent"


def test_unmatched_query_classified_in_band():
    assert classify_intention("Tell me about the weather in the mountains") == "unclassifiable"


def test_empty_query_raises():
    with pytest.raises(EmptyInput):
        classify_intention("   ")


def test_faq_wins_over_signals():
    assert classify_intention("What is included in the highest emissions scope?") == "faq"


def test_definitional_phrasings_are_faq():
    assert classify_intention("What do scope 3 emissions include?") == "faq"
    assert classify_intention("What is the difference between scope 1 and scope 2 emissions?") == "faq"
    assert classify_intention("What does the reporting period mean?") == "faq"


def test_rewrite_strips_politeness_and_question_mark():
    assert rewrite_query("Please can you tell me which city used the most water?") == (
        "which city used the most water"
    )


def test_rewrite_idempotent():
    once = rewrite_query("Could you tell me the totals please?")
    assert rewrite_query(once) == once


@given(st.text(max_size=120))
def test_rewrite_never_raises_on_nonempty(text):
    rewrite_query(text)


def test_routed_query_match_order_enforced():
    good = (
        PrototypeMatch("a", (), "x", 0.9),
        PrototypeMatch("b", (), "y", 0.5),
    )
    RoutedQuery(original="q", rewritten="q", intention="level", target_tables=("t",), matches=good)
    with pytest.raises(ValueError):
        RoutedQuery(
            original="q",
            rewritten="q",
            intention="level",
            target_tables=("t",),
            matches=tuple(reversed(good)),
        )


def test_routed_query_at_most_five_matches():
    matches = tuple(PrototypeMatch(f"q{i}", (), "a", 1.0 - i / 10) for i in range(6))
    with pytest.raises(ValueError):
        RoutedQuery(
            original="q", rewritten="q", intention="level",
            target_tables=("t",), matches=matches,
        )


def test_prototype_file_roundtrip(tmp_path):
    path = tmp_path / "prototypes.tsv"
    path.write_text(
        "# stored questions\n"
        "What is included in business travel?\tpolicy_notes,travel_ledger\t"
        "Business travel covers flights, rail, and hotel stays booked through the agency.\n"
        "What does scope 2 mean?\temissions_scope2\tScope 2 covers purchased electricity.\n"
    )
    prototypes = load_prototypes(str(path))
    assert len(prototypes) == 2
    assert prototypes[0].sources == ("policy_notes", "travel_ledger")


def test_prototype_file_bad_field_count(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("only one field\n")
    with pytest.raises(MalformedDocument) as err:
        load_prototypes(str(path))
    assert err.value.line == 1


def test_prototype_file_empty_raises(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("# nothing but comments\n")
    with pytest.raises(EmptyPrototypeStore):
        load_prototypes(str(path))


def test_parse_route_output():
    intention, rewritten = parse_route_output("intention: rank\nrewritten: top water city")
    assert intention == "rank"
    assert rewritten == "top water city"


def test_parse_route_output_rejects_unknown_category():
    with pytest.raises(MalformedRouteOutput):
        parse_route_output("intention: banter\nrewritten: x")


PROFILE = MinimalUserProfile(
    user_id="maria",
    grants=(TableGrant("water_consumption"), TableGrant("electricity_consumption")),
)

PROTOTYPES = [
    Prototype(
        "What is included in business travel?",
        ("policy_notes",),
        "Business travel covers flights, rail, and hotels.",
    ),
    Prototype(
        "What does scope 2 mean?",
        ("emissions_scope2",),
        "Scope 2 covers purchased electricity.",
    ),
]

CATALOG = {
    "water_consumption": "water consumption megaliters",
    "electricity_consumption": "electricity consumption mwh",
}


def scripted_router(output: str) -> QueryRouter:
    provider = MockCompletionProvider(synthesizer=lambda prompt: output)
    gateway = Gateway(completion_provider=provider)
    return QueryRouter(gateway, PROTOTYPES, catalog=CATALOG)


def test_route_full_flow():
    router = scripted_router("intention: rank\nrewritten: which city used the most water")
    gw = router.gateway
    gw.begin_query("q1")
    routed = router.route("Which city used the most water?", PROFILE, query_key="q1")
    assert routed.intention == "rank"
    assert routed.target_tables[0] == "water_consumption"
    assert len(routed.matches) == 2
    assert routed.matches[0].similarity >= routed.matches[1].similarity
    assert gw.call_count("q1") == 1


def test_route_requires_grants():
    router = scripted_router("intention: level\nrewritten: x")
    empty = MinimalUserProfile(user_id="guest")
    with pytest.raises(NoAccessibleTables):
        router.route("How much water did we use?", empty)


def test_route_empty_query():
    router = scripted_router("intention: level\nrewritten: x")
    with pytest.raises(EmptyInput):
        router.route("  ", PROFILE)


def test_route_faq_uses_prototype_answer():
    router = scripted_router("intention: faq\nrewritten: what is included in business travel")
    routed = router.route("What is included in business travel?", PROFILE)
    assert routed.faq_answer is not None
    assert "flights" in routed.faq_answer
    assert routed.faq_sources == ("policy_notes",)


def test_route_faq_with_no_close_prototype_unclassifiable():
    router = scripted_router("intention: faq\nrewritten: x")
    with pytest.raises(UnclassifiableQuery):
        router.route("Define orbital launch windows", PROFILE)


def test_route_faq_without_prototypes_raises():
    provider = MockCompletionProvider(synthesizer=lambda p: "intention: faq\nrewritten: x")
    router = QueryRouter(Gateway(completion_provider=provider), prototypes=[])
    with pytest.raises(EmptyPrototypeStore):
        router.route("What is included in business travel?", PROFILE)


def test_route_retries_malformed_then_succeeds():
    provider = MockCompletionProvider(
        fixtures={}, synthesizer=None
    )
    gateway = Gateway(completion_provider=provider)
    router = QueryRouter(gateway, PROTOTYPES, catalog=CATALOG)
    canon = "how much water did we use?"
    prompt = build_route_prompt(PROFILE, canon, router.match_prototypes(canon))
    provider.add_fixture(prompt.fingerprint, ["garbage output", "intention: level\nrewritten: water usage"])
    gateway.begin_query("q1")
    routed = router.route("How much water did we use?", PROFILE, query_key="q1")
    assert routed.intention == "level"
    assert gateway.call_count("q1") == 2


def test_select_tables_falls_back_to_all_accessible():
    router = scripted_router("intention: level\nrewritten: x")
    tables = router.select_tables("completely unrelated words", PROFILE.tables())
    assert set(tables) == set(PROFILE.tables())
