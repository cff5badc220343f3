"""Retrieval: SQL parsing from model output, execution, staging, plugins."""

import pytest

from tableqa.auth import MinimalUserProfile, TableGrant
from tableqa.errors import (
    AccessDenied,
    MalformedSql,
    MissingInput,
    PluginFailure,
    UnknownPlugin,
)
from tableqa.gateway import Gateway, MockCompletionProvider
from tableqa.plugins import LinearTrendPlugin, PluginRegistry, default_registry
from tableqa.retriever import Retrieval, SqlRetriever, build_sql_prompt, parse_sql_output
from tableqa.router import RoutedQuery
from tableqa.store import QueryResult, TableStore


@pytest.fixture()
def store():
    s = TableStore()
    s.create_table(
        "water_consumption",
        [("city", "TEXT"), ("country", "TEXT"), ("year", "INTEGER"), ("yearly_total", "INTEGER")],
    )
    s.insert_rows(
        "water_consumption",
        [
            ("tokyo", "Japan", 2023, 120),
            ("osaka", "Japan", 2023, 80),
            ("lyon", "France", 2023, 60),
            ("tokyo", "Japan", 2022, 95),
        ],
    )
    yield s
    s.close()


PROFILE = MinimalUserProfile(user_id="maria", grants=(TableGrant("water_consumption"),))
ROUTED = RoutedQuery(
    original="How much water did Tokyo use in 2023?",
    rewritten="how much water did tokyo use in 2023",
    intention="level",
    target_tables=("water_consumption",),
)


def make_retriever(store, sql_output):
    provider = MockCompletionProvider(synthesizer=lambda prompt: sql_output)
    return SqlRetriever(Gateway(completion_provider=provider), store)


def test_parse_sql_output_plain():
    sql = parse_sql_output("SELECT city FROM t WHERE year = 2023")
    assert sql == "SELECT city FROM t WHERE year = 2023"


def test_parse_sql_output_fenced():
    sql = parse_sql_output("```sql\nselect city from t\n```")
    assert sql == "SELECT city FROM t"


def test_parse_sql_output_with_preamble():
    sql = parse_sql_output("Here is the query:\nSELECT city FROM t")
    assert sql == "SELECT city FROM t"


def test_parse_sql_output_no_select():
    with pytest.raises(MalformedSql):
        parse_sql_output("I cannot answer that.")


def test_fetch_executes_and_stages(store):
    retriever = make_retriever(
        store, "SELECT city, yearly_total FROM water_consumption WHERE year = 2023"
    )
    retrieval = retriever.fetch(ROUTED, PROFILE, "stage_s1_1")
    assert retrieval.primary_table == "water_consumption"
    assert len(retrieval.rows) == 3
    assert retrieval.staged_ref == "stage_s1_1"
    staged = store.read_stage("stage_s1_1")
    assert staged.rows == retrieval.rows
    assert staged.columns == ("city", "yearly_total")


def test_fetch_empty_result_not_staged(store):
    retriever = make_retriever(
        store, "SELECT city FROM water_consumption WHERE year = 1900"
    )
    retrieval = retriever.fetch(ROUTED, PROFILE, "stage_s1_1")
    assert retrieval.empty
    assert retrieval.staged_ref is None
    assert store.stage_refs("stage_s1_") == ()


def test_fetch_applies_grant_constraint(store):
    profile = MinimalUserProfile(
        user_id="jp", grants=(TableGrant("water_consumption", "country = 'Japan'"),)
    )
    retriever = make_retriever(
        store, "SELECT city FROM water_consumption WHERE year = 2023"
    )
    retrieval = retriever.fetch(ROUTED, profile, "stage_s2_1")
    assert sorted(r[0] for r in retrieval.rows) == ["osaka", "tokyo"]
    assert "country = 'Japan'" in retrieval.sql_executed


def test_fetch_denied_table_raises(store):
    store.create_table("secrets", [("x", "TEXT")])
    retriever = make_retriever(store, "SELECT x FROM secrets")
    with pytest.raises(AccessDenied):
        retriever.fetch(ROUTED, PROFILE, "stage_s3_1")


def test_fetch_requires_target_tables(store):
    retriever = make_retriever(store, "SELECT 1")
    bare = RoutedQuery(
        original="q", rewritten="q", intention="level", target_tables=()
    )
    with pytest.raises(MissingInput):
        retriever.fetch(bare, PROFILE, "stage_s4_1")


def test_fetch_retries_malformed_sql_once(store):
    prompt = build_sql_prompt(
        ROUTED, PROFILE, {"water_consumption": store.schema_text("water_consumption")}
    )
    provider = MockCompletionProvider(
        fixtures={
            prompt.fingerprint: [
                "no sql here at all",
                "SELECT city FROM water_consumption WHERE year = 2023",
            ]
        }
    )
    gateway = Gateway(completion_provider=provider)
    retriever = SqlRetriever(gateway, store)
    gateway.begin_query("q1")
    retrieval = retriever.fetch(ROUTED, PROFILE, "stage_s5_1", query_key="q1")
    assert not retrieval.empty
    assert gateway.call_count("q1") == 2


def test_stage_rows_capped(store):
    retriever = make_retriever(store, "SELECT city FROM water_consumption")
    retriever.max_stage_rows = 2
    retrieval = retriever.fetch(ROUTED, PROFILE, "stage_s6_1")
    assert len(retrieval.rows) == 2
    assert len(store.read_stage("stage_s6_1").rows) == 2


def test_linear_trend_appends_projection():
    result = QueryResult(
        columns=("year", "yearly_total"),
        rows=((2021, 100), (2022, 110), (2023, 120)),
        sql="",
    )
    out = LinearTrendPlugin().apply(result)
    assert len(out.rows) == 4
    assert out.rows[-1] == (2024, 130)


def test_linear_trend_no_year_column_is_identity():
    result = QueryResult(columns=("city", "total"), rows=(("a", 1), ("b", 2)), sql="")
    assert LinearTrendPlugin().apply(result) is result


def test_registry_unknown_plugin():
    registry = PluginRegistry()
    with pytest.raises(UnknownPlugin):
        registry.get("nope")


def test_registry_chain_and_failure():
    class Boom:
        name = "boom"

        def apply(self, result):
            raise RuntimeError("kapow")

    registry = default_registry()
    registry.register(Boom())
    result = QueryResult(columns=("x",), rows=((1,),), sql="")
    assert registry.apply_chain((), result) is result
    with pytest.raises(PluginFailure):
        registry.apply_chain(("boom",), result)
    assert "linear_trend" in registry.names
