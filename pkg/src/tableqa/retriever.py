"""SQL generation and execution against the table store.

The retrieval step turns a routed query into one SELECT statement (via the
completion provider), validates it, executes it under the caller's grants,
and stages the resulting rows in a session-scoped table so the answer step
and the scorer work from the exact same data.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .auth import MinimalUserProfile
from .errors import MalformedSql, MissingInput
from .gateway import Gateway, PromptText
from .router import RoutedQuery
from .sqlcheck import parse_select
from .store import QueryResult, TableStore

SQL_PROMPT_HEADER = "[task:sql]"

_FENCE = re.compile(r"```(?:sql)?\s*(.*?)```", re.DOTALL | re.IGNORECASE)


@dataclass(frozen=True)
class Retrieval:
    sql_model: str
    sql_executed: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    primary_table: str
    staged_ref: str | None

    @property
    def empty(self) -> bool:
        return not self.rows


def build_sql_prompt(
    routed: RoutedQuery,
    profile: MinimalUserProfile,
    schemas: dict[str, str],
) -> PromptText:
    lines = [SQL_PROMPT_HEADER, "[intention]", routed.intention, "[tables]"]
    for table in routed.target_tables:
        lines.append(schemas[table])
    lines.append("[constraints]")
    constrained = False
    for table in routed.target_tables:
        constraint = profile.grant_map().get(table)
        if constraint:
            lines.append(f"- {table}: rows where {constraint}")
            constrained = True
    if not constrained:
        lines.append("- none")
    lines += [
        "[query]",
        routed.rewritten,
        "[format]",
        "one SELECT statement, sqlite dialect, no commentary",
    ]
    return PromptText(role_tag="sql_gen", body="\n".join(lines))


def parse_sql_output(output: str) -> str:
    """Extract and validate the single SELECT in a model response."""
    text = output.strip()
    fenced = _FENCE.search(text)
    if fenced:
        text = fenced.group(1).strip()
    if not text:
        raise MalformedSql("model returned no SQL")
    low = text.lower()
    start = low.find("select")
    with_start = low.find("with")
    if with_start != -1 and (start == -1 or with_start < start):
        start = with_start
    if start == -1:
        raise MalformedSql(f"no SELECT in model output {output!r}")
    return parse_select(text[start:]).canonical


class SqlRetriever:
    def __init__(self, gateway: Gateway, store: TableStore, max_stage_rows: int = 200):
        self.gateway = gateway
        self.store = store
        self.max_stage_rows = max_stage_rows

    def schemas_for(self, tables: tuple[str, ...]) -> dict[str, str]:
        return {t: self.store.schema_text(t) for t in tables}

    def generate_sql(
        self, routed: RoutedQuery, profile: MinimalUserProfile, query_key: str = ""
    ) -> str:
        if not routed.target_tables:
            raise MissingInput("routing produced no target tables")
        if not routed.rewritten.strip():
            raise MissingInput("routing produced no query text")
        prompt = build_sql_prompt(routed, profile, self.schemas_for(routed.target_tables))
        sql, _record = self.gateway.complete_structured(
            prompt, parse_sql_output, query_key=query_key
        )
        return sql

    def execute(self, sql: str, profile: MinimalUserProfile) -> QueryResult:
        return self.store.run_select(sql, profile.grant_map())

    def fetch(
        self,
        routed: RoutedQuery,
        profile: MinimalUserProfile,
        stage_ref: str,
        query_key: str = "",
    ) -> Retrieval:
        """Generate, execute, and stage. Empty results are returned unstaged."""
        sql = self.generate_sql(routed, profile, query_key=query_key)
        result = self.execute(sql, profile)
        rows = result.rows[: self.max_stage_rows]
        parsed_tables = parse_select(sql).tables
        primary = parsed_tables[0] if parsed_tables else routed.target_tables[0]
        staged_ref = None
        if rows:
            staged_ref = self.store.stage_result(stage_ref, list(result.columns), rows)
        return Retrieval(
            sql_model=sql,
            sql_executed=result.sql,
            columns=result.columns,
            rows=rows,
            primary_table=primary,
            staged_ref=staged_ref,
        )
