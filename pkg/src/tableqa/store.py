"""Embedded table store with per-call read authorization.

All tables live in one sqlite database. Untrusted (model-generated) SQL goes
through ``run_select``, which layers three defenses: the statement is parsed
and checked read-only, every referenced table is matched against the caller's
grants (with row constraints injected into the outermost WHERE), and a
sqlite authorizer hook denies any read the grant set does not cover. Every
gate and engine decision lands in an audit log.

Staged result tables (``stage_<session>_<n>``) hold the rows an answer was
composed from; they are written through the internal path only and are never
readable by untrusted SQL.
"""

from __future__ import annotations

import csv
import re
import sqlite3
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import (
    AccessDenied,
    ExecutionError,
    MalformedRow,
    SchemaMismatch,
    UnknownTable,
)
from .sqlcheck import has_nested_select, inject_constraint, parse_select

_NAME_OK = re.compile(r"^[a-z_][a-z0-9_-]*$")
_STAGE_OK = re.compile(r"^stage_[a-z0-9_]+$")

# Statement compilation is re-run on every execute (no statement cache), so
# the authorizer sees each untrusted statement in full.
_CACHED_STATEMENTS = 0


def _permit_all(*_args) -> int:
    return sqlite3.SQLITE_OK


@dataclass(frozen=True)
class AuditRecord:
    table: str
    column: str | None
    verdict: str  # permit | deny
    origin: str  # gate | engine


@dataclass(frozen=True)
class QueryResult:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    sql: str


def _quote_name(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _check_name(name: str) -> str:
    low = name.lower()
    if not _NAME_OK.match(low):
        raise ValueError(f"bad table or column name {name!r}")
    return low


class TableStore:
    def __init__(self, path: str = ":memory:", statement_timeout: float = 5.0):
        self._conn = sqlite3.connect(
            path, check_same_thread=False, cached_statements=_CACHED_STATEMENTS
        )
        self._lock = threading.RLock()
        self._audit: list[AuditRecord] = []
        self._allowed: set[str] | None = None
        self._denied_hit: tuple[str, str | None] | None = None
        self._deadline: float | None = None
        self.statement_timeout = statement_timeout
        self._conn.set_progress_handler(self._on_progress, 50_000)
        self._conn.set_authorizer(_permit_all)

    # -- engine hooks ------------------------------------------------

    def _on_progress(self) -> int:
        if self._deadline is not None and time.monotonic() > self._deadline:
            return 1
        return 0

    def _authorize(self, action: int, arg1, arg2, _db, _trigger) -> int:
        if self._allowed is None:
            return sqlite3.SQLITE_OK
        if action == sqlite3.SQLITE_SELECT:
            return sqlite3.SQLITE_OK
        if action == sqlite3.SQLITE_FUNCTION:
            return sqlite3.SQLITE_OK
        if action == sqlite3.SQLITE_READ:
            table = (arg1 or "").lower()
            column = (arg2 or None)
            if table in self._allowed:
                self._audit.append(AuditRecord(table, column, "permit", "engine"))
                return sqlite3.SQLITE_OK
            self._audit.append(AuditRecord(table, column, "deny", "engine"))
            self._denied_hit = (table, column)
            return sqlite3.SQLITE_DENY
        self._denied_hit = ((arg1 or "").lower() or "<statement>", None)
        return sqlite3.SQLITE_DENY

    # -- internal (trusted) operations --------------------------------

    def _execute_internal(self, sql: str, params: Sequence = ()) -> sqlite3.Cursor:
        with self._lock:
            return self._conn.execute(sql, params)

    def create_table(self, name: str, columns: Sequence[tuple[str, str]]) -> None:
        name = _check_name(name)
        cols = ", ".join(
            f"{_quote_name(_check_name(c))} {t.upper()}" for c, t in columns
        )
        with self._lock:
            self._conn.execute(f"CREATE TABLE {_quote_name(name)} ({cols})")
            self._conn.commit()

    def insert_rows(self, table: str, rows: Iterable[Sequence]) -> int:
        table = _check_name(table)
        cols = self.columns(table)
        marks = ", ".join("?" for _ in cols)
        count = 0
        with self._lock:
            for row in rows:
                if len(row) != len(cols):
                    raise SchemaMismatch(
                        f"row width {len(row)} does not match {table} ({len(cols)} columns)"
                    )
                self._conn.execute(
                    f"INSERT INTO {_quote_name(table)} VALUES ({marks})", tuple(row)
                )
                count += 1
            self._conn.commit()
        return count

    def load_csv(self, path: str, table: str | None = None) -> int:
        """Create a table from a CSV file (header row required)."""
        if table is None:
            table = re.sub(r"\.[^.]+$", "", path.rsplit("/", 1)[-1])
        table = _check_name(table.lower().replace("-", "_"))
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise MalformedRow("file has no header row", 1) from None
            body = list(reader)
        if not header or any(not h.strip() for h in header):
            raise MalformedRow("blank column name in header", 1)
        kinds = [_infer_type([row[i] for row in body if i < len(row)]) for i in range(len(header))]
        self.create_table(table, list(zip([h.strip().lower().replace(" ", "_") for h in header], kinds)))
        coerced = []
        for line_no, row in enumerate(body, start=2):
            if len(row) != len(header):
                raise MalformedRow(
                    f"expected {len(header)} fields, found {len(row)}", line_no
                )
            coerced.append(tuple(_coerce(v, k) for v, k in zip(row, kinds)))
        return self.insert_rows(table, coerced)

    # -- catalog -------------------------------------------------------

    def list_tables(self) -> tuple[str, ...]:
        cur = self._execute_internal(
            "SELECT name FROM sqlite_master WHERE type = 'table' "
            "AND name NOT LIKE 'sqlite_%' AND name NOT LIKE 'stage_%' ORDER BY name"
        )
        return tuple(r[0] for r in cur.fetchall())

    def columns(self, table: str) -> tuple[str, ...]:
        table = table.lower()
        cur = self._execute_internal(f"PRAGMA table_info({_quote_name(table)})")
        info = cur.fetchall()
        if not info:
            raise UnknownTable(f"no table named {table!r}")
        return tuple(r[1] for r in info)

    def schema_text(self, table: str) -> str:
        table = table.lower()
        cur = self._execute_internal(f"PRAGMA table_info({_quote_name(table)})")
        info = cur.fetchall()
        if not info:
            raise UnknownTable(f"no table named {table!r}")
        cols = ", ".join(f"{r[1]} {r[2] or 'TEXT'}" for r in info)
        return f"{table}({cols})"

    def row_count(self, table: str) -> int:
        table = table.lower()
        if table not in self.list_tables():
            raise UnknownTable(f"no table named {table!r}")
        cur = self._execute_internal(f"SELECT count(*) FROM {_quote_name(table)}")
        return int(cur.fetchone()[0])

    # -- untrusted reads -----------------------------------------------

    def run_select(self, sql: str, grants: Mapping[str, str | None]) -> QueryResult:
        """Execute model-generated SQL under the caller's table grants.

        Raises AccessDenied before execution when the statement references a
        table outside the grant set; constraints attached to granted tables
        are ANDed into the outermost WHERE clause first.
        """
        parsed = parse_select(sql)
        granted = {k.lower(): v for k, v in grants.items()}
        predicates: list[str] = []
        for table in parsed.tables:
            if table not in granted:
                self._audit.append(AuditRecord(table, None, "deny", "gate"))
                raise AccessDenied(table)
            self._audit.append(AuditRecord(table, None, "permit", "gate"))
            if granted[table]:
                predicates.append(granted[table])
        final_sql = parsed.canonical
        if predicates:
            # the injected predicate lands in the outermost WHERE only, so a
            # nested scope could read constrained rows unfiltered; refuse it
            if has_nested_select(final_sql):
                raise AccessDenied(
                    parsed.tables[0], reason="nested query over row-constrained tables"
                )
            final_sql = inject_constraint(final_sql, " AND ".join(f"({p})" for p in predicates))
        with self._lock:
            self._allowed = set(parsed.tables)
            self._denied_hit = None
            self._deadline = time.monotonic() + self.statement_timeout
            self._conn.set_authorizer(self._authorize)
            try:
                cur = self._conn.execute(final_sql)
                rows = cur.fetchall()
                cols = tuple(d[0] for d in cur.description or ())
            except sqlite3.DatabaseError as exc:
                if self._denied_hit is not None:
                    table, _column = self._denied_hit
                    raise AccessDenied(table, reason="engine refusal") from exc
                if "interrupt" in str(exc).lower():
                    raise ExecutionError(
                        f"statement exceeded {self.statement_timeout}s"
                    ) from exc
                raise ExecutionError(str(exc)) from exc
            finally:
                self._conn.set_authorizer(_permit_all)
                self._allowed = None
                self._deadline = None
        return QueryResult(columns=cols, rows=tuple(tuple(r) for r in rows), sql=final_sql)

    # -- staging ---------------------------------------------------------

    def stage_result(self, ref: str, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
        if not _STAGE_OK.match(ref):
            raise ValueError(f"bad staging name {ref!r}")
        if not columns:
            raise SchemaMismatch("staged result needs at least one column")
        col_sql = ", ".join(_quote_name(_check_name(c)) for c in columns)
        marks = ", ".join("?" for _ in columns)
        with self._lock:
            self._conn.execute(f"DROP TABLE IF EXISTS {_quote_name(ref)}")
            self._conn.execute(f"CREATE TABLE {_quote_name(ref)} ({col_sql})")
            for row in rows:
                if len(row) != len(columns):
                    raise SchemaMismatch(
                        f"staged row width {len(row)} does not match {len(columns)} columns"
                    )
                self._conn.execute(f"INSERT INTO {_quote_name(ref)} VALUES ({marks})", tuple(row))
            self._conn.commit()
        return ref

    def read_stage(self, ref: str) -> QueryResult:
        if not _STAGE_OK.match(ref):
            raise ValueError(f"bad staging name {ref!r}")
        with self._lock:
            try:
                cur = self._conn.execute(f"SELECT * FROM {_quote_name(ref)}")
            except sqlite3.OperationalError:
                raise UnknownTable(f"no staged result {ref!r}") from None
            rows = cur.fetchall()
            cols = tuple(d[0] for d in cur.description or ())
        return QueryResult(columns=cols, rows=tuple(tuple(r) for r in rows), sql="")

    def stage_refs(self, prefix: str) -> tuple[str, ...]:
        cur = self._execute_internal(
            "SELECT name FROM sqlite_master WHERE type = 'table' AND name LIKE ? ORDER BY name",
            (prefix.replace("%", "") + "%",),
        )
        return tuple(r[0] for r in cur.fetchall())

    def drop_stages(self, prefix: str) -> int:
        refs = [r for r in self.stage_refs(prefix) if _STAGE_OK.match(r)]
        with self._lock:
            for ref in refs:
                self._conn.execute(f"DROP TABLE {_quote_name(ref)}")
            self._conn.commit()
        return len(refs)

    # -- audit -------------------------------------------------------------

    @property
    def audit_log(self) -> tuple[AuditRecord, ...]:
        return tuple(self._audit)

    def close(self) -> None:
        with self._lock:
            self._conn.close()


def _infer_type(values: list[str]) -> str:
    saw_real = False
    saw_any = False
    for v in values:
        v = v.strip()
        if not v:
            continue
        saw_any = True
        try:
            int(v)
            continue
        except ValueError:
            pass
        try:
            float(v)
            saw_real = True
        except ValueError:
            return "TEXT"
    if not saw_any:
        return "TEXT"
    return "REAL" if saw_real else "INTEGER"


def _coerce(value: str, kind: str):
    value = value.strip()
    if value == "":
        return None
    if kind == "INTEGER":
        return int(value)
    if kind == "REAL":
        return float(value)
    return value
