"""SQL scanning and validation for the embedded store's read dialect.

Model-produced SQL is untrusted text. Before anything reaches the engine it
is tokenized, checked to be a single read-only SELECT (optionally with a
WITH prelude), and re-rendered in a canonical form. The same token stream
yields the referenced tables for access checks, the identifiers used in
WHERE / GROUP BY / HAVING for answer scoring, and the insertion point for
row-level constraint predicates.

Dialect notes: string literals use '' escaping, identifiers may be bare or
double-quoted, and a hyphenated run like ``patient-data`` written without
surrounding whitespace is one identifier (rendered double-quoted). Column
subtraction therefore needs spaces around the minus sign.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ForbiddenStatement, MalformedSql

KEYWORDS = frozenset(
    """
    select from where group by having order limit offset distinct all
    join left right full outer inner cross natural on using as
    and or not in is null like glob regexp match between escape collate
    case when then else end cast exists union intersect except
    with recursive asc desc
    """.split()
)

WRITE_KEYWORDS = frozenset(
    """
    insert update delete drop create alter attach detach pragma vacuum
    reindex replace truncate merge grant revoke analyze begin commit
    rollback savepoint release
    """.split()
)

SET_OPS = frozenset({"union", "intersect", "except"})

# Tokens that terminate a WHERE expression at the same depth.
_CLAUSE_STARTERS = frozenset({"group", "having", "order", "limit", "window"})

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
_BARE_ID = re.compile(r"[A-Za-z_]\w*(?:-\w+)*")
_OPERATORS = ("<=", ">=", "<>", "!=", "||", "=", "<", ">", "+", "-", "*", "/", "%")


@dataclass(frozen=True)
class Token:
    kind: str  # word | qword | string | number | op
    text: str
    pos: int

    @property
    def lower(self) -> str:
        return self.text.lower()

    def is_keyword(self, *names: str) -> bool:
        return self.kind == "word" and self.lower in (names or KEYWORDS)


@dataclass(frozen=True)
class ParsedQuery:
    canonical: str
    tables: tuple[str, ...]
    filter_columns: tuple[str, ...]
    filter_literals: tuple[str, ...]
    has_where: bool


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        ch = sql[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if sql.startswith("--", i):
            end = sql.find("\n", i)
            i = n if end < 0 else end + 1
            continue
        if sql.startswith("/*", i):
            end = sql.find("*/", i + 2)
            if end < 0:
                raise MalformedSql(f"unterminated comment at offset {i}")
            i = end + 2
            continue
        if ch == "'":
            j = i + 1
            while j < n:
                if sql[j] == "'":
                    if j + 1 < n and sql[j + 1] == "'":
                        j += 2
                        continue
                    break
                j += 1
            if j >= n:
                raise MalformedSql(f"unterminated string at offset {i}")
            raw = sql[i + 1 : j].replace("''", "'")
            tokens.append(Token("string", raw, i))
            i = j + 1
            continue
        if ch == '"':
            j = sql.find('"', i + 1)
            if j < 0:
                raise MalformedSql(f"unterminated quoted identifier at offset {i}")
            name = sql[i + 1 : j]
            if not name:
                raise MalformedSql(f"empty quoted identifier at offset {i}")
            tokens.append(Token("qword", name, i))
            i = j + 1
            continue
        m = _NUMBER.match(sql, i)
        if m and (ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit())):
            tokens.append(Token("number", m.group(), i))
            i = m.end()
            continue
        m = _BARE_ID.match(sql, i)
        if m:
            tokens.append(Token("word", m.group(), i))
            i = m.end()
            continue
        if ch in "(),;.":
            tokens.append(Token("op", ch, i))
            i += 1
            continue
        for op in _OPERATORS:
            if sql.startswith(op, i):
                tokens.append(Token("op", op, i))
                i += len(op)
                break
        else:
            raise MalformedSql(f"unexpected character {ch!r} at offset {i}")
    return tokens


def render(tokens: list[Token]) -> str:
    """Canonical text: uppercase keywords, lowercase identifiers, tight punctuation."""
    parts: list[str] = []
    no_space_before = {",", ")", ";", "."}
    for idx, tok in enumerate(tokens):
        if tok.kind == "word":
            text = tok.lower.upper() if tok.lower in KEYWORDS else tok.lower
            if "-" in tok.text:
                text = f'"{tok.lower}"'
        elif tok.kind == "qword":
            text = f'"{tok.lower}"'
        elif tok.kind == "string":
            escaped = tok.text.replace("'", "''")
            text = f"'{escaped}'"
        else:
            text = tok.text
        if parts:
            prev = tokens[idx - 1]
            open_paren_fn = tok.text == "(" and prev.kind in ("word", "qword") and not prev.is_keyword()
            if (
                text in no_space_before
                or prev.text in ("(", ".")
                or open_paren_fn
            ):
                parts.append(text)
            else:
                parts.append(" " + text)
        else:
            parts.append(text)
    return "".join(parts)


def _normalized_name(tok: Token) -> str:
    return tok.lower


def _depths(tokens: list[Token]) -> list[int]:
    """Paren depth of each token; raises on imbalance."""
    depths: list[int] = []
    depth = 0
    for tok in tokens:
        if tok.text == "(" and tok.kind == "op":
            depths.append(depth)
            depth += 1
        elif tok.text == ")" and tok.kind == "op":
            depth -= 1
            if depth < 0:
                raise MalformedSql(f"unbalanced ')' at offset {tok.pos}")
            depths.append(depth)
        else:
            depths.append(depth)
    if depth != 0:
        raise MalformedSql("unbalanced '(' in statement")
    return depths


def _split_statements(tokens: list[Token]) -> list[list[Token]]:
    depths = _depths(tokens)
    statements: list[list[Token]] = []
    current: list[Token] = []
    for tok, depth in zip(tokens, depths):
        if tok.text == ";" and tok.kind == "op" and depth == 0:
            if current:
                statements.append(current)
                current = []
            continue
        current.append(tok)
    if current:
        statements.append(current)
    return statements


def _cte_names(tokens: list[Token], depths: list[int]) -> tuple[set[str], int]:
    """Names declared in a WITH prelude and the index of the main statement."""
    if not tokens or not tokens[0].is_keyword("with"):
        return set(), 0
    names: set[str] = set()
    i = 1
    if i < len(tokens) and tokens[i].is_keyword("recursive"):
        i += 1
    while True:
        if i >= len(tokens) or tokens[i].kind not in ("word", "qword"):
            raise MalformedSql("expected a name after WITH")
        names.add(_normalized_name(tokens[i]))
        i += 1
        if i < len(tokens) and tokens[i].text == "(" and depths[i] == 0:
            while i < len(tokens) and not (tokens[i].text == ")" and depths[i] == 0):
                i += 1
            i += 1
        if i >= len(tokens) or not tokens[i].is_keyword("as"):
            raise MalformedSql("expected AS in WITH prelude")
        i += 1
        if i >= len(tokens) or tokens[i].text != "(":
            raise MalformedSql("expected '(' after AS")
        while i < len(tokens) and not (tokens[i].text == ")" and depths[i] == 0):
            i += 1
        if i >= len(tokens):
            raise MalformedSql("unterminated WITH body")
        i += 1
        if i < len(tokens) and tokens[i].text == ",":
            i += 1
            continue
        break
    return names, i


def _extract_tables(tokens: list[Token], depths: list[int]) -> list[str]:
    tables: list[str] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.is_keyword("from", "join"):
            j = i + 1
            while j < len(tokens):
                if tokens[j].text == "(":
                    break  # derived table; its FROM is scanned on its own
                if tokens[j].kind in ("word", "qword"):
                    if tokens[j].kind == "word" and tokens[j].lower in KEYWORDS:
                        break
                    if j + 1 < len(tokens) and tokens[j + 1].text == ".":
                        raise ForbiddenStatement(
                            f"qualified table name at offset {tokens[j].pos}"
                        )
                    tables.append(_normalized_name(tokens[j]))
                    j += 1
                    # skip an optional alias
                    if j < len(tokens) and tokens[j].is_keyword("as"):
                        j += 1
                        if j < len(tokens) and tokens[j].kind in ("word", "qword"):
                            j += 1
                    elif (
                        j < len(tokens)
                        and tokens[j].kind in ("word", "qword")
                        and not (tokens[j].kind == "word" and tokens[j].lower in KEYWORDS)
                    ):
                        j += 1
                    if (
                        tok.is_keyword("from")
                        and j < len(tokens)
                        and tokens[j].text == ","
                        and depths[j] == depths[i]
                    ):
                        j += 1
                        continue
                break
        i += 1
    seen: set[str] = set()
    ordered = []
    for name in tables:
        if name not in seen:
            seen.add(name)
            ordered.append(name)
    return ordered


def _collect_filters(tokens: list[Token], depths: list[int]) -> tuple[list[str], list[str]]:
    """Identifiers and string literals inside WHERE / GROUP BY / HAVING.

    A nested SELECT masks the enclosing clause until it opens a filter clause
    of its own, so subquery select lists and table names stay out.
    """
    columns: list[str] = []
    literals: list[str] = []
    state: dict[int, str] = {}
    for idx, tok in enumerate(tokens):
        depth = depths[idx]
        for d in [d for d in state if d > depth]:
            del state[d]
        if tok.kind == "word":
            low = tok.lower
            if low in ("where", "having", "group"):
                state[depth] = "filter"
                continue
            if low in ("select", "order", "limit", "window") or low in SET_OPS:
                state[depth] = "plain"
                continue
        innermost = max((d for d in state if d <= depth), default=None)
        if innermost is None or state[innermost] != "filter":
            continue
        if tok.kind in ("word", "qword"):
            if tok.kind == "word" and tok.lower in KEYWORDS:
                continue
            nxt = tokens[idx + 1] if idx + 1 < len(tokens) else None
            if nxt is not None and nxt.text == "(":
                continue  # function name
            columns.append(_normalized_name(tok))
        elif tok.kind == "string":
            literals.append(tok.text.lower())
    return columns, literals


def parse_select(sql: str) -> ParsedQuery:
    """Validate one read-only statement and extract its structure.

    Raises MalformedSql on lexical or structural problems, ForbiddenStatement
    on anything that is not a plain single SELECT (writes, multiple
    statements, depth-0 set operations, qualified table names).
    """
    tokens = tokenize(sql)
    if not tokens:
        raise MalformedSql("statement is empty")
    statements = _split_statements(tokens)
    if len(statements) > 1:
        raise ForbiddenStatement("multiple statements are not allowed")
    if not statements:
        raise MalformedSql("statement is empty")
    tokens = statements[0]
    for tok in tokens:
        if tok.kind == "word" and tok.lower in WRITE_KEYWORDS:
            raise ForbiddenStatement(f"{tok.text.upper()} is not allowed")
    if not tokens[0].is_keyword("select", "with"):
        raise ForbiddenStatement("statement must start with SELECT")
    depths = _depths(tokens)
    cte_names, main_start = _cte_names(tokens, depths)
    if main_start >= len(tokens) or not tokens[main_start].is_keyword("select"):
        raise ForbiddenStatement("statement must start with SELECT")
    for idx in range(main_start, len(tokens)):
        # a depth-0 set operation would leave arms outside any injected
        # row constraint, so it is rejected outright
        if depths[idx] == 0 and tokens[idx].kind == "word" and tokens[idx].lower in SET_OPS:
            raise ForbiddenStatement(f"{tokens[idx].text.upper()} at statement level")
    tables = [t for t in _extract_tables(tokens, depths) if t not in cte_names]
    columns, literals = _collect_filters(tokens, depths)
    has_where = any(
        tok.is_keyword("where") and depths[idx] == 0
        for idx, tok in enumerate(tokens[main_start:], start=main_start)
    )
    return ParsedQuery(
        canonical=render(tokens),
        tables=tuple(tables),
        filter_columns=tuple(dict.fromkeys(columns)),
        filter_literals=tuple(dict.fromkeys(literals)),
        has_where=has_where,
    )


def has_nested_select(sql: str) -> bool:
    """True when any SELECT or WITH sits inside parentheses."""
    tokens = tokenize(sql)
    depths = _depths(tokens)
    return any(
        tok.kind == "word" and tok.lower in ("select", "with") and depth > 0
        for tok, depth in zip(tokens, depths)
    )


def validate_predicate(predicate: str) -> str:
    """Check a row-constraint predicate and return its canonical text."""
    tokens = tokenize(predicate)
    if not tokens:
        raise MalformedSql("predicate is empty")
    for tok in tokens:
        if tok.text == ";" and tok.kind == "op":
            raise ForbiddenStatement("';' is not allowed in a predicate")
        if tok.kind == "word" and tok.lower in WRITE_KEYWORDS:
            raise ForbiddenStatement(f"{tok.text.upper()} is not allowed in a predicate")
    _depths(tokens)
    return render(tokens)


def inject_constraint(sql: str, predicate: str) -> str:
    """AND a predicate into the statement's outermost WHERE clause.

    With no existing WHERE, one is inserted before the first statement-level
    GROUP BY / HAVING / ORDER BY / LIMIT, or appended. The result is always
    canonical text.
    """
    parse_select(sql)  # reuse full validation
    pred = validate_predicate(predicate)
    tokens = _split_statements(tokenize(sql))[0]
    depths = _depths(tokens)
    _, main_start = _cte_names(tokens, depths)

    where_idx = None
    for idx in range(main_start, len(tokens)):
        if depths[idx] == 0 and tokens[idx].is_keyword("where"):
            where_idx = idx
            break
    if where_idx is not None:
        end = len(tokens)
        for idx in range(where_idx + 1, len(tokens)):
            if depths[idx] == 0 and tokens[idx].kind == "word" and tokens[idx].lower in _CLAUSE_STARTERS:
                end = idx
                break
        original = render(tokens[where_idx + 1 : end])
        head = render(tokens[:where_idx])
        tail = render(tokens[end:])
        out = f"{head} WHERE ({pred}) AND ({original})"
        return f"{out} {tail}" if tail else out
    insert_at = len(tokens)
    for idx in range(main_start, len(tokens)):
        if depths[idx] == 0 and tokens[idx].kind == "word" and tokens[idx].lower in _CLAUSE_STARTERS:
            insert_at = idx
            break
    head = render(tokens[:insert_at])
    tail = render(tokens[insert_at:])
    out = f"{head} WHERE {pred}"
    return f"{out} {tail}" if tail else out
