"""Query routing: intention classification, rewriting, prototype matching.

The route step decides how a query will be handled before any SQL exists:
which intention category it falls into, how the text should be normalized
for downstream prompts, which tables are worth targeting, and whether a
stored question/answer pair already covers it (the FAQ path, which skips
SQL generation entirely).

Classification itself is delegated to the completion provider through a
structured route prompt; the deterministic rules in ``classify_intention``
are both the offline provider's brain and the documented category
definitions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    EmptyInput,
    EmptyPrototypeStore,
    MalformedDocument,
    MalformedRouteOutput,
    NoAccessibleTables,
    UnclassifiableQuery,
)
from .auth import MinimalUserProfile
from .gateway import Gateway, PromptText
from .textutil import canonicalize, words

INTENTIONS = (
    "faq", "level", "rank", "rank_time", "percent", "change", "multi",
    "unclassifiable",
)

RANK_WORDS = frozenset(
    "highest lowest largest smallest biggest top most least maximum minimum".split()
)
CHANGE_WORDS = frozenset(
    """
    reduction reduced reduce increase increased increases decrease decreased
    grew grow growth decline declined drop dropped fell rose rise risen
    change changed trend trends
    """.split()
)
PERCENT_WORDS = frozenset({"percent", "percentage"})
MONTH_WORDS = frozenset(
    "january february march april may june july august september october november december "
    "jan feb mar apr jun jul aug sep sept oct nov dec".split()
)
TIME_SCOPE_WORDS = MONTH_WORDS | {"q1", "q2", "q3", "q4", "quarter", "quarterly", "month", "monthly"}

_YEAR = re.compile(r"^(19|20)\d{2}$")
_FAQ_PATTERNS = (
    re.compile(r"what is included in"),
    re.compile(r"what (do|does) .+ include"),
    re.compile(r"what does .+ mean"),
    re.compile(r"what is the difference between"),
    re.compile(r"^define\b"),
    re.compile(r"how is .+ (calculated|measured|defined)"),
    re.compile(r"what counts as"),
)
_LEVEL_PATTERN = re.compile(r"\bwhat (is|are|was|were)\b")

_POLITENESS = (
    "please ",
    "can you tell me ",
    "could you tell me ",
    "can you ",
    "could you ",
    "tell me ",
    "i want to know ",
    "i would like to know ",
)


def _signal_classes(text: str) -> set[str]:
    tokens = set(words(text))
    classes: set[str] = set()
    if "%" in text or tokens & PERCENT_WORDS:
        classes.add("percent")
    if tokens & CHANGE_WORDS:
        classes.add("change")
    if tokens & RANK_WORDS:
        classes.add("rank")
    if _LEVEL_PATTERN.search(text) or "how much" in text or "how many" in text:
        classes.add("level")
    return classes


def _has_time_scope(text: str) -> bool:
    for token in words(text):
        if token in TIME_SCOPE_WORDS or _YEAR.match(token):
            return True
    return False


def classify_intention(query: str) -> str:
    """Deterministic category rules for a user query.

    FAQ patterns win outright. A query is multi when it carries two distinct
    signal classes, or when two and-joined clauses each carry a signal of
    their own. Rank with an explicit time scope (a month, quarter, or year)
    is its own category since it selects different columns. A query matching
    nothing is classified in-band so the call still counts as one completion.
    """
    text = canonicalize(query)
    if not text:
        raise EmptyInput("query is empty")
    for pattern in _FAQ_PATTERNS:
        if pattern.search(text):
            return "faq"
    classes = _signal_classes(text)
    # the level pattern rides along with most phrasings, so it never counts
    # toward the two-distinct-classes trigger
    if len(classes - {"level"}) >= 2:
        return "multi"
    conjuncts = [c for c in text.split(" and ") if c.strip()]
    if len(conjuncts) >= 2:
        bearing = sum(1 for c in conjuncts if _signal_classes(c))
        if bearing >= 2:
            return "multi"
    if "percent" in classes:
        return "percent"
    if "change" in classes:
        return "change"
    if "rank" in classes:
        return "rank_time" if _has_time_scope(text) else "rank"
    if "level" in classes:
        return "level"
    return "unclassifiable"


def rewrite_query(query: str) -> str:
    """Normalize a query for downstream prompts."""
    text = canonicalize(query)
    changed = True
    while changed:
        changed = False
        for prefix in _POLITENESS:
            if text.startswith(prefix):
                text = text[len(prefix):]
                changed = True
    text = text.rstrip("?.! ").strip()
    if text.endswith(" please"):
        text = text[: -len(" please")].rstrip()
    return text


@dataclass(frozen=True)
class Prototype:
    question: str
    sources: tuple[str, ...]
    answer: str


@dataclass(frozen=True)
class PrototypeMatch:
    question: str
    sources: tuple[str, ...]
    answer: str
    similarity: float


@dataclass(frozen=True)
class RoutedQuery:
    original: str
    rewritten: str
    intention: str
    target_tables: tuple[str, ...]
    matches: tuple[PrototypeMatch, ...] = ()
    faq_answer: str | None = None
    faq_sources: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.intention not in INTENTIONS:
            raise ValueError(f"unknown intention {self.intention!r}")
        if len(self.matches) > 5:
            raise ValueError("at most five prototype matches")
        sims = [m.similarity for m in self.matches]
        if any(a < b for a, b in zip(sims, sims[1:])):
            raise ValueError("matches must be in non-increasing similarity order")
        if self.intention == "faq" and self.faq_answer is None:
            raise ValueError("faq routing needs a stored answer")


def load_prototypes(path: str) -> list[Prototype]:
    """Read stored question/sources/answer triples (tab-separated)."""
    prototypes: list[Prototype] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MalformedDocument(
                    f"expected 3 tab-separated fields, found {len(parts)}", line_no, 1
                )
            question, sources, answer = (p.strip() for p in parts)
            if not question or not answer:
                raise MalformedDocument("blank question or answer", line_no, 1)
            prototypes.append(
                Prototype(
                    question=question,
                    sources=tuple(s.strip() for s in sources.split(",") if s.strip()),
                    answer=answer,
                )
            )
    if not prototypes:
        raise EmptyPrototypeStore(f"no prototypes in {path}")
    return prototypes


ROUTE_PROMPT_HEADER = "[task:route]"


def build_route_prompt(
    profile: MinimalUserProfile,
    query: str,
    matches: tuple[PrototypeMatch, ...],
) -> PromptText:
    lines = [
        ROUTE_PROMPT_HEADER,
        "[profile]",
        profile.text_block(),
        "[categories]",
        " ".join(INTENTIONS),
    ]
    if matches:
        lines.append("[similar]")
        for m in matches:
            lines.append(f"{m.question} :: {m.similarity:.4f}")
    lines += [
        "[query]",
        query,
        "[format]",
        "intention: <category>",
        "rewritten: <one line>",
    ]
    return PromptText(role_tag="route", body="\n".join(lines))


def parse_route_output(output: str) -> tuple[str, str]:
    intention = None
    rewritten = ""
    for line in output.splitlines():
        line = line.strip()
        if line.lower().startswith("intention:"):
            intention = line.split(":", 1)[1].strip().lower()
        elif line.lower().startswith("rewritten:"):
            rewritten = line.split(":", 1)[1].strip()
    if intention not in INTENTIONS:
        raise MalformedRouteOutput(f"no usable intention in {output!r}")
    return intention, rewritten


class QueryRouter:
    def __init__(
        self,
        gateway: Gateway,
        prototypes: list[Prototype] | None = None,
        catalog: dict[str, str] | None = None,
        faq_threshold: float = 0.3,
        max_matches: int = 5,
    ):
        self.gateway = gateway
        self.prototypes = list(prototypes or [])
        self.catalog = dict(catalog or {})
        self.faq_threshold = faq_threshold
        self.max_matches = min(max_matches, 5)
        self._proto_vectors = [
            gateway.embed(p.question) for p in self.prototypes
        ]

    @classmethod
    def from_file(
        cls,
        path: str,
        gateway: Gateway,
        catalog: dict[str, str] | None = None,
        **kwargs,
    ) -> "QueryRouter":
        return cls(gateway, load_prototypes(path), catalog=catalog, **kwargs)

    def match_prototypes(self, query: str) -> tuple[PrototypeMatch, ...]:
        if not self.prototypes:
            return ()
        vec = self.gateway.embed(query)
        scored = [
            (vec.cosine(pv), idx)
            for idx, pv in enumerate(self._proto_vectors)
        ]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        top = scored[: self.max_matches]
        return tuple(
            PrototypeMatch(
                question=self.prototypes[idx].question,
                sources=self.prototypes[idx].sources,
                answer=self.prototypes[idx].answer,
                similarity=sim,
            )
            for sim, idx in top
        )

    def select_tables(self, query: str, accessible: tuple[str, ...]) -> tuple[str, ...]:
        """Rank accessible tables by token overlap with their descriptions."""
        tokens = set(words(query))
        scored = []
        for table in accessible:
            description = self.catalog.get(table, table.replace("_", " "))
            overlap = len(tokens & set(words(f"{table.replace('_', ' ')} {description}")))
            scored.append((-overlap, table))
        scored.sort()
        relevant = [t for neg, t in scored if neg < 0]
        return tuple(relevant) if relevant else tuple(t for _, t in scored)

    def route(self, query: str, profile: MinimalUserProfile, query_key: str = "") -> RoutedQuery:
        canon = canonicalize(query)
        if not canon:
            raise EmptyInput("query is empty")
        accessible = profile.tables()
        if not accessible:
            raise NoAccessibleTables(f"user {profile.user_id!r} has no table grants")
        matches = self.match_prototypes(canon)
        prompt = build_route_prompt(profile, canon, matches)
        (intention, rewritten), _record = self.gateway.complete_structured(
            prompt, parse_route_output, query_key=query_key
        )
        rewritten = rewritten or rewrite_query(canon)
        faq_answer = None
        faq_sources: tuple[str, ...] = ()
        if intention == "faq":
            if not self.prototypes:
                raise EmptyPrototypeStore("faq routing needs stored prototypes")
            best = matches[0]
            if best.similarity < self.faq_threshold:
                raise UnclassifiableQuery(
                    f"no stored question close to {canon!r} "
                    f"(best {best.similarity:.2f} < {self.faq_threshold})"
                )
            faq_answer = best.answer
            faq_sources = best.sources
        return RoutedQuery(
            original=query,
            rewritten=rewritten,
            intention=intention,
            target_tables=self.select_tables(canon, accessible),
            matches=matches,
            faq_answer=faq_answer,
            faq_sources=faq_sources,
        )
