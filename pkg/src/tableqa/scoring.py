"""Deterministic hallucination flags over (query, sql, staged rows, response).

Five checks, no model calls:

  s1  number grounding: fraction of response number occurrences found in the
      staged rows or in the query itself
  s2  entity grounding: every entity the query names must appear in the
      response (set containment; strict equality sits behind a flag)
  s3  filter fidelity: query keywords with a mapped column must see that
      column inside WHERE / GROUP BY / HAVING
  s4  regurgitation: no ten-word window of the response may appear verbatim
      in the final prompt outside the rendered data grid
  s5  directional consistency: -1 when the query has no directional or
      comparative language, else 1 only when every queried direction is
      reflected in the response

Every flag below full marks carries evidence pairs (claim, note) naming what
was missing or copied.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import EmptyGazetteer, MalformedDocument
from .sqlcheck import ParsedQuery, parse_select
from .textutil import canonicalize, words

Evidence = tuple[tuple[str, str], ...]

ASSET_DIR = Path(__file__).resolve().parent / "assets"
DEFAULT_GAZETTEER_PATH = str(ASSET_DIR / "gazetteer.txt")
DEFAULT_LEXICON_PATH = str(ASSET_DIR / "lexicon.txt")

# Calendar-style tokens are handled as entities, never as numbers.
_DATE = re.compile(r"\b\d{4}-\d{2}-\d{2}\b|\b\d{1,2}/\d{1,2}/\d{2,4}\b")
_NUMBER = re.compile(r"(?<![\w.])-?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?")
_PERCENT_AFTER = re.compile(r"\s*%|\s+percent\b", re.IGNORECASE)

_WORD_RUN = re.compile(r"[a-z0-9]+(?:['-][a-z0-9]+)*")
# Capitalized runs of two or more words feed the heuristic entity pass.
_CAP_RUN = re.compile(r"(?<![\w])([A-Z][\w'-]*(?:[ ]+[A-Z][\w'-]*)+)")
_LEAD_STOPWORDS = frozenset(
    "the a an this that these those what which how when where who why is are was "
    "were do does did can could will would should please in on for of to and or "
    "at by from with as it its".split()
)


@dataclass(frozen=True)
class NumberMention:
    value: Decimal
    percent: bool
    raw: str
    position: int


@dataclass(frozen=True)
class EntityMention:
    text: str  # normalized form
    cls: str
    start: int
    end: int
    source: str  # "gazetteer" or "heuristic"


def extract_numbers(text: str) -> list[NumberMention]:
    """Every numeric occurrence: integers, decimals, separators, percents."""
    blanked = _DATE.sub(lambda m: " " * len(m.group()), text)
    mentions: list[NumberMention] = []
    for match in _NUMBER.finditer(blanked):
        raw = match.group()
        try:
            value = Decimal(raw.replace(",", ""))
        except InvalidOperation:  # pragma: no cover - regex precludes this
            continue
        percent = bool(_PERCENT_AFTER.match(blanked, match.end()))
        mentions.append(
            NumberMention(value=value, percent=percent, raw=raw, position=match.start())
        )
    return mentions


def _load_tagged_lines(path: str) -> list[tuple[str, str, str]]:
    """Shared reader: 'term<TAB>class' with an optional canonical third field."""
    rows: list[tuple[str, str, str]] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split("\t")]
            if len(parts) not in (2, 3) or not parts[0] or not parts[1]:
                raise MalformedDocument("expected 'term<TAB>class[<TAB>canonical]'", line_no, 1)
            canonical = parts[2] if len(parts) == 3 else parts[0]
            rows.append((parts[0], parts[1], canonical))
    return rows


def _norm_term(term: str) -> str:
    return " ".join(_WORD_RUN.findall(canonicalize(term)))


class Gazetteer:
    """Known entity surface forms mapped to a class and a canonical form."""

    def __init__(self, entries: Iterable[tuple[str, str, str]] = ()):
        self._terms: dict[str, tuple[str, str]] = {}
        self._max_words = 0
        self.extend(entries)

    @classmethod
    def from_file(cls, path: str) -> "Gazetteer":
        return cls(_load_tagged_lines(path))

    def extend(self, entries: Iterable[tuple[str, str, str]]) -> None:
        for term, tag, canonical in entries:
            key = _norm_term(term)
            if not key:
                continue
            self._terms[key] = (tag, _norm_term(canonical))
            self._max_words = max(self._max_words, len(key.split(" ")))

    def __len__(self) -> int:
        return len(self._terms)

    def lookup(self, phrase: str) -> tuple[str, str] | None:
        return self._terms.get(_norm_term(phrase))

    def match(self, text: str) -> list[EntityMention]:
        """Longest-first scan over word tokens of the canonicalized text."""
        canon = canonicalize(text)
        tokens = list(_WORD_RUN.finditer(canon))
        found: list[EntityMention] = []
        i = 0
        while i < len(tokens):
            hit = None
            for width in range(min(self._max_words, len(tokens) - i), 0, -1):
                phrase = " ".join(t.group() for t in tokens[i : i + width])
                entry = self._terms.get(phrase)
                if entry is not None:
                    hit = (width, phrase, entry)
                    break
            if hit is None:
                i += 1
                continue
            width, phrase, (tag, canonical) = hit
            found.append(
                EntityMention(
                    text=canonical,
                    cls=tag,
                    start=tokens[i].start(),
                    end=tokens[i + width - 1].end(),
                    source="gazetteer",
                )
            )
            i += width
        return found


def extract_entities(text: str, gazetteer: Gazetteer) -> list[EntityMention]:
    """Gazetteer matches plus capitalized multi-word runs from the raw text."""
    if len(gazetteer) == 0:
        raise EmptyGazetteer("gazetteer has no terms")
    mentions = gazetteer.match(text)
    seen = {m.text for m in mentions}
    for match in _CAP_RUN.finditer(text):
        parts = match.group(1).split()
        while parts and parts[0].lower() in _LEAD_STOPWORDS:
            parts.pop(0)
        if len(parts) < 2:
            continue
        phrase = _norm_term(" ".join(parts))
        entry = gazetteer.lookup(phrase)
        normalized = entry and entry[1] or phrase
        if normalized in seen:
            continue
        seen.add(normalized)
        mentions.append(
            EntityMention(
                text=normalized,
                cls=entry[0] if entry else "name",
                start=match.start(1),
                end=match.end(1),
                source="heuristic",
            )
        )
    return mentions


class DirectionLexicon:
    """Directional and comparative terms tagged increase, decrease, compare."""

    CLASSES = ("increase", "decrease", "compare")

    def __init__(self, entries: Iterable[tuple[str, str, str]] = ()):
        self._terms: dict[str, str] = {}
        for term, tag, _canonical in entries:
            if tag not in self.CLASSES:
                raise MalformedDocument(f"unknown direction class {tag!r}", 1, 1)
            self._terms[_norm_term(term)] = tag

    @classmethod
    def from_file(cls, path: str) -> "DirectionLexicon":
        return cls(_load_tagged_lines(path))

    def __len__(self) -> int:
        return len(self._terms)

    def terms_in(self, text: str) -> list[tuple[str, str]]:
        tokens = _WORD_RUN.findall(canonicalize(text))
        return [(tok, self._terms[tok]) for tok in tokens if tok in self._terms]

    def classes_in(self, text: str) -> set[str]:
        return {tag for _tok, tag in self.terms_in(text)}


def default_gazetteer() -> Gazetteer:
    return Gazetteer.from_file(DEFAULT_GAZETTEER_PATH)


def default_lexicon() -> DirectionLexicon:
    return DirectionLexicon.from_file(DEFAULT_LEXICON_PATH)


def staged_numbers(rows: Sequence[Sequence]) -> set[Decimal]:
    """Every number literally present in the staged cells."""
    values: set[Decimal] = set()
    for row in rows:
        for cell in row:
            if isinstance(cell, bool) or cell is None:
                continue
            if isinstance(cell, (int, float, Decimal)):
                values.add(Decimal(str(cell)))
            else:
                values.update(m.value for m in extract_numbers(str(cell)))
    return values


def number_check(
    response: str,
    allowed: Iterable[Decimal],
    relative_tolerance: float = 0.0,
) -> tuple[float, Evidence]:
    """s1: fraction of response number occurrences that are grounded."""
    mentions = extract_numbers(response)
    if not mentions:
        return 1.0, ()
    allowed_set = set(allowed)

    def grounded(value: Decimal) -> bool:
        if value in allowed_set:
            return True
        if relative_tolerance > 0.0:
            for candidate in allowed_set:
                scale = max(abs(candidate), abs(value))
                if scale and abs(candidate - value) / scale <= Decimal(str(relative_tolerance)):
                    return True
        return False

    misses = [m for m in mentions if not grounded(m.value)]
    score = (len(mentions) - len(misses)) / len(mentions)
    evidence = tuple(
        (m.raw, "number not present in staged rows or query") for m in misses
    )
    return score, evidence


def entity_check(
    query: str,
    response: str,
    gazetteer: Gazetteer,
    strict_equality: bool = False,
) -> tuple[int, Evidence]:
    """s2: query entities must all reappear in the response."""
    query_entities = {m.text for m in extract_entities(query, gazetteer)}
    if not query_entities and not strict_equality:
        return 1, ()
    response_entities = {m.text for m in extract_entities(response, gazetteer)}
    missing = sorted(query_entities - response_entities)
    evidence = [(e, "query entity missing from response") for e in missing]
    if strict_equality:
        extra = sorted(response_entities - query_entities)
        evidence += [(e, "response entity the query never named") for e in extra]
    return (1 if not evidence else 0), tuple(evidence)


def query_check(
    query: str,
    parsed: ParsedQuery,
    keyword_maps: Mapping[str, Mapping[str, str]],
) -> tuple[int, Evidence]:
    """s3: mapped query keywords must surface as filter columns in the SQL."""
    canon = canonicalize(query)
    misses: list[tuple[str, str]] = []
    for table in parsed.tables:
        mapping = keyword_maps.get(table)
        if not mapping:
            continue
        for keyword, column in sorted(mapping.items()):
            if not re.search(rf"(?<!\w){re.escape(keyword)}(?!\w)", canon):
                continue
            if column.lower() not in parsed.filter_columns:
                misses.append(
                    (keyword, f"column {column!r} absent from WHERE/GROUP BY/HAVING")
                )
    return (1 if not misses else 0), tuple(misses)


def _window_set(text: str, window: int) -> set[tuple[str, ...]]:
    shingles: set[tuple[str, ...]] = set()
    # \x1d marks where the data grid was removed; windows never span it.
    for segment in text.split("\x1d"):
        tokens = words(segment)
        for i in range(len(tokens) - window + 1):
            shingles.add(tuple(tokens[i : i + window]))
    return shingles


def regurgitation_check(
    response: str,
    prompt_text: str,
    window: int = 10,
) -> tuple[int, Evidence]:
    """s4: flag any ten-word response window copied from the prompt."""
    if window <= 0:
        raise ValueError("window must be positive")
    prompt_windows = _window_set(prompt_text, window)
    tokens = words(response)
    copied: list[tuple[str, str]] = []
    for i in range(len(tokens) - window + 1):
        shingle = tuple(tokens[i : i + window])
        if shingle in prompt_windows:
            copied.append((" ".join(shingle), "verbatim window from the prompt"))
    return (1 if not copied else 0), tuple(copied)


def modifier_check(
    query: str,
    response: str,
    lexicon: DirectionLexicon,
) -> tuple[int, Evidence]:
    """s5: -1 without directional language, else directions must carry over."""
    query_classes = lexicon.classes_in(query)
    if not query_classes:
        return -1, ()
    response_classes = lexicon.classes_in(response)
    evidence: list[tuple[str, str]] = []
    for cls in sorted(query_classes):
        if cls == "compare":
            # A comparison is answered by stating which way the figure moved.
            satisfied = bool(response_classes)
        else:
            satisfied = cls in response_classes
        if not satisfied:
            evidence.append((cls, "queried direction missing from response"))
    return (1 if not evidence else 0), tuple(evidence)


@dataclass(frozen=True)
class ScoreVector:
    s1: float
    s2: int
    s3: int
    s4: int
    s5: int
    evidence: dict[str, Evidence] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.s1 <= 1.0:
            raise ValueError("s1 must be in [0, 1]")
        for name in ("s2", "s3", "s4"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")
        if self.s5 not in (-1, 0, 1):
            raise ValueError("s5 must be -1, 0, or 1")
        checks = [
            ("s1", self.s1 < 1.0),
            ("s2", self.s2 < 1),
            ("s3", self.s3 < 1),
            ("s4", self.s4 < 1),
            ("s5", self.s5 == 0),
        ]
        for name, failed in checks:
            if failed and not self.evidence.get(name):
                raise ValueError(f"{name} below full marks needs evidence")

    def as_list(self) -> list[float]:
        return [self.s1, self.s2, self.s3, self.s4, self.s5]


class HallucinationScorer:
    """Pure scoring over one answered query; no model calls, no state."""

    def __init__(
        self,
        gazetteer: Gazetteer,
        lexicon: DirectionLexicon,
        strict_entities: bool = False,
        relative_tolerance: float = 0.0,
        window: int = 10,
    ):
        self.gazetteer = gazetteer
        self.lexicon = lexicon
        self.strict_entities = strict_entities
        self.relative_tolerance = relative_tolerance
        self.window = window

    def allowed_numbers(self, query: str, rows: Sequence[Sequence]) -> set[Decimal]:
        allowed = staged_numbers(rows)
        allowed.update(m.value for m in extract_numbers(query))
        return allowed

    def score(
        self,
        query: str,
        response: str,
        rows: Sequence[Sequence] = (),
        sql: str | None = None,
        keyword_maps: Mapping[str, Mapping[str, str]] | None = None,
        prompt_text: str | None = None,
    ) -> ScoreVector:
        s1, ev1 = number_check(
            response, self.allowed_numbers(query, rows), self.relative_tolerance
        )
        s2, ev2 = entity_check(query, response, self.gazetteer, self.strict_entities)
        if sql is not None and keyword_maps:
            s3, ev3 = query_check(query, parse_select(sql), keyword_maps)
        else:
            s3, ev3 = 1, ()
        if prompt_text is not None:
            s4, ev4 = regurgitation_check(response, prompt_text, self.window)
        else:
            s4, ev4 = 1, ()
        s5, ev5 = modifier_check(query, response, self.lexicon)
        return ScoreVector(
            s1=s1,
            s2=s2,
            s3=s3,
            s4=s4,
            s5=s5,
            evidence={"s1": ev1, "s2": ev2, "s3": ev3, "s4": ev4, "s5": ev5},
        )
