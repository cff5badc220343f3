"""Offline stand-in for the completion provider.

``CorpusModel`` is a callable that answers the three prompt shapes the
pipeline emits (route, sql_gen, answer) by actually reading the prompt body:
it classifies and rewrites the query for routing, synthesizes one SELECT
over the advertised schemas for retrieval, and composes a short reply from
the staged grid for answering. Numbers in its answers come only from the
grid or the question, which is exactly the behavior the hallucination flags
reward, and every output is a pure function of the prompt text.

Construct it with the corpus manifest when city names and planted champions
should be known to the model; without one it still knows the static
geography and metric vocabulary.
"""

from __future__ import annotations

import re

from .composer import ANSWER_PROMPT_HEADER, parse_table_block
from .corpus import CONTINENTS, COUNTRIES, MONTH_ALIASES, MONTH_NAMES, QUARTER_COLUMNS
from .gateway import PromptText
from .retriever import SQL_PROMPT_HEADER
from .router import RANK_WORDS, ROUTE_PROMPT_HEADER, classify_intention, rewrite_query
from .scoring import DirectionLexicon, Gazetteer, default_gazetteer, default_lexicon
from .textutil import canonicalize, words

_ASC_WORDS = frozenset({"lowest", "smallest", "least", "minimum", "fewest", "bottom"})
_YEAR = re.compile(r"\b(19|20)\d{2}\b")
_NUMERIC_CELL = re.compile(r"-?\d+(?:\.\d+)?")


def _sections(body: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    current = ""
    for line in body.split("\n"):
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            out.setdefault(current, [])
            continue
        out.setdefault(current, []).append(line)
    return out


def _phrase_in(phrase: str, text: str) -> bool:
    return re.search(rf"(?<!\w){re.escape(phrase)}(?!\w)", text) is not None


class CorpusModel:
    provider_roles = ("route", "sql_gen", "answer")

    def __init__(
        self,
        manifest: dict | None = None,
        gazetteer: Gazetteer | None = None,
        lexicon: DirectionLexicon | None = None,
    ):
        self.manifest = manifest or {}
        self.gazetteer = gazetteer or default_gazetteer()
        self.lexicon = lexicon or default_lexicon()
        entities = self.manifest.get("entities", {})
        self.cities: tuple[str, ...] = tuple(entities.get("city", ()))
        if self.cities:
            self.gazetteer.extend((c, "city", c) for c in self.cities)
        self.years: tuple[int, ...] = tuple(self.manifest.get("years", ()))

    def __call__(self, prompt: PromptText) -> str:
        head = prompt.body.split("\n", 1)[0]
        if head == ROUTE_PROMPT_HEADER:
            return self.route(prompt.body)
        if head == SQL_PROMPT_HEADER:
            return self.sql(prompt.body)
        if head == ANSWER_PROMPT_HEADER:
            return self.answer(prompt.body)
        raise ValueError(f"unrecognized prompt header {head!r}")

    # -- route ---------------------------------------------------------

    def route(self, body: str) -> str:
        query = self._section_text(body, "query")
        intention = classify_intention(query)
        return f"intention: {intention}\nrewritten: {rewrite_query(query)}"

    # -- sql -----------------------------------------------------------

    def sql(self, body: str) -> str:
        sections = _sections(body)
        intention = " ".join(sections.get("intention", ())).strip()
        query = "\n".join(sections.get("query", ())).strip()
        tables = self._parse_schemas(sections.get("tables", ()))
        if not tables:
            raise ValueError("sql prompt advertises no tables")
        table, columns = next(iter(tables.items()))
        return self._synthesize_sql(intention, query, table, columns)

    def _parse_schemas(self, lines) -> dict[str, list[tuple[str, str]]]:
        tables: dict[str, list[tuple[str, str]]] = {}
        for line in lines:
            line = line.strip()
            match = re.fullmatch(r"([\w-]+)\((.*)\)", line)
            if not match:
                continue
            cols = []
            for part in match.group(2).split(", "):
                bits = part.split(" ")
                cols.append((bits[0], bits[1] if len(bits) > 1 else ""))
            tables[match.group(1)] = cols
        return tables

    def _synthesize_sql(self, intention, query, table, columns) -> str:
        canon = canonicalize(query)
        tokens = words(query)
        names = [c for c, _t in columns]

        countries = [c for c in COUNTRIES if _phrase_in(c, canon)]
        continents = [c for c in CONTINENTS if _phrase_in(c, canon)]
        cities = [c for c in self.cities if _phrase_in(c, canon)]
        years = sorted({int(m.group()) for m in _YEAR.finditer(canon)})
        months = sorted(
            {MONTH_ALIASES[t] for t in tokens if t in MONTH_ALIASES}
        )
        quarters = [t for t in tokens if t in QUARTER_COLUMNS]

        filters: list[str] = []
        if "level" in names:
            if cities or {"city", "cities"} & set(tokens):
                level = "city"
            else:
                level = "country"
            filters.append(f"level = '{level}'")
        if cities:
            filters.append(self._in_filter("city", cities))
        if countries:
            filters.append(self._in_filter("country", countries))
        if continents:
            filters.append(self._in_filter("continent", continents))

        value_cols = [m for m in months if m in names]
        value_cols += [q for q in quarters if q in names]
        if not value_cols:
            value_cols = [
                c for c, t in columns
                if t == "INTEGER" and c in tokens and c not in ("year",)
            ]
        if not value_cols and "yearly_total" in names:
            value_cols = ["yearly_total"]
        if not value_cols:
            value_cols = [c for c, t in columns if t == "INTEGER"][:1] or [names[0]]
        value = value_cols[0]

        place = "city" if (cities or ("level = 'city'" in filters)) else "country"
        if place not in names:
            place = names[0]

        if intention == "percent":
            return self._percent_sql(table, filters, years, countries, continents)

        if intention in ("rank", "rank_time"):
            if years:
                filters.append(f"year = {years[-1]}" if len(years) == 1 else self._year_in(years))
            order = "ASC" if set(tokens) & _ASC_WORDS else "DESC"
            select = [place]
            if "year" in names:
                select.append("year")
            select += value_cols[:1]
            if "unit" in names:
                select.append("unit")
            return (
                f"SELECT {', '.join(select)} FROM {table}"
                + self._where(filters)
                + f" ORDER BY {value} {order} LIMIT 1"
            )

        if intention in ("change", "multi"):
            last_n = re.search(r"last (\d+) years", canon)
            if years:
                span = years
            elif last_n and self.years:
                span = list(self.years[-int(last_n.group(1)) :])
            elif intention == "multi" and len(self.years) >= 2:
                span = list(self.years[-2:])
            else:
                span = []  # no named window: keep the full year series
            if span:
                filters.append(self._year_in(span))
            if intention == "multi" or not (countries or cities or continents):
                group_place = place if intention == "multi" else None
                if group_place and group_place in names:
                    return (
                        f"SELECT {group_place}, year, SUM({value}) AS total FROM {table}"
                        + self._where(filters)
                        + f" GROUP BY {group_place}, year ORDER BY {group_place}, year"
                    )
                return (
                    f"SELECT year, SUM({value}) AS total FROM {table}"
                    + self._where(filters)
                    + " GROUP BY year ORDER BY year"
                )
            select = ["year"] + value_cols[:1]
            if "unit" in names:
                select.append("unit")
            return (
                f"SELECT {', '.join(select)} FROM {table}"
                + self._where(filters)
                + " ORDER BY year"
            )

        # level and anything else: plain filtered projection
        if years:
            filters.append(f"year = {years[-1]}" if len(years) == 1 else self._year_in(years))
        select = [c for c in (place, "year") if c in names]
        select += value_cols
        if "unit" in names:
            select.append("unit")
        sql = f"SELECT {', '.join(dict.fromkeys(select))} FROM {table}" + self._where(filters)
        if "year" in names:
            sql += " ORDER BY year"
        return sql

    @staticmethod
    def _in_filter(column: str, values) -> str:
        if len(values) == 1:
            return f"{column} = '{values[0]}'"
        quoted = ", ".join("'" + v + "'" for v in values)
        return f"{column} IN ({quoted})"

    @staticmethod
    def _year_in(years) -> str:
        return f"year IN ({', '.join(str(y) for y in years)})"

    @staticmethod
    def _where(filters: list[str]) -> str:
        return f" WHERE {' AND '.join(filters)}" if filters else ""

    def _percent_sql(self, table, filters, years, countries, continents) -> str:
        inner = list(filters)
        if countries:
            part = f"country = '{countries[0]}'"
        elif continents:
            part = f"continent = '{continents[0]}'"
        else:
            part = "level = 'country'"
        if part not in inner:
            inner.append(part)
        outer = [f for f in filters if not f.startswith(("country ", "continent ", "city "))]
        if years:
            year_filter = f"year = {years[-1]}" if len(years) == 1 else self._year_in(years)
            inner.append(year_filter)
            outer.append(year_filter)
        inner_sql = (
            f"SELECT SUM(yearly_total) FROM {table}" + self._where(inner)
        )
        return (
            f"SELECT ROUND(100.0 * ({inner_sql}) / SUM(yearly_total), 1) AS share_pct, "
            f"SUM(yearly_total) AS overall_total FROM {table}" + self._where(outer)
        )

    # -- answer --------------------------------------------------------

    def answer(self, body: str) -> str:
        sections = _sections(body)
        question = "\n".join(sections.get("question", ())).strip()
        grid = "\n".join(sections.get("data", ())).strip("\n")
        header, rows = parse_table_block(grid)
        entities = [m.text for m in self.gazetteer.match(question)]
        text = self._compose(question, header, rows, entities)
        return self._echo_missing(text, entities)

    def _compose(self, question, header, rows, entities) -> str:
        if not rows:
            return "The staged table came back empty for this question."
        cols = {name: idx for idx, name in enumerate(header)}
        first = rows[0]

        # single text cell: curated answer text staged as a one-cell table
        if len(header) == 1 and len(rows) == 1 and not _NUMERIC_CELL.fullmatch(first[0]):
            return first[0]

        metric_terms = []
        for entity in entities:
            entry = self.gazetteer.lookup(entity)
            if entry and entry[0] == "metric":
                metric_terms.append(entity)
        if metric_terms:
            metric = metric_terms[0]
        elif "metric" in cols and first[cols["metric"]]:
            metric = first[cols["metric"]]
        else:
            metric = "the requested figure"
        unit = first[cols["unit"]] if "unit" in cols else ""
        unit_suffix = f" {unit}" if unit else ""
        period = self._period_phrase(question, entities)

        if "share_pct" in cols:
            subject = self._subject_place(question) or "the selected group"
            total = f", out of {first[cols['overall_total']]}{unit_suffix} in total" if "overall_total" in cols else ""
            return f"{subject} accounted for {first[cols['share_pct']]} percent of {metric}{period}{total}."

        value_col = self._value_column(header, rows)
        place_col = next((c for c in ("city", "country", "continent") if c in cols and first[cols[c]]), None)

        qtokens = set(words(question))
        rank_word = next((w for w in RANK_WORDS if w in qtokens), None)
        if rank_word and len(rows) == 1 and place_col and value_col:
            return (
                f"{first[cols[place_col]]} had the {rank_word} {metric}{period}, "
                f"at {first[cols[value_col]]}{unit_suffix}."
            )

        if "year" in cols and len(rows) > 1 and value_col:
            return self._trend_sentence(question, header, rows, cols, value_col, metric, unit_suffix, place_col)

        if len(rows) == 1 and value_col:
            where = f" in {first[cols[place_col]]}" if place_col else ""
            return f"{metric}{where} was {first[cols[value_col]]}{unit_suffix}{period}."

        shown = ", ".join(v for v in first if v)
        return f"The staged table holds {metric} rows such as: {shown}."

    def _trend_sentence(self, question, header, rows, cols, value_col, metric, unit_suffix, place_col) -> str:
        year_idx, value_idx = cols["year"], cols[value_col]
        if place_col and place_col in cols and len({r[cols[place_col]] for r in rows}) > 1:
            # per-place series: name the places whose value fell, then rose
            pidx = cols[place_col]
            series: dict[str, list[tuple[str, str]]] = {}
            for row in rows:
                series.setdefault(row[pidx], []).append((row[year_idx], row[value_idx]))
            down = [p for p, pts in series.items() if len(pts) > 1 and float(pts[-1][1]) < float(pts[0][1])]
            up = [p for p, pts in series.items() if len(pts) > 1 and float(pts[-1][1]) > float(pts[0][1])]
            any_years = next(iter(series.values()))
            span = f"between {any_years[0][0]} and {any_years[-1][0]}"
            queried = self.lexicon.classes_in(question)
            parts = []
            if down:
                parts.append(f"{', '.join(sorted(down)[:4])} reduced {metric} {span}")
            elif "decrease" in queried:
                parts.append(f"no staged group reduced {metric} {span}")
            if "increase" in queried:
                if up:
                    parts.append(f"{', '.join(sorted(up)[:4])} increased {span}")
                else:
                    parts.append(f"none increased {span}")
            if not parts:
                parts.append(
                    f"{metric} ran from {rows[0][value_idx]} to {rows[-1][value_idx]} {span}"
                )
            text = "; ".join(parts) + "."
            return text[0].upper() + text[1:]
        first, last = rows[0], rows[-1]
        v0, v1 = float(first[value_idx]), float(last[value_idx])
        verb = "fell" if v1 < v0 else ("rose" if v1 > v0 else "held steady")
        data_class = "decrease" if v1 < v0 else ("increase" if v1 > v0 else "")
        subject = self._subject_place(question)
        lead = f"In {subject}, {metric}" if subject else f"{metric}".capitalize()
        sentence = (
            f"{lead} {verb} from {first[value_idx]}{unit_suffix} in {first[year_idx]} "
            f"to {last[value_idx]}{unit_suffix} in {last[year_idx]}."
        )
        # a query framed around one direction deserves an explicit verdict on it
        queried = self.lexicon.classes_in(question)
        denials = []
        if "decrease" in queried and data_class != "decrease":
            denials.append("There was no reduction.")
        if "increase" in queried and data_class != "increase":
            denials.append("There was no increase.")
        return " ".join(denials + [sentence])

    def _value_column(self, header, rows) -> str | None:
        skip = {"year", "level", "unit", "metric"}
        for idx, name in enumerate(header):
            if name in skip:
                continue
            cells = [r[idx] for r in rows if r[idx]]
            if cells and all(_NUMERIC_CELL.fullmatch(c) for c in cells):
                return name
        return None

    def _subject_place(self, question: str) -> str:
        canon = canonicalize(question)
        for name in list(COUNTRIES) + list(CONTINENTS) + list(self.cities):
            if _phrase_in(name, canon):
                return name
        return ""

    def _period_phrase(self, question: str, entities) -> str:
        months = [e for e in entities if e in MONTH_NAMES]
        years = [m.group() for m in _YEAR.finditer(question)]
        if months and years:
            return f" in {months[0]} {years[0]}"
        if years:
            return f" in {years[0]}" if len(years) == 1 else f" between {years[0]} and {years[-1]}"
        if months:
            return f" in {months[0]}"
        return ""

    def _echo_missing(self, text: str, entities) -> str:
        canon = canonicalize(text)
        missing = [e for e in dict.fromkeys(entities) if not _phrase_in(e, canon)]
        if missing:
            text += f" Figures refer to {', '.join(missing)}."
        return text

    def _section_text(self, body: str, name: str) -> str:
        return "\n".join(_sections(body).get(name, ())).strip()
