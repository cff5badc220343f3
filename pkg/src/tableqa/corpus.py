"""Deterministic synthetic corpus of company sustainability tables.

Six metric tables (emissions scopes 1-3, water, electricity, renewable
generation) share one wide layout: city-level and country-level rows, twelve
monthly integer columns, derived quarter and year totals, plus enough
metadata columns to make column selection a real task. A seventh table is a
per-city office registry.

Every metric value is an integer so the conservation identities are exact:
monthly values sum to the quarter and year columns, and each country row is
the column-wise sum of its city rows. Each metric table gets one planted
champion country whose lead city receives a fixed monthly boost large enough
that both the city and its country are strict maxima for every month,
quarter, and year. The returned manifest records the plants so tests and
demos can ask rank questions with known answers.

Everything is a pure function of the seed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .store import TableStore

CONTINENTS: dict[str, tuple[str, ...]] = {
    "south america": ("argentina", "brazil", "chile", "peru"),
    "north america": ("usa", "canada", "mexico"),
    "europe": ("germany", "france", "spain", "italy", "poland"),
    "asia": ("japan", "china", "india", "indonesia"),
    "oceania": ("australia", "new zealand", "fiji"),
}

COUNTRIES: tuple[str, ...] = tuple(c for group in CONTINENTS.values() for c in group)

METRIC_TABLES: dict[str, tuple[str, str]] = {
    "emissions_scope1": ("scope 1 emissions", "tonnes co2e"),
    "emissions_scope2": ("scope 2 emissions", "tonnes co2e"),
    "emissions_scope3": ("scope 3 emissions", "tonnes co2e"),
    "water_consumption": ("water consumption", "megaliters"),
    "electricity_consumption": ("electricity consumption", "mwh"),
    "renewable_energy": ("renewable energy generation", "mwh"),
}

# Routing descriptions carry alias wording so token overlap picks the right
# table for paraphrases like "renewable electricity" or "emissions type 2".
TABLE_DESCRIPTIONS: dict[str, str] = {
    "emissions_scope1": "scope 1 emissions emissions type 1 direct tonnes co2e",
    "emissions_scope2": "scope 2 emissions emissions type 2 purchased energy tonnes co2e",
    "emissions_scope3": "scope 3 emissions emissions type 3 value chain tonnes co2e",
    "water_consumption": "water consumption usage megaliters",
    "electricity_consumption": "electricity consumption power usage mwh",
    "renewable_energy": "renewable energy generation renewable electricity share mwh",
    "office_registry": "office registry offices sites headcount desks floor area",
}

REGISTRY_TABLE = "office_registry"

MONTH_NAMES: tuple[str, ...] = (
    "january", "february", "march", "april", "may", "june",
    "july", "august", "september", "october", "november", "december",
)
MONTH_COLUMNS: tuple[str, ...] = tuple(f"m{i:02d}" for i in range(1, 13))
QUARTER_COLUMNS: tuple[str, ...] = ("q1", "q2", "q3", "q4")

MONTH_ALIASES: dict[str, str] = {}
for _i, _name in enumerate(MONTH_NAMES):
    MONTH_ALIASES[_name] = MONTH_COLUMNS[_i]
    MONTH_ALIASES[_name[:3]] = MONTH_COLUMNS[_i]
MONTH_ALIASES["sept"] = "m09"

_META_COLUMNS: tuple[tuple[str, str], ...] = (
    ("record_id", "INTEGER"),
    ("site_code", "TEXT"),
    ("source_system", "TEXT"),
    ("reporting_basis", "TEXT"),
    ("data_quality", "TEXT"),
    ("verification_status", "TEXT"),
    ("collection_method", "TEXT"),
    ("estimation_flag", "INTEGER"),
    ("revision", "INTEGER"),
    ("submitted_by", "TEXT"),
    ("approved_by", "TEXT"),
    ("submission_week", "INTEGER"),
    ("approval_week", "INTEGER"),
    ("baseline_year", "INTEGER"),
    ("target_year", "INTEGER"),
    ("scope_note", "TEXT"),
    ("site_count", "INTEGER"),
    ("coverage_pct", "INTEGER"),
    ("confidence", "TEXT"),
    ("currency", "TEXT"),
    ("conversion_basis", "TEXT"),
    ("batch_id", "TEXT"),
    ("region_code", "TEXT"),
    ("iso_code", "TEXT"),
    ("timezone", "TEXT"),
    ("notes", "TEXT"),
)

_VALUE_FLOOR = 50
_VALUE_CEIL = 400


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 7
    rows_per_table: int = 1000
    years: tuple[int, ...] = (2019, 2020, 2021, 2022, 2023)

    def __post_init__(self) -> None:
        if self.rows_per_table // len(self.years) <= len(COUNTRIES):
            raise ValueError("rows_per_table too small for one city per country")

    @property
    def total_cities(self) -> int:
        return self.rows_per_table // len(self.years) - len(COUNTRIES)


def metric_table_columns() -> list[tuple[str, str]]:
    cols: list[tuple[str, str]] = [
        ("level", "TEXT"),
        ("city", "TEXT"),
        ("country", "TEXT"),
        ("continent", "TEXT"),
        ("year", "INTEGER"),
    ]
    cols += [(m, "INTEGER") for m in MONTH_COLUMNS]
    cols += [(q, "INTEGER") for q in QUARTER_COLUMNS]
    cols += [("yearly_total", "INTEGER"), ("unit", "TEXT"), ("metric", "TEXT")]
    cols += list(_META_COLUMNS)
    return cols


def _city_names(rng: random.Random, count: int) -> list[str]:
    consonants = "bdfgklmnprstv"
    vowels = "aeiou"
    suffixes = ("", "", "ton", "ville", "burg", "mar", "dale", "port", "field")
    names: list[str] = []
    seen = set(COUNTRIES)
    while len(names) < count:
        syllables = rng.randint(2, 3)
        name = "".join(rng.choice(consonants) + rng.choice(vowels) for _ in range(syllables))
        name += rng.choice(suffixes)
        if len(name) < 4 or name in seen:
            continue
        seen.add(name)
        names.append(name)
    return names


def _assign_cities(rng: random.Random, count: int) -> dict[str, list[str]]:
    names = _city_names(rng, count)
    assigned: dict[str, list[str]] = {c: [] for c in COUNTRIES}
    for i, name in enumerate(names):
        assigned[COUNTRIES[i % len(COUNTRIES)]].append(name)
    return assigned


def _continent_of(country: str) -> str:
    for continent, members in CONTINENTS.items():
        if country in members:
            return continent
    raise KeyError(country)


def _meta_values(rng: random.Random, record_id: int, country: str) -> list:
    return [
        record_id,
        f"site-{rng.randint(100, 999)}",
        rng.choice(("erp", "manual", "meter-feed", "invoice-scan")),
        rng.choice(("location", "market")),
        rng.choice(("gold", "silver", "bronze")),
        rng.choice(("verified", "self-reported", "pending")),
        rng.choice(("metered", "estimated", "invoiced")),
        rng.randint(0, 1),
        rng.randint(1, 4),
        f"team_{rng.choice('abcdef')}",
        f"ops_{rng.randint(1, 9)}",
        rng.randint(1, 52),
        rng.randint(1, 52),
        2015,
        2030,
        rng.choice(("routine", "restated", "audited")),
        rng.randint(1, 12),
        rng.randint(80, 100),
        rng.choice(("high", "medium", "low")),
        "usd",
        rng.choice(("ghg-protocol", "iso-14064")),
        f"batch-{rng.randint(1000, 9999)}",
        country[:2].upper() + str(rng.randint(10, 99)),
        country[:3].upper(),
        rng.choice(("utc", "utc+1", "utc+9", "utc-3", "utc-5")),
        rng.choice(("ok", "reviewed", "carried forward", "final")),
    ]


def _quarters(monthly: list[int]) -> list[int]:
    return [sum(monthly[i : i + 3]) for i in range(0, 12, 3)]


def build_corpus(store: TableStore, spec: CorpusSpec | None = None) -> dict:
    """Create all tables in the store and return the corpus manifest."""
    spec = spec or CorpusSpec()
    layout_rng = random.Random(f"{spec.seed}:layout")
    cities = _assign_cities(layout_rng, spec.total_cities)
    max_cities = max(len(v) for v in cities.values())
    # strict-maximum margin: beats a full country of ceiling-valued cities
    boost = max_cities * _VALUE_CEIL + 5000

    manifest: dict = {
        "seed": spec.seed,
        "years": list(spec.years),
        "boost_per_month": boost,
        "continents": {k: list(v) for k, v in CONTINENTS.items()},
        "countries": list(COUNTRIES),
        "cities": {k: list(v) for k, v in cities.items()},
        "tables": {},
        "entities": {
            "city": [c for group in cities.values() for c in group],
            "country": list(COUNTRIES),
            "continent": list(CONTINENTS),
            "metric": [m for m, _ in METRIC_TABLES.values()],
        },
        "filter_keywords": {},
    }

    keyword_map: dict[str, str] = {}
    for country in COUNTRIES:
        keyword_map[country] = "country"
    for group in cities.values():
        for city in group:
            keyword_map[city] = "city"
    for continent in CONTINENTS:
        keyword_map[continent] = "continent"
    for year in spec.years:
        keyword_map[str(year)] = "year"
    keyword_map["city"] = "level"
    keyword_map["cities"] = "level"
    keyword_map["country"] = "level"
    keyword_map["countries"] = "level"

    for table, (metric, unit) in METRIC_TABLES.items():
        rng = random.Random(f"{spec.seed}:{table}")
        champion_country = rng.choice(COUNTRIES)
        champion_city = cities[champion_country][0]
        columns = metric_table_columns()
        store.create_table(table, columns)
        rows: list[tuple] = []
        record_id = 0
        for year in spec.years:
            for country in COUNTRIES:
                continent = _continent_of(country)
                country_monthly = [0] * 12
                city_rows: list[tuple] = []
                for city in cities[country]:
                    monthly = [rng.randint(_VALUE_FLOOR, _VALUE_CEIL) for _ in range(12)]
                    if city == champion_city:
                        monthly = [v + boost for v in monthly]
                    for i, v in enumerate(monthly):
                        country_monthly[i] += v
                    record_id += 1
                    city_rows.append(
                        (
                            "city", city, country, continent, year,
                            *monthly, *_quarters(monthly), sum(monthly), unit, metric,
                            *_meta_values(rng, record_id, country),
                        )
                    )
                record_id += 1
                rows.append(
                    (
                        "country", None, country, continent, year,
                        *country_monthly, *_quarters(country_monthly),
                        sum(country_monthly), unit, metric,
                        *_meta_values(rng, record_id, country),
                    )
                )
                rows.extend(city_rows)
        store.insert_rows(table, rows)
        manifest["tables"][table] = {
            "kind": "metric",
            "metric": metric,
            "unit": unit,
            "description": TABLE_DESCRIPTIONS[table],
            "champion_country": champion_country,
            "champion_city": champion_city,
            "rows": len(rows),
        }
        manifest["filter_keywords"][table] = dict(keyword_map)

    registry_rng = random.Random(f"{spec.seed}:{REGISTRY_TABLE}")
    store.create_table(
        REGISTRY_TABLE,
        [
            ("city", "TEXT"), ("country", "TEXT"), ("continent", "TEXT"),
            ("site_code", "TEXT"), ("opened_year", "INTEGER"),
            ("headcount", "INTEGER"), ("floor_area_sqm", "INTEGER"),
            ("desks", "INTEGER"), ("meeting_rooms", "INTEGER"),
            ("parking_spaces", "INTEGER"), ("ev_chargers", "INTEGER"),
            ("occupancy_pct", "INTEGER"), ("lease_type", "TEXT"),
            ("building_grade", "TEXT"), ("energy_rating", "TEXT"),
            ("cafeteria", "INTEGER"), ("refurbished_year", "INTEGER"),
            ("batch_id", "TEXT"), ("timezone", "TEXT"), ("notes", "TEXT"),
        ],
    )
    registry_rows = []
    for country in COUNTRIES:
        for city in cities[country]:
            headcount = registry_rng.randint(40, 900)
            registry_rows.append(
                (
                    city, country, _continent_of(country),
                    f"site-{registry_rng.randint(100, 999)}",
                    registry_rng.randint(1995, 2022),
                    headcount,
                    headcount * registry_rng.randint(8, 14),
                    int(headcount * 1.1),
                    registry_rng.randint(2, 30),
                    registry_rng.randint(0, 120),
                    registry_rng.randint(0, 20),
                    registry_rng.randint(55, 98),
                    registry_rng.choice(("leased", "owned")),
                    registry_rng.choice(("a", "b", "c")),
                    registry_rng.choice(("a", "b", "c", "d")),
                    registry_rng.randint(0, 1),
                    registry_rng.randint(2005, 2023),
                    f"batch-{registry_rng.randint(1000, 9999)}",
                    registry_rng.choice(("utc", "utc+1", "utc+9", "utc-3", "utc-5")),
                    registry_rng.choice(("ok", "reviewed", "final")),
                )
            )
    store.insert_rows(REGISTRY_TABLE, registry_rows)
    manifest["tables"][REGISTRY_TABLE] = {
        "kind": "registry",
        "metric": "office facts",
        "unit": "",
        "description": TABLE_DESCRIPTIONS[REGISTRY_TABLE],
        "rows": len(registry_rows),
    }
    registry_keywords = {
        k: v for k, v in keyword_map.items() if v in ("country", "city", "continent")
    }
    manifest["filter_keywords"][REGISTRY_TABLE] = registry_keywords

    return manifest


def save_manifest(manifest: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_manifest(path: str) -> dict:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)
