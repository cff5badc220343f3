"""Application configuration.

One nested JSON document configures every component. Paths default to the
packaged assets so a bare ``AppConfig()`` runs fully offline against the
generated corpus. Secrets never live here: the http provider reads its
bearer token from the environment variable named by ``token_env``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import MalformedDocument

_ASSET_DIR = Path(__file__).resolve().parent / "assets"

DEFAULT_GUARDRAILS_PATH = str(_ASSET_DIR / "guardrails.txt")
DEFAULT_GAZETTEER_PATH = str(_ASSET_DIR / "gazetteer.txt")
DEFAULT_LEXICON_PATH = str(_ASSET_DIR / "lexicon.txt")
DEFAULT_PROTOTYPES_PATH = str(_ASSET_DIR / "prototypes.tsv")
DEFAULT_POLICY_PATH = str(_ASSET_DIR / "policy.json")


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "mock"  # "mock" or "http"
    url: str = ""
    token_env: str = "TABLEQA_API_TOKEN"
    deadline: float = 10.0
    max_retries: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "http" and not self.url:
            raise ValueError("http provider needs a url")
        if self.deadline <= 0:
            raise ValueError("deadline must be positive")


@dataclass(frozen=True)
class AuthConfig:
    policy_path: str = DEFAULT_POLICY_PATH


@dataclass(frozen=True)
class RouterConfig:
    prototypes_path: str = DEFAULT_PROTOTYPES_PATH
    faq_threshold: float = 0.3


@dataclass(frozen=True)
class RetrieverConfig:
    catalog_path: str = ""  # blank: derive descriptions from the manifest
    max_stage_rows: int = 200


@dataclass(frozen=True)
class AnswerConfig:
    guardrails_path: str = DEFAULT_GUARDRAILS_PATH


@dataclass(frozen=True)
class ScorerConfig:
    gazetteer_path: str = DEFAULT_GAZETTEER_PATH
    lexicon_path: str = DEFAULT_LEXICON_PATH
    strict_entities: bool = False
    relative_tolerance: float = 0.0
    window: int = 10


@dataclass(frozen=True)
class StoreConfig:
    db_path: str = ":memory:"
    seed: int = 7
    rows_per_table: int = 1000
    statement_timeout: float = 5.0


@dataclass(frozen=True)
class AppConfig:
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    auth: AuthConfig = field(default_factory=AuthConfig)
    router: RouterConfig = field(default_factory=RouterConfig)
    retriever: RetrieverConfig = field(default_factory=RetrieverConfig)
    answer: AnswerConfig = field(default_factory=AnswerConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    store: StoreConfig = field(default_factory=StoreConfig)
    deterministic_ids: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "provider": ProviderConfig,
    "auth": AuthConfig,
    "router": RouterConfig,
    "retriever": RetrieverConfig,
    "answer": AnswerConfig,
    "scorer": ScorerConfig,
    "store": StoreConfig,
}


def _build_section(name: str, cls, raw: dict):
    if name == "provider" and any(k == "token" or k.endswith("_token") for k in raw):
        raise MalformedDocument("secrets belong in the environment, not config", 1, 1)
    allowed = {f.name for f in fields(cls)}
    unknown = set(raw) - allowed
    if unknown:
        raise MalformedDocument(
            f"unknown key {sorted(unknown)[0]!r} in section {name!r}", 1, 1
        )
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise MalformedDocument(f"bad section {name!r}: {exc}", 1, 1) from exc


def parse_config(raw: dict) -> AppConfig:
    known = set(_SECTIONS) | {"deterministic_ids"}
    unknown = set(raw) - known
    if unknown:
        raise MalformedDocument(f"unknown config section {sorted(unknown)[0]!r}", 1, 1)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise MalformedDocument(f"section {name!r} must be an object", 1, 1)
        kwargs[name] = _build_section(name, cls, section)
    deterministic = raw.get("deterministic_ids", False)
    if not isinstance(deterministic, bool):
        raise MalformedDocument("deterministic_ids must be a boolean", 1, 1)
    return AppConfig(deterministic_ids=deterministic, **kwargs)


def load_config(path: str) -> AppConfig:
    with open(path, encoding="utf-8") as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(raw, dict):
        raise MalformedDocument("config root must be an object", 1, 1)
    return parse_config(raw)
