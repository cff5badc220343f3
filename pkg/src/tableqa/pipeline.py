"""End-to-end query pipeline.

``Application`` wires every component together: an authenticated session asks
a question, the router picks an intention and target tables, the retriever
generates and runs SQL under the session's grants, the composer turns staged
rows into prose, and the scorer grades that prose. One ``TraceRecord`` per
question captures the whole path.

Call accounting per question, by path:

* standard data question: 3 completions (route, sql_gen, answer)
* faq: 2 (route, answer over the stored text staged as a one-cell grid)
* data question with zero matching rows: 2 (route, sql_gen)
* unclassifiable question: 1 (route)
* no table grants at all: 0 (refused before any model call)
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field

from .auth import AuthService, MinimalUserProfile, Session
from .composer import AnswerComposer, AnswerRecord
from .config import AppConfig
from .corpus import CorpusSpec, build_corpus
from .errors import (
    AccessDenied,
    MalformedDocument,
    NoAccessibleTables,
    UnclassifiableQuery,
)
from .gateway import (
    Gateway,
    GenerationParams,
    HttpCompletionProvider,
    MockCompletionProvider,
)
from .mockmodel import CorpusModel
from .retriever import SqlRetriever
from .router import QueryRouter, RoutedQuery
from .scoring import DirectionLexicon, Gazetteer, HallucinationScorer, ScoreVector
from .sqlcheck import parse_select
from .store import TableStore

# every trace carries all five stage timings; skipped stages stay at 0.0
STAGES: tuple[str, ...] = ("route", "sql_gen", "run_query", "answer", "score")

FAQ_COLUMN = "faq_answer"


@dataclass
class TraceRecord:
    """Everything one question produced, in execution order."""

    query: str
    session_id: str
    query_index: int
    answer: AnswerRecord
    routed: RoutedQuery | None = None
    scores: ScoreVector | None = None
    sql_model: str | None = None
    sql_executed: str | None = None
    primary_table: str | None = None
    staged_ref: str | None = None
    stage_timings: dict[str, float] = field(default_factory=dict)
    llm_calls: int = 0

    def __post_init__(self) -> None:
        missing = set(STAGES) - set(self.stage_timings)
        if missing:
            raise ValueError(f"stage timings missing {sorted(missing)}")
        if self.answer.kind != "answer" and self.scores is not None:
            raise ValueError("only composed answers are scored")

    @property
    def kind(self) -> str:
        return self.answer.kind

    def canonical(self) -> dict:
        """Content-only view: no wall-clock fields, stable key order."""
        scores = self.scores.as_list() if self.scores else None
        evidence = None
        if self.scores:
            evidence = {
                flag: sorted(str(item) for item in items)
                for flag, items in sorted(self.scores.evidence.items())
            }
        return {
            "query": self.query,
            "session_id": self.session_id,
            "query_index": self.query_index,
            "kind": self.kind,
            "intention": self.routed.intention if self.routed else None,
            "rewritten": self.routed.rewritten if self.routed else None,
            "target_tables": list(self.routed.target_tables) if self.routed else [],
            "answer": self.answer.text,
            "sources": list(self.answer.sources),
            "sql_model": self.sql_model,
            "sql_executed": self.sql_executed,
            "primary_table": self.primary_table,
            "staged_ref": self.staged_ref,
            "scores": scores,
            "evidence": evidence,
            "llm_calls": self.llm_calls,
        }

    def canonical_json(self) -> str:
        return json.dumps(
            self.canonical(), sort_keys=True, ensure_ascii=False, separators=(",", ":")
        )


def _load_catalog(path: str) -> dict[str, str]:
    with open(path, encoding="utf-8") as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(raw, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
    ):
        raise MalformedDocument("catalog must map table names to descriptions", 1, 1)
    return raw


class Application:
    """One fully wired pipeline over one table store."""

    def __init__(
        self,
        config: AppConfig | None = None,
        *,
        store: TableStore | None = None,
        manifest: dict | None = None,
        completion_provider=None,
        embedding_provider=None,
    ):
        cfg = config or AppConfig()
        self.config = cfg

        if store is None:
            store = TableStore(
                cfg.store.db_path, statement_timeout=cfg.store.statement_timeout
            )
            manifest = build_corpus(
                store,
                CorpusSpec(seed=cfg.store.seed, rows_per_table=cfg.store.rows_per_table),
            )
        elif manifest is None:
            raise ValueError("a prebuilt store needs its manifest")
        self.store = store
        self.manifest = manifest

        if completion_provider is None:
            if cfg.provider.kind == "http":
                completion_provider = HttpCompletionProvider(
                    cfg.provider.url, token_env=cfg.provider.token_env
                )
            else:
                completion_provider = MockCompletionProvider(
                    synthesizer=CorpusModel(manifest)
                )
        self.gateway = Gateway(
            completion_provider,
            embedding_provider,
            max_retries=cfg.provider.max_retries,
            default_params=GenerationParams(deadline=cfg.provider.deadline),
        )

        id_factory = None
        if cfg.deterministic_ids:
            counter = itertools.count(1)
            id_factory = lambda: f"s{next(counter):04d}"
        self.auth = AuthService.from_policy_file(
            cfg.auth.policy_path,
            known_tables=store.list_tables(),
            id_factory=id_factory,
        )

        if cfg.retriever.catalog_path:
            catalog = _load_catalog(cfg.retriever.catalog_path)
        else:
            catalog = {
                name: info.get("description", "")
                for name, info in manifest["tables"].items()
            }
        self.router = QueryRouter.from_file(
            cfg.router.prototypes_path,
            self.gateway,
            catalog=catalog,
            faq_threshold=cfg.router.faq_threshold,
        )
        self.retriever = SqlRetriever(
            self.gateway, store, max_stage_rows=cfg.retriever.max_stage_rows
        )
        self.composer = AnswerComposer.from_file(cfg.answer.guardrails_path, self.gateway)

        gazetteer = Gazetteer.from_file(cfg.scorer.gazetteer_path)
        gazetteer.extend(
            (city, "city", city) for city in manifest["entities"]["city"]
        )
        self.scorer = HallucinationScorer(
            gazetteer,
            DirectionLexicon.from_file(cfg.scorer.lexicon_path),
            strict_entities=cfg.scorer.strict_entities,
            relative_tolerance=cfg.scorer.relative_tolerance,
            window=cfg.scorer.window,
        )
        self.keyword_maps = manifest["filter_keywords"]

    # -- sessions ----------------------------------------------------------

    def open_session(
        self,
        user_id: str | None = None,
        profile: MinimalUserProfile | None = None,
    ) -> Session:
        return self.auth.open_session(user_id=user_id, profile=profile)

    def close_session(self, session_id: str) -> Session:
        session = self.auth.close_session(session_id)
        self.store.drop_stages(f"stage_{session_id}")
        return session

    # -- the pipeline ------------------------------------------------------

    def ask(self, session_id: str, query: str) -> TraceRecord:
        """Run one question through route, retrieve, answer, and score."""
        session = self.auth.session(session_id)
        profile = session.profile
        qindex = session.next_query_index()
        query_key = f"{session_id}:{qindex}"
        self.gateway.begin_query(query_key)
        timings = dict.fromkeys(STAGES, 0.0)

        def finish(
            answer: AnswerRecord,
            routed: RoutedQuery | None = None,
            scores: ScoreVector | None = None,
            sql_model: str | None = None,
            sql_executed: str | None = None,
            primary_table: str | None = None,
            staged_ref: str | None = None,
        ) -> TraceRecord:
            return TraceRecord(
                query=query,
                session_id=session_id,
                query_index=qindex,
                answer=answer,
                routed=routed,
                scores=scores,
                sql_model=sql_model,
                sql_executed=sql_executed,
                primary_table=primary_table,
                staged_ref=staged_ref,
                stage_timings=timings,
                llm_calls=self.gateway.call_count(query_key),
            )

        started = time.monotonic()
        try:
            routed = self.router.route(query, profile, query_key=query_key)
        except (NoAccessibleTables, UnclassifiableQuery) as signal:
            timings["route"] = time.monotonic() - started
            return finish(self.composer.classify_error_path(signal))
        timings["route"] = time.monotonic() - started

        if routed.intention == "unclassifiable":
            return finish(self.composer.irrelevant(), routed=routed)

        stage_name = f"stage_{session_id}_q{qindex}"
        if routed.intention == "faq":
            # the stored text is staged like any query result, then the
            # answer prompt runs over that one-cell grid
            columns = (FAQ_COLUMN,)
            rows = ((routed.faq_answer,),)
            started = time.monotonic()
            staged_ref = self.store.stage_result(stage_name, list(columns), rows)
            timings["run_query"] = time.monotonic() - started
            answer, scores = self._answer_and_score(
                routed, columns, rows, staged_ref, None, routed.faq_sources,
                query_key, timings,
            )
            return finish(answer, routed=routed, scores=scores, staged_ref=staged_ref)

        started = time.monotonic()
        try:
            sql = self.retriever.generate_sql(routed, profile, query_key=query_key)
        finally:
            timings["sql_gen"] = time.monotonic() - started

        started = time.monotonic()
        try:
            result = self.retriever.execute(sql, profile)
        except AccessDenied as signal:
            timings["run_query"] = time.monotonic() - started
            return finish(
                self.composer.classify_error_path(signal), routed=routed, sql_model=sql
            )
        rows = result.rows[: self.retriever.max_stage_rows]
        staged_ref = None
        if rows:
            staged_ref = self.store.stage_result(stage_name, list(result.columns), rows)
        timings["run_query"] = time.monotonic() - started

        primary = routed.target_tables[0] if routed.target_tables else None
        answer, scores = self._answer_and_score(
            routed, result.columns, rows, staged_ref, sql, (), query_key, timings
        )
        return finish(
            answer,
            routed=routed,
            scores=scores,
            sql_model=sql,
            sql_executed=result.sql,
            primary_table=self._primary_table(sql, primary),
            staged_ref=staged_ref,
        )

    def _primary_table(self, sql: str, fallback: str | None) -> str | None:
        tables = parse_select(sql).tables
        return tables[0] if tables else fallback

    def _answer_and_score(
        self,
        routed: RoutedQuery,
        columns,
        rows,
        staged_ref: str | None,
        sql: str | None,
        sources: tuple[str, ...],
        query_key: str,
        timings: dict[str, float],
    ) -> tuple[AnswerRecord, ScoreVector | None]:
        started = time.monotonic()
        answer = self.composer.compose_answer(
            routed,
            columns,
            rows,
            staged_ref or "",
            sql=sql,
            sources=sources,
            query_key=query_key,
        )
        timings["answer"] = time.monotonic() - started
        if answer.kind != "answer":
            return answer, None

        started = time.monotonic()
        scores = self.scorer.score(
            routed.original,
            answer.text,
            rows=rows,
            sql=sql,
            keyword_maps=self.keyword_maps if sql else None,
            prompt_text=answer.prompt_used.instruction_text(),
        )
        timings["score"] = time.monotonic() - started
        return answer, scores
