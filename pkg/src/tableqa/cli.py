"""Command line entry points.

``generate-corpus`` writes a synthetic database plus its manifest, ``repl``
and ``ask`` run questions through a fully wired pipeline, ``score`` grades a
saved question/SQL/rows/response bundle, and ``serve`` starts the HTTP
service.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .composer import AnswerPrompt, load_guardrails, prompt_parts, render_table_block
from .config import AppConfig, load_config
from .corpus import CorpusSpec, build_corpus, save_manifest
from .pipeline import Application, TraceRecord
from .scoring import DirectionLexicon, Gazetteer, HallucinationScorer
from .sqlcheck import parse_select
from .store import TableStore


def _load_app(config_path: str | None) -> Application:
    config = load_config(config_path) if config_path else AppConfig()
    return Application(config)


def _print_trace(trace: TraceRecord) -> None:
    click.echo(f"[{trace.kind}] {trace.answer.text}")
    # show the statement that actually ran, constraints included
    if trace.sql_executed or trace.sql_model:
        click.echo(f"sql: {trace.sql_executed or trace.sql_model}")
    if trace.answer.sources:
        click.echo(f"sources: {', '.join(trace.answer.sources)}")
    if trace.scores is not None:
        click.echo(f"scores: {trace.scores.as_list()}")
        for flag, items in sorted(trace.scores.evidence.items()):
            if items:
                click.echo(f"  {flag} evidence: {'; '.join(str(i) for i in items)}")
    click.echo(f"llm calls: {trace.llm_calls}")


@click.group()
def main() -> None:
    """Question answering over granted tables, with answer grading."""


@main.command("generate-corpus")
@click.option("--db", "db_path", default="corpus.sqlite", show_default=True)
@click.option("--manifest", "manifest_path", default="manifest.json", show_default=True)
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--rows", default=1000, show_default=True, type=int)
def generate_corpus(db_path: str, manifest_path: str, seed: int, rows: int) -> None:
    """Build the synthetic table corpus and write its manifest."""
    # both outputs are regenerated from scratch, same as the manifest
    Path(db_path).unlink(missing_ok=True)
    store = TableStore(db_path)
    manifest = build_corpus(store, CorpusSpec(seed=seed, rows_per_table=rows))
    save_manifest(manifest, manifest_path)
    for name, info in sorted(manifest["tables"].items()):
        click.echo(f"{name}: {info['rows']} rows")
    click.echo(f"database: {db_path}")
    click.echo(f"manifest: {manifest_path}")


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--user", default="analyst", show_default=True)
@click.argument("question")
def ask(config_path: str | None, user: str, question: str) -> None:
    """Run one question and print the graded trace."""
    app = _load_app(config_path)
    session = app.open_session(user_id=user)
    trace = app.ask(session.session_id, question)
    _print_trace(trace)
    app.close_session(session.session_id)


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--user", default="analyst", show_default=True)
def repl(config_path: str | None, user: str) -> None:
    """Interactive loop; blank line or EOF exits."""
    app = _load_app(config_path)
    session = app.open_session(user_id=user)
    click.echo(f"session {session.session_id} as {user}; granted: "
               f"{', '.join(session.profile.tables()) or 'nothing'}")
    while True:
        try:
            line = input("? ").strip()
        except (EOFError, KeyboardInterrupt):
            break
        if not line or line in ("exit", "quit"):
            break
        trace = app.ask(session.session_id, line)
        _print_trace(trace)
    app.close_session(session.session_id)
    click.echo("bye")


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(config_path: str | None, host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    config = load_config(config_path) if config_path else AppConfig()
    uvicorn.run(create_app(config), host=host, port=port)


@main.command()
@click.argument("bundle", type=click.Path(exists=True))
def score(bundle: str) -> None:
    """Grade a saved bundle: query, sql, staged rows, response.

    The bundle is JSON with keys ``query``, ``response``, ``staged``
    (``columns`` and ``rows``), optional ``sql``, ``keyword_map``, and
    ``expected``. With ``expected`` present the exit code reports the match.
    """
    with open(bundle, encoding="utf-8") as handle:
        quad = json.load(handle)
    config = AppConfig()
    scorer = HallucinationScorer(
        Gazetteer.from_file(config.scorer.gazetteer_path),
        DirectionLexicon.from_file(config.scorer.lexicon_path),
    )
    staged = quad.get("staged", {})
    columns = staged.get("columns", [])
    rows = [tuple(r) for r in staged.get("rows", [])]
    sql = quad.get("sql")
    keyword_maps = None
    if sql and quad.get("keyword_map"):
        table = parse_select(sql).tables[0]
        keyword_maps = {table: quad["keyword_map"]}
    prompt_text = None
    if columns and rows:
        sections = load_guardrails(config.answer.guardrails_path)
        guardrails, example_qa = prompt_parts(sections)
        prompt = AnswerPrompt(
            questions=(quad["query"], quad["query"]),
            table_block=render_table_block(columns, rows),
            guardrails=guardrails,
            example_qa=example_qa,
            style_directives=sections["style"],
        )
        prompt_text = prompt.instruction_text()
    vector = scorer.score(
        quad["query"],
        quad["response"],
        rows=rows,
        sql=sql,
        keyword_maps=keyword_maps,
        prompt_text=prompt_text,
    )
    click.echo(f"scores: {vector.as_list()}")
    for flag, items in sorted(vector.evidence.items()):
        if items:
            click.echo(f"  {flag} evidence: {'; '.join(str(i) for i in items)}")
    if "expected" in quad:
        expected = [float(v) for v in quad["expected"]]
        got = [float(v) for v in vector.as_list()]
        match = expected == got
        click.echo(f"expected: {quad['expected']} -> {'match' if match else 'MISMATCH'}")
        if not match:
            sys.exit(1)
