"""Capture real HTTP payloads for the browser client's test fixtures.

Spins up the service in-process, replays the requests the UI makes, and
writes each response body under frontend/tests/fixtures/. The flagged-number
fixture is assembled: the scorer runs for real over a stored bundle whose
response cites a figure absent from its staged rows, and that vector plus
evidence is spliced into a captured answer payload so the shape stays
identical to live traffic.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from fastapi.testclient import TestClient

from tableqa.composer import AnswerPrompt, load_guardrails, prompt_parts, render_table_block
from tableqa.config import AppConfig, StoreConfig
from tableqa.pipeline import Application
from tableqa.scoring import DirectionLexicon, Gazetteer, HallucinationScorer
from tableqa.service import create_app
from tableqa.sqlcheck import parse_select

REPO = Path(__file__).resolve().parent.parent
FIXTURE_DIR = REPO / "frontend" / "tests" / "fixtures"
QUAD = REPO / "tests" / "data" / "quads" / "campaign_ctr.json"


def flagged_payload(base: dict) -> dict:
    """Score the fabricated-figure bundle for real and dress it as a trace."""
    quad = json.loads(QUAD.read_text(encoding="utf-8"))
    staged = quad["staged"]
    rows = [tuple(r) for r in staged["rows"]]
    table = parse_select(quad["sql"]).tables[0]

    cfg = AppConfig()
    sections = load_guardrails(cfg.answer.guardrails_path)
    guardrails, example_qa = prompt_parts(sections)
    prompt = AnswerPrompt(
        questions=(quad["query"], quad["query"]),
        table_block=render_table_block(staged["columns"], rows),
        guardrails=guardrails,
        example_qa=example_qa,
        style_directives=sections["style"],
    )
    scorer = HallucinationScorer(
        Gazetteer.from_file(cfg.scorer.gazetteer_path),
        DirectionLexicon.from_file(cfg.scorer.lexicon_path),
    )
    vector = scorer.score(
        quad["query"],
        quad["response"],
        rows=rows,
        sql=quad["sql"],
        keyword_maps={table: quad["keyword_map"]},
        prompt_text=prompt.instruction_text(),
    )

    payload = dict(base)
    payload.update(
        query=quad["query"],
        intention="level",
        rewritten=quad["query"].rstrip("?").lower(),
        target_tables=[table],
        answer=quad["response"],
        sql_model=quad["sql"],
        sql_executed=quad["sql"],
        primary_table=table,
        scores=vector.as_list(),
        evidence={flag: sorted(str(i) for i in items) for flag, items in vector.evidence.items()},
    )
    return payload


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(FIXTURE_DIR))
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    config = AppConfig(store=StoreConfig(seed=3, rows_per_table=200), deterministic_ids=True)
    client = TestClient(create_app(application=Application(config)))

    def save(name: str, payload: dict) -> None:
        (out / name).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
        print(f"wrote {out / name}")

    analyst = client.post("/sessions", json={"user_id": "analyst"}).json()
    save("session_analyst.json", analyst)
    visitor = client.post("/sessions", json={"user_id": "visitor"}).json()
    save("session_visitor.json", visitor)

    sid = analyst["session_id"]
    rank = client.post(
        f"/sessions/{sid}/query",
        json={"query": "Which country has the highest emissions type 1 emissions?"},
    ).json()
    save("query_rank_answer.json", rank)

    faq = client.post(
        f"/sessions/{sid}/query", json={"query": "What is included in business travel?"}
    ).json()
    save("query_faq.json", faq)

    denied = client.post(
        f"/sessions/{visitor['session_id']}/query",
        json={"query": "Which country has the highest emissions?"},
    ).json()
    save("query_access_error.json", denied)

    save("query_flagged_number.json", flagged_payload(rank))


if __name__ == "__main__":
    main()
