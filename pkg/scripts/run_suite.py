#!/usr/bin/env python3
"""Drive a mixed query suite through a fresh pipeline and summarize it.

With --check-determinism the whole suite runs twice on two fresh pipelines
and every canonical trace must come back byte-identical.
"""

import argparse
import sys
from collections import Counter

from tableqa.config import AppConfig, StoreConfig
from tableqa.corpus import METRIC_TABLES
from tableqa.pipeline import Application


def suite_queries(manifest: dict) -> list[str]:
    countries = manifest["countries"]
    metrics = [m for m, _ in METRIC_TABLES.values()]
    months = ("Jan", "Mar", "Jun", "Sep", "Nov", "Dec")
    queries = []
    for i in range(10):
        queries.append(
            f"What is {metrics[i % len(metrics)]} levels for offices in {countries[i % len(countries)]}?"
        )
    for i in range(10):
        word = "highest" if i % 2 == 0 else "lowest"
        queries.append(f"Which country has the {word} {metrics[i % len(metrics)]}?")
    for i in range(10):
        queries.append(
            f"Which city had the highest {metrics[i % len(metrics)]} for {months[i % len(months)]} 2022?"
        )
    for i in range(8):
        queries.append(
            f"What is the annual reduction of {metrics[i % len(metrics)]} in {countries[(i + 3) % len(countries)]}?"
        )
    for i in range(6):
        queries.append(f"What % of {metrics[i % len(metrics)]} came from Europe in 2021?")
    for i in range(6):
        queries.append(
            f"Which countries reduced {metrics[i % len(metrics)]} consistently in the last 2 years "
            "and increased renewable electricity?"
        )
    queries += [
        "What is included in business travel?",
        "What is the difference between scope 1 and scope 2 emissions?",
        "How is water consumption measured?",
        "What counts as renewable electricity?",
        "What does the reporting period mean?",
        "What do scope 3 emissions include?",
        "Please fax the quarterly brochure to the mailroom",
        "Tell me a story about mountains",
        "Who won the football cup?",
        "Print this page for me",
    ]
    return queries


def run_once(seed: int, rows: int, user: str, verbose: bool) -> list[str]:
    config = AppConfig(
        store=StoreConfig(seed=seed, rows_per_table=rows), deterministic_ids=True
    )
    app = Application(config)
    session = app.open_session(user_id=user)
    kinds: Counter = Counter()
    calls = 0
    flagged = 0
    lines = []
    for query in suite_queries(app.manifest):
        trace = app.ask(session.session_id, query)
        kinds[trace.kind] += 1
        calls += trace.llm_calls
        if trace.scores and (
            trace.scores.s1 < 1.0 or 0 in (trace.scores.s2, trace.scores.s3, trace.scores.s4)
        ):
            flagged += 1
        if verbose:
            scores = trace.scores.as_list() if trace.scores else None
            print(f"[{trace.kind:>12}] calls={trace.llm_calls} scores={scores}  {query}")
        lines.append(trace.canonical_json())
    app.close_session(session.session_id)
    print(f"queries: {len(lines)}  kinds: {dict(kinds)}")
    print(f"completions: {calls}  answers flagged: {flagged}")
    return lines


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--rows", type=int, default=1000)
    parser.add_argument("--user", default="analyst")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--check-determinism", action="store_true")
    args = parser.parse_args()

    first = run_once(args.seed, args.rows, args.user, args.verbose)
    if args.check_determinism:
        second = run_once(args.seed, args.rows, args.user, verbose=False)
        mismatches = sum(1 for a, b in zip(first, second) if a != b)
        if mismatches or len(first) != len(second):
            print(f"determinism: FAILED ({mismatches} traces differ)")
            return 1
        print("determinism: ok, every canonical trace byte-identical")
    return 0


if __name__ == "__main__":
    sys.exit(main())
