#!/usr/bin/env python3
"""Measure detection rates under deliberate response corruption.

Two mutations against otherwise clean responses: a number nothing in the
staged rows or question supports, and a verbatim run of ten or more words
copied out of the answer instructions. Both must be caught every time.
"""

import argparse
import random
import sys

from tableqa.composer import AnswerPrompt, load_guardrails, prompt_parts, render_table_block
from tableqa.config import AppConfig
from tableqa.scoring import DirectionLexicon, Gazetteer, HallucinationScorer
from tableqa.textutil import words

QUERY = "How much water did each office report?"


def grounded_pair(rng: random.Random):
    cities = ("oslo", "lyon", "osaka", "quito", "perth", "turin")
    rows = [(rng.choice(cities), rng.randint(50, 4000)) for _ in range(rng.randint(1, 4))]
    mentioned = rng.sample(rows, k=rng.randint(1, len(rows)))
    return rows, " ".join(f"{c} reported {v} megaliters." for c, v in mentioned)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=500)
    parser.add_argument("--seed", type=int, default=1009)
    args = parser.parse_args()

    config = AppConfig()
    scorer = HallucinationScorer(
        Gazetteer.from_file(config.scorer.gazetteer_path),
        DirectionLexicon.from_file(config.scorer.lexicon_path),
    )
    sections = load_guardrails(config.answer.guardrails_path)
    guardrails, example_qa = prompt_parts(sections)
    rules = [tokens for tokens in (words(r) for r in guardrails) if len(tokens) >= 10]

    rng = random.Random(args.seed)
    caught_number = caught_copy = 0
    for trial in range(args.trials):
        rows, response = grounded_pair(rng)
        prompt = AnswerPrompt(
            questions=(QUERY, QUERY),
            table_block=render_table_block(("city", "value"), rows),
            guardrails=guardrails,
            example_qa=example_qa,
            style_directives=sections["style"],
        )
        prompt_text = prompt.instruction_text()

        bogus = 1_000_003 + trial * 7
        tokens = response.split(" ")
        tokens.insert(rng.randrange(len(tokens) + 1), str(bogus))
        vector = scorer.score(QUERY, " ".join(tokens), rows=rows, prompt_text=prompt_text)
        caught_number += vector.s1 < 1.0

        rule = rng.choice(rules)
        run_len = rng.randint(10, len(rule))
        start = rng.randrange(len(rule) - run_len + 1)
        copied = " ".join(rule[start : start + run_len])
        vector = scorer.score(QUERY, f"{response} {copied}", rows=rows, prompt_text=prompt_text)
        caught_copy += vector.s4 == 0

    def report(name: str, caught: int) -> bool:
        rate = 100.0 * caught / args.trials
        print(f"{name}: {caught}/{args.trials} detected ({rate:.1f}%)")
        return caught == args.trials

    ok = report("ungrounded number", caught_number)
    ok &= report("instruction copy", caught_copy)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
