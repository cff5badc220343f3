"""Answer composition: the final prompt and the error-message paths.

The answer prompt combines the original and rewritten question, the staged
rows rendered as a delimited grid, instructional guardrails, one example
Q&A, and style directives. Error paths (no data, no access, irrelevant
query) return fixed templated messages and never call the model, so an
empty result can never turn into a fabricated answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import (
    AccessDenied,
    EmptyResult,
    MalformedDocument,
    NoAccessibleTables,
    UnclassifiableQuery,
    UnrecognizedSignal,
)
from .gateway import Gateway, PromptText
from .router import RoutedQuery

ANSWER_PROMPT_HEADER = "[task:answer]"
DATA_SECTION_HEADER = "[data]"

ANSWER_KINDS = ("answer", "access_error", "no_data", "irrelevant")


def _escape_cell(value) -> str:
    text = "" if value is None else str(value)
    return (
        text.replace("\\", "\\\\")
        .replace("|", "\\|")
        .replace("\n", "\\n")
    )


def _unescape_cell(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "n":
                out.append("\n")
            else:
                out.append(nxt)
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def render_table_block(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Delimited grid: one header line, one line per row, cells escaped."""
    lines = [" | ".join(_escape_cell(c) for c in columns)]
    for row in rows:
        lines.append(" | ".join(_escape_cell(v) for v in row))
    return "\n".join(lines)


def parse_table_block(block: str) -> tuple[tuple[str, ...], list[tuple[str, ...]]]:
    """Inverse of render_table_block (all values come back as text)."""
    lines = block.split("\n")
    header = tuple(_unescape_cell(c) for c in lines[0].split(" | "))
    rows = [
        tuple(_unescape_cell(c) for c in line.split(" | "))
        for line in lines[1:]
    ]
    return header, rows


@dataclass(frozen=True)
class AnswerPrompt:
    questions: tuple[str, str]  # (original, rewritten)
    table_block: str
    guardrails: tuple[str, ...]
    example_qa: tuple[str, str]
    style_directives: str

    def __post_init__(self) -> None:
        if not self.guardrails:
            raise ValueError("guardrails must be non-empty")

    def render(self) -> PromptText:
        lines = [ANSWER_PROMPT_HEADER, "[guardrails]"]
        for idx, rule in enumerate(self.guardrails, start=1):
            lines.append(f"{idx}. {rule}")
        if self.style_directives:
            lines += ["[style]", self.style_directives]
        lines += [
            "[example]",
            f"Q: {self.example_qa[0]}",
            f"A: {self.example_qa[1]}",
            DATA_SECTION_HEADER,
            self.table_block,
            "[question]",
            self.questions[0],
            "[rewritten]",
            self.questions[1],
        ]
        return PromptText(role_tag="answer", body="\n".join(lines))

    def instruction_text(self) -> str:
        """Instruction-only prompt text for the copy check.

        The data grid and both question lines are replaced by a window
        breaker: answers are expected to quote cell values and restate the
        user's wording, so only the fixed instructions count as copyable.
        """
        body = self.render().body.replace(self.table_block, "\x1d")
        for question in self.questions:
            body = body.replace(question, "\x1d")
        return body


@dataclass(frozen=True)
class AnswerRecord:
    kind: str
    text: str
    staged_ref: str | None = None
    prompt_used: AnswerPrompt | None = None
    sources: tuple[str, ...] = ()
    sql: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ANSWER_KINDS:
            raise ValueError(f"unknown answer kind {self.kind!r}")
        if not self.text.strip():
            raise ValueError("answer text must be non-empty")
        if self.kind == "answer" and (self.prompt_used is None or not self.staged_ref):
            raise ValueError("kind=answer requires prompt_used and staged_ref")


def load_guardrails(path: str) -> dict[str, str]:
    """Parse a sectioned text asset: [name] headers, body until next header."""
    sections: dict[str, list[str]] = {}
    current: str | None = None
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                sections[current] = []
                continue
            if line.strip() and current is None:
                raise MalformedDocument("text before first [section]", line_no, 1)
            if current is not None:
                sections[current].append(line)
    return {name: "\n".join(body).strip() for name, body in sections.items()}


REQUIRED_SECTIONS = (
    "guardrails",
    "style",
    "example",
    "error:access",
    "error:no_data",
    "error:irrelevant",
)


def prompt_parts(sections: dict[str, str]) -> tuple[tuple[str, ...], tuple[str, str]]:
    """Split loaded sections into guardrail lines and the example Q/A pair."""
    guardrails = tuple(
        line.strip() for line in sections["guardrails"].splitlines() if line.strip()
    )
    example_lines = [l for l in sections["example"].splitlines() if l.strip()]
    question = next((l[2:].strip() for l in example_lines if l.startswith("Q:")), "")
    answer = next((l[2:].strip() for l in example_lines if l.startswith("A:")), "")
    if not question or not answer:
        raise MalformedDocument("example section needs 'Q:' and 'A:' lines", 1, 1)
    return guardrails, (question, answer)


class AnswerComposer:
    def __init__(self, gateway: Gateway, sections: dict[str, str]):
        for name in REQUIRED_SECTIONS:
            if name not in sections or not sections[name].strip():
                raise MalformedDocument(f"missing section [{name}]", 1, 1)
        self.gateway = gateway
        self.sections = sections
        self.guardrails, self.example_qa = prompt_parts(sections)

    @classmethod
    def from_file(cls, path: str, gateway: Gateway) -> "AnswerComposer":
        return cls(gateway, load_guardrails(path))

    def build_prompt(
        self,
        routed: RoutedQuery,
        columns: Sequence[str],
        rows: Sequence[Sequence],
    ) -> AnswerPrompt:
        return AnswerPrompt(
            questions=(routed.original, routed.rewritten),
            table_block=render_table_block(columns, rows),
            guardrails=self.guardrails,
            example_qa=self.example_qa,
            style_directives=self.sections["style"],
        )

    def compose_answer(
        self,
        routed: RoutedQuery,
        columns: Sequence[str],
        rows: Sequence[Sequence],
        staged_ref: str,
        sql: str | None = None,
        sources: tuple[str, ...] = (),
        query_key: str = "",
    ) -> AnswerRecord:
        """Run the answer prompt over staged rows (zero rows short-circuit)."""
        if not rows:
            return self.no_data(staged_ref=None)
        prompt = self.build_prompt(routed, columns, rows)
        record = self.gateway.complete(prompt.render(), query_key=query_key)
        return AnswerRecord(
            kind="answer",
            text=record.output,
            staged_ref=staged_ref,
            prompt_used=prompt,
            sources=sources,
            sql=sql,
        )

    def no_data(self, staged_ref: str | None = None) -> AnswerRecord:
        return AnswerRecord(
            kind="no_data", text=self.sections["error:no_data"], staged_ref=staged_ref
        )

    def access_error(self) -> AnswerRecord:
        return AnswerRecord(kind="access_error", text=self.sections["error:access"])

    def irrelevant(self) -> AnswerRecord:
        return AnswerRecord(kind="irrelevant", text=self.sections["error:irrelevant"])

    def classify_error_path(self, signal: Exception) -> AnswerRecord:
        """Deterministic mapping from upstream errors to templated answers."""
        if isinstance(signal, (AccessDenied, NoAccessibleTables)):
            return self.access_error()
        if isinstance(signal, EmptyResult):
            return self.no_data()
        if isinstance(signal, UnclassifiableQuery):
            return self.irrelevant()
        raise UnrecognizedSignal(f"no answer path for {type(signal).__name__}")
