"""Provider gateway.

Every model completion and every embedding in the system goes through one
``Gateway`` instance, which enforces deadlines, applies the retry policy for
structured output, and keeps exact per-query call accounting. The default
providers are deterministic and offline: a fixture-map completion provider
(optionally backed by a synthesizer callable) and a hashed-token
term-frequency embedding provider.
"""

from __future__ import annotations

import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as _FutureTimeout
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

from .errors import (
    DeadlineExceeded,
    EmptyInput,
    EmptyPrompt,
    MalformedOutput,
    ProviderUnavailable,
    UnknownSession,
)
from .textutil import canonicalize, estimate_tokens, fingerprint, stable_bucket

ROLE_TAGS = ("auth", "route", "sql_gen", "answer")

# Structured-output retries are allowed for these roles only; the answer
# role is never retried.
RETRIABLE_ROLES = frozenset({"route", "sql_gen"})


@dataclass(frozen=True)
class PromptText:
    """One prompt destined for a completion provider."""

    role_tag: str
    body: str
    token_estimate: int = 0

    def __post_init__(self) -> None:
        if self.role_tag not in ROLE_TAGS:
            raise ValueError(f"unknown role_tag {self.role_tag!r}")
        if not self.body or not self.body.strip():
            raise EmptyPrompt("prompt body is empty")
        if self.token_estimate <= 0:
            object.__setattr__(self, "token_estimate", estimate_tokens(self.body))

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.body)


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    top_p: float = 0.0
    max_output_tokens: int = 1024
    deadline: float = 10.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")
        if not 0.0 <= self.top_p <= 1.0:
            raise ValueError("top_p must be in [0, 1]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if self.deadline <= 0:
            raise ValueError("deadline must be positive")


@dataclass(frozen=True)
class CompletionRecord:
    prompt_fingerprint: str
    output: str
    latency: float
    provider_id: str
    call_index_in_query: int
    role: str = ""
    prompt_body: str = ""


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dimension: int

    def __post_init__(self) -> None:
        if len(self.values) != self.dimension:
            raise ValueError("values length does not match dimension")

    def cosine(self, other: "EmbeddingVector") -> float:
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        dot = sum(a * b for a, b in zip(self.values, other.values))
        na = math.sqrt(sum(a * a for a in self.values))
        nb = math.sqrt(sum(b * b for b in other.values))
        if na == 0.0 or nb == 0.0:
            return 0.0
        return dot / (na * nb)


class CompletionProvider(Protocol):
    provider_id: str

    def complete(self, prompt: PromptText, params: GenerationParams) -> str: ...


class EmbeddingProvider(Protocol):
    provider_id: str
    dimension: int

    def embed(self, text: str) -> EmbeddingVector: ...


class MockCompletionProvider:
    """Deterministic offline provider.

    Lookup order: fixture map keyed by prompt fingerprint (or by the
    canonicalized prompt body), then the synthesizer callable. Fixture values
    may be a single string or a list of strings consumed call-by-call (the
    last entry repeats), which lets tests script a malformed-then-valid
    sequence for retry coverage. ``delay`` simulates a slow provider.
    """

    provider_id = "mock"

    def __init__(
        self,
        fixtures: dict[str, str | list[str]] | None = None,
        synthesizer: Callable[[PromptText], str] | None = None,
        delay: float = 0.0,
    ):
        self._fixtures = dict(fixtures or {})
        self._synthesizer = synthesizer
        self._served: dict[str, int] = {}
        self.delay = delay

    def add_fixture(self, key: str, output: str | list[str]) -> None:
        self._fixtures[key] = output

    def _lookup(self, prompt: PromptText) -> str | None:
        for key in (prompt.fingerprint, canonicalize(prompt.body)):
            if key in self._fixtures:
                value = self._fixtures[key]
                if isinstance(value, str):
                    return value
                idx = min(self._served.get(key, 0), len(value) - 1)
                self._served[key] = idx + 1
                return value[idx]
        return None

    def complete(self, prompt: PromptText, params: GenerationParams) -> str:
        if self.delay:
            time.sleep(self.delay)
        output = self._lookup(prompt)
        if output is not None:
            return output
        if self._synthesizer is not None:
            return self._synthesizer(prompt)
        raise ProviderUnavailable(
            f"no fixture for prompt fingerprint {prompt.fingerprint[:12]}..."
        )


class HttpCompletionProvider:
    """Completion over a plain HTTP endpoint.

    POSTs ``{"role", "prompt", "temperature", "top_p", "max_output_tokens"}``
    and expects ``{"output": "..."}`` back. The bearer token is read from the
    named environment variable at call time; it never lives in config files.
    """

    provider_id = "http"

    def __init__(self, url: str, token_env: str = "TABLEQA_API_TOKEN", client: httpx.Client | None = None):
        self.url = url
        self.token_env = token_env
        self._client = client or httpx.Client()

    def complete(self, prompt: PromptText, params: GenerationParams) -> str:
        headers = {}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "role": prompt.role_tag,
            "prompt": prompt.body,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_output_tokens": params.max_output_tokens,
        }
        try:
            response = self._client.post(
                self.url, json=payload, headers=headers, timeout=params.deadline
            )
            response.raise_for_status()
            body = response.json()
        except httpx.TimeoutException as exc:
            raise DeadlineExceeded(str(exc)) from exc
        except (httpx.HTTPError, ValueError) as exc:
            raise ProviderUnavailable(str(exc)) from exc
        if not isinstance(body, dict) or "output" not in body:
            raise ProviderUnavailable("endpoint response missing 'output'")
        return str(body["output"])


class HashedTokenEmbeddingProvider:
    """Term-frequency embedding over stable hash buckets.

    A pure function of the canonicalized text: each word token increments one
    of ``dimension`` buckets chosen by a stable (seed-independent) hash.
    Cosine similarity over these vectors drives prototype matching.
    """

    provider_id = "hashed-token"

    def __init__(self, dimension: int = 256):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def embed(self, text: str) -> EmbeddingVector:
        canon = canonicalize(text)
        if not canon:
            raise EmptyInput("cannot embed empty text")
        counts = [0.0] * self.dimension
        for token in canon.split(" "):
            counts[stable_bucket(token, self.dimension)] += 1.0
        return EmbeddingVector(values=tuple(counts), dimension=self.dimension)


class Gateway:
    """Single entry point for completions and embeddings.

    Accounting is per query key (one key per user-query); ``begin_query``
    registers the key so a fresh query reports zero calls. Deadline
    enforcement runs the provider call on a worker thread and abandons it on
    expiry, so no partial output ever escapes.
    """

    def __init__(
        self,
        completion_provider: CompletionProvider,
        embedding_provider: EmbeddingProvider | None = None,
        max_retries: int = 1,
        default_params: GenerationParams | None = None,
    ):
        self.completion_provider = completion_provider
        self.embedding_provider = embedding_provider or HashedTokenEmbeddingProvider()
        self.max_retries = max_retries
        self.default_params = default_params or GenerationParams()
        self._records: dict[str, list[CompletionRecord]] = {}
        self._lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=8, thread_name_prefix="gateway")

    def begin_query(self, query_key: str) -> None:
        with self._lock:
            self._records.setdefault(query_key, [])

    def complete(
        self,
        prompt: PromptText,
        params: GenerationParams | None = None,
        *,
        query_key: str = "",
    ) -> CompletionRecord:
        params = params or self.default_params
        started = time.monotonic()
        future = self._executor.submit(self.completion_provider.complete, prompt, params)
        try:
            output = future.result(timeout=params.deadline)
        except _FutureTimeout:
            future.cancel()
            raise DeadlineExceeded(
                f"completion exceeded deadline of {params.deadline}s"
            ) from None
        latency = time.monotonic() - started
        with self._lock:
            bucket = self._records.setdefault(query_key, [])
            record = CompletionRecord(
                prompt_fingerprint=prompt.fingerprint,
                output=output,
                latency=latency,
                provider_id=self.completion_provider.provider_id,
                call_index_in_query=len(bucket) + 1,
                role=prompt.role_tag,
                prompt_body=prompt.body,
            )
            bucket.append(record)
        return record

    def complete_structured(
        self,
        prompt: PromptText,
        parser: Callable[[str], object],
        params: GenerationParams | None = None,
        *,
        query_key: str = "",
    ) -> tuple[object, CompletionRecord]:
        """Complete and parse, retrying once on malformed structured output.

        Retries apply only to the route and sql_gen roles; the answer role is
        returned or fails on the first attempt.
        """
        attempts = 1
        if prompt.role_tag in RETRIABLE_ROLES:
            attempts += self.max_retries
        last_error: MalformedOutput | None = None
        for _ in range(attempts):
            record = self.complete(prompt, params, query_key=query_key)
            try:
                return parser(record.output), record
            except MalformedOutput as exc:
                last_error = exc
        assert last_error is not None
        raise last_error

    def embed(self, text: str) -> EmbeddingVector:
        return self.embedding_provider.embed(text)

    def call_count(self, query_key: str) -> int:
        with self._lock:
            if query_key not in self._records:
                raise UnknownSession(f"unknown query key {query_key!r}")
            return len(self._records[query_key])

    def records(self, query_key: str) -> tuple[CompletionRecord, ...]:
        with self._lock:
            if query_key not in self._records:
                raise UnknownSession(f"unknown query key {query_key!r}")
            return tuple(self._records[query_key])

    def provider_latency(self, query_key: str) -> float:
        """Total provider wall time attributed to one query."""
        return sum(r.latency for r in self.records(query_key))
