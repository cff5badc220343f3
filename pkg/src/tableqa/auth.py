"""User profiles, grants, and sessions.

A minimal user profile is the complete access story for one user: an id, a
role label, and the set of table grants, where each grant may carry a row
constraint predicate. The profile travels with the session and is rendered
into downstream prompts, so routing and SQL generation only ever see tables
the caller is allowed to touch.

Duplicate grants for one table merge by the widest-rule-wins policy: any
unconstrained grant clears the constraints, otherwise the distinct
predicates are OR-ed together.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import (
    EmptyCatalog,
    MalformedDocument,
    UnknownSession,
    UnknownTable,
    UnknownUser,
)
from .sqlcheck import validate_predicate


@dataclass(frozen=True)
class TableGrant:
    table: str
    constraint: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "table", self.table.lower().strip())
        if not self.table:
            raise ValueError("grant needs a table name")
        if self.constraint is not None:
            object.__setattr__(self, "constraint", validate_predicate(self.constraint))


def merge_grants(grants: Iterable[TableGrant]) -> tuple[TableGrant, ...]:
    by_table: dict[str, list[str | None]] = {}
    for grant in grants:
        by_table.setdefault(grant.table, []).append(grant.constraint)
    merged: list[TableGrant] = []
    for table in sorted(by_table):
        constraints = by_table[table]
        if any(c is None for c in constraints):
            merged.append(TableGrant(table, None))
            continue
        distinct = sorted(set(constraints))
        if len(distinct) == 1:
            merged.append(TableGrant(table, distinct[0]))
        else:
            merged.append(TableGrant(table, " OR ".join(f"({c})" for c in distinct)))
    return tuple(merged)


@dataclass(frozen=True)
class MinimalUserProfile:
    user_id: str
    role: str = "member"
    grants: tuple[TableGrant, ...] = ()

    def __post_init__(self) -> None:
        if not self.user_id or not self.user_id.strip():
            raise ValueError("user_id must be non-empty")
        object.__setattr__(self, "grants", merge_grants(self.grants))

    def tables(self) -> tuple[str, ...]:
        return tuple(g.table for g in self.grants)

    def grant_map(self) -> dict[str, str | None]:
        return {g.table: g.constraint for g in self.grants}

    def text_block(self) -> str:
        """Stable rendering of the profile for inclusion in prompts."""
        lines = [f"user: {self.user_id} ({self.role})", "tables:"]
        if not self.grants:
            lines.append("  (none)")
        for grant in self.grants:
            if grant.constraint:
                lines.append(f"  - {grant.table} (rows where {grant.constraint})")
            else:
                lines.append(f"  - {grant.table}")
        return "\n".join(lines)


class Session:
    """One authenticated conversation; counts queries for staging names."""

    def __init__(self, session_id: str, profile: MinimalUserProfile):
        self.session_id = session_id
        self.profile = profile
        self.created_at = time.time()
        self._query_counter = 0

    def next_query_index(self) -> int:
        self._query_counter += 1
        return self._query_counter

    @property
    def queries_asked(self) -> int:
        return self._query_counter


def load_policy(path: str) -> dict[str, MinimalUserProfile]:
    """Parse a policy file mapping user ids to roles and grants."""
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("users"), dict):
        raise MalformedDocument("policy file needs a 'users' object", 1, 1)
    users: dict[str, MinimalUserProfile] = {}
    for user_id, entry in raw["users"].items():
        if not isinstance(entry, dict):
            raise MalformedDocument(f"user {user_id!r} entry must be an object", 1, 1)
        grants = []
        for item in entry.get("grants", []):
            if not isinstance(item, dict) or "table" not in item:
                raise MalformedDocument(
                    f"user {user_id!r} has a grant without a table", 1, 1
                )
            grants.append(TableGrant(item["table"], item.get("constraint")))
        users[user_id] = MinimalUserProfile(
            user_id=user_id,
            role=str(entry.get("role", "member")),
            grants=tuple(grants),
        )
    return users


class AuthService:
    def __init__(
        self,
        policy: dict[str, MinimalUserProfile],
        known_tables: Iterable[str] | None = None,
        id_factory: Callable[[], str] | None = None,
    ):
        self._policy = dict(policy)
        self._known = {t.lower() for t in known_tables} if known_tables is not None else None
        self._id_factory = id_factory or (lambda: uuid.uuid4().hex[:12])
        self._sessions: dict[str, Session] = {}

    @classmethod
    def from_policy_file(
        cls,
        path: str,
        known_tables: Iterable[str] | None = None,
        id_factory: Callable[[], str] | None = None,
    ) -> "AuthService":
        return cls(load_policy(path), known_tables=known_tables, id_factory=id_factory)

    def profile(self, user_id: str) -> MinimalUserProfile:
        if user_id not in self._policy:
            raise UnknownUser(f"no user {user_id!r} in policy")
        return self._policy[user_id]

    def _check_tables(self, profile: MinimalUserProfile) -> None:
        if self._known is None:
            return
        if not self._known:
            raise EmptyCatalog("store has no tables to grant")
        for grant in profile.grants:
            if grant.table not in self._known:
                raise UnknownTable(f"grant references missing table {grant.table!r}")

    def open_session(
        self,
        user_id: str | None = None,
        profile: MinimalUserProfile | None = None,
    ) -> Session:
        """Start a session for a policy user or an inline profile."""
        if (user_id is None) == (profile is None):
            raise ValueError("pass exactly one of user_id or profile")
        if profile is None:
            profile = self.profile(user_id)
        self._check_tables(profile)
        session = Session(self._id_factory(), profile)
        self._sessions[session.session_id] = session
        return session

    def session(self, session_id: str) -> Session:
        if session_id not in self._sessions:
            raise UnknownSession(f"no session {session_id!r}")
        return self._sessions[session_id]

    def close_session(self, session_id: str) -> Session:
        session = self.session(session_id)
        del self._sessions[session_id]
        return session

    @property
    def open_sessions(self) -> tuple[str, ...]:
        return tuple(self._sessions)
