"""Exhaustive DFS over a Model: safety checks, traces, statistics and coverage."""
from __future__ import annotations

import hashlib
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING

from .config import Config
from .errors import IntegrityError, InternalLogicError, ResourceError
from .model import Model
from .state import StatementId, Transition

if TYPE_CHECKING:
    from .ltl.search import Lasso

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 100_000
# Rough per-entry cost of a stored key on top of its bytes.
ENTRY_OVERHEAD = 72

# Path element of the stutter self-loop added to terminal states by the LTL search.
STUTTER = (-1, -1)
STUTTER_STMT = StatementId(-1, "stutter")
INVALID_END_STATE = "invalid_end_state"

Step = tuple[int, int]


@dataclass(frozen=True)
class SearchLimits:
    max_depth: int = 1_000_000
    max_states: int = 20_000_000
    max_memory_mb: int = 8192
    debug_store: bool = False

    @classmethod
    def from_config(cls, config: Config) -> SearchLimits:
        return cls(config.max_depth, config.max_states, config.max_memory_mb, config.debug_store)


@dataclass
class SearchStats:
    states_stored: int = 0
    transitions_fired: int = 0
    max_depth: int = 0
    elapsed: float = 0.0
    memory_estimate: int = 0
    truncated: int = 0

    def as_dict(self) -> dict[str, int | float]:
        return {
            "states_stored": self.states_stored,
            "transitions_fired": self.transitions_fired,
            "max_depth": self.max_depth,
            "elapsed": round(self.elapsed, 3),
            "memory_estimate": self.memory_estimate,
            "truncated": self.truncated,
        }


class VerdictKind(StrEnum):
    PASS = "pass"
    ASSERTION_VIOLATION = "assertion-violation"
    ACCEPTANCE_CYCLE = "acceptance-cycle"


@dataclass(frozen=True)
class TraceStep:
    step: int
    owner: int
    stmt: StatementId
    digest: str

    def line(self) -> str:
        label = self.stmt.label or self.stmt.name
        return f"{self.step} {self.owner} {self.stmt.ordinal} {label} {self.digest}"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    complete: bool = True
    check: str | None = None
    detail: str = ""
    path: tuple[Step, ...] = ()
    trace: tuple[TraceStep, ...] = ()
    lasso: Lasso | None = None

    @property
    def passed(self) -> bool:
        return self.kind is VerdictKind.PASS


@dataclass
class CoverageReport:
    statements: tuple[StatementId, ...]
    fired: dict[int, int] = field(default_factory=dict)
    notes: dict[int, str] = field(default_factory=dict)

    @property
    def unreached(self) -> list[StatementId]:
        return [s for s in self.statements if self.fired.get(s.ordinal, 0) == 0]

    @property
    def total(self) -> int:
        return len(self.statements)


def digest(key: bytes) -> str:
    return hashlib.blake2b(key, digest_size=8).hexdigest()


class VisitedStore:
    """Visited set keyed on encoded states, with an optional full-state check."""

    def __init__(self, limits: SearchLimits):
        self.limits = limits
        self._keys: dict[bytes, object] | set[bytes] = {} if limits.debug_store else set()
        self.memory_estimate = 0

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key) -> bool:
        return key in self._keys

    def seen(self, key: bytes, state: object) -> bool:
        if key not in self._keys:
            return False
        if self.limits.debug_store and self._keys[key] != state:
            raise InternalLogicError("two distinct states share one encoding")
        return True

    def add(self, key, state: object) -> None:
        limits = self.limits
        if len(self._keys) >= limits.max_states:
            raise ResourceError(f"visited store full: {limits.max_states} states")
        size = _key_size(key) + ENTRY_OVERHEAD
        if self.memory_estimate + size > limits.max_memory_mb * 1024 * 1024:
            raise ResourceError(f"visited store over {limits.max_memory_mb} MB")
        self.memory_estimate += size
        if isinstance(self._keys, dict):
            self._keys[key] = state
        else:
            self._keys.add(key)
        if len(self._keys) % PROGRESS_EVERY == 0:
            logger.debug(f"{len(self._keys)} states stored")


def _key_size(key) -> int:
    if isinstance(key, bytes):
        return len(key)
    if isinstance(key, tuple) and key and isinstance(key[0], bytes):
        # (model state, automaton state) keys of the product search
        return len(key[0]) + 8
    return 16


def coverage_report(model: Model, fired: Counter) -> CoverageReport:
    statements = tuple(model.statements())
    note_of = getattr(model, "statement_note", None)
    notes = {}
    if note_of is not None:
        notes = {s.ordinal: note for s in statements if (note := note_of(s.ordinal))}
    return CoverageReport(statements, dict(fired), notes)


def dfs_safety(model: Model, limits: SearchLimits) -> tuple[Verdict, SearchStats, CoverageReport]:
    """Depth-first search for the first failing safety assertion.

    The DFS stack holds (state, enabled transitions, next index, step taken);
    the counterexample path is read straight off it.
    """
    stats = SearchStats()
    fired: Counter = Counter()
    store = VisitedStore(limits)
    started = time.perf_counter()

    def finish(verdict: Verdict) -> tuple[Verdict, SearchStats, CoverageReport]:
        stats.elapsed = time.perf_counter() - started
        stats.states_stored = len(store)
        stats.memory_estimate = store.memory_estimate
        logger.info(f"Safety search finished: {verdict.kind} complete={verdict.complete} "
                    f"states={stats.states_stored} depth={stats.max_depth}")
        return verdict, stats, coverage_report(model, fired)

    def violation(path: list[Step], check: str, detail: str) -> tuple[Verdict, SearchStats, CoverageReport]:
        logger.warning(f"Assertion {check} violated at depth {len(path)}: {detail}")
        trace = reconstruct_trace(model, path)
        return finish(Verdict(VerdictKind.ASSERTION_VIOLATION, True, check, detail,
                              tuple(path), tuple(trace)))

    init = model.initial_state()
    store.add(model.encode_state(init), init)
    for failed in model.state_violations(init):
        return violation([], failed.name, failed.detail)
    enabled = model.enabled_transitions(init)
    if not enabled:
        return violation([], INVALID_END_STATE, "initial state has no enabled transition")
    stack: list[list] = [[init, enabled, 0, None]]

    while stack:
        frame = stack[-1]
        state, transitions, index, _ = frame
        if index >= len(transitions):
            stack.pop()
            continue
        frame[2] = index + 1
        t: Transition = transitions[index]
        succ, outcomes = model.apply_transition(state, t)
        stats.transitions_fired += 1
        fired[t.stmt.ordinal] += 1
        for outcome in outcomes:
            if not outcome.passed:
                return violation(path_to(stack, t), outcome.name, outcome.detail)
        key = model.encode_state(succ)
        if store.seen(key, succ):
            continue
        depth = len(stack)
        if depth > limits.max_depth:
            stats.truncated += 1
            continue
        store.add(key, succ)
        stats.max_depth = max(stats.max_depth, depth)
        for failed in model.state_violations(succ):
            return violation(path_to(stack, t), failed.name, failed.detail)
        enabled = model.enabled_transitions(succ)
        if not enabled:
            return violation(path_to(stack, t), INVALID_END_STATE, "no process can move")
        stack.append([succ, enabled, 0, (t.owner, t.stmt.ordinal)])

    if stats.truncated:
        logger.warning(f"Search incomplete: {stats.truncated} transitions cut at depth {limits.max_depth}")
    return finish(Verdict(VerdictKind.PASS, complete=not stats.truncated))


def replay(model: Model, path) -> tuple[object, list[TraceStep]]:
    """Re-apply a path of (owner, ordinal) steps from the initial state."""
    s = model.initial_state()
    steps = []
    for number, step in enumerate(path, 1):
        owner, ordinal = step
        enabled = model.enabled_transitions(s)
        if (owner, ordinal) == STUTTER:
            if enabled:
                raise IntegrityError(f"step {number}: stutter from a state that can move")
            steps.append(TraceStep(number, owner, STUTTER_STMT, digest(model.encode_state(s))))
            continue
        match = next((t for t in enabled if t.owner == owner and t.stmt.ordinal == ordinal), None)
        if match is None:
            raise IntegrityError(f"step {number}: ({owner}, {ordinal}) is not enabled")
        s, _ = model.apply_transition(s, match)
        steps.append(TraceStep(number, owner, match.stmt, digest(model.encode_state(s))))
    return s, steps


def reconstruct_trace(model: Model, path) -> list[TraceStep]:
    _, steps = replay(model, path)
    return steps


def path_to(stack: list[list], last: Transition) -> list[Step]:
    return [frame[3] for frame in stack[1:]] + [(last.owner, last.stmt.ordinal)]
