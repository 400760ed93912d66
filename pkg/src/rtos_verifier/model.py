"""The kernel model as a transition system: initial state, enabled transitions,
application of one transition, encoding and proposition evaluation.

The explorer and the LTL search only talk to the `Model` protocol, so the toy
models used in the tests run through the same searches.
"""
import logging
from typing import Protocol

from . import exception_engine as engine
from .config import Config
from .errors import ConfigurationError, InternalLogicError, ModelAssertionError
from .kernel import Kernel
from .sched import ACTIVE, RunQueueSet, enqueue
from .state import (
    IDLE,
    AssertionOutcome,
    GlobalState,
    Layout,
    StateCodec,
    StatementId,
    Transition,
    TransitionKind,
    active_state,
)
from .workload import (
    Mutation,
    install_workload,
    propositions,
    state_violations,
)

logger = logging.getLogger(__name__)


class Model(Protocol):
    def initial_state(self): ...

    def enabled_transitions(self, s) -> list[Transition]: ...

    def apply_transition(self, s, t: Transition) -> tuple[object, list[AssertionOutcome]]: ...

    def encode_state(self, s) -> bytes: ...

    def state_violations(self, s) -> list[AssertionOutcome]: ...

    def eval_ap(self, s, name: str) -> bool: ...

    def propositions(self) -> frozenset[str]: ...

    def statements(self) -> list[StatementId]: ...

    def process_name(self, pid: int) -> str: ...


class KernelModel:
    """Preemptive kernel plus the consumer/producer workload for one Config."""

    def __init__(self, config: Config, mutation: Mutation = Mutation.NONE):
        self.config = config
        self.mutation = mutation
        self.layout = Layout(config)
        self.kernel = Kernel(self.layout)
        # Ordinals: user programs first, then the system processes.
        self.programs = install_workload(self.kernel, mutation)
        self.kernel.install_system()
        self.kernel.seal()
        self.codec = StateCodec(self.layout)
        self._props = propositions(self.layout, self.programs)
        self.window = config.progress_window
        logger.info(f"Kernel model: {config.n_user_tasks} user tasks, "
                    f"{config.n_extra_interrupts} extra interrupts, mutation={mutation}, "
                    f"{len(self.kernel.statements)} statements")

    # -- core-state operations ---------------------------------------------

    def initial_state(self) -> GlobalState:
        """task0 runs; every other user-level thread waits in the ACTIVE array."""
        layout = self.layout
        rq = RunQueueSet()
        for pid in layout.user_level[1:]:
            rq = enqueue(rq, ACTIVE, pid, layout.thread_level(pid), layout.rq_capacity)
        return GlobalState(
            at=layout.tasks[0],
            at_stack=(),
            pc=tuple(self.kernel.entry[pid] for pid in range(layout.count)),
            thread_state=tuple(active_state(0) for _ in layout.user_level),
            regs=(0,) * layout.count,
            runqueues=rq,
            progress=self.window,
        )

    def admissible_pending(self, s: GlobalState) -> int | None:
        """Highest-priority pending exception the CPU must take before anything else."""
        layout = self.layout
        level = engine.exec_priority(s, layout)
        best = None
        pending = s.pending
        while pending:
            pid = (pending & -pending).bit_length() - 1
            pending &= pending - 1
            if pid == layout.pendsv and not (layout.is_user_level(s.at) and s.active == 0):
                continue
            pid_level = layout.exception_level(pid)
            if pid_level < level and (best is None or pid_level < layout.exception_level(best)):
                best = pid
        return best

    def arrival_offered(self, s: GlobalState, e: int) -> bool:
        """Fresh arrival of interrupt e, gated by the progress window."""
        b = engine.bit(e)
        if s.pending & b or s.active & b:
            return False
        if s.at == IDLE:
            return True
        return s.progress == self.window and not s.arrived & b

    def enabled_transitions(self, s: GlobalState) -> list[Transition]:
        kernel = self.kernel
        admissible = self.admissible_pending(s)
        if admissible is not None:
            sid = kernel.takes[admissible]
            return [Transition(admissible, sid, kernel.statement(sid.ordinal).kind)]
        enabled = []
        if s.at != IDLE:
            stmt = kernel.statement(s.pc[s.at])
            if stmt.guard is None or stmt.guard(s):
                enabled.append(Transition(s.at, stmt.sid, stmt.kind))
        for e in self.layout.interrupts:
            if self.arrival_offered(s, e):
                enabled.append(Transition(e, kernel.takes[e], TransitionKind.ITAKE))
        enabled.sort(key=lambda t: (t.owner, t.stmt.ordinal))
        return enabled

    def apply_transition(self, s: GlobalState, t: Transition) -> tuple[GlobalState, list[AssertionOutcome]]:
        layout = self.layout
        f = s.thaw()
        try:
            if t.kind in (TransitionKind.ITAKE, TransitionKind.PENDSV_TAKE):
                self._apply_take(s, f, t)
            else:
                stmt = self.kernel.statement(t.stmt.ordinal)
                if s.at != t.owner or s.pc[t.owner] != stmt.sid.ordinal or stmt.owner != t.owner:
                    raise InternalLogicError(
                        f"{layout.name(t.owner)}:{t.stmt.name} is not enabled "
                        f"(AT={layout.name(s.at)})")
                if stmt.guard is not None and not stmt.guard(s):
                    raise InternalLogicError(f"guard of {t.stmt.name} does not hold")
                stmt.effect(f)
                if t.owner in layout.tasks:
                    # Only workload statements count; softirq and handlers do not.
                    self._advance_window(f)
        except ModelAssertionError as e:
            f.outcomes.append(AssertionOutcome(e.check, False, e.detail))
        return f.freeze(), f.outcomes

    def _apply_take(self, s: GlobalState, f, t: Transition) -> None:
        layout = self.layout
        e = t.owner
        admissible = self.admissible_pending(s)
        if admissible is not None:
            if e != admissible:
                raise InternalLogicError(f"{layout.name(e)} taken while {layout.name(admissible)} is due")
        elif e == layout.pendsv or not self.arrival_offered(s, e):
            raise InternalLogicError(f"arrival of {layout.name(e)} is not enabled")
        else:
            f.arrived |= engine.bit(e)
        if e == layout.pendsv:
            engine.pendsv_take(f, layout)
        else:
            engine.itake(f, layout, e)

    def _advance_window(self, f) -> None:
        if f.arrived:
            f.arrived = 0
            f.progress = 1
        else:
            f.progress = min(f.progress + 1, self.window)

    def encode_state(self, s: GlobalState) -> bytes:
        return self.codec.encode(s)

    # -- hooks for the searches ----------------------------------------------

    def state_violations(self, s: GlobalState) -> list[AssertionOutcome]:
        return state_violations(s, self.layout)

    def eval_ap(self, s: GlobalState, name: str) -> bool:
        try:
            return self._props[name](s)
        except KeyError:
            raise ConfigurationError(f"unknown proposition {name!r}") from None

    def propositions(self) -> frozenset[str]:
        return frozenset(self._props)

    def statements(self) -> list[StatementId]:
        return [stmt.sid for stmt in self.kernel.statements]

    def statement_note(self, ordinal: int) -> str | None:
        return self.kernel.statement(ordinal).note

    def process_name(self, pid: int) -> str:
        return self.layout.name(pid)
