"""Consumer/producer user programs, atomic propositions and the safety checks."""
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum

from .errors import ConfigurationError
from .kernel import Kernel
from .state import (
    BLOCKED,
    AssertionOutcome,
    CallSite,
    Frame,
    GlobalState,
    Layout,
    Service,
    StatementId,
    TransitionKind,
)

# Statement labels the properties refer to.
LABEL_NONCS = "noncs"
LABEL_WANT = "want"
LABEL_CS = "cs"


class Mutation(StrEnum):
    NONE = "none"
    DROP_LOCK = "drop-lock"
    DROP_SIGNAL = "drop-signal"


def parse_mutation(name: str | None) -> Mutation:
    if name is None:
        return Mutation.NONE
    try:
        return Mutation(name)
    except ValueError:
        known = ", ".join(m.value for m in Mutation if m is not Mutation.NONE)
        raise ConfigurationError(f"unknown mutation {name!r} (known: {known})") from None


@dataclass(frozen=True)
class UserProgram:
    pid: int
    statements: tuple[StatementId, ...]

    @property
    def waiting(self) -> tuple[StatementId, ...]:
        """Every statement labelled want, the cond-wait re-acquire included."""
        return tuple(s for s in self.statements if s.label == LABEL_WANT)


def _program(kernel: Kernel, pid: int, consumer: bool, mutation: Mutation) -> UserProgram:
    """consumer: noncs; lock; while buffer == 0: {cond_wait; lock}; cs; cond_signal; unlock.

    The producer mirrors it with the buffer-full test and the cs_p bit.
    """
    name = kernel.layout.name(pid)
    capacity = kernel.config.buffer_capacity
    locked = mutation is not Mutation.DROP_LOCK
    signalled = mutation is Mutation.NONE
    added: list[StatementId] = []

    def n(step: str) -> str:
        return f"{name}.{step}"

    def add(step: str, effect, **kw) -> None:
        added.append(kernel.add(pid, n(step), effect, **kw))

    def must_wait(f: Frame) -> bool:
        return f.buffer == 0 if consumer else f.buffer >= capacity

    def set_cs(f: Frame, value: int) -> None:
        if consumer:
            f.cs_c = value
        else:
            f.cs_p = value

    def noncs(f: Frame) -> None:
        kernel.jump(f, pid, n("lock") if locked else n("want"))

    def lock(f: Frame) -> None:
        free = kernel.ldrex(f, pid) == -1
        kernel.jump(f, pid, n("strex") if free else n("lock_svc"))

    def lock_strex(f: Frame) -> None:
        kernel.jump(f, pid, n("want") if kernel.strex(f, pid, 0) else n("lock"))

    def lock_svc(f: Frame) -> None:
        kernel.svc_call(f, pid, Service.MUTEX_LOCK, n("want"))

    def want(f: Frame) -> None:
        if not must_wait(f):
            kernel.jump(f, pid, n("cs_in"))
        elif locked:
            kernel.svc_call(f, pid, Service.COND_WAIT, n("relock"))
        else:
            kernel.svc_call(f, pid, Service.PTHREAD_YIELD, n("want"))

    def relock(f: Frame) -> None:
        kernel.svc_call(f, pid, Service.MUTEX_LOCK, n("want"), CallSite.COND_WAIT)

    def cs_in(f: Frame) -> None:
        set_cs(f, 1)
        kernel.jump(f, pid, n("take") if consumer else n("put"))

    def take(f: Frame) -> None:
        f.buffer -= 1
        kernel.jump(f, pid, n("cs_out"))

    def put(f: Frame) -> None:
        f.buffer += 1
        kernel.jump(f, pid, n("cs_out"))

    def cs_out(f: Frame) -> None:
        set_cs(f, 0)
        kernel.jump(f, pid, n("signal"))

    def signal(f: Frame) -> None:
        after = n("unlock") if locked else n("noncs")
        if signalled:
            kernel.svc_call(f, pid, Service.COND_SIGNAL, after)
        else:
            kernel.jump(f, pid, after)

    def unlock(f: Frame) -> None:
        uncontended = kernel.ldrex(f, pid) == 0
        kernel.jump(f, pid, n("unlock_strex") if uncontended else n("unlock_svc"))

    def unlock_strex(f: Frame) -> None:
        kernel.jump(f, pid, n("noncs") if kernel.strex(f, pid, -1) else n("unlock"))

    def unlock_svc(f: Frame) -> None:
        kernel.svc_call(f, pid, Service.MUTEX_UNLOCK, n("noncs"))

    add("noncs", noncs, label=LABEL_NONCS)
    if locked:
        add("lock", lock, kind=TransitionKind.A_AWAITS)
        add("strex", lock_strex)
        add("lock_svc", lock_svc)
    add("want", want, label=LABEL_WANT)
    if locked:
        # Blocked in cond-wait or re-acquiring: still waiting to enter.
        add("relock", relock, label=LABEL_WANT)
    add("cs_in", cs_in, label=LABEL_CS)
    if consumer:
        add("take", take, label=LABEL_CS)
    else:
        add("put", put, label=LABEL_CS)
    add("cs_out", cs_out, label=LABEL_CS)
    add("signal", signal)
    if locked:
        add("unlock", unlock, kind=TransitionKind.A_AWAITS)
        add("unlock_strex", unlock_strex)
        add("unlock_svc", unlock_svc)
    return UserProgram(pid, tuple(added))


def consumer_program(kernel: Kernel, pid: int, mutation: Mutation = Mutation.NONE) -> UserProgram:
    return _program(kernel, pid, True, mutation)


def producer_program(kernel: Kernel, pid: int, mutation: Mutation = Mutation.NONE) -> UserProgram:
    return _program(kernel, pid, False, mutation)


def install_workload(kernel: Kernel, mutation: Mutation = Mutation.NONE) -> dict[int, UserProgram]:
    """Even task indices run the consumer, odd ones the producer."""
    programs = {}
    for pid in kernel.layout.tasks:
        build = consumer_program if pid % 2 == 0 else producer_program
        programs[pid] = build(kernel, pid, mutation)
    return programs


# ---------------------------------------------------------------------------
# Atomic propositions
# ---------------------------------------------------------------------------

Proposition = Callable[[GlobalState], bool]

PROPOSITIONS = ("cs_c", "cs_p", "consumer_at_want", "producer_at_want")


def propositions(layout: Layout, programs: dict[int, UserProgram]) -> dict[str, Proposition]:
    """Evaluators for cs_c, cs_p and the @want props (any consumer/producer at want)."""
    consumer_want = tuple((pid, s.ordinal) for pid in layout.consumers() for s in programs[pid].waiting)
    producer_want = tuple((pid, s.ordinal) for pid in layout.producers() for s in programs[pid].waiting)

    def at_want(targets):
        return lambda s: any(s.pc[pid] == ordinal for pid, ordinal in targets)

    return {
        "cs_c": lambda s: s.cs_c == 1,
        "cs_p": lambda s: s.cs_p == 1,
        "consumer_at_want": at_want(consumer_want),
        "producer_at_want": at_want(producer_want),
    }


# ---------------------------------------------------------------------------
# Safety checks
# ---------------------------------------------------------------------------

StateCheck = Callable[[GlobalState, Layout], str | None]


@dataclass(frozen=True)
class SafetyAssertion:
    """A named check; `state_check` is set for those evaluated on every stored state.

    The others are evaluated inside the statements that can break them.
    """
    name: str
    description: str
    state_check: StateCheck | None = None


def _bitmap(s: GlobalState, layout: Layout) -> str | None:
    for index, array in enumerate(s.runqueues.arrays):
        if not array.is_consistent():
            return f"runqueue array {index} bitmap {array.bitmap:#x} disagrees with its queues"
    if not s.tasklet.is_consistent():
        return f"tasklet bitmap {s.tasklet.bitmap:#x} disagrees with its queue"
    return None


def _race(s: GlobalState, layout: Layout) -> str | None:
    if s.cs_c and s.cs_p:
        return "consumer and producer are both inside the critical section"
    return None


def _mutex_list(s: GlobalState, layout: Layout) -> str | None:
    if s.mutex.value > 0 and not s.mutex.wait_slot:
        return f"mutex value {s.mutex.value} with an empty wait array"
    return None


def _mutex_floor(s: GlobalState, layout: Layout) -> str | None:
    if s.mutex.value < -1:
        return f"mutex value {s.mutex.value}"
    return None


def _condvar(s: GlobalState, layout: Layout) -> str | None:
    for pid in s.condvar.waiters:
        if s.thread_state[pid] != BLOCKED:
            return f"condvar waiter {layout.name(pid)} is not BLOCKED"
        if pid in s.runqueues:
            return f"condvar waiter {layout.name(pid)} is still queued to run"
    return None


def _atstack(s: GlobalState, layout: Layout) -> str | None:
    stack = s.at_stack
    if len(stack) > layout.max_stack:
        return f"ATStack depth {len(stack)} over {layout.max_stack}"
    if not stack:
        return None
    if not layout.is_user_level(stack[0]):
        return f"ATStack bottom {layout.name(stack[0])} is not a thread"
    levels = [layout.exception_level(pid) for pid in stack[1:] if layout.is_exception(pid)]
    if len(levels) != len(stack) - 1 or any(a < b for a, b in zip(levels, levels[1:])):
        # Equal neighbours come from a tie-break tail-chain.
        return f"ATStack {[layout.name(p) for p in stack]} drops in priority"
    return None


def _exception_sets(s: GlobalState, layout: Layout) -> str | None:
    if s.pending & s.active:
        return f"pending {s.pending:#x} and active {s.active:#x} overlap"
    if s.at in s.at_stack:
        return f"{layout.name(s.at)} runs while stacked"
    return None


def _buffer(s: GlobalState, layout: Layout) -> str | None:
    if not 0 <= s.buffer <= layout.config.buffer_capacity:
        return f"buffer occupancy {s.buffer}"
    return None


SAFETY_ASSERTIONS: tuple[SafetyAssertion, ...] = (
    SafetyAssertion("queue_bounds", "runqueue, tasklet, wait and waiter queues never overflow"),
    SafetyAssertion("bitmap_consistency", "bitmap bit L is set iff queue L is non-empty", _bitmap),
    SafetyAssertion("idle_election", "idle is elected only while another thread is current"),
    SafetyAssertion("pending_writer", "only interrupt handlers set a pending bit"),
    SafetyAssertion("tail_chain_priority", "no pending exception outranks the tail-chained one"),
    SafetyAssertion("atstack_bounds", "ATStack is bounded, thread at the bottom, priorities increasing",
                    _atstack),
    SafetyAssertion("pendsv_preempts_user", "PendSV only preempts a thread"),
    SafetyAssertion("race_condition", "cs_c and cs_p are never both set", _race),
    SafetyAssertion("syscall_no_pending", "only threads call the kernel, never with a pending exception"),
    SafetyAssertion("ctxsw_no_active", "context switches happen in SVC or PendSV with nothing else active"),
    SafetyAssertion("atstack_bottom_user", "a context switch rewrites a single thread frame"),
    SafetyAssertion("mutex_list_nonempty", "a mutex value above zero has waiters", _mutex_list),
    SafetyAssertion("mutex_lower_bound", "the mutex value never drops below -1", _mutex_floor),
)

# Model invariants checked alongside the thirteen above.
EXTRA_ASSERTIONS: tuple[SafetyAssertion, ...] = (
    SafetyAssertion("condwait_holds_mutex", "cond-wait is only called with the mutex held"),
    SafetyAssertion("condvar_waiters_blocked", "every condvar waiter is BLOCKED and in no runqueue",
                    _condvar),
    SafetyAssertion("exception_sets", "pending and active are disjoint and AT is not stacked",
                    _exception_sets),
    SafetyAssertion("buffer_bounds", "0 <= buffer <= capacity", _buffer),
)


def safety_assertions() -> list[SafetyAssertion]:
    return list(SAFETY_ASSERTIONS + EXTRA_ASSERTIONS)


def state_violations(s: GlobalState, layout: Layout) -> list[AssertionOutcome]:
    failed = []
    for check in SAFETY_ASSERTIONS + EXTRA_ASSERTIONS:
        if check.state_check is None:
            continue
        detail = check.state_check(s, layout)
        if detail is not None:
            failed.append(AssertionOutcome(check.name, False, detail))
    return failed
