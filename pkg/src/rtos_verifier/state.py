"""Process identities, the global state vector and its canonical encoding."""
from dataclasses import dataclass
from enum import IntEnum, StrEnum

from .config import Config
from .errors import InternalLogicError, ModelAssertionError
from .sched import PriorityArray, RunQueueSet

IDLE = 254       # pseudo-thread elected when no runqueue holds anybody
NO_PID = 255     # encoding of "none"

# Exception level used for thread mode: every exception priority beats it.
BASE_LEVEL = 256

# Address tags understood by the exclusive monitor.
MUTEX_WORD = 1

BLOCKED = 2      # thread_state raw value; 0/1 are physical runqueue indices


class Role(StrEnum):
    USER_TASK = "user"
    SOFTIRQ = "softirq"
    SYSTICK = "systick"
    INTERRUPT = "irq"
    PENDSV = "pendsv"
    SVC = "svc"


USER_LEVEL_ROLES = frozenset({Role.USER_TASK, Role.SOFTIRQ})
INTERRUPT_ROLES = frozenset({Role.SYSTICK, Role.INTERRUPT})


class Service(IntEnum):
    MUTEX_LOCK = 0
    MUTEX_UNLOCK = 1
    COND_WAIT = 2
    COND_SIGNAL = 3
    PTHREAD_YIELD = 4


class CallSite(IntEnum):
    """Where a service request comes from; selects the expansion SVC dispatches to."""
    DIRECT = 0
    COND_WAIT = 1


class TransitionKind(StrEnum):
    AWAITS = "AWAITS"
    A_AWAITS = "A_AWAITS"
    ITAKE = "ITake"
    PENDSV_TAKE = "PendSVTake"


@dataclass(frozen=True, slots=True)
class ProcessId:
    index: int
    role: Role
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class StatementId:
    ordinal: int
    name: str
    label: str | None = None


@dataclass(frozen=True, slots=True)
class Transition:
    owner: int
    stmt: StatementId
    kind: TransitionKind


@dataclass(frozen=True, slots=True)
class AssertionOutcome:
    name: str
    passed: bool
    detail: str = ""


class Layout:
    """Fixed PID assignment: user tasks, softirq, systick, extra IRQs, PendSV, SVC."""

    def __init__(self, config: Config):
        self.config = config
        n = config.n_user_tasks
        k = config.n_extra_interrupts
        self.tasks = tuple(range(n))
        self.softirq = n
        self.systick = n + 1
        self.irqs = tuple(range(n + 2, n + 2 + k))
        self.pendsv = n + 2 + k
        self.svc = n + 3 + k
        self.count = n + 4 + k
        self.user_level = self.tasks + (self.softirq,)
        self.interrupts = (self.systick,) + self.irqs

        processes = []
        for i in self.tasks:
            kind = "consumer" if i % 2 == 0 else "producer"
            processes.append(ProcessId(i, Role.USER_TASK, f"{kind}{i // 2}"))
        processes.append(ProcessId(self.softirq, Role.SOFTIRQ, "softirq"))
        processes.append(ProcessId(self.systick, Role.SYSTICK, "systick"))
        for j, pid in enumerate(self.irqs):
            processes.append(ProcessId(pid, Role.INTERRUPT, f"irq{j}"))
        processes.append(ProcessId(self.pendsv, Role.PENDSV, "pendsv"))
        processes.append(ProcessId(self.svc, Role.SVC, "svc"))
        self.processes = tuple(processes)

        self._exception_level = {self.systick: config.systick_priority,
                                 self.pendsv: config.kernel_priority,
                                 self.svc: config.kernel_priority}
        for j, pid in enumerate(self.irqs):
            self._exception_level[pid] = config.irq_priority(j)
        self._thread_level = {pid: config.task_priority(pid) for pid in self.tasks}
        self._thread_level[self.softirq] = config.softirq_priority

        # Runqueue capacity is the number of user-level threads; one bottom half (systick's).
        self.rq_capacity = len(self.user_level)
        self.tasklet_capacity = 1
        self.tasklet_level = 0
        self.thread_levels = tuple(sorted(set(self._thread_level.values())))
        # Thread mode plus one frame per exception; SVC and PendSV never nest.
        self.max_stack = 1 + len(self.interrupts) + 1

    def role(self, pid: int) -> Role:
        if pid == IDLE:
            return Role.USER_TASK
        return self.processes[pid].role

    def name(self, pid: int) -> str:
        if pid == IDLE:
            return "idle"
        if pid == NO_PID:
            return "-"
        return self.processes[pid].name

    def is_user_level(self, pid: int) -> bool:
        return pid == IDLE or self.processes[pid].role in USER_LEVEL_ROLES

    def is_exception(self, pid: int) -> bool:
        return not self.is_user_level(pid)

    def exception_level(self, pid: int) -> int:
        return self._exception_level[pid]

    def thread_level(self, pid: int) -> int:
        return self._thread_level[pid]

    def consumers(self) -> tuple[int, ...]:
        return tuple(pid for pid in self.tasks if pid % 2 == 0)

    def producers(self) -> tuple[int, ...]:
        return tuple(pid for pid in self.tasks if pid % 2 == 1)


def active_state(swap_bit: int) -> int:
    """ACTIVE thread state: (0 | swap)."""
    return 0 | swap_bit


def expired_state(swap_bit: int) -> int:
    """EXPIRED thread state: (1 ^ swap)."""
    return 1 ^ swap_bit


@dataclass(frozen=True, slots=True)
class MutexState:
    value: int = -1          # -1 free, 0 held, k > 0 held with k waiters
    wait_slot: tuple[int, ...] = ()


@dataclass(frozen=True, slots=True)
class CondVarState:
    waiters: tuple[int, ...] = ()


@dataclass(frozen=True, slots=True)
class MonitorState:
    marked: int | None = None


@dataclass(frozen=True, slots=True)
class RendezvousState:
    call: tuple[int, Service, CallSite] | None = None


@dataclass(frozen=True, slots=True)
class GlobalState:
    at: int
    at_stack: tuple[int, ...]
    pc: tuple[int, ...]
    thread_state: tuple[int, ...]
    regs: tuple[int, ...]
    ghost_direct_at: int | None = None
    pending: int = 0
    active: int = 0
    runqueues: RunQueueSet = RunQueueSet()
    tasklet: PriorityArray = PriorityArray()
    mutex: MutexState = MutexState()
    condvar: CondVarState = CondVarState()
    monitor: MonitorState = MonitorState()
    buffer: int = 0
    cs_c: int = 0
    cs_p: int = 0
    svc_channel: RendezvousState = RendezvousState()
    progress: int = 0
    arrived: int = 0

    def thaw(self) -> "Frame":
        return Frame(self)


class Frame:
    """Mutable working copy used while one statement executes."""

    __slots__ = (
        "at", "at_stack", "pc", "thread_state", "regs", "ghost_direct_at", "pending",
        "active", "runqueues", "tasklet", "mutex_value", "wait_slot", "waiters", "marked",
        "buffer", "cs_c", "cs_p", "call", "progress", "arrived", "outcomes",
    )

    def __init__(self, s: GlobalState):
        self.at = s.at
        self.at_stack = list(s.at_stack)
        self.pc = list(s.pc)
        self.thread_state = list(s.thread_state)
        self.regs = list(s.regs)
        self.ghost_direct_at = s.ghost_direct_at
        self.pending = s.pending
        self.active = s.active
        self.runqueues = s.runqueues
        self.tasklet = s.tasklet
        self.mutex_value = s.mutex.value
        self.wait_slot = list(s.mutex.wait_slot)
        self.waiters = list(s.condvar.waiters)
        self.marked = s.monitor.marked
        self.buffer = s.buffer
        self.cs_c = s.cs_c
        self.cs_p = s.cs_p
        self.call = s.svc_channel.call
        self.progress = s.progress
        self.arrived = s.arrived
        self.outcomes = []

    def require(self, name: str, ok: bool, detail: str = "") -> None:
        """Evaluate a model assertion; a failure aborts the statement."""
        if not ok:
            raise ModelAssertionError(name, detail)
        self.outcomes.append(AssertionOutcome(name, True))

    def freeze(self) -> GlobalState:
        return GlobalState(
            at=self.at,
            at_stack=tuple(self.at_stack),
            pc=tuple(self.pc),
            thread_state=tuple(self.thread_state),
            regs=tuple(self.regs),
            ghost_direct_at=self.ghost_direct_at,
            pending=self.pending,
            active=self.active,
            runqueues=self.runqueues,
            tasklet=self.tasklet,
            mutex=MutexState(self.mutex_value, tuple(self.wait_slot)),
            condvar=CondVarState(tuple(self.waiters)),
            monitor=MonitorState(self.marked),
            buffer=self.buffer,
            cs_c=self.cs_c,
            cs_p=self.cs_p,
            svc_channel=RendezvousState(self.call),
            progress=self.progress,
            arrived=self.arrived,
        )


class StateCodec:
    """Canonical, fixed-length byte encoding of GlobalState for one Layout.

    Field order and widths (all integers little-endian):

        at                         1
        ghost_direct_at            1   (255 = none)
        len(at_stack)              1
        at_stack slots             max_stack x 1 (255 padding)
        pending, active            4 + 4 (bit i = pid i)
        swap_bit                   1
        runqueue array 0, 1        each: bitmap 4, then per configured thread level
                                   queue length 1 + rq_capacity x 1
        tasklet                    bitmap 4, length 1 + tasklet_capacity x 1
        thread_state               1 per user-level pid (0/1 physical array, 2 BLOCKED)
        pc                         2 per pid
        regs                       1 per pid (value + 128)
        mutex value                1 (value + 128)
        mutex wait slot            length 1 + mutex_wait_capacity x 1
        condvar waiters            length 1 + n_user_tasks x 1
        monitor mark               1 (255 = none)
        buffer, cs_c, cs_p         1 + 1 + 1
        rendezvous                 caller 1, service 1, call site 1 (255 = none)
        progress                   1
        arrived                    4
    """

    def __init__(self, layout: Layout):
        self.layout = layout
        config = layout.config
        self.levels = layout.thread_levels
        self.level_set = frozenset(self.levels)
        self.waiter_capacity = config.n_user_tasks
        self.slot_capacity = config.mutex_wait_capacity
        self.length = (
            3 + layout.max_stack + 8 + 1
            + 2 * (4 + len(self.levels) * (1 + layout.rq_capacity))
            + 4 + 1 + layout.tasklet_capacity
            + len(layout.user_level) + 2 * layout.count + layout.count
            + 1 + 1 + self.slot_capacity + 1 + self.waiter_capacity
            + 1 + 3 + 3 + 1 + 4
        )

    @staticmethod
    def _seq(out: list[int], items, capacity: int) -> None:
        if len(items) > capacity:
            raise InternalLogicError(f"sequence of {len(items)} exceeds encoded capacity {capacity}")
        out.append(len(items))
        out.extend(items)
        out.extend([NO_PID] * (capacity - len(items)))

    def _array(self, out: list[int], array: PriorityArray, levels, capacity: int) -> None:
        out.extend(array.bitmap.to_bytes(4, "little"))
        for level in levels:
            self._seq(out, array.queues[level], capacity)

    def encode(self, s: GlobalState) -> bytes:
        layout = self.layout
        out: list[int] = [s.at, NO_PID if s.ghost_direct_at is None else s.ghost_direct_at]
        self._seq(out, s.at_stack, layout.max_stack)
        out.extend(s.pending.to_bytes(4, "little"))
        out.extend(s.active.to_bytes(4, "little"))
        out.append(s.runqueues.swap_bit)
        for array in s.runqueues.arrays:
            for level, queue in enumerate(array.queues):
                if queue and level not in self.level_set:
                    raise InternalLogicError(f"runqueue level {level} is not a configured thread level")
            self._array(out, array, self.levels, layout.rq_capacity)
        self._array(out, s.tasklet, (layout.tasklet_level,), layout.tasklet_capacity)
        out.extend(s.thread_state)
        for pc in s.pc:
            out.extend(pc.to_bytes(2, "little"))
        out.extend(reg + 128 for reg in s.regs)
        out.append(s.mutex.value + 128)
        self._seq(out, s.mutex.wait_slot, self.slot_capacity)
        self._seq(out, s.condvar.waiters, self.waiter_capacity)
        out.append(NO_PID if s.monitor.marked is None else s.monitor.marked)
        out.extend((s.buffer, s.cs_c, s.cs_p))
        if s.svc_channel.call is None:
            out.extend((NO_PID, NO_PID, NO_PID))
        else:
            caller, service, site = s.svc_channel.call
            out.extend((caller, int(service), int(site)))
        out.append(s.progress)
        out.extend(s.arrived.to_bytes(4, "little"))
        return bytes(out)


def encode_state(s: GlobalState, layout: Layout) -> bytes:
    return StateCodec(layout).encode(s)
