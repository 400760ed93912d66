"""Kernel services as statement tables: SVC rendezvous, the five system calls,
LL/SC primitives, PendSV, systick and the softirq bottom-half loop.

Every statement gets a model-wide ordinal. Reused blocks such as the
scheduling point are expanded once per call site, each expansion with its own
ordinals and names, so coverage can tell the call sites apart.
"""
import logging
from collections.abc import Callable
from dataclasses import dataclass

from . import exception_engine as engine
from .errors import InternalLogicError
from .sched import (
    ACTIVE,
    EXPIRED,
    dequeue_highest,
    enqueue,
    swap,
    tasklet_pop,
    tasklet_schedule,
)
from .state import (
    BLOCKED,
    IDLE,
    MUTEX_WORD,
    CallSite,
    Frame,
    GlobalState,
    Layout,
    Service,
    StatementId,
    TransitionKind,
    active_state,
)

logger = logging.getLogger(__name__)

Effect = Callable[[Frame], None]
Guard = Callable[[GlobalState], bool]

SERVICE_ENTRY = {
    (Service.MUTEX_LOCK, CallSite.DIRECT): "svc.mutex_lock.acquire",
    (Service.MUTEX_LOCK, CallSite.COND_WAIT): "svc.cond_wait.relock.acquire",
    (Service.MUTEX_UNLOCK, CallSite.DIRECT): "svc.mutex_unlock.release",
    (Service.COND_WAIT, CallSite.DIRECT): "svc.cond_wait.enter",
    (Service.COND_SIGNAL, CallSite.DIRECT): "svc.cond_signal.signal",
    (Service.PTHREAD_YIELD, CallSite.DIRECT): "svc.pthread_yield.sched.enqueue",
}

# Why a scheduling-point branch may stay dark; shown in the coverage report.
NOTE_IDLE = "both runqueues non-empty at every scheduling point: idle is never elected"
NOTE_SWAP_AFTER_ENQUEUE = "an ACTIVE enqueue precedes this point, the active array is never empty"
NOTE_STAY_BLOCKED = "the caller is blocked and cannot be re-elected"
NOTE_UNLOCK_BLOCKED = ("guarded by caller BLOCKED: a direct unlock comes from a running thread, "
                       "only the cond-wait copy reaches it")
NOTE_WAIT_PREEMPT = "the cond-wait caller is always BLOCKED here and takes the blocked point"
NOTE_WAKE_PREEMPT = "guarded by the woken thread outranking the caller: never true with equal priorities"


@dataclass(frozen=True, slots=True)
class Statement:
    sid: StatementId
    owner: int
    effect: Effect
    kind: TransitionKind = TransitionKind.AWAITS
    guard: Guard | None = None
    note: str | None = None


class Kernel:
    """Builds and holds the statement table of one model instance."""

    def __init__(self, layout: Layout):
        self.layout = layout
        self.config = layout.config
        self.statements: list[Statement] = []
        self.addr: dict[str, int] = {}
        self.entry: dict[int, int] = {}
        self.takes: dict[int, StatementId] = {}

    # -- table construction -------------------------------------------------

    def add(self, owner: int, name: str, effect: Effect, *, label: str | None = None,
            kind: TransitionKind = TransitionKind.AWAITS, guard: Guard | None = None,
            note: str | None = None) -> StatementId:
        if name in self.addr:
            raise InternalLogicError(f"duplicate statement name {name}")
        sid = StatementId(len(self.statements), name, label)
        self.statements.append(Statement(sid, owner, effect, kind, guard, note))
        self.addr[name] = sid.ordinal
        self.entry.setdefault(owner, sid.ordinal)
        return sid

    def add_take(self, owner: int, name: str) -> StatementId:
        """Pseudo-statement standing for the hardware entry of an exception."""
        sid = StatementId(len(self.statements), name)
        kind = TransitionKind.PENDSV_TAKE if owner == self.layout.pendsv else TransitionKind.ITAKE
        self.statements.append(Statement(sid, owner, self._no_effect, kind))
        self.addr[name] = sid.ordinal
        self.takes[owner] = sid
        return sid

    @staticmethod
    def _no_effect(f: Frame) -> None:
        raise InternalLogicError("exception entry is applied by the exception engine")

    def jump(self, f: Frame, pid: int, name: str) -> None:
        f.pc[pid] = self.addr[name]

    def seal(self) -> None:
        missing = [self.layout.name(pid) for pid in range(self.layout.count)
                   if pid not in self.entry]
        if missing:
            raise InternalLogicError(f"no program for {', '.join(missing)}")
        logger.debug(f"Kernel table sealed with {len(self.statements)} statements")

    def statement(self, ordinal: int) -> Statement:
        return self.statements[ordinal]

    # -- primitives used by the user programs ------------------------------

    def ldrex(self, f: Frame, pid: int, addr: int = MUTEX_WORD) -> int:
        """Load-exclusive: mark addr (dropping any older mark) and read it."""
        f.marked = addr
        value = f.mutex_value
        f.regs[pid] = value
        return value

    def strex(self, f: Frame, pid: int, newval: int, addr: int = MUTEX_WORD) -> bool:
        """Store-exclusive: succeeds only while addr is still marked."""
        f.regs[pid] = 0
        if f.marked != addr:
            return False
        f.mutex_value = newval
        f.marked = None
        return True

    def svc_call(self, f: Frame, caller: int, service: Service, resume: str,
                 site: CallSite = CallSite.DIRECT) -> None:
        """Rendezvous with the SVC handler; the caller resumes at `resume` on return."""
        layout = self.layout
        if f.call is not None:
            raise InternalLogicError(f"{layout.name(caller)} calls {service.name} "
                                     f"while {f.call[1].name} is in flight")
        f.require("syscall_no_pending", layout.is_user_level(caller) and f.pending == 0,
                  f"{layout.name(caller)} calls {service.name} with pending={f.pending:#x}")
        f.require("atstack_bounds", not f.at_stack, "system call from a nested context")
        f.regs[caller] = 0
        f.pc[caller] = self.addr[resume]
        f.call = (caller, service, site)
        f.at_stack.append(caller)
        f.at = layout.svc
        f.active |= engine.bit(layout.svc)

    def requeue(self, f: Frame, pid: int, which: int) -> None:
        layout = self.layout
        f.runqueues = enqueue(f.runqueues, which, pid, layout.thread_level(pid), layout.rq_capacity)
        f.thread_state[pid] = f.runqueues.physical(which)

    # -- system processes ----------------------------------------------------

    def install_system(self) -> None:
        layout = self.layout
        self._softirq()
        self._systick()
        for pid in layout.irqs:
            name = layout.name(pid)
            self.add(pid, f"{name}.iret", self._iret_to(pid, f"{name}.iret"),
                     kind=TransitionKind.A_AWAITS)
        self._pendsv()
        self._svc()
        for pid in layout.interrupts:
            self.add_take(pid, f"{layout.name(pid)}.take")
        self.add_take(layout.pendsv, "pendsv.take")

    def _iret_to(self, owner: int, home: str) -> Effect:
        def effect(f: Frame) -> None:
            self.jump(f, owner, home)
            engine.iret(f, self.layout)
        return effect

    def _softirq(self) -> None:
        pid = self.layout.softirq

        def check(f: Frame) -> None:
            self.jump(f, pid, "softirq.run" if f.tasklet.bitmap else "softirq.yield")

        def run(f: Frame) -> None:
            # Bottom-half bodies are empty.
            f.tasklet, _ = tasklet_pop(f.tasklet)
            self.jump(f, pid, "softirq.check")

        def yield_(f: Frame) -> None:
            self.svc_call(f, pid, Service.PTHREAD_YIELD, "softirq.check")

        self.add(pid, "softirq.check", check)
        self.add(pid, "softirq.run", run)
        self.add(pid, "softirq.yield", yield_)

    def _systick(self) -> None:
        layout = self.layout
        pid = layout.systick

        def tasklet(f: Frame) -> None:
            f.tasklet = tasklet_schedule(f.tasklet, pid, layout.tasklet_level, layout.tasklet_capacity)
            self.jump(f, pid, "systick.pend")

        def pend_pendsv(f: Frame) -> None:
            engine.pend(f, layout, pid, layout.pendsv)
            self.jump(f, pid, "systick.iret")

        self.add(pid, "systick.tasklet", tasklet)
        self.add(pid, "systick.pend", pend_pendsv)
        self.add(pid, "systick.iret", self._iret_to(pid, "systick.tasklet"),
                 kind=TransitionKind.A_AWAITS)

    def _pendsv(self) -> None:
        pid = self.layout.pendsv
        self.scheduling_point(pid, "pendsv.sched", EXPIRED, done="pendsv.iret")
        self.add(pid, "pendsv.iret", self._iret_to(pid, "pendsv.sched.enqueue"),
                 kind=TransitionKind.A_AWAITS)

    # -- the scheduling point ----------------------------------------------

    def scheduling_point(self, owner: int, prefix: str, which: int | None, *, done: str,
                         caller_blocked: bool = False, note: str | None = None) -> None:
        """Expand one scheduling point: [enqueue], elect, swap, idle, ctxsw, stay.

        `which` is the runqueue the interrupted thread goes back to first, or
        None when it is blocked and leaves the runqueues.
        """
        layout = self.layout

        def elected(f: Frame, nxt: int) -> None:
            f.thread_state[nxt] = active_state(f.runqueues.swap_bit)
            if nxt == f.at_stack[0]:
                self.jump(f, owner, f"{prefix}.stay")
            else:
                f.regs[owner] = nxt
                self.jump(f, owner, f"{prefix}.ctxsw")

        def requeue_current(f: Frame) -> None:
            current = f.at_stack[0]
            if current != IDLE:
                self.requeue(f, current, which)
            self.jump(f, owner, f"{prefix}.elect")

        def elect(f: Frame) -> None:
            rq, nxt = dequeue_highest(f.runqueues, ACTIVE)
            if nxt is None:
                self.jump(f, owner, f"{prefix}.swap")
                return
            f.runqueues = rq
            elected(f, nxt)

        def swap_arrays(f: Frame) -> None:
            rq, nxt = dequeue_highest(swap(f.runqueues), ACTIVE)
            f.runqueues = rq
            if nxt is None:
                self.jump(f, owner, f"{prefix}.idle")
            else:
                elected(f, nxt)

        def idle(f: Frame) -> None:
            f.require("idle_election", f.at_stack[0] != IDLE,
                      f"idle elected at {prefix} while idle is current")
            engine.ctxsw(f, layout, IDLE)
            self.jump(f, owner, done)

        def switch(f: Frame) -> None:
            nxt = f.regs[owner]
            f.regs[owner] = 0
            engine.ctxsw(f, layout, nxt)
            self.jump(f, owner, done)

        def stay(f: Frame) -> None:
            self.jump(f, owner, done)

        if which is not None:
            self.add(owner, f"{prefix}.enqueue", requeue_current, note=note)
        self.add(owner, f"{prefix}.elect", elect, note=note)
        self.add(owner, f"{prefix}.swap", swap_arrays,
                 note=note or (NOTE_SWAP_AFTER_ENQUEUE if which == ACTIVE else None))
        self.add(owner, f"{prefix}.idle", idle, kind=TransitionKind.A_AWAITS, note=note or NOTE_IDLE)
        self.add(owner, f"{prefix}.ctxsw", switch, note=note)
        self.add(owner, f"{prefix}.stay", stay,
                 note=note or (NOTE_STAY_BLOCKED if caller_blocked else None))

    # -- SVC -----------------------------------------------------------------

    def _svc(self) -> None:
        layout = self.layout
        svc = layout.svc

        def dispatch(f: Frame) -> None:
            if f.call is None:
                raise InternalLogicError("SVC dispatch without a call")
            _, service, site = f.call
            entry = SERVICE_ENTRY.get((service, site))
            if entry is None:
                raise InternalLogicError(f"no {service.name} service for call site {site.name}")
            self.jump(f, svc, entry)

        def ret(f: Frame) -> None:
            # Synchronous exception return: may land on a switched-in thread.
            if len(f.at_stack) != 1:
                raise InternalLogicError(f"SVC return with ATStack {f.at_stack}")
            f.marked = None
            f.active &= ~engine.bit(svc)
            f.call = None
            f.at = f.at_stack.pop()
            self.jump(f, svc, "svc.dispatch")

        self.add(svc, "svc.dispatch", dispatch)
        self._mutex_lock_body("svc.mutex_lock")
        self._mutex_unlock_body("svc.mutex_unlock")
        self._cond_wait()
        self._cond_signal()
        self.scheduling_point(svc, "svc.pthread_yield.sched", EXPIRED, done="svc.return")
        self.add(svc, "svc.return", ret, kind=TransitionKind.A_AWAITS)

    def _caller(self, f: Frame) -> int:
        if f.call is None:
            raise InternalLogicError("service statement without a call in flight")
        return f.call[0]

    def _mutex_lock_body(self, prefix: str) -> None:
        """acquire and the blocking scheduling point of the mutex-lock service."""
        svc = self.layout.svc
        capacity = self.config.mutex_wait_capacity

        def acquire(f: Frame) -> None:
            caller = self._caller(f)
            f.mutex_value += 1
            if f.mutex_value == 0:
                # Released after the fast-path read: the caller owns it now.
                self.jump(f, svc, "svc.return")
                return
            # The value and the wait array move together.
            f.require("queue_bounds", len(f.wait_slot) < capacity,
                      f"mutex wait array full ({capacity})")
            f.wait_slot.append(caller)
            f.thread_state[caller] = BLOCKED
            self.jump(f, svc, f"{prefix}.sched.elect")

        self.add(svc, f"{prefix}.acquire", acquire)
        self.scheduling_point(svc, f"{prefix}.sched", None, done="svc.return",
                              caller_blocked=True)

    def _mutex_unlock_body(self, prefix: str) -> None:
        """release, wake, blocked_check and the two conditional scheduling points."""
        layout = self.layout
        svc = layout.svc

        def release(f: Frame) -> None:
            f.mutex_value -= 1
            f.require("mutex_lower_bound", f.mutex_value >= -1,
                      f"mutex value {f.mutex_value} after release")
            self.jump(f, svc, f"{prefix}.wake")

        def wake(f: Frame) -> None:
            if f.mutex_value >= 0:
                # Ownership passes to the waiter; the value keeps it held.
                f.require("mutex_list_nonempty", bool(f.wait_slot),
                          f"mutex value {f.mutex_value} with an empty wait array")
                woken = f.wait_slot.pop(0)
                self.requeue(f, woken, ACTIVE)
                f.regs[svc] = woken + 1
            self.jump(f, svc, f"{prefix}.blocked_check")

        def blocked_check(f: Frame) -> None:
            caller = self._caller(f)
            woken = f.regs[svc] - 1
            f.regs[svc] = 0
            if f.thread_state[caller] == BLOCKED:
                self.jump(f, svc, f"{prefix}.sched_blocked.elect")
            elif woken >= 0 and layout.thread_level(woken) < layout.thread_level(caller):
                self.jump(f, svc, f"{prefix}.sched_preempt.enqueue")
            else:
                self.jump(f, svc, "svc.return")

        direct = prefix == "svc.mutex_unlock"
        self.add(svc, f"{prefix}.release", release)
        self.add(svc, f"{prefix}.wake", wake)
        self.add(svc, f"{prefix}.blocked_check", blocked_check)
        self.scheduling_point(svc, f"{prefix}.sched_blocked", None, done="svc.return",
                              caller_blocked=True, note=NOTE_UNLOCK_BLOCKED if direct else None)
        self.scheduling_point(svc, f"{prefix}.sched_preempt", ACTIVE, done="svc.return",
                              note=NOTE_WAKE_PREEMPT if direct else NOTE_WAIT_PREEMPT)

    def _cond_wait(self) -> None:
        """Wait and release as one service, plus the re-acquire the waiter issues once woken.

        The unlock body runs inline. A woken waiter calls mutex-lock from its
        cond-wait call site, which dispatches to the `relock` copy.
        """
        svc = self.layout.svc
        capacity = self.config.n_user_tasks

        def enter(f: Frame) -> None:
            caller = self._caller(f)
            f.require("condwait_holds_mutex", f.mutex_value >= 0,
                      f"cond-wait with mutex value {f.mutex_value}")
            f.require("queue_bounds", len(f.waiters) < capacity,
                      f"condvar waiter queue full ({capacity})")
            f.waiters.append(caller)
            f.thread_state[caller] = BLOCKED
            self.jump(f, svc, "svc.cond_wait.release")

        self.add(svc, "svc.cond_wait.enter", enter)
        self._mutex_unlock_body("svc.cond_wait")
        self._mutex_lock_body("svc.cond_wait.relock")

    def _cond_signal(self) -> None:
        layout = self.layout
        svc = layout.svc

        def signal(f: Frame) -> None:
            if not f.waiters:
                self.jump(f, svc, "svc.return")
                return
            # The woken thread becomes runnable and re-acquires the mutex itself.
            caller = self._caller(f)
            woken = f.waiters.pop(0)
            self.requeue(f, woken, ACTIVE)
            if layout.thread_level(woken) < layout.thread_level(caller):
                self.jump(f, svc, "svc.cond_signal.sched_preempt.enqueue")
            else:
                self.jump(f, svc, "svc.return")

        self.add(svc, "svc.cond_signal.signal", signal)
        self.scheduling_point(svc, "svc.cond_signal.sched_preempt", ACTIVE, done="svc.return",
                              note=NOTE_WAKE_PREEMPT)
