import pytest

from src.rtos_verifier.errors import InternalLogicError, ModelAssertionError
from src.rtos_verifier.kernel import (
    NOTE_IDLE,
    NOTE_UNLOCK_BLOCKED,
    NOTE_WAIT_PREEMPT,
    NOTE_WAKE_PREEMPT,
    SERVICE_ENTRY,
)
from src.rtos_verifier.state import BLOCKED, CallSite, Service

SCHEDULING_POINTS = (
    "pendsv.sched",
    "svc.mutex_lock.sched",
    "svc.mutex_unlock.sched_blocked",
    "svc.mutex_unlock.sched_preempt",
    "svc.cond_wait.sched_blocked",
    "svc.cond_wait.sched_preempt",
    "svc.cond_wait.relock.sched",
    "svc.cond_signal.sched_preempt",
    "svc.pthread_yield.sched",
)


def fire(model, s, *names):
    """Apply the named statements in order, each of which must be enabled."""
    for name in names:
        match = [t for t in model.enabled_transitions(s) if t.stmt.name == name]
        assert match, f"{name} not enabled; got {[t.stmt.name for t in model.enabled_transitions(s)]}"
        s, outcomes = model.apply_transition(s, match[0])
        assert all(o.passed for o in outcomes), outcomes
    return s


CONSUMER_WAITS = (
    "consumer0.noncs", "consumer0.lock", "consumer0.strex", "consumer0.want",
    "svc.dispatch", "svc.cond_wait.enter", "svc.cond_wait.release", "svc.cond_wait.wake",
    "svc.cond_wait.blocked_check", "svc.cond_wait.sched_blocked.elect",
    "svc.cond_wait.sched_blocked.ctxsw", "svc.return",
)

PRODUCER_SIGNALS = (
    "producer0.noncs", "producer0.lock", "producer0.strex", "producer0.want",
    "producer0.cs_in", "producer0.put", "producer0.cs_out", "producer0.signal",
    "svc.dispatch", "svc.cond_signal.signal", "svc.return",
)

PRODUCER_UNLOCKS = ("producer0.unlock", "producer0.unlock_strex")

# SysTick pends PendSV, which parks the producer; softirq drains its tasklet,
# yields, and the consumer is elected.
SWITCH_TO_CONSUMER = (
    "systick.take", "systick.tasklet", "systick.pend", "systick.iret",
    "pendsv.sched.enqueue", "pendsv.sched.elect", "pendsv.sched.ctxsw", "pendsv.iret",
    "softirq.check", "softirq.run", "softirq.check", "softirq.yield",
    "svc.dispatch", "svc.pthread_yield.sched.enqueue", "svc.pthread_yield.sched.elect",
    "svc.pthread_yield.sched.ctxsw", "svc.return",
)


def test_every_scheduling_point_is_expanded_per_call_site(base_model):
    addr = base_model.kernel.addr
    for prefix in SCHEDULING_POINTS:
        for step in ("elect", "swap", "idle", "ctxsw", "stay"):
            assert f"{prefix}.{step}" in addr
    assert "svc.mutex_lock.sched.enqueue" not in addr
    assert "svc.cond_wait.relock.sched.enqueue" not in addr
    assert "svc.cond_wait.sched_blocked.enqueue" not in addr
    assert "svc.pthread_yield.sched.enqueue" in addr
    assert "svc.cond_signal.sched_preempt.enqueue" in addr
    elects = [name for name in addr if name.endswith(".elect")]
    assert len(elects) == 9
    assert len([name for name in elects if name.startswith("svc.")]) == 8


def test_service_entries_exist(base_model):
    for entry in SERVICE_ENTRY.values():
        assert entry in base_model.kernel.addr
    assert {service for service, _ in SERVICE_ENTRY} == set(Service)
    assert SERVICE_ENTRY[Service.MUTEX_LOCK, CallSite.COND_WAIT] == "svc.cond_wait.relock.acquire"


def test_dispatch_rejects_an_unknown_call_site(base_model):
    kernel = base_model.kernel
    f = base_model.initial_state().thaw()
    kernel.svc_call(f, 0, Service.PTHREAD_YIELD, "consumer0.noncs", CallSite.COND_WAIT)
    with pytest.raises(InternalLogicError, match="COND_WAIT"):
        kernel.statement(kernel.addr["svc.dispatch"]).effect(f)


def test_coverage_notes(base_model):
    kernel = base_model.kernel
    note = lambda name: kernel.statement(kernel.addr[name]).note
    assert note("svc.mutex_unlock.sched_preempt.enqueue") == NOTE_WAKE_PREEMPT
    assert note("svc.cond_signal.sched_preempt.swap") == NOTE_WAKE_PREEMPT
    assert note("svc.cond_wait.sched_preempt.elect") == NOTE_WAIT_PREEMPT
    assert note("svc.mutex_unlock.sched_blocked.elect") == NOTE_UNLOCK_BLOCKED
    assert note("pendsv.sched.idle") == NOTE_IDLE
    assert note("svc.cond_wait.sched_blocked.elect") is None
    assert note("svc.cond_wait.relock.sched.swap") is None


def test_statement_names_are_unique(base_model):
    kernel = base_model.kernel
    with pytest.raises(InternalLogicError):
        kernel.add(0, "consumer0.noncs", lambda f: None)


def test_ldrex_strex(base_model):
    kernel = base_model.kernel
    f = base_model.initial_state().thaw()
    assert kernel.ldrex(f, 0) == -1
    assert f.regs[0] == -1
    assert kernel.strex(f, 0, 0)
    assert f.mutex_value == 0
    assert f.marked is None
    assert not kernel.strex(f, 0, 5)       # mark consumed
    assert f.mutex_value == 0


def test_svc_call_enters_the_handler(base_model):
    layout = base_model.layout
    kernel = base_model.kernel
    f = base_model.initial_state().thaw()
    kernel.svc_call(f, 0, Service.PTHREAD_YIELD, "consumer0.noncs")
    assert f.at == layout.svc
    assert f.at_stack == [0]
    assert f.call == (0, Service.PTHREAD_YIELD, CallSite.DIRECT)
    assert f.pc[0] == kernel.addr["consumer0.noncs"]
    with pytest.raises(InternalLogicError):
        kernel.svc_call(f, 1, Service.MUTEX_LOCK, "producer0.want")


def test_svc_call_with_a_pending_exception_fails(base_model):
    f = base_model.initial_state().thaw()
    f.pending = 1 << base_model.layout.pendsv
    with pytest.raises(ModelAssertionError) as e:
        base_model.kernel.svc_call(f, 0, Service.MUTEX_LOCK, "consumer0.want")
    assert e.value.check == "syscall_no_pending"


def test_cond_wait_blocks_and_releases_the_mutex(base_model):
    model = base_model
    s = fire(model, model.initial_state(), *CONSUMER_WAITS)
    assert s.at == 1
    assert s.condvar.waiters == (0,)
    assert s.thread_state[0] == BLOCKED
    assert s.mutex.value == -1
    assert s.pc[0] == model.kernel.addr["consumer0.relock"]
    assert s.svc_channel.call is None
    assert s.active == 0
    assert model.eval_ap(s, "consumer_at_want")
    assert model.state_violations(s) == []


def test_signal_makes_the_waiter_runnable_without_the_mutex(base_model):
    model = base_model
    s = fire(model, model.initial_state(), *CONSUMER_WAITS)
    s = fire(model, s, *PRODUCER_SIGNALS)
    assert s.condvar.waiters == ()
    assert s.mutex.value == 0              # still the producer's
    assert s.mutex.wait_slot == ()
    assert s.thread_state[0] == s.runqueues.physical(0)
    assert 0 in s.runqueues.view(0)
    s = fire(model, s, *PRODUCER_UNLOCKS)
    assert s.at == 1
    assert s.buffer == 1
    assert s.mutex.value == -1
    assert s.pc[0] == model.kernel.addr["consumer0.relock"]
    assert s.pc[1] == model.kernel.addr["producer0.noncs"]
    assert model.eval_ap(s, "consumer_at_want")


def test_woken_waiter_reacquires_a_free_mutex(base_model):
    model = base_model
    s = fire(model, model.initial_state(), *CONSUMER_WAITS)
    s = fire(model, s, *PRODUCER_SIGNALS, *PRODUCER_UNLOCKS, *SWITCH_TO_CONSUMER)
    assert s.at == 0
    s = fire(model, s, "consumer0.relock", "svc.dispatch", "svc.cond_wait.relock.acquire",
             "svc.return", "consumer0.want", "consumer0.cs_in")
    assert s.mutex.value == 0
    assert s.cs_c == 1
    assert not model.eval_ap(s, "consumer_at_want")


def test_woken_waiter_queues_on_a_held_mutex_until_unlock(base_model):
    model = base_model
    s = fire(model, model.initial_state(), *CONSUMER_WAITS)
    s = fire(model, s, *PRODUCER_SIGNALS, *SWITCH_TO_CONSUMER)
    s = fire(model, s, "consumer0.relock", "svc.dispatch", "svc.cond_wait.relock.acquire")
    # One statement raises the value and queues the caller.
    assert s.mutex.value == 1
    assert s.mutex.wait_slot == (0,)
    assert s.thread_state[0] == BLOCKED
    assert model.state_violations(s) == []
    s = fire(model, s, "svc.cond_wait.relock.sched.elect", "svc.cond_wait.relock.sched.swap",
             "svc.cond_wait.relock.sched.ctxsw", "svc.return")
    assert s.at == 1
    s = fire(model, s, "producer0.unlock", "producer0.unlock_svc", "svc.dispatch",
             "svc.mutex_unlock.release", "svc.mutex_unlock.wake", "svc.mutex_unlock.blocked_check",
             "svc.return")
    assert s.mutex.value == 0              # handed to the consumer
    assert s.mutex.wait_slot == ()
    assert s.pc[0] == model.kernel.addr["consumer0.want"]
    assert 0 in s.runqueues.view(0)


def test_contended_lock_blocks_in_the_slow_path(base_model):
    model = base_model
    s = fire(
        model, model.initial_state(),
        "consumer0.noncs", "consumer0.lock", "consumer0.strex",
        "systick.take", "systick.tasklet", "systick.pend", "systick.iret",
        "pendsv.sched.enqueue", "pendsv.sched.elect", "pendsv.sched.ctxsw", "pendsv.iret",
    )
    assert s.at == 1
    assert s.thread_state[0] == s.runqueues.physical(1)    # EXPIRED
    s = fire(
        model, s,
        "producer0.noncs", "producer0.lock", "producer0.lock_svc",
        "svc.dispatch", "svc.mutex_lock.acquire",
    )
    assert s.mutex.value == 1
    assert s.mutex.wait_slot == (1,)
    assert model.state_violations(s) == []
    s = fire(model, s, "svc.mutex_lock.sched.elect", "svc.mutex_lock.sched.ctxsw", "svc.return")
    assert s.at == model.layout.softirq
    assert s.mutex.value == 1
    assert s.mutex.wait_slot == (1,)
    assert s.thread_state[1] == BLOCKED
    assert model.eval_ap(s, "producer_at_want")
    assert s.tasklet.bitmap == 1       # systick's bottom half is queued
