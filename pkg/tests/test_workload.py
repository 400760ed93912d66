from dataclasses import replace

import pytest

from src.rtos_verifier.config import make_config
from src.rtos_verifier.errors import ConfigurationError
from src.rtos_verifier.model import KernelModel
from src.rtos_verifier.state import BLOCKED, CondVarState, MutexState
from src.rtos_verifier.workload import (
    PROPOSITIONS,
    SAFETY_ASSERTIONS,
    Mutation,
    parse_mutation,
    safety_assertions,
)

THIRTEEN = [
    "queue_bounds", "bitmap_consistency", "idle_election", "pending_writer",
    "tail_chain_priority", "atstack_bounds", "pendsv_preempts_user", "race_condition",
    "syscall_no_pending", "ctxsw_no_active", "atstack_bottom_user", "mutex_list_nonempty",
    "mutex_lower_bound",
]


def test_parse_mutation():
    assert parse_mutation(None) is Mutation.NONE
    assert parse_mutation("drop-lock") is Mutation.DROP_LOCK
    with pytest.raises(ConfigurationError, match="drop-signal"):
        parse_mutation("drop-everything")


def test_even_tasks_consume_odd_tasks_produce():
    model = KernelModel(make_config(n_user_tasks=3))
    names = [model.process_name(pid) for pid in model.layout.tasks]
    assert names == ["consumer0", "producer0", "consumer1"]
    assert model.layout.consumers() == (0, 2)
    assert model.layout.producers() == (1,)


def test_program_shape(base_model):
    consumer = base_model.programs[0]
    names = [s.name for s in consumer.statements]
    assert names[0] == "consumer0.noncs"
    assert "consumer0.take" in names
    assert [s.name for s in consumer.waiting] == ["consumer0.want", "consumer0.relock"]
    assert [s.name for s in consumer.statements if s.label == "cs"] == [
        "consumer0.cs_in", "consumer0.take", "consumer0.cs_out"]
    producer = base_model.programs[1]
    assert "producer0.put" in [s.name for s in producer.statements]


def test_drop_lock_removes_the_lock_statements():
    model = KernelModel(make_config(), Mutation.DROP_LOCK)
    names = [s.name for s in model.programs[0].statements]
    assert not any("lock" in name for name in names)
    assert "consumer0.want" in names


def test_propositions(base_model):
    assert base_model.propositions() == frozenset(PROPOSITIONS)
    s = base_model.initial_state()
    assert not base_model.eval_ap(s, "cs_c")
    assert not base_model.eval_ap(s, "consumer_at_want")
    assert base_model.eval_ap(replace(s, cs_p=1), "cs_p")
    with pytest.raises(ConfigurationError):
        base_model.eval_ap(s, "nosuch")


def test_the_thirteen_assertions_are_named():
    assert [a.name for a in SAFETY_ASSERTIONS] == THIRTEEN
    names = {a.name for a in safety_assertions()}
    assert {"condwait_holds_mutex", "condvar_waiters_blocked", "exception_sets", "buffer_bounds"} <= names


def test_initial_state_is_clean(base_model):
    assert base_model.state_violations(base_model.initial_state()) == []


@pytest.mark.parametrize("change, check", [
    ({"cs_c": 1, "cs_p": 1}, "race_condition"),
    ({"mutex": MutexState(value=1)}, "mutex_list_nonempty"),
    ({"mutex": MutexState(value=-2)}, "mutex_lower_bound"),
    ({"buffer": 2}, "buffer_bounds"),
    ({"at_stack": (5, 0)}, "atstack_bounds"),
    ({"pending": 1 << 3, "active": 1 << 3}, "exception_sets"),
    ({"condvar": CondVarState((0,))}, "condvar_waiters_blocked"),
    ({"condvar": CondVarState((1,)), "thread_state": (0, BLOCKED, 0)}, "condvar_waiters_blocked"),
])
def test_state_checks(base_model, change, check):
    s = replace(base_model.initial_state(), **change)
    failed = [o.name for o in base_model.state_violations(s)]
    assert check in failed


def test_consumer_parked_at_the_relock_still_wants(base_model):
    s = base_model.initial_state()
    parked = replace(s, pc=(base_model.kernel.addr["consumer0.relock"],) + s.pc[1:])
    assert base_model.eval_ap(parked, "consumer_at_want")
    assert not base_model.eval_ap(parked, "producer_at_want")


def test_blocked_waiter_passes_the_condvar_check(base_model):
    s = replace(base_model.initial_state(), condvar=CondVarState((0,)),
                thread_state=(BLOCKED, 0, 0))
    assert "condvar_waiters_blocked" not in [o.name for o in base_model.state_violations(s)]
