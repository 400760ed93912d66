from types import SimpleNamespace

import pytest

from src.rtos_verifier.config import make_config
from src.rtos_verifier.explorer import SearchLimits
from src.rtos_verifier.kernel import Kernel
from src.rtos_verifier.model import KernelModel
from src.rtos_verifier.state import AssertionOutcome, Layout, StatementId, Transition, TransitionKind

NCS, TRY, CS = 0, 1, 2


@pytest.fixture
def base_config():
    return make_config()


@pytest.fixture
def base_model(base_config):
    return KernelModel(base_config)


@pytest.fixture
def single_task_model():
    return KernelModel(make_config(n_user_tasks=1))


@pytest.fixture
def limits():
    return SearchLimits(max_depth=10_000, max_states=1_000_000, max_memory_mb=1024)


class ToyModel:
    """Small hand-written models behind the same interface as KernelModel."""

    names: tuple[str, ...] = ()

    def statements(self):
        return [StatementId(i, name) for i, name in enumerate(self.names)]

    def move(self, owner: int, name: str) -> Transition:
        return Transition(owner, StatementId(self.names.index(name), name), TransitionKind.AWAITS)

    def encode_state(self, s) -> bytes:
        return bytes(s)

    def state_violations(self, s):
        return []

    def propositions(self):
        return frozenset(self.props)

    def eval_ap(self, s, name: str) -> bool:
        return self.props[name](s)

    def process_name(self, pid: int) -> str:
        return f"p{pid}"


class MutexToy(ToyModel):
    """Two processes cycling NCS -> TRY -> CS, with or without a test-and-set lock.

    State: (pc0, pc1, lock).
    """

    names = ("p0.ncs", "p0.try", "p0.cs", "p1.ncs", "p1.try", "p1.cs")

    def __init__(self, locked: bool):
        self.locked = locked
        self.props = {
            "try0": lambda s: s[0] == TRY,
            "try1": lambda s: s[1] == TRY,
            "cs0": lambda s: s[0] == CS,
            "cs1": lambda s: s[1] == CS,
        }

    def initial_state(self):
        return (NCS, NCS, 0)

    def enabled_transitions(self, s):
        enabled = []
        for i in (0, 1):
            step = ("ncs", "try", "cs")[s[i]]
            if s[i] == TRY and self.locked and s[2]:
                continue
            enabled.append(self.move(i, f"p{i}.{step}"))
        return enabled

    def apply_transition(self, s, t):
        pcs, lock = [s[0], s[1]], s[2]
        i = t.owner
        if pcs[i] == NCS:
            pcs[i] = TRY
        elif pcs[i] == TRY:
            pcs[i] = CS
            lock = 1 if self.locked else 0
        else:
            pcs[i] = NCS
            lock = 0
        return (pcs[0], pcs[1], lock), []

    def state_violations(self, s):
        if s[0] == CS and s[1] == CS:
            return [AssertionOutcome("mutual_exclusion", False, "both in CS")]
        return []


class LlscToy(ToyModel):
    """Two LL/SC lock fast paths plus an environment doing exception returns.

    State: (pc0, pc1, value + 1, marked, successes since the last mark, returned).
    pc: 0 ldrex, 1 strex, 2 release.
    """

    names = ("p0.ldrex", "p0.strex", "p0.release", "p1.ldrex", "p1.strex", "p1.release", "env.iret")

    def __init__(self):
        self.kernel = Kernel(Layout(make_config()))
        self.props = {"cs0": lambda s: s[0] == 2, "cs1": lambda s: s[1] == 2}

    def initial_state(self):
        return (0, 0, 0, 0, 0, 0)

    def enabled_transitions(self, s):
        enabled = [self.move(i, f"p{i}.{('ldrex', 'strex', 'release')[s[i]]}") for i in (0, 1)]
        enabled.append(self.move(2, "env.iret"))
        return enabled

    def apply_transition(self, s, t):
        pcs = [s[0], s[1]]
        f = SimpleNamespace(mutex_value=s[2] - 1, marked=s[3] or None, regs=[0, 0, 0])
        successes, returned = s[4], 0
        if t.owner == 2:
            # exception return clears the local monitor
            f.marked = None
            returned = 1
        else:
            i = t.owner
            if pcs[i] == 0:
                successes = 0
                pcs[i] = 1 if self.kernel.ldrex(f, i) == -1 else 0
            elif pcs[i] == 1:
                if self.kernel.strex(f, i, 0):
                    successes += 1
                    pcs[i] = 2
                else:
                    pcs[i] = 0
            else:
                f.mutex_value = -1
                pcs[i] = 0
        return (pcs[0], pcs[1], f.mutex_value + 1, f.marked or 0, successes, returned), []

    def state_violations(self, s):
        failed = []
        if s[4] > 1:
            failed.append(AssertionOutcome("one_success_per_mark", False, f"{s[4]} successes"))
        if s[5] and s[3]:
            failed.append(AssertionOutcome("monitor_cleared", False, "mark survived a return"))
        if s[0] == 2 and s[1] == 2:
            failed.append(AssertionOutcome("mutual_exclusion", False, "both hold the lock"))
        return failed


class UnfairToy(ToyModel):
    """Four states: process A loops 0 -> 1 -> 0, process B loops 0 -> 2 -> 3 -> 0.

    p (B wants) holds in state 0, q (B served) in state 3. The run that only
    ever schedules A starves B.
    """

    names = ("a.go", "a.back", "b.try", "b.cs", "b.out")
    edges = {
        0: [(0, "a.go", 1), (1, "b.try", 2)],
        1: [(0, "a.back", 0)],
        2: [(1, "b.cs", 3)],
        3: [(1, "b.out", 0)],
    }

    def __init__(self):
        self.props = {"p": lambda s: s[0] == 0, "q": lambda s: s[0] == 3}

    def initial_state(self):
        return (0,)

    def enabled_transitions(self, s):
        return [self.move(owner, name) for owner, name, _ in self.edges[s[0]]]

    def apply_transition(self, s, t):
        for owner, name, target in self.edges[s[0]]:
            if owner == t.owner and name == t.stmt.name:
                return (target,), []
        raise AssertionError(f"{t} not enabled in {s}")


@pytest.fixture
def locked_toy():
    return MutexToy(locked=True)


@pytest.fixture
def lockfree_toy():
    return MutexToy(locked=False)


@pytest.fixture
def llsc_toy():
    return LlscToy()


@pytest.fixture
def unfair_toy():
    return UnfairToy()


class DeadEndToy(ToyModel):
    """0 -> 1, and state 1 has no move."""

    names = ("p0.step",)

    def __init__(self):
        self.props = {"end": lambda s: s[0] == 1}

    def initial_state(self):
        return (0,)

    def enabled_transitions(self, s):
        return [self.move(0, "p0.step")] if s[0] == 0 else []

    def apply_transition(self, s, t):
        return (1,), []


@pytest.fixture
def dead_end_toy():
    return DeadEndToy()
