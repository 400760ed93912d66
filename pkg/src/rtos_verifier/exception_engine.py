"""ARMv7-M exception lifecycle over a mutable Frame.

Entry (ITake, PendSVTake), return with tail-chaining (IRet) and the context
switch, which only ever rewrites the bottom element of ATStack.
"""
from .errors import InternalLogicError
from .state import BASE_LEVEL, IDLE, INTERRUPT_ROLES, Frame, GlobalState, Layout


def bit(pid: int) -> int:
    return 1 << pid


def exec_priority(s: GlobalState | Frame, layout: Layout) -> int:
    """Level the CPU currently runs at; thread mode is BASE_LEVEL."""
    if layout.is_exception(s.at):
        return layout.exception_level(s.at)
    return BASE_LEVEL


def resumable_level(pid: int, layout: Layout) -> int:
    return BASE_LEVEL if layout.is_user_level(pid) else layout.exception_level(pid)


def _push(f: Frame, layout: Layout, e: int) -> None:
    stack = f.at_stack
    f.require("atstack_bounds", len(stack) < layout.max_stack,
              f"push of {layout.name(f.at)} onto a full ATStack")
    if stack:
        f.require("atstack_bounds", layout.is_exception(f.at),
                  f"thread {layout.name(f.at)} pushed above {layout.name(stack[-1])}")
    f.require("atstack_bounds", layout.exception_level(e) < exec_priority(f, layout),
              f"{layout.name(e)} does not outrank {layout.name(f.at)}")
    stack.append(f.at)


def _enter(f: Frame, e: int) -> None:
    f.at = e
    f.active |= bit(e)
    f.pending &= ~bit(e)


def itake(f: Frame, layout: Layout, e: int) -> None:
    """Admit interrupt e: preempt, take over after a tail-chain, or pend."""
    if f.ghost_direct_at == e:
        # Tail-chain handoff: the preempted context stays where it is.
        f.ghost_direct_at = None
        _enter(f, e)
        return
    if layout.exception_level(e) < exec_priority(f, layout):
        if f.active & bit(e):
            raise InternalLogicError(f"ITake of {layout.name(e)} while it is active")
        _push(f, layout, e)
        _enter(f, e)
        return
    # Priority less than or equal to the running one.
    f.pending |= bit(e)


def pendsv_take(f: Frame, layout: Layout) -> None:
    pendsv = layout.pendsv
    if not f.pending & bit(pendsv):
        raise InternalLogicError("PendSVTake without a pending PendSV")
    f.require("pendsv_preempts_user", layout.is_user_level(f.at) and f.active == 0,
              f"PendSV taken over {layout.name(f.at)}")
    _push(f, layout, pendsv)
    _enter(f, pendsv)


def pend(f: Frame, layout: Layout, writer: int, target: int) -> None:
    """Set a pending bit on behalf of a handler.

    A request for an exception that is already active is absorbed: the running
    handler is the one that serves it, and pending and active stay disjoint.
    """
    f.require("pending_writer", layout.role(writer) in INTERRUPT_ROLES and layout.is_exception(target),
              f"{layout.name(writer)} pends {layout.name(target)}")
    if not f.active & bit(target):
        f.pending |= bit(target)


def tail_chain_candidate(f: Frame | GlobalState, layout: Layout) -> int | None:
    """Highest-priority pending exception at least as urgent as the context to resume.

    On a tie with the stacked exception the pending one wins and is chained.
    """
    top = f.at_stack[-1]
    bar = resumable_level(top, layout)
    best = None
    pending = f.pending
    while pending:
        pid = (pending & -pending).bit_length() - 1
        pending &= pending - 1
        if pid == layout.pendsv and not layout.is_user_level(top):
            continue
        level = layout.exception_level(pid)
        if level <= bar and (best is None or level < layout.exception_level(best)):
            best = pid
    return best


def iret(f: Frame, layout: Layout) -> None:
    """Exception return: tail-chain into a pending exception or pop ATStack."""
    if layout.is_user_level(f.at):
        raise InternalLogicError(f"IRet from thread {layout.name(f.at)}")
    if not f.at_stack:
        raise InternalLogicError(f"IRet of {layout.name(f.at)} with an empty ATStack")
    f.active &= ~bit(f.at)
    f.marked = None
    chained = tail_chain_candidate(f, layout)
    if chained is None:
        f.at = f.at_stack.pop()
        return
    level = layout.exception_level(chained)
    f.require("tail_chain_priority",
              all(layout.exception_level(pid) >= level
                  for pid in range(layout.count) if f.pending & bit(pid)),
              f"tail-chain to {layout.name(chained)} over a higher pending exception")
    if chained == layout.pendsv:
        f.require("pendsv_preempts_user", f.active == 0,
                  "PendSV tail-chained while another exception is active")
    f.ghost_direct_at = chained
    itake(f, layout, chained)


def ctxsw(f: Frame, layout: Layout, next_pid: int) -> None:
    """Replace the interrupted thread at the bottom of ATStack."""
    f.require("ctxsw_no_active",
              f.at in (layout.svc, layout.pendsv) and f.active & ~bit(f.at) == 0,
              f"context switch from {layout.name(f.at)} with active={f.active:#x}")
    f.require("atstack_bottom_user",
              len(f.at_stack) == 1 and layout.is_user_level(f.at_stack[0]),
              f"ATStack {[layout.name(p) for p in f.at_stack]} at a context switch")
    f.require("atstack_bottom_user", next_pid == IDLE or layout.is_user_level(next_pid),
              f"switch to {layout.name(next_pid)}")
    f.at_stack[0] = next_pid
    f.progress = 0
    f.arrived = 0
