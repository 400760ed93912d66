"""Never-claim checking: on-the-fly product of a Model with a Büchi automaton
and the two-pass (blue/red) nested depth-first search for accepting cycles."""
from __future__ import annotations

import logging
import time
from collections.abc import Hashable
from dataclasses import dataclass
from typing import Protocol

from ..explorer import (
    STUTTER,
    SearchLimits,
    SearchStats,
    TraceStep,
    Verdict,
    VerdictKind,
    VisitedStore,
    replay,
)
from ..model import Model
from .buchi import INITIAL, BuchiAutomaton, to_buchi
from .formula import Formula, bind, format_formula

logger = logging.getLogger(__name__)

Step = tuple[int, int]


class ProductGraph(Protocol):
    def initial(self) -> list: ...

    def successors(self, node) -> list[tuple[Step, object]]: ...

    def key(self, node) -> Hashable: ...

    def accepting(self, node) -> bool: ...


@dataclass(frozen=True)
class Lasso:
    """prefix_nodes runs from the initial node to the cycle start; cycle_nodes
    starts and ends there."""
    prefix_path: tuple[Step, ...]
    cycle_path: tuple[Step, ...]
    prefix_nodes: tuple
    cycle_nodes: tuple
    prefix: tuple[TraceStep, ...] = ()
    cycle: tuple[TraceStep, ...] = ()


class ModelProduct:
    """Synchronous product: the automaton reads the label of every model state it enters."""

    def __init__(self, model: Model, automaton: BuchiAutomaton):
        self.model = model
        self.automaton = automaton

    def letter(self, s) -> frozenset[str]:
        return frozenset(p for p in self.automaton.props if self.model.eval_ap(s, p))

    def initial(self) -> list:
        s0 = self.model.initial_state()
        return [(s0, q) for q in self.automaton.successors(INITIAL, self.letter(s0))]

    def successors(self, node) -> list[tuple[Step, object]]:
        s, q = node
        model = self.model
        enabled = model.enabled_transitions(s)
        if not enabled:
            # A model state with no move is extended by stuttering forever.
            moves = [(STUTTER, s)]
        else:
            moves = []
            for t in enabled:
                succ, _ = model.apply_transition(s, t)
                moves.append(((t.owner, t.stmt.ordinal), succ))
        result = []
        for step, succ in moves:
            letter = self.letter(succ)
            for r in self.automaton.successors(q, letter):
                result.append((step, (succ, r)))
        return result

    def key(self, node) -> Hashable:
        s, q = node
        return self.model.encode_state(s), q

    def accepting(self, node) -> bool:
        return self.automaton.accepting(node[1])


def find_accepting_cycle(graph: ProductGraph, limits: SearchLimits) -> tuple[Lasso | None, SearchStats]:
    """Blue/red nested DFS. Red searches start at accepting nodes in blue
    post-order and stop at the first node still on the blue stack."""
    stats = SearchStats()
    blue = VisitedStore(limits)
    red = VisitedStore(limits)
    on_stack: dict[Hashable, int] = {}
    started = time.perf_counter()

    def finish(lasso: Lasso | None) -> tuple[Lasso | None, SearchStats]:
        stats.elapsed = time.perf_counter() - started
        stats.states_stored = len(blue)
        stats.memory_estimate = blue.memory_estimate + red.memory_estimate
        return lasso, stats

    for root in graph.initial():
        root_key = graph.key(root)
        if blue.seen(root_key, root):
            continue
        blue.add(root_key, root)
        on_stack[root_key] = 0
        # frame: [node, key, successors, next index, step into node]
        stack: list[list] = [[root, root_key, None, 0, None]]
        while stack:
            frame = stack[-1]
            node, key, succs, index, _ = frame
            if succs is None:
                succs = frame[2] = graph.successors(node)
                stats.transitions_fired += len(succs)
            if index < len(succs):
                frame[3] = index + 1
                step, child = succs[index]
                child_key = graph.key(child)
                if blue.seen(child_key, child):
                    continue
                if len(stack) > limits.max_depth:
                    stats.truncated += 1
                    continue
                blue.add(child_key, child)
                on_stack[child_key] = len(stack)
                stack.append([child, child_key, None, 0, step])
                stats.max_depth = max(stats.max_depth, len(stack) - 1)
                continue
            if graph.accepting(node):
                lasso = _red_search(graph, stack, on_stack, red, limits, stats)
                if lasso is not None:
                    return finish(lasso)
            stack.pop()
            del on_stack[key]
    return finish(None)


def _red_search(graph: ProductGraph, stack: list[list], on_stack: dict, red: VisitedStore,
                limits: SearchLimits, stats: SearchStats) -> Lasso | None:
    seed = stack[-1]
    red_stack: list[list] = [[seed[0], seed[1], seed[2], 0, None]]
    while red_stack:
        frame = red_stack[-1]
        node, _, succs, index, _ = frame
        if succs is None:
            succs = frame[2] = graph.successors(node)
            stats.transitions_fired += len(succs)
        if index >= len(succs):
            red_stack.pop()
            continue
        frame[3] = index + 1
        step, child = succs[index]
        child_key = graph.key(child)
        if child_key in on_stack:
            return _close(stack, on_stack[child_key], red_stack, step, child)
        if red.seen(child_key, child):
            continue
        if len(stack) + len(red_stack) > limits.max_depth:
            stats.truncated += 1
            continue
        red.add(child_key, child)
        red_stack.append([child, child_key, None, 0, step])
    return None


def _close(stack: list[list], start: int, red_stack: list[list], last: Step, target) -> Lasso:
    prefix_path = tuple(frame[4] for frame in stack[1:start + 1])
    prefix_nodes = tuple(frame[0] for frame in stack[:start + 1])
    cycle_path = (tuple(frame[4] for frame in stack[start + 1:])
                  + tuple(frame[4] for frame in red_stack[1:]) + (last,))
    cycle_nodes = (tuple(frame[0] for frame in stack[start:])
                   + tuple(frame[0] for frame in red_stack[1:]) + (target,))
    return Lasso(prefix_path, cycle_path, prefix_nodes, cycle_nodes)


def nested_dfs(model: Model, never: BuchiAutomaton, limits: SearchLimits,
               name: str | None = None) -> tuple[Verdict, SearchStats]:
    """Search the product of `model` with the never claim for an accepting cycle."""
    logger.info(f"Nested DFS for {name or format_formula(never.formula)} "
                f"({len(never.live)} automaton states)")
    lasso, stats = find_accepting_cycle(ModelProduct(model, never), limits)
    if lasso is None:
        complete = not stats.truncated
        if not complete:
            logger.warning(f"Search incomplete: {stats.truncated} transitions cut at depth {limits.max_depth}")
        logger.info(f"Never claim has no accepting cycle: states={stats.states_stored}")
        return Verdict(VerdictKind.PASS, complete=complete, check=name), stats

    _, steps = replay(model, lasso.prefix_path + lasso.cycle_path)
    split = len(lasso.prefix_path)
    lasso = Lasso(lasso.prefix_path, lasso.cycle_path, lasso.prefix_nodes, lasso.cycle_nodes,
                  tuple(steps[:split]), tuple(steps[split:]))
    detail = f"accepting cycle of {len(lasso.cycle_path)} steps after a prefix of {split}"
    logger.warning(f"Property {name or format_formula(never.formula)} violated: {detail}")
    verdict = Verdict(VerdictKind.ACCEPTANCE_CYCLE, True, name, detail,
                      lasso.prefix_path + lasso.cycle_path, tuple(steps), lasso)
    return verdict, stats


def verify_ltl(model: Model, formula: Formula, limits: SearchLimits,
               name: str | None = None) -> tuple[Verdict, SearchStats]:
    """Check `formula` on every run of `model` by looking for a run of its negation."""
    bind(formula, model.propositions())
    return nested_dfs(model, to_buchi(formula, negate=True), limits, name)
