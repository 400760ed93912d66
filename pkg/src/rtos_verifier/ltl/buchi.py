"""Tableau translation of []/<> LTL into a Büchi automaton.

An atom fixes the truth of every proposition of the formula and of one
next-step obligation per temporal subformula (`X []g`, `X <>g`). The value of
any subformula in an atom follows from the expansion laws

    []g = g && X []g        <>g = g || X <>g

and A -> B is an edge iff each obligation of A equals the value of its
subformula in B. Eventualities are made to hold with one acceptance set per
temporal subformula, and the generalised condition is folded into a single
accepting set with a round-robin counter. Successors are computed on demand
for the letter the model supplies.
"""
import logging
from collections.abc import Callable, Hashable, Iterable
from functools import lru_cache

from .formula import (
    And,
    FalseF,
    Finally,
    Formula,
    Globally,
    Implies,
    Not,
    Or,
    Prop,
    TrueF,
    format_formula,
    propositions,
)

logger = logging.getLogger(__name__)

INITIAL = -1

Letter = frozenset[str]


def temporal_subformulas(f: Formula) -> list[Formula]:
    """[] and <> subformulas of f, innermost first, without duplicates."""
    found: list[Formula] = []

    def walk(g: Formula) -> None:
        match g:
            case Not(h) | Globally(h) | Finally(h):
                walk(h)
            case And(l, r) | Or(l, r) | Implies(l, r):
                walk(l)
                walk(r)
        if isinstance(g, (Globally, Finally)) and g not in found:
            found.append(g)

    walk(f)
    return found


class BuchiAutomaton:
    """States are ints: INITIAL, or atom * rounds + counter."""

    def __init__(self, formula: Formula):
        self.formula = formula
        self.props: tuple[str, ...] = tuple(sorted(propositions(formula)))
        self.temporal = temporal_subformulas(formula)
        slot = {g: i for i, g in enumerate(self.temporal)}
        n_props = len(self.props)
        n_atoms = 1 << (n_props + len(self.temporal))

        self.atom_props: list[Letter] = []
        self.atom_next: list[tuple[bool, ...]] = []
        self.atom_now: list[tuple[bool, ...]] = []
        holds: list[bool] = []
        acceptance: list[set[int]] = [set() for _ in self.temporal]

        for atom in range(n_atoms):
            letter = frozenset(p for i, p in enumerate(self.props) if atom >> i & 1)
            nxt = tuple(bool(atom >> (n_props + j) & 1) for j in range(len(self.temporal)))
            memo: dict[Formula, bool] = {}

            def value(g: Formula) -> bool:
                if g in memo:
                    return memo[g]
                match g:
                    case TrueF():
                        v = True
                    case FalseF():
                        v = False
                    case Prop(name):
                        v = name in letter
                    case Not(h):
                        v = not value(h)
                    case And(l, r):
                        v = value(l) and value(r)
                    case Or(l, r):
                        v = value(l) or value(r)
                    case Implies(l, r):
                        v = not value(l) or value(r)
                    case Globally(h):
                        v = value(h) and nxt[slot[g]]
                    case Finally(h):
                        v = value(h) or nxt[slot[g]]
                    case _:
                        raise TypeError(f"not a formula: {g!r}")
                memo[g] = v
                return v

            self.atom_props.append(letter)
            self.atom_next.append(nxt)
            self.atom_now.append(tuple(value(g) for g in self.temporal))
            holds.append(value(formula))
            for j, g in enumerate(self.temporal):
                # <>g must not be postponed forever; []g must not fail without a witness.
                if isinstance(g, Finally):
                    fulfilled = not value(g) or value(g.operand)
                else:
                    fulfilled = value(g) or not value(g.operand)
                if fulfilled:
                    acceptance[j].add(atom)

        self.acceptance = acceptance
        self.rounds = max(len(acceptance), 1)
        self._by_profile: dict[tuple[Letter, tuple[bool, ...]], list[int]] = {}
        self._by_now: dict[tuple[bool, ...], list[int]] = {}
        self._initial: dict[Letter, list[int]] = {}
        for atom in range(n_atoms):
            key = (self.atom_props[atom], self.atom_now[atom])
            self._by_profile.setdefault(key, []).append(atom)
            self._by_now.setdefault(self.atom_now[atom], []).append(atom)
            if holds[atom]:
                self._initial.setdefault(self.atom_props[atom], []).append(atom)

        self.live = self._live_states()
        self._cache: dict[tuple[int, Letter], tuple[int, ...]] = {}
        logger.debug(f"Automaton for {format_formula(formula)}: {n_atoms} atoms, "
                     f"{len(acceptance)} acceptance sets, {len(self.live)} live states")

    # -- structure ------------------------------------------------------------

    def _counter_after(self, atom: int, counter: int) -> int:
        if self.acceptance and atom in self.acceptance[counter]:
            return (counter + 1) % self.rounds
        return counter

    def accepting(self, q: int) -> bool:
        if q == INITIAL:
            return False
        atom, counter = divmod(q, self.rounds)
        if not self.acceptance:
            return True
        return counter == 0 and atom in self.acceptance[0]

    def _any_letter_successors(self, q: int) -> list[int]:
        if q == INITIAL:
            atoms = [a for group in self._initial.values() for a in group]
            return [a * self.rounds for a in atoms]
        atom, counter = divmod(q, self.rounds)
        after = self._counter_after(atom, counter)
        return [b * self.rounds + after for b in self._by_now.get(self.atom_next[atom], [])]

    def _live_states(self) -> frozenset[int]:
        """States from which some accepting cycle is reachable."""
        n_states = len(self.atom_props) * self.rounds
        edges = {q: self._any_letter_successors(q) for q in range(n_states)}
        good = set()
        for component in strongly_connected_components(range(n_states), edges.__getitem__):
            if not any(self.accepting(q) for q in component):
                continue
            if len(component) > 1 or component[0] in edges[component[0]]:
                good.update(component)
        reverse: dict[int, list[int]] = {}
        for q, succs in edges.items():
            for r in succs:
                reverse.setdefault(r, []).append(q)
        live = set(good)
        frontier = list(good)
        while frontier:
            for p in reverse.get(frontier.pop(), ()):
                if p not in live:
                    live.add(p)
                    frontier.append(p)
        return frozenset(live)

    @property
    def states(self) -> frozenset[int]:
        return self.live | {INITIAL}

    # -- on-the-fly interface -------------------------------------------------

    def successors(self, q: int, letter: Iterable[str]) -> tuple[int, ...]:
        """States reached from q on reading `letter` (the set of true propositions)."""
        letter = frozenset(letter).intersection(self.props)
        key = (q, letter)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        if q == INITIAL:
            targets = [a * self.rounds for a in self._initial.get(letter, [])]
        else:
            atom, counter = divmod(q, self.rounds)
            after = self._counter_after(atom, counter)
            atoms = self._by_profile.get((letter, self.atom_next[atom]), [])
            targets = [b * self.rounds + after for b in atoms]
        result = tuple(t for t in targets if t in self.live)
        self._cache[key] = result
        return result

    def accepts_lasso(self, prefix: list[Iterable[str]], cycle: list[Iterable[str]]) -> bool:
        """Membership of the word prefix . cycle^omega, decided on the finite run graph."""
        if not cycle:
            raise ValueError("an ultimately periodic word needs a non-empty cycle")
        word = [frozenset(letter) for letter in prefix] + [frozenset(letter) for letter in cycle]
        loop = len(prefix)

        def after(i: int) -> int:
            return i + 1 if i + 1 < len(word) else loop

        roots = [(0, q) for q in self.successors(INITIAL, word[0])]

        def step(node: tuple[int, int]) -> list[tuple[int, int]]:
            i, q = node
            j = after(i)
            return [(j, r) for r in self.successors(q, word[j])]

        return has_accepting_cycle(roots, step, lambda node: self.accepting(node[1]))


def to_buchi(f: Formula, negate: bool = False) -> BuchiAutomaton:
    """Automaton for f, or for !f when it is used as a never claim."""
    return _build(Not(f) if negate else f)


@lru_cache(maxsize=32)
def _build(f: Formula) -> BuchiAutomaton:
    return BuchiAutomaton(f)


# ---------------------------------------------------------------------------
# Graph helpers shared with the emptiness oracle
# ---------------------------------------------------------------------------

def strongly_connected_components(
    roots: Iterable[Hashable], successors: Callable[[Hashable], Iterable[Hashable]]
) -> list[list[Hashable]]:
    """Tarjan's algorithm without recursion, over everything reachable from roots."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    components: list[list] = []
    counter = 0

    for root in roots:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors(root)))]
        while work:
            v, children = work[-1]
            for w in children:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    component = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        component.append(w)
                        if w == v:
                            break
                    components.append(component)
    return components


def has_accepting_cycle(
    roots: Iterable[Hashable],
    successors: Callable[[Hashable], Iterable[Hashable]],
    accepting: Callable[[Hashable], bool],
) -> bool:
    """Some reachable non-trivial SCC holds an accepting node."""
    for component in strongly_connected_components(roots, successors):
        if not any(accepting(v) for v in component):
            continue
        if len(component) > 1:
            return True
        v = component[0]
        if v in set(successors(v)):
            return True
    return False
