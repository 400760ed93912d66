"""LTL over [] and <>: syntax tree, parser, printer and a direct evaluator on
ultimately periodic words."""
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from ..errors import ConfigurationError, LtlSyntaxError


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Globally(Formula):
    operand: Formula


@dataclass(frozen=True)
class Finally(Formula):
    operand: Formula


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(\[\]|<>|->|&&|\|\||!|\(|\)|[A-Za-z_][A-Za-z0-9_]*)")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise LtlSyntaxError(f"unexpected character {text[bad]!r}", bad)
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    tokens.append(("", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def take(self) -> tuple[str, int]:
        token = self.tokens[self.i]
        self.i += 1
        return token

    def fail(self, what: str):
        token, pos = self.tokens[self.i]
        found = repr(token) if token else "end of input"
        raise LtlSyntaxError(f"expected {what}, found {found}", pos)

    def parse(self) -> Formula:
        f = self.implies()
        if self.peek() != "":
            self.fail("end of input")
        return f

    def implies(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek() == "||":
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.peek() == "&&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        token = self.peek()
        if token == "!":
            self.take()
            return Not(self.unary())
        if token == "[]":
            self.take()
            return Globally(self.unary())
        if token == "<>":
            self.take()
            return Finally(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        token = self.peek()
        if token == "(":
            self.take()
            f = self.implies()
            if self.peek() != ")":
                self.fail("')'")
            self.take()
            return f
        if token == "true":
            self.take()
            return TrueF()
        if token == "false":
            self.take()
            return FalseF()
        if token and (token[0].isalpha() or token[0] == "_"):
            self.take()
            return Prop(token)
        self.fail("a proposition, '(' or a unary operator")


def parse_ltl(text: str) -> Formula:
    """Parse `[]`, `<>`, `!`, `&&`, `||`, `->` (right-associative), parentheses."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC = {Implies: 1, Or: 2, And: 3, Not: 4, Globally: 4, Finally: 4}
_SYMBOL = {Implies: "->", Or: "||", And: "&&", Not: "!", Globally: "[]", Finally: "<>"}


def _prec(f: Formula) -> int:
    return _PREC.get(type(f), 5)


def format_formula(f: Formula) -> str:
    """Print with the fewest parentheses that parse back to the same tree."""
    match f:
        case TrueF():
            return "true"
        case FalseF():
            return "false"
        case Prop(name):
            return name
        case Not(g) | Globally(g) | Finally(g):
            inner = format_formula(g)
            if _prec(g) < 4:
                inner = f"({inner})"
            return f"{_SYMBOL[type(f)]}{inner}"
        case And(l, r) | Or(l, r) | Implies(l, r):
            p = _prec(f)
            right_assoc = isinstance(f, Implies)
            left = format_formula(l)
            right = format_formula(r)
            if _prec(l) < p or (right_assoc and _prec(l) == p):
                left = f"({left})"
            if _prec(r) < p or (not right_assoc and _prec(r) == p):
                right = f"({right})"
            return f"{left} {_SYMBOL[type(f)]} {right}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Utilities
# ---------------------------------------------------------------------------

def propositions(f: Formula) -> frozenset[str]:
    match f:
        case Prop(name):
            return frozenset({name})
        case Not(g) | Globally(g) | Finally(g):
            return propositions(g)
        case And(l, r) | Or(l, r) | Implies(l, r):
            return propositions(l) | propositions(r)
    return frozenset()


def bind(f: Formula, known: Iterable[str]) -> Formula:
    """Check every proposition of f against the registered ones."""
    known = frozenset(known)
    unknown = sorted(propositions(f) - known)
    if unknown:
        raise ConfigurationError(
            f"unknown proposition(s) {', '.join(unknown)}; known: {', '.join(sorted(known))}")
    return f


# ---------------------------------------------------------------------------
# Direct semantics on u.v^omega
# ---------------------------------------------------------------------------

def check_ltl_on_lasso(f: Formula, prefix: Sequence[Iterable[str]], cycle: Sequence[Iterable[str]]) -> bool:
    """Does the word prefix . cycle^omega satisfy f? Each letter is the set of true props."""
    if not cycle:
        raise ValueError("an ultimately periodic word needs a non-empty cycle")
    word = [frozenset(letter) for letter in prefix] + [frozenset(letter) for letter in cycle]
    loop = len(prefix)
    size = len(word)

    def reach(i: int) -> range:
        # Positions visited from i onwards: the rest of the prefix plus the whole cycle.
        return range(min(i, loop), size)

    def values(g: Formula) -> list[bool]:
        match g:
            case TrueF():
                return [True] * size
            case FalseF():
                return [False] * size
            case Prop(name):
                return [name in letter for letter in word]
            case Not(h):
                return [not v for v in values(h)]
            case And(l, r):
                return [a and b for a, b in zip(values(l), values(r))]
            case Or(l, r):
                return [a or b for a, b in zip(values(l), values(r))]
            case Implies(l, r):
                return [not a or b for a, b in zip(values(l), values(r))]
            case Globally(h):
                inner = values(h)
                return [all(inner[j] for j in reach(i)) for i in range(size)]
            case Finally(h):
                inner = values(h)
                return [any(inner[j] for j in reach(i)) for i in range(size)]
        raise TypeError(f"not a formula: {g!r}")

    return values(f)[0]
