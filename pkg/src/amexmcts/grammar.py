"""Equation discovery as a deterministic MDP over context-free derivations.

States are prefix-notation sentential forms. An action applies one production
to the leftmost nonterminal. Complete equations are scored by ``1 - MSE``
against a dataset, clamped to [-1, 1]; incomplete equations that hit the
expansion cap, and equations that blow up on the data, score -1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, MalformedExpression, PreconditionViolation, RuleMismatch

BINARY = frozenset({"+", "-", "*", "^"})
UNARY = frozenset({"sin", "cos", "log"})
VARIABLES = ("x0", "x1")

EQUATION_GRAMMAR_TEXT = """\
Start -> 2
Start -> 1
Start -> 0.5
Start -> + Start Start
Start -> - Start Start
Start -> * Start Start
Start -> sin InnerFunction
Start -> cos InnerFunction
Start -> log InnerFunction
Start -> Variable
Start -> ^ Exponent Variable
Exponent -> 6
Exponent -> 5
Exponent -> 4
Exponent -> 3
Exponent -> 2
Exponent -> 0.5
Exponent -> x1
InnerFunction -> ^ Exponent Variable
InnerFunction -> x0
InnerFunction -> x1
InnerFunction -> + Sum Sum
Sum -> ^ Exponent Variable
Sum -> 1
Sum -> x0
Sum -> x1
Variable -> x0
Variable -> x1
"""

DEFAULT_MAX_EXPANSIONS = 25


class Rule(NamedTuple):
    head: str
    body: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.head} -> {' '.join(self.body)}"


@dataclass(frozen=True)
class Grammar:
    nonterminals: frozenset[str]
    terminals: frozenset[str]
    rules: tuple[Rule, ...]
    start: str

    def __post_init__(self):
        for rule in self.rules:
            if rule.head not in self.nonterminals:
                raise ValueError(f"rule head {rule.head!r} is not a nonterminal")
            unknown = set(rule.body) - self.nonterminals - self.terminals
            if unknown:
                raise ValueError(f"rule {rule} uses unknown symbols {sorted(unknown)}")
        heads = {rule.head for rule in self.rules}
        if heads != set(self.nonterminals):
            raise ValueError(f"nonterminals without rules: {sorted(set(self.nonterminals) - heads)}")
        if self.start not in self.nonterminals:
            raise ValueError(f"start symbol {self.start!r} is not a nonterminal")

    def rules_for(self, head: str) -> list[int]:
        return [i for i, rule in enumerate(self.rules) if rule.head == head]


def parse_grammar(text: str, start: str | None = None) -> Grammar:
    """Read ``HEAD -> sym sym ...`` lines; the first head is the start symbol by default.

    Blank lines and ``#`` comments are ignored. Every symbol that never
    appears as a head is a terminal.
    """
    rules = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, body = line.partition("->")
        if not sep or not head.strip() or not body.split():
            raise ValueError(f"line {lineno}: expected 'HEAD -> sym ...', got {raw!r}")
        rules.append(Rule(head.strip(), tuple(body.split())))
    if not rules:
        raise ValueError("grammar has no rules")
    nonterminals = frozenset(r.head for r in rules)
    terminals = frozenset(s for r in rules for s in r.body) - nonterminals
    return Grammar(nonterminals, terminals, tuple(rules), start or rules[0].head)


def load_grammar(path: str | Path) -> Grammar:
    return parse_grammar(Path(path).read_text())


EQUATION_GRAMMAR = parse_grammar(EQUATION_GRAMMAR_TEXT)


class DerivationState(NamedTuple):
    symbols: tuple[str, ...]
    expansions_used: int = 0

    def __str__(self) -> str:
        return " ".join(self.symbols)


def _leftmost_nonterminal(state: DerivationState, grammar: Grammar) -> int:
    for i, sym in enumerate(state.symbols):
        if sym in grammar.nonterminals:
            return i
    return -1


def is_complete(state: DerivationState, grammar: Grammar) -> bool:
    return _leftmost_nonterminal(state, grammar) < 0


def applicable_rules(state: DerivationState, grammar: Grammar) -> list[int]:
    """Indices of the rules rewriting the leftmost nonterminal, in grammar order."""
    pos = _leftmost_nonterminal(state, grammar)
    if pos < 0:
        raise PreconditionViolation(f"'{state}' is a complete expression")
    return grammar.rules_for(state.symbols[pos])


def apply_rule(state: DerivationState, rule_index: int, grammar: Grammar) -> DerivationState:
    pos = _leftmost_nonterminal(state, grammar)
    rule = grammar.rules[rule_index]
    if pos < 0 or state.symbols[pos] != rule.head:
        raise RuleMismatch(f"rule '{rule}' does not apply to '{state}'")
    symbols = state.symbols[:pos] + rule.body + state.symbols[pos + 1:]
    return DerivationState(symbols, state.expansions_used + 1)


def _column(symbol: str, x):
    if symbol == "x0":
        return x[..., 0]
    if symbol == "x1":
        return x[..., 1]
    try:
        return float(symbol)
    except ValueError:
        raise MalformedExpression(f"unknown operand {symbol!r}") from None


def evaluate_expression(symbols: Sequence[str], x) -> np.ndarray | float:
    """Evaluate a complete prefix expression on one row ``[x0, x1]`` or a matrix of rows.

    ``^ a b`` is ``b ** a``. Raises :class:`DomainError` on any non-finite
    value and :class:`MalformedExpression` when the arities do not parse.
    """
    x = np.asarray(x, dtype=float)
    pos = 0

    def walk():
        nonlocal pos
        if pos >= len(symbols):
            raise MalformedExpression(f"'{' '.join(symbols)}' ends early")
        sym = symbols[pos]
        pos += 1
        if sym in BINARY:
            left = walk()
            right = walk()
            if sym == "+":
                return left + right
            if sym == "-":
                return left - right
            if sym == "*":
                return left * right
            return np.power(right, left)
        if sym in UNARY:
            arg = walk()
            return {"sin": np.sin, "cos": np.cos, "log": np.log}[sym](arg)
        return _column(sym, x)

    with np.errstate(all="ignore"):
        value = walk()
    if pos != len(symbols):
        raise MalformedExpression(f"trailing symbols in '{' '.join(symbols)}'")
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise DomainError(f"'{' '.join(symbols)}' is not finite on the data")
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2 or y.shape != (X.shape[0],) or len(y) < 1:
            raise ValueError("dataset needs an (n, 2) input matrix and n >= 1 targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset values must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return len(self.y)


def sqrt_dataset(n: int = 20, low: float = 0.0, high: float = 4.0, seed: int = 0) -> Dataset:
    """``y = sqrt(x0)`` on an even grid of ``x0``; ``x1`` is uniform noise from ``seed``."""
    x0 = np.linspace(low, high, n)
    x1 = np.random.default_rng(seed).uniform(low, high, n)
    return Dataset(np.column_stack([x0, x1]), np.sqrt(x0))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x0", "x1", "y"])
        for (x0, x1), y in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(x0)), repr(float(x1)), repr(float(y))])


def load_dataset(path: str | Path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x0", "x1", "y"]:
            raise ValueError(f"{path}: expected header x0,x1,y")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(-1, 3)
    return Dataset(data[:, :2], data[:, 2])


def grammar_reward(
    state: DerivationState,
    dataset: Dataset,
    max_expansions: int = DEFAULT_MAX_EXPANSIONS,
    grammar: Grammar = EQUATION_GRAMMAR,
) -> float:
    """``clamp(1 - MSE, -1, 1)`` for complete equations, -1 for failures, 0 otherwise."""
    if not is_complete(state, grammar):
        return -1.0 if state.expansions_used >= max_expansions else 0.0
    try:
        pred = evaluate_expression(state.symbols, dataset.X)
    except DomainError:
        return -1.0
    with np.errstate(all="ignore"):
        mse = float(np.mean((pred - dataset.y) ** 2))
    if not np.isfinite(mse):
        return -1.0
    return min(1.0, max(-1.0, 1.0 - mse))


class GrammarEnv:
    """Derivation MDP; only complete or capped states are terminal."""

    name = "grammar"

    def __init__(
        self,
        dataset: Dataset | None = None,
        grammar: Grammar = EQUATION_GRAMMAR,
        max_expansions: int = DEFAULT_MAX_EXPANSIONS,
    ):
        if max_expansions < 1:
            raise ValueError("max_expansions must be >= 1")
        self.dataset = sqrt_dataset() if dataset is None else dataset
        self.grammar = grammar
        self.max_expansions = max_expansions
        self._rewards: dict[tuple[str, ...], float] = {}

    def initial(self) -> DerivationState:
        return DerivationState((self.grammar.start,), 0)

    def is_terminal(self, state: DerivationState) -> bool:
        return state.expansions_used >= self.max_expansions or is_complete(state, self.grammar)

    def actions(self, state: DerivationState) -> Sequence[int]:
        if self.is_terminal(state):
            return ()
        return applicable_rules(state, self.grammar)

    def transition(self, state: DerivationState, action: int) -> DerivationState:
        return apply_rule(state, action, self.grammar)

    def reward(self, state: DerivationState) -> float:
        if not self.is_terminal(state):
            return 0.0
        cached = self._rewards.get(state.symbols)
        if cached is None:
            cached = grammar_reward(state, self.dataset, self.max_expansions, self.grammar)
            if is_complete(state, self.grammar):
                self._rewards[state.symbols] = cached
        return cached

    def encode(self, state: DerivationState) -> bytes:
        return f"{state.expansions_used}|{' '.join(state.symbols)}".encode()
