"""Symbolic feature trees: representation, random generation and evaluation.

Trees are stored as prefix-ordered tuples of :class:`Node`, which makes
subtree slicing (for crossover and mutation) a matter of finding the end
index of a subtree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

CLAMP = 1e10
LOG_GUARD = 1e-6

FUNCTIONS = {
    "Add": 2,
    "Sub": 2,
    "Mul": 2,
    "AQ": 2,
    "Max": 2,
    "Min": 2,
    "Square": 1,
    "Log": 1,
    "Sqrt": 1,
    "Sin": 1,
    "Cos": 1,
    "Abs": 1,
    "Neg": 1,
}
FUNCTION_NAMES = tuple(FUNCTIONS)


class MalformedTreeError(ValueError):
    """Raised when a node sequence is not a single well-formed prefix expression."""


@dataclass(frozen=True)
class Node:
    """One primitive in a prefix tree.

    ``name`` is a function name from :data:`FUNCTIONS`, ``"X"`` for an input
    column (``index`` set) or ``"C"`` for an ephemeral constant (``value`` set).
    """

    name: str
    index: int = -1
    value: float = 0.0

    @property
    def arity(self) -> int:
        return FUNCTIONS.get(self.name, 0)

    @property
    def is_terminal(self) -> bool:
        return self.name in ("X", "C")

    def __str__(self) -> str:
        if self.name == "X":
            return f"X{self.index}"
        if self.name == "C":
            return f"{self.value:.4f}"
        return self.name


def feature(index: int) -> Node:
    return Node("X", index=int(index))


def constant(value: float) -> Node:
    return Node("C", value=float(value))


def func(name: str) -> Node:
    if name not in FUNCTIONS:
        raise KeyError(f"unknown primitive {name!r}")
    return Node(name)


def _subtree_end(nodes: Sequence[Node], start: int) -> int:
    """Index one past the subtree rooted at ``nodes[start]``."""
    need = 1
    i = start
    while need:
        if i >= len(nodes):
            raise MalformedTreeError("prefix sequence ends inside a subtree")
        need += nodes[i].arity - 1
        i += 1
    return i


@dataclass(frozen=True)
class ExprTree:
    nodes: tuple[Node, ...]

    def __post_init__(self):
        if not self.nodes:
            raise MalformedTreeError("empty tree")
        if _subtree_end(self.nodes, 0) != len(self.nodes):
            raise MalformedTreeError("leftover nodes after a complete expression")

    def __len__(self) -> int:
        return len(self.nodes)

    def subtree_end(self, start: int) -> int:
        return _subtree_end(self.nodes, start)

    def subtree(self, start: int) -> tuple[Node, ...]:
        return self.nodes[start:self.subtree_end(start)]

    def replace(self, start: int, new: Sequence[Node]) -> "ExprTree":
        end = self.subtree_end(start)
        return ExprTree(self.nodes[:start] + tuple(new) + self.nodes[end:])

    @property
    def depth(self) -> int:
        return depth(self)

    def features_used(self) -> set[int]:
        return {n.index for n in self.nodes if n.name == "X"}

    def __str__(self) -> str:
        return to_string(self)


@dataclass
class Individual:
    """A set of constructed features plus its cached objective values."""

    trees: tuple[ExprTree, ...]
    o1: float = float("inf")
    o2: float = float("inf")
    per_instance_errors: Optional[np.ndarray] = field(default=None, repr=False)
    readout: Optional[object] = field(default=None, repr=False)
    # bookkeeping filled in by the evaluator
    terminated_early: bool = False
    aux: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.trees = tuple(self.trees)
        if not self.trees:
            raise ValueError("an individual needs at least one tree")

    @property
    def node_count(self) -> int:
        return node_count(self)

    @property
    def evaluated(self) -> bool:
        return self.per_instance_errors is not None

    def __str__(self) -> str:
        return " | ".join(str(t) for t in self.trees)


def node_count(individual) -> int:
    """Total number of nodes across all trees of an individual (or one tree)."""
    if isinstance(individual, ExprTree):
        return len(individual)
    return sum(len(t) for t in individual.trees)


def depth(tree: ExprTree) -> int:
    """Depth of a tree; a bare terminal has depth 0."""
    best = 0
    pending = [0]
    for node in tree.nodes:
        d = pending.pop()
        best = max(best, d)
        pending.extend([d + 1] * node.arity)
    return best


# --------------------------------------------------------------------------
# evaluation

def _clean(values: np.ndarray) -> np.ndarray:
    values = np.nan_to_num(values, nan=0.0, posinf=0.0, neginf=0.0)
    return np.clip(values, -CLAMP, CLAMP, out=values)


def _apply(name: str, a: np.ndarray, b: Optional[np.ndarray] = None) -> np.ndarray:
    if name == "Add":
        return a + b
    if name == "Sub":
        return a - b
    if name == "Mul":
        return a * b
    if name == "AQ":
        return a / np.sqrt(1.0 + b * b)
    if name == "Max":
        return np.maximum(a, b)
    if name == "Min":
        return np.minimum(a, b)
    if name == "Square":
        return a * a
    if name == "Log":
        absa = np.abs(a)
        return np.where(absa >= LOG_GUARD, np.log(np.where(absa >= LOG_GUARD, absa, 1.0)), 0.0)
    if name == "Sqrt":
        return np.sqrt(np.abs(a))
    if name == "Sin":
        return np.sin(np.pi * a)
    if name == "Cos":
        return np.cos(np.pi * a)
    if name == "Abs":
        return np.abs(a)
    if name == "Neg":
        return -a
    raise MalformedTreeError(f"unknown primitive {name!r}")


def evaluate_tree(tree: ExprTree, X: np.ndarray) -> np.ndarray:
    """Evaluate ``tree`` on every row of ``X`` and return a finite n-vector."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    stack: list[np.ndarray] = []
    with np.errstate(all="ignore"):
        for node in reversed(tree.nodes):
            if node.name == "X":
                if node.index >= d:
                    raise MalformedTreeError(
                        f"feature X{node.index} out of range for {d} columns")
                stack.append(X[:, node.index])
            elif node.name == "C":
                stack.append(np.full(n, node.value))
            elif node.arity == 1:
                stack.append(_clean(_apply(node.name, stack.pop())))
            else:
                a = stack.pop()
                b = stack.pop()
                stack.append(_clean(_apply(node.name, a, b)))
    if len(stack) != 1:
        raise MalformedTreeError("tree did not reduce to a single value")
    return _clean(np.asarray(stack[0], dtype=float))


def construct_features(individual, X: np.ndarray) -> np.ndarray:
    """Stack the outputs of all trees as an n×m feature matrix."""
    trees = individual.trees if hasattr(individual, "trees") else individual
    return np.column_stack([evaluate_tree(t, X) for t in trees])


# --------------------------------------------------------------------------
# random generation

class TreeGenerator:
    """Random tree factory for a given input dimensionality.

    A terminal is an input column with probability ``d / (d + 1)`` and an
    ephemeral constant from U[-1, 1] otherwise.
    """

    def __init__(self, n_features: int, functions: Sequence[str] = FUNCTION_NAMES):
        if n_features < 1:
            raise ValueError("need at least one input feature")
        self.n_features = n_features
        self.functions = tuple(functions)

    def terminal(self, rng: np.random.Generator) -> Node:
        k = int(rng.integers(self.n_features + 1))
        if k == self.n_features:
            return constant(rng.uniform(-1.0, 1.0))
        return feature(k)

    def _build(self, rng, height: int, min_depth: int, full: bool) -> list[Node]:
        nodes: list[Node] = []
        n_func = len(self.functions)
        n_term = self.n_features + 1
        # (depth of node to create)
        pending = [0]
        while pending:
            d = pending.pop()
            if d >= height:
                pick_terminal = True
            elif d < min_depth or full:
                pick_terminal = False
            else:
                pick_terminal = rng.random() < n_term / (n_term + n_func)
            if pick_terminal:
                nodes.append(self.terminal(rng))
            else:
                name = self.functions[int(rng.integers(n_func))]
                nodes.append(Node(name))
                pending.extend([d + 1] * FUNCTIONS[name])
        return nodes

    def random_tree(self, depth_min: int, depth_max: int,
                    rng: np.random.Generator) -> ExprTree:
        """Ramped half-and-half: pick a height, then grow or full with p=0.5."""
        if not 0 <= depth_min <= depth_max:
            raise ValueError("need 0 <= depth_min <= depth_max")
        height = int(rng.integers(depth_min, depth_max + 1))
        full = bool(rng.random() < 0.5)
        return ExprTree(tuple(self._build(rng, height, depth_min, full)))


def random_tree(depth_min: int, depth_max: int, rng: np.random.Generator,
                n_features: int = 1) -> ExprTree:
    return TreeGenerator(n_features).random_tree(depth_min, depth_max, rng)


# --------------------------------------------------------------------------
# text format

def to_string(tree: ExprTree) -> str:
    out: list[str] = []

    def emit(i: int) -> int:
        node = tree.nodes[i]
        if node.is_terminal:
            out.append(str(node))
            return i + 1
        out.append(node.name + "(")
        j = i + 1
        for k in range(node.arity):
            if k:
                out.append(", ")
            j = emit(j)
        out.append(")")
        return j

    emit(0)
    return "".join(out)


_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z]+)(?P<idx>\d+)?|(?P<num>[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)|(?P<punct>[(),]))")


def parse(text: str) -> ExprTree:
    """Parse ``Op(arg, arg)`` / ``Xk`` / decimal-constant notation."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise MalformedTreeError(f"cannot parse near {text[pos:pos + 10]!r}")
        pos = m.end()
        tokens.append(m)
    nodes: list[Node] = []
    i = 0

    def expect(ch):
        nonlocal i
        if i >= len(tokens) or tokens[i].group("punct") != ch:
            raise MalformedTreeError(f"expected {ch!r}")
        i += 1

    def expr():
        nonlocal i
        if i >= len(tokens):
            raise MalformedTreeError("unexpected end of expression")
        tok = tokens[i]
        i += 1
        if tok.group("num") is not None:
            nodes.append(constant(float(tok.group("num"))))
            return
        name = tok.group("name")
        if name is None:
            raise MalformedTreeError(f"unexpected {tok.group(0)!r}")
        if name == "X" and tok.group("idx") is not None:
            nodes.append(feature(int(tok.group("idx"))))
            return
        if name not in FUNCTIONS or tok.group("idx") is not None:
            raise MalformedTreeError(f"unknown primitive {tok.group(0)!r}")
        nodes.append(Node(name))
        expect("(")
        for k in range(FUNCTIONS[name]):
            if k:
                expect(",")
            expr()
        expect(")")

    expr()
    if i != len(tokens):
        raise MalformedTreeError("trailing tokens after expression")
    return ExprTree(tuple(nodes))
