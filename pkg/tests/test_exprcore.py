import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vjmgp.exprcore import (FUNCTIONS, ExprTree, Individual, MalformedTreeError, Node,
                            TreeGenerator, constant, construct_features, depth,
                            evaluate_tree, feature, func, node_count, parse, random_tree,
                            to_string)


def _scalar_clean(v):
    if not math.isfinite(v):
        v = 0.0
    return min(max(v, -1e10), 1e10)


def _scalar_eval(nodes, i, row):
    """Recursive reference interpreter on one input row: returns (value, next index)."""
    node = nodes[i]
    if node.name == "X":
        return _scalar_clean(float(row[node.index])), i + 1
    if node.name == "C":
        return _scalar_clean(node.value), i + 1
    args = []
    j = i + 1
    for _ in range(node.arity):
        v, j = _scalar_eval(nodes, j, row)
        args.append(v)
    a = args[0]
    b = args[1] if len(args) > 1 else None
    with np.errstate(all="ignore"):
        out = {
            "Add": lambda: a + b,
            "Sub": lambda: a - b,
            "Mul": lambda: a * b,
            "AQ": lambda: a / math.sqrt(1.0 + b * b) if math.isfinite(b * b) else 0.0,
            "Max": lambda: max(a, b),
            "Min": lambda: min(a, b),
            "Square": lambda: a * a,
            "Log": lambda: math.log(abs(a)) if abs(a) >= 1e-6 else 0.0,
            "Sqrt": lambda: math.sqrt(abs(a)),
            "Sin": lambda: math.sin(math.pi * a),
            "Cos": lambda: math.cos(math.pi * a),
            "Abs": lambda: abs(a),
            "Neg": lambda: -a,
        }[node.name]()
    return _scalar_clean(out), j


def scalar_oracle(tree, X):
    return np.array([_scalar_eval(tree.nodes, 0, row)[0] for row in X])


def T(text):
    return parse(text)


class TestEvaluate:
    def test_aq_identity_case(self):
        np.testing.assert_array_equal(
            evaluate_tree(T("AQ(X0, X1)"), np.array([[1.0, 0.0]])), [1.0])

    def test_sin_uses_pi(self):
        np.testing.assert_allclose(evaluate_tree(T("Sin(X0)"), np.array([[0.5]])), [1.0])

    def test_square_of_sum(self):
        X = np.array([[2.0]])
        tree = T("Square(Add(X0, 0.01))")
        np.testing.assert_allclose(evaluate_tree(tree, X), [4.0401], rtol=1e-12)
        np.testing.assert_allclose(evaluate_tree(tree, X), scalar_oracle(tree, X), rtol=1e-12)

    @pytest.mark.parametrize("text,x,expected", [
        ("Log(X0)", 0.0, 0.0),
        ("Log(X0)", -math.e, 1.0),
        ("Log(X0)", 5e-7, 0.0),
        ("Sqrt(X0)", -4.0, 2.0),
        ("Cos(X0)", 1.0, -1.0),
        ("Abs(Neg(X0))", 3.0, 3.0),
        ("Max(X0, 0.5)", 0.2, 0.5),
        ("Min(X0, 0.5)", 0.2, 0.2),
        ("Sub(X0, X0)", 7.0, 0.0),
        ("Mul(X0, -0.5)", 4.0, -2.0),
    ])
    def test_primitive_semantics(self, text, x, expected):
        np.testing.assert_allclose(evaluate_tree(T(text), np.array([[x]])), [expected],
                                   atol=1e-12)

    def test_clamps_overflow(self):
        tree = T("Square(Square(Square(Square(Square(X0)))))")
        out = evaluate_tree(tree, np.array([[1e5], [-1e5]]))
        np.testing.assert_array_equal(out, [1e10, 1e10])

    def test_nonfinite_input_becomes_zero(self):
        out = evaluate_tree(T("X0"), np.array([[np.nan], [np.inf]]))
        np.testing.assert_array_equal(out, [0.0, 0.0])

    def test_feature_out_of_range(self):
        with pytest.raises((IndexError, ValueError)):
            evaluate_tree(T("X3"), np.zeros((2, 2)))

    def test_matches_scalar_oracle(self, rng):
        gen = TreeGenerator(3)
        X = rng.normal(scale=3.0, size=(25, 3))
        for _ in range(300):
            tree = gen.random_tree(0, 5, rng)
            np.testing.assert_allclose(evaluate_tree(tree, X), scalar_oracle(tree, X),
                                       rtol=1e-12, atol=1e-12)

    def test_finite_fuzz(self, rng):
        gen = TreeGenerator(4)
        X = rng.normal(scale=100.0, size=(8, 4))
        X[0] = 0.0
        X[1] = 1e300
        for _ in range(100_000):
            tree = gen.random_tree(0, 6, rng)
            assert np.isfinite(evaluate_tree(tree, X)).all()

    def test_construct_features_stacks_columns(self):
        ind = Individual((T("X0"), T("Neg(X1)")))
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(construct_features(ind, X), [[1.0, -2.0], [3.0, -4.0]])


class TestStructure:
    def test_counts(self):
        tree = T("Add(X0, X1)")
        assert node_count(Individual((tree,))) == 3
        assert depth(tree) == 1
        assert depth(T("X0")) == 0
        assert node_count(Individual((tree, T("Mul(X0, 0.5)")))) == 6

    def test_malformed(self):
        with pytest.raises(MalformedTreeError):
            ExprTree((func("Add"), feature(0)))
        with pytest.raises(MalformedTreeError):
            ExprTree((feature(0), feature(1)))
        with pytest.raises(MalformedTreeError):
            ExprTree(())
        with pytest.raises(MalformedTreeError):
            parse("Foo(X0)")
        with pytest.raises(MalformedTreeError):
            parse("Add(X0)")

    def test_replace_subtree(self):
        tree = T("Add(Mul(X0, X1), X2)")
        new = tree.replace(1, T("Neg(X3)").nodes)
        assert to_string(new) == "Add(Neg(X3), X2)"
        assert tree.subtree(1) == T("Mul(X0, X1)").nodes

    def test_printing(self):
        assert to_string(T("Add(X0, 0.01)")) == "Add(X0, 0.0100)"
        assert str(constant(-0.123456)) == "-0.1235"


class TestGeneration:
    def test_depth_zero_is_terminal(self, rng):
        for _ in range(50):
            tree = random_tree(0, 0, rng, n_features=3)
            assert len(tree) == 1 and tree.nodes[0].is_terminal

    def test_depth_bounds(self, rng):
        gen = TreeGenerator(5)
        depths = [depth(gen.random_tree(0, 3, rng)) for _ in range(10_000)]
        assert max(depths) <= 3
        assert set(depths) == {0, 1, 2, 3}

    def test_min_depth_respected(self, rng):
        gen = TreeGenerator(2)
        for _ in range(500):
            assert 2 <= depth(gen.random_tree(2, 4, rng)) <= 4

    def test_replay(self):
        a = random_tree(0, 4, np.random.default_rng(9), n_features=3)
        b = random_tree(0, 4, np.random.default_rng(9), n_features=3)
        assert a == b

    def test_constants_in_range(self, rng):
        gen = TreeGenerator(1)
        values = [n.value for _ in range(2000) for n in gen.random_tree(0, 3, rng).nodes
                  if n.name == "C"]
        assert values and min(values) >= -1.0 and max(values) <= 1.0

    def test_all_primitives_reachable(self, rng):
        gen = TreeGenerator(2)
        seen = {n.name for _ in range(3000) for n in gen.random_tree(1, 3, rng).nodes}
        assert set(FUNCTIONS) | {"X", "C"} <= seen


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lo=st.integers(0, 3), extra=st.integers(0, 3))
def test_round_trip(seed, lo, extra):
    tree = random_tree(lo, lo + extra, np.random.default_rng(seed), n_features=4)
    text = to_string(tree)
    assert to_string(parse(text)) == text


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_depth_and_count_consistent(seed):
    tree = random_tree(0, 5, np.random.default_rng(seed), n_features=2)
    assert node_count(tree) == len(tree.nodes)
    assert 0 <= depth(tree) < len(tree.nodes) or len(tree.nodes) == 1
