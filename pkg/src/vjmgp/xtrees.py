"""Extremely randomized trees, used as a noise gauge and as a reference model.

Each tree is grown on the full sample. At every node one threshold per
feature is drawn uniformly between that feature's node-local min and max,
and the candidate with the largest reduction in squared error wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

R2_RELIABLE = 0.5


@dataclass(frozen=True)
class ExtraForest:
    """A fitted forest stored as flat node arrays.

    ``feature[k] == -1`` marks a leaf. Children indices are global (they
    already include each tree's offset), and ``roots`` holds the root node of
    every tree.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    min_samples_split: int
    seed: int | None = None

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m = X.shape[0]
        node = np.repeat(self.roots[:, None], m, axis=1)  # (trees, rows)
        rows = np.broadcast_to(np.arange(m), node.shape)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            go_left = X[rows[inner], f[inner]] <= self.threshold[node[inner]]
            node[inner] = np.where(go_left, self.left[node[inner]], self.right[node[inner]])
        return self.value[node].mean(axis=0)


def _grow(X, y, rng, min_samples_split, nodes):
    """Append one tree's nodes to ``nodes`` (lists) and return its root index."""
    feature, threshold, left, right, value = nodes
    root = len(feature)
    # (node id, sample indices)
    stack = [(root, np.arange(len(y)))]
    for lst in nodes:
        lst.append(None)
    while stack:
        k, idx = stack.pop()
        yk = y[idx]
        value[k] = float(yk.mean())
        feature[k], threshold[k], left[k], right[k] = -1, 0.0, -1, -1
        if len(idx) < min_samples_split or np.ptp(yk) == 0.0:
            continue
        Xk = X[idx]
        lo = Xk.min(axis=0)
        hi = Xk.max(axis=0)
        usable = hi > lo
        if not usable.any():
            continue
        cand = rng.uniform(lo, hi)
        mask = Xk <= cand  # (m, d)
        n_left = mask.sum(axis=0)
        valid = usable & (n_left > 0) & (n_left < len(idx))
        if not valid.any():
            continue
        s_left = yk @ mask
        q_left = (yk * yk) @ mask
        s_tot = yk.sum()
        q_tot = float(yk @ yk)
        n_right = len(idx) - n_left
        with np.errstate(divide="ignore", invalid="ignore"):
            sse = (q_left - s_left ** 2 / n_left) + (
                (q_tot - q_left) - (s_tot - s_left) ** 2 / n_right)
        sse = np.where(valid, sse, np.inf)
        j = int(np.argmin(sse))
        go = mask[:, j]
        lk = len(feature)
        rk = lk + 1
        for lst in nodes:
            lst.extend([None, None])
        feature[k], threshold[k], left[k], right[k] = j, float(cand[j]), lk, rk
        stack.append((rk, idx[~go]))
        stack.append((lk, idx[go]))
    return root


def fit_forest(X: np.ndarray, Y: np.ndarray, n_trees: int = 100,
               rng: np.random.Generator | int | None = None,
               min_samples_split: int = 5) -> ExtraForest:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Y = np.asarray(Y, dtype=float)
    if len(Y) < 1 or X.shape[0] != len(Y):
        raise ValueError("X and Y must be non-empty with matching rows")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    nodes: tuple[list, ...] = ([], [], [], [], [])
    roots = [_grow(X, Y, rng, min_samples_split, nodes) for _ in range(n_trees)]
    feature, threshold, left, right, value = nodes
    return ExtraForest(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value, dtype=float),
        roots=np.asarray(roots, dtype=np.intp),
        min_samples_split=min_samples_split,
        seed=seed,
    )


def r2_score(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in shape")
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot < 1e-12:
        return 0.0
    return 1.0 - float(((y_true - y_pred) ** 2).sum()) / ss_tot


def estimate_noise_r2(X: np.ndarray, Y: np.ndarray, rng=None,
                      n_folds: int = 5, n_trees: int = 100) -> float:
    """Pooled out-of-fold R² of Extra-Trees under k-fold cross-validation."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Y = np.asarray(Y, dtype=float)
    n = len(Y)
    if n < n_folds:
        raise ValueError(f"need at least {n_folds} rows for {n_folds}-fold CV")
    rng = np.random.default_rng(rng)
    folds = np.array_split(rng.permutation(n), n_folds)
    oof = np.empty(n)
    for test_idx in folds:
        train = np.ones(n, dtype=bool)
        train[test_idx] = False
        forest = fit_forest(X[train], Y[train], n_trees, rng)
        oof[test_idx] = forest.predict(X[test_idx])
    return r2_score(Y, oof)


def tau_from_r2(r2: float) -> float:
    return 1.0 if r2 >= R2_RELIABLE else 10.0


def mu_from_r2(r2: float) -> float:
    return 0.05 if r2 >= R2_RELIABLE else float("inf")
