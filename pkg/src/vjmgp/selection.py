"""Parent and survivor selection: ε-lexicase, DTS, PTS and NSGA-II."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def median_absolute_deviation(values: np.ndarray, axis=0) -> np.ndarray:
    med = np.median(values, axis=axis, keepdims=True)
    return np.median(np.abs(values - med), axis=axis)


def lexicase_select(population: Sequence, rng: np.random.Generator, errors=None):
    """Automatic ε-lexicase over per-instance errors.

    ``errors`` may be passed as a precomputed (pop × n) matrix; otherwise it
    is stacked from ``per_instance_errors``. ε for a case is the MAD of that
    case's errors over the individuals still in the pool.
    """
    if not len(population):
        raise ValueError("cannot select from an empty population")
    if errors is None:
        errors = np.vstack([ind.per_instance_errors for ind in population])
    pool = np.arange(len(population))
    for case in rng.permutation(errors.shape[1]):
        if len(pool) == 1:
            break
        col = errors[pool, case]
        eps = median_absolute_deviation(col)
        pool = pool[col <= col.min() + eps]
    return population[int(pool[rng.integers(len(pool))])]


def objectives_of(population) -> np.ndarray:
    return np.array([[ind.o1, ind.o2] for ind in population], dtype=float)


def dominates(a, b) -> bool:
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when row ``i`` Pareto-dominates row ``j`` (minimization)."""
    le = (F[:, None, :] <= F[None, :, :]).all(axis=2)
    lt = (F[:, None, :] < F[None, :, :]).any(axis=2)
    return le & lt


def fast_non_dominated_sort(F: np.ndarray) -> list[np.ndarray]:
    """Deb's front peeling; returns fronts as index arrays, best first."""
    F = np.asarray(F, dtype=float)
    n = len(F)
    if n == 0:
        return []
    D = dominance_matrix(F)
    count = D.sum(axis=0)  # how many dominate j
    fronts = []
    current = np.flatnonzero(count == 0)
    while len(current):
        fronts.append(current)
        count = count - D[current].sum(axis=0)
        count[current] = -1
        current = np.flatnonzero(count == 0)
    return fronts


def crowding_distance(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    n, m = F.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        col = F[order, k]
        span = col[-1] - col[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0 and np.isfinite(span):
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def environmental_select(pool: Sequence, N: int, F: np.ndarray | None = None) -> list:
    """NSGA-II survivor selection of ``N`` members from ``pool``."""
    if len(pool) <= N:
        return list(pool)
    F = objectives_of(pool) if F is None else np.asarray(F, dtype=float)
    chosen: list[int] = []
    for front in fast_non_dominated_sort(F):
        if len(chosen) + len(front) <= N:
            chosen.extend(front.tolist())
            if len(chosen) == N:
                break
            continue
        cd = crowding_distance(F[front])
        order = np.argsort(-cd, kind="stable")
        chosen.extend(front[order[:N - len(chosen)]].tolist())
        break
    return [pool[i] for i in chosen]


def dts_select(population: Sequence, rng: np.random.Generator):
    """Binary tournament on Pareto dominance; uniform pick when incomparable."""
    if not len(population):
        raise ValueError("cannot select from an empty population")
    if len(population) == 1:
        return population[0]
    i, j = rng.choice(len(population), size=2, replace=False)
    a, b = population[int(i)], population[int(j)]
    if dominates((a.o1, a.o2), (b.o1, b.o2)):
        return a
    if dominates((b.o1, b.o2), (a.o1, a.o2)):
        return b
    return a if rng.random() < 0.5 else b


def pts_select(population: Sequence, rng: np.random.Generator, fraction: float = 0.1) -> list:
    """Pareto tournament: the first front of a random 10% sample, even-sized.

    An odd front is padded with one member of the next front; it is trimmed
    only when no next front exists.
    """
    if not len(population):
        raise ValueError("cannot select from an empty population")
    size = min(len(population), max(2, int(round(fraction * len(population)))))
    sample = [population[int(i)] for i in rng.choice(len(population), size=size, replace=False)]
    fronts = fast_non_dominated_sort(objectives_of(sample))
    picked = fronts[0].tolist()
    if len(picked) % 2:
        if len(fronts) > 1:
            picked.append(int(fronts[1][0]))
        elif len(picked) > 1:
            picked = picked[:-1]
    return [sample[i] for i in picked]
