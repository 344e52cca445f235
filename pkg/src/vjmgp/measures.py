"""Second objectives for the baseline complexity measures, and knee selection."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .exprcore import construct_features, node_count
from .selection import dominance_matrix, fast_non_dominated_sort, objectives_of
from .vicinal import FINITE_DIFFERENCE, JENSEN_GAP, regularizer

PP, TK, GC, RC, IODC, PVRM, FDM, VJM, NONE = (
    "pp", "tk", "gc", "rc", "iodc", "pvrm", "fdm", "vjm", "standard")
MEASURES = (PP, TK, GC, RC, IODC, PVRM, FDM, VJM, NONE)

RADEMACHER_DRAWS = 10
IODC_MAX_ROWS = 200


def tikhonov(predictions: np.ndarray) -> float:
    return float(np.linalg.norm(predictions))


def grand_complexity(pp: np.ndarray, tk: np.ndarray) -> np.ndarray:
    """For every member, the number of members whose (PP, TK) pair dominates it."""
    F = np.column_stack([pp, tk]).astype(float)
    return dominance_matrix(F).sum(axis=0).astype(float)


def rademacher(losses: np.ndarray, rng: np.random.Generator,
               draws: int = RADEMACHER_DRAWS) -> float:
    """Sampled estimate of ``E[max(0, mean(σ · loss))]`` with Rademacher σ.

    This scores a single hypothesis; it is not the supremum over a class.
    """
    losses = np.asarray(losses, dtype=float)
    sigma = rng.choice(np.array([-1.0, 1.0]), size=(draws, len(losses)))
    return float(np.maximum(0.0, sigma @ losses / len(losses)).mean())


def iodc(X: np.ndarray, predictions: np.ndarray,
         max_rows: int = IODC_MAX_ROWS) -> float:
    """Negated absolute correlation of pairwise input and output distances.

    Uses every pair up to ``max_rows`` rows; beyond that, a fixed (seed 0)
    sample of ``max_rows**2`` random pairs.
    """
    X = np.asarray(X, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    n = len(X)
    if n <= max_rows:
        d_in = pdist(X)
        d_out = pdist(predictions[:, None])
    else:
        rng = np.random.default_rng(0)
        i = rng.integers(n, size=max_rows ** 2)
        j = (i + rng.integers(1, n, size=max_rows ** 2)) % n  # j != i
        d_in = np.linalg.norm(X[i] - X[j], axis=1)
        d_out = np.abs(predictions[i] - predictions[j])
    if len(d_in) < 2 or d_in.std() < 1e-12 or d_out.std() < 1e-12:
        return 0.0
    r = np.corrcoef(d_in, d_out)[0, 1]
    return -abs(float(r)) if np.isfinite(r) else 0.0


def vicinal_risk(individual, readout, vicinal_sets, Y_std) -> float:
    """Sum over all mixup samples of ``(λ y_i + (1-λ) y_j - F(Φ(x_vic)))²``."""
    Y_std = np.asarray(Y_std, dtype=float)
    total = 0.0
    for vset in vicinal_sets:
        if vset.partner is None:
            raise ValueError("vicinal risk needs mixup vicinal sets")
        target = vset.lam * Y_std + (1.0 - vset.lam) * Y_std[vset.partner]
        pred = readout.predict(construct_features(individual, vset.X_vic))
        total += float(np.where(vset.kept, (target - pred) ** 2, 0.0).sum())
    return total


def measure(kind: str, individual, readout, X_std, Y_std, vicinal_sets=None,
            population_context: Sequence | None = None, rng=None) -> float:
    """Scalar complexity value (lower is better) for one individual.

    ``population_context`` is only used by GC and must hold evaluated
    individuals including ``individual`` itself.
    """
    if kind == NONE:
        return 0.0
    if kind == PP:
        return float(node_count(individual))
    if kind in (TK, IODC):
        pred = readout.predict(construct_features(individual, X_std))
        return tikhonov(pred) if kind == TK else iodc(X_std, pred)
    if kind == GC:
        if population_context is None:
            raise ValueError("GC needs the population context")
        members = list(population_context)
        pp = np.array([node_count(m) for m in members], dtype=float)
        tk = np.array([m.aux["tk"] for m in members], dtype=float)
        gc = grand_complexity(pp, tk)
        return float(gc[[m is individual for m in members].index(True)])
    if kind == RC:
        rng = np.random.default_rng(rng)
        return rademacher(individual.per_instance_errors, rng)
    if kind == PVRM:
        return vicinal_risk(individual, readout, vicinal_sets, Y_std)
    if kind in (FDM, VJM):
        mode = JENSEN_GAP if kind == VJM else FINITE_DIFFERENCE
        return regularizer(individual, readout, vicinal_sets, X_std, mode)[0]
    raise ValueError(f"unknown measure {kind!r}")


def final_select(front: Sequence, kind: str = PP):
    """Pick the final model from a Pareto front.

    PVRM takes the minimum of its second objective. Everything else takes
    the knee: the smallest sum of min-max normalized objectives, with ties
    broken by distance to the normalized ideal point.
    """
    if not len(front):
        raise ValueError("cannot select from an empty front")
    F = objectives_of(front)
    if kind == PVRM:
        return front[int(np.argmin(F[:, 1]))]
    lo = F.min(axis=0)
    span = F.max(axis=0) - lo
    span[span == 0] = 1.0
    N = (F - lo) / span
    score = N.sum(axis=1)
    tied = np.flatnonzero(score <= score.min() + 1e-12)
    dist = np.hypot(N[tied, 0], N[tied, 1])
    return front[int(tied[np.argmin(dist)])]


def pareto_front(population: Sequence) -> list:
    fronts = fast_non_dominated_sort(objectives_of(population))
    return [population[i] for i in fronts[0]] if fronts else []
