"""The evolutionary feature-construction loop.

Every random decision draws from a generator seeded by
``(seed, purpose, generation, index)``, so results do not depend on the
order in which individuals are evaluated.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import measures as M
from .exprcore import ExprTree, Individual, TreeGenerator, construct_features, depth
from .ridge import loocv_errors
from .selection import dts_select, environmental_select, lexicase_select, pts_select
from .vicinal import (FINITE_DIFFERENCE, GAUSSIAN, JENSEN_GAP, MIXUP, VicinalConfig,
                      iter_regularizer, regularizer_early_stop, synthesis_stats,
                      synthesize)
from .xtrees import estimate_noise_r2, fit_forest, mu_from_r2, r2_score, tau_from_r2

log = logging.getLogger(__name__)

# RNG purposes
_INIT, _SELECT, _VARY, _EVAL, _SYNTH, _NOISE, _FOREST = range(7)

LEXICASE, DTS, PTS = "lexicase", "dts", "pts"
MAX_RETRIES = 10


def substream(seed: int, purpose: int, generation: int = 0, index: int = 0):
    return np.random.default_rng([int(seed), purpose, generation, index])


@dataclass
class RunConfig:
    pop_size: int = 200
    generations: int = 100
    cx_rate: float = 0.9
    mut_rate: float = 0.1
    tree_add_rate: float = 0.5
    tree_del_rate: float = 0.5
    init_depth: tuple[int, int] = (0, 3)
    max_depth: int = 10
    init_trees: int = 1
    max_trees: int = 10
    ridge_alpha: float = 0.1
    method: str = M.VJM
    vicinal: VicinalConfig = field(default_factory=VicinalConfig)
    tau: Union[str, float] = "auto"
    mu: Union[str, float] = "auto"
    selection: str = LEXICASE
    early_stop: bool = False
    seed: int = 0
    forest_trees: int = 100
    keep_history: bool = False

    def __post_init__(self):
        for name in ("cx_rate", "mut_rate", "tree_add_rate", "tree_del_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("pop_size", "max_depth", "init_trees", "max_trees"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.generations < 0:
            raise ValueError("generations must be nonnegative")
        if self.method not in M.MEASURES:
            raise ValueError(f"unknown method {self.method!r}")
        if self.selection not in (LEXICASE, DTS, PTS):
            raise ValueError(f"unknown selection {self.selection!r}")
        self.init_depth = tuple(self.init_depth)
        if self.init_trees > self.max_trees:
            raise ValueError("init_trees exceeds max_trees")

    @property
    def vicinal_kind(self) -> Optional[str]:
        if self.method in (M.VJM, M.PVRM):
            return MIXUP
        if self.method == M.FDM:
            return GAUSSIAN
        return None

    @property
    def uses_tau(self) -> bool:
        return self.method in (M.VJM, M.FDM)


@dataclass
class Archive:
    """Best individual seen so far under ``o1 + tau * o2``."""

    tau: float
    best: Optional[Individual] = None
    best_combined: float = math.inf

    def combined(self, ind: Individual) -> float:
        return ind.o1 + self.tau * ind.o2 if self.tau else ind.o1

    def update(self, individuals) -> bool:
        improved = False
        for ind in individuals:
            c = self.combined(ind)
            if c < self.best_combined:
                self.best, self.best_combined = ind, c
                improved = True
        return improved


@dataclass
class RunTrace:
    generations: list[dict] = field(default_factory=list)
    final: Optional[Individual] = None
    tau: Optional[float] = None
    mu: Optional[float] = None
    noise_r2: Optional[float] = None
    synthesis: dict = field(default_factory=dict)
    vicinal_sets: list = field(default_factory=list, repr=False)
    history: list = field(default_factory=list, repr=False)
    population: list = field(default_factory=list, repr=False)
    early_stopped: int = 0

    def column(self, key: str) -> list:
        return [g[key] for g in self.generations]


# --------------------------------------------------------------------------
# variation

def _swap_ok(tree: ExprTree, max_depth: int) -> bool:
    return depth(tree) <= max_depth


def subtree_crossover(t1: ExprTree, t2: ExprTree, rng, max_depth: int):
    c1 = c2 = None
    for _ in range(MAX_RETRIES):
        p1 = int(rng.integers(len(t1)))
        p2 = int(rng.integers(len(t2)))
        s1, s2 = t1.subtree(p1), t2.subtree(p2)
        if c1 is None:
            cand = t1.replace(p1, s2)
            if _swap_ok(cand, max_depth):
                c1 = cand
        if c2 is None:
            cand = t2.replace(p2, s1)
            if _swap_ok(cand, max_depth):
                c2 = cand
        if c1 is not None and c2 is not None:
            break
    return (t1 if c1 is None else c1), (t2 if c2 is None else c2)


def subtree_mutation(tree: ExprTree, rng, generator: TreeGenerator, max_depth: int,
                     new_depth: tuple[int, int] = (0, 3)) -> ExprTree:
    for _ in range(MAX_RETRIES):
        p = int(rng.integers(len(tree)))
        cand = tree.replace(p, generator.random_tree(*new_depth, rng).nodes)
        if _swap_ok(cand, max_depth):
            return cand
    return tree


def variation(parent_a: Individual, parent_b: Individual, rng, generator: TreeGenerator,
              config: RunConfig) -> tuple[Individual, Individual]:
    ta, tb = list(parent_a.trees), list(parent_b.trees)
    r = rng.random()
    if r < config.cx_rate:
        i = int(rng.integers(len(ta)))
        j = int(rng.integers(len(tb)))
        ta[i], tb[j] = subtree_crossover(ta[i], tb[j], rng, config.max_depth)
    elif r < config.cx_rate + config.mut_rate:
        for trees in (ta, tb):
            k = int(rng.integers(len(trees)))
            trees[k] = subtree_mutation(trees[k], rng, generator, config.max_depth,
                                        config.init_depth)
    for trees in (ta, tb):
        if rng.random() < config.tree_add_rate and len(trees) < config.max_trees:
            trees.append(generator.random_tree(*config.init_depth, rng))
        if rng.random() < config.tree_del_rate and len(trees) > 1:
            del trees[int(rng.integers(len(trees)))]
    return Individual(tuple(ta)), Individual(tuple(tb))


# --------------------------------------------------------------------------
# evaluation

class Evaluator:
    """Computes both objectives for one individual against shared data."""

    def __init__(self, config: RunConfig, X: np.ndarray, Y: np.ndarray,
                 vicinal_sets=(), tau: float = 1.0):
        self.config = config
        self.X = X
        self.Y = Y
        self.vicinal_sets = list(vicinal_sets)
        self.tau = tau
        self.count = 0

    def evaluate(self, ind: Individual, rng=None, best_combined: float = math.inf) -> Individual:
        cfg = self.config
        Phi = construct_features(ind, self.X)
        e, readout = loocv_errors(Phi, self.Y, cfg.ridge_alpha)
        ind.per_instance_errors = e
        ind.readout = readout
        ind.o1 = float(e.sum())
        ind.terminated_early = False
        method = cfg.method
        self.count += 1
        if method in (M.VJM, M.FDM):
            mode = JENSEN_GAP if method == M.VJM else FINITE_DIFFERENCE
            F_train = readout.predict(Phi)
            if cfg.early_stop:
                V, _, stopped, rounds = regularizer_early_stop(
                    ind, readout, self.vicinal_sets, self.X, best_combined, self.tau,
                    mode, ind.o1, F_train)
                ind.terminated_early = stopped
                ind.aux["rounds"] = rounds
            else:
                V = 0.0
                for V, _ in iter_regularizer(ind, readout, self.vicinal_sets, self.X,
                                             mode, F_train):
                    pass
            ind.o2 = V
        elif method == M.GC:
            ind.aux["tk"] = M.tikhonov(readout.predict(Phi))
            ind.o2 = math.nan  # filled in against the population
        else:
            ind.o2 = M.measure(method, ind, readout, self.X, self.Y, self.vicinal_sets, rng=rng)
        return ind


def _assign_gc(pool):
    pp = np.array([ind.node_count for ind in pool], dtype=float)
    tk = np.array([ind.aux["tk"] for ind in pool], dtype=float)
    for ind, value in zip(pool, M.grand_complexity(pp, tk)):
        ind.o2 = float(value)


def default_scorer(X, Y):
    lo, hi = float(Y.min()), float(Y.max())

    def score(ind: Individual) -> dict:
        pred = np.clip(ind.readout.predict(construct_features(ind, X)), lo, hi)
        return {"train_r2": r2_score(Y, pred)}

    return score


# --------------------------------------------------------------------------
# driver

def _select_parents(population, n, rng, selection):
    if selection == LEXICASE:
        errors = np.vstack([ind.per_instance_errors for ind in population])
        return [lexicase_select(population, rng, errors) for _ in range(n)]
    if selection == DTS:
        return [dts_select(population, rng) for _ in range(n)]
    parents = []
    while len(parents) < n:
        parents.extend(pts_select(population, rng))
    return parents[:n]


def prepare(config: RunConfig, X: np.ndarray, Y: np.ndarray):
    """Noise estimation, margin/weight resolution and vicinal synthesis.

    Returns ``(tau, mu, noise_r2, vicinal_sets)``.
    """
    kind = config.vicinal_kind
    needs_r2 = (config.uses_tau and config.tau == "auto") or (
        kind == MIXUP and config.mu == "auto")
    noise_r2 = None
    if needs_r2:
        noise_r2 = estimate_noise_r2(X, Y, substream(config.seed, _NOISE),
                                     n_trees=config.forest_trees)
    if not config.uses_tau:
        tau = 0.0  # archive tracks o1 alone; these methods pick finals differently
    elif config.tau == "auto":
        tau = tau_from_r2(noise_r2)
    else:
        tau = float(config.tau)
    if config.mu == "auto":
        mu = mu_from_r2(noise_r2) if noise_r2 is not None else math.inf
    else:
        mu = float(config.mu)
    sets = []
    if kind is not None:
        vcfg = dataclasses.replace(config.vicinal, kind=kind, mu=mu)
        reference = None
        if kind == MIXUP and math.isfinite(mu):
            reference = fit_forest(X, Y, config.forest_trees, substream(config.seed, _FOREST))
        sets = synthesize(X, Y, vcfg, reference, substream(config.seed, _SYNTH))
    return tau, mu, noise_r2, sets


def _current_model(population, archive, method):
    if method in (M.VJM, M.FDM, M.NONE):
        return archive.best
    return M.final_select(M.pareto_front(population), method)


def run(config: RunConfig, train_X: np.ndarray, train_Y: np.ndarray,
        scorer: Optional[Callable[[Individual], dict]] = None):
    """Evolve feature sets on standardized training data.

    Returns ``(archive, trace)``; ``trace.final`` is the model the method's
    selection rule picks (the archive best for VJM, FDM and standard GP,
    the knee of the last front for the other measures).
    """
    t_start = time.perf_counter()
    X = np.asarray(train_X, dtype=float)
    Y = np.asarray(train_Y, dtype=float)
    cfg = config
    tau, mu, noise_r2, sets = prepare(cfg, X, Y)
    trace = RunTrace(tau=tau if cfg.uses_tau else None,
                     mu=mu if cfg.vicinal_kind == MIXUP else None, noise_r2=noise_r2,
                     synthesis=synthesis_stats(sets) if sets else {}, vicinal_sets=sets)
    scorer = scorer or default_scorer(X, Y)
    generator = TreeGenerator(X.shape[1])
    evaluator = Evaluator(cfg, X, Y, sets, tau)
    archive = Archive(tau=tau)

    def evaluate_all(inds, gen, threshold):
        for k, ind in enumerate(inds):
            evaluator.evaluate(ind, substream(cfg.seed, _EVAL, gen, k), threshold)
            if ind.terminated_early:
                trace.early_stopped += 1
        if cfg.keep_history:
            trace.history.extend(inds)

    def record(gen, population):
        model = _current_model(population, archive, cfg.method)
        row = {
            "generation": gen,
            "best_o1": min(ind.o1 for ind in population),
            "best_o2": min(ind.o2 for ind in population),
            "archive_combined": archive.best_combined,
            "evaluations": evaluator.count,
        }
        row.update(scorer(model))
        row["node_count"] = model.node_count
        row["elapsed_ms"] = (time.perf_counter() - t_start) * 1000.0
        trace.generations.append(row)

    rng = substream(cfg.seed, _INIT)
    population = [
        Individual(tuple(generator.random_tree(*cfg.init_depth, rng)
                         for _ in range(cfg.init_trees)))
        for _ in range(cfg.pop_size)
    ]
    evaluate_all(population, 0, math.inf)
    if cfg.method == M.GC:
        _assign_gc(population)
    archive.update(population)
    record(0, population)

    for gen in range(1, cfg.generations + 1):
        threshold = archive.best_combined
        parents = _select_parents(population, cfg.pop_size, substream(cfg.seed, _SELECT, gen),
                                  cfg.selection)
        offspring = []
        for k in range(0, len(parents), 2):
            a = parents[k]
            b = parents[k + 1] if k + 1 < len(parents) else parents[0]
            pair = variation(a, b, substream(cfg.seed, _VARY, gen, k), generator, cfg)
            offspring.extend(pair)
        offspring = offspring[:cfg.pop_size]
        evaluate_all(offspring, gen, threshold if cfg.early_stop else math.inf)

        if cfg.method == M.NONE:
            elite = min(population, key=lambda ind: ind.o1)
            ranked = sorted(offspring, key=lambda ind: ind.o1)
            population = [elite] + ranked[:cfg.pop_size - 1]
            archive.update(offspring)
        else:
            pool = population + offspring
            if cfg.method == M.GC:
                _assign_gc(pool)
            archive.update(offspring)
            population = environmental_select(pool, cfg.pop_size)
        record(gen, population)

    trace.final = _current_model(population, archive, cfg.method)
    trace.population = population
    return archive, trace
