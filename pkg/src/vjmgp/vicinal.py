"""Vicinal data synthesis and the Jensen-gap / finite-difference regularizers.

Vicinal sets are synthesized once per run, on standardized data, and shared
read-only by every individual. Mixup partners are drawn from a Gaussian
kernel over the labels (or over the concatenated inputs and labels), and
mixup samples whose interpolated label disagrees with a reference model are
regenerated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .exprcore import construct_features

log = logging.getLogger(__name__)

GAUSSIAN = "gaussian"
MIXUP = "mixup"
JENSEN_GAP = "jensen"
FINITE_DIFFERENCE = "finite_difference"

MAX_ATTEMPTS = 100
ESCALATE_EVERY = 10
ESCALATE_FACTOR = 10.0


@dataclass(frozen=True)
class VicinalConfig:
    kind: str = MIXUP
    sigma: float = 0.5
    beta_alpha: float = 10.0
    gamma: float = 0.5
    K: int = 10
    mu: float = math.inf
    kernel_space: str = "y"

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, MIXUP):
            raise ValueError(f"unknown vicinal kind {self.kind!r}")
        if self.kernel_space not in ("y", "xy"):
            raise ValueError(f"kernel_space must be 'y' or 'xy', got {self.kernel_space!r}")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.sigma < 0 or self.beta_alpha <= 0 or self.gamma <= 0 or self.mu <= 0:
            raise ValueError("sigma must be >= 0; beta_alpha, gamma and mu must be > 0")


@dataclass(frozen=True)
class VicinalSet:
    """One synthesized copy of the training set (one sample per instance).

    ``partner`` and ``lam`` are ``None`` for Gaussian perturbation.
    ``attempts``/``rejections``/``escalations``/``forced`` summarize the
    intrusion filter for this set.
    """

    X_vic: np.ndarray
    kept: np.ndarray
    partner: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None
    attempts: int = 0
    rejections: int = 0
    escalations: int = 0
    forced: int = 0

    @property
    def kind(self) -> str:
        return GAUSSIAN if self.partner is None else MIXUP


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# partner sampling

def partner_probabilities(Y_std: np.ndarray, gamma: float,
                          X_std: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-normalized kernel ``exp(-γ‖z_i - z_j‖²)`` with a zero diagonal.

    ``z`` is the label alone, or the label concatenated with the inputs
    when ``X_std`` is given.
    """
    Y_std = np.asarray(Y_std, dtype=float)
    n = len(Y_std)
    if n < 2:
        raise ValueError("partner sampling needs at least two instances")
    Z = Y_std[:, None]
    if X_std is not None:
        Z = np.column_stack([np.asarray(X_std, dtype=float), Y_std])
    sq = ((Z[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2)
    logits = -gamma * sq
    np.fill_diagonal(logits, -np.inf)
    logits -= logits.max(axis=1, keepdims=True)
    P = np.exp(logits)
    P /= P.sum(axis=1, keepdims=True)
    return P


def _draw_from_rows(cdf: np.ndarray, rows: np.ndarray, rng) -> np.ndarray:
    u = rng.random(len(rows))
    j = (cdf[rows] < u[:, None]).sum(axis=1)
    return np.minimum(j, cdf.shape[1] - 1)


def _cdf(P: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(P, axis=1)
    return cdf / cdf[:, -1:]


def sample_pairs(Y_std: np.ndarray, gamma: float, rng: np.random.Generator,
                 X_std: Optional[np.ndarray] = None) -> np.ndarray:
    """Draw one mixup partner per instance; never the instance itself."""
    P = partner_probabilities(Y_std, gamma, X_std)
    return _draw_from_rows(_cdf(P), np.arange(len(P)), rng)


# --------------------------------------------------------------------------
# intrusion detection

def intrusion_bounds(a, b, lam, mu):
    """Band of acceptable labels around the interpolation ``λa + (1-λ)b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if math.isinf(mu):
        shape = np.broadcast(a, b, lam).shape
        return np.full(shape, -np.inf), np.full(shape, np.inf)
    # (λ∓μ)·a + (1−λ±μ)·b written around b so that a == b gives an exact point
    v1 = b + (lam - mu) * (a - b)
    v2 = b + (lam + mu) * (a - b)
    mid = lam * a + (1.0 - lam) * b  # guards the midline against rounding
    return np.minimum(np.minimum(v1, v2), mid), np.maximum(np.maximum(v1, v2), mid)


def intrusion_check(y_tree, a, b, lam, mu):
    """True where the reference prediction lies inside the band (keep)."""
    lo, hi = intrusion_bounds(a, b, lam, mu)
    keep = (lo <= y_tree) & (y_tree <= hi)
    return bool(keep) if np.ndim(keep) == 0 else keep


# --------------------------------------------------------------------------
# synthesis

def _mixup_set(X, Y, cdf, config, reference, rng) -> VicinalSet:
    n = len(Y)
    partner = np.empty(n, dtype=np.intp)
    lam = np.empty(n)
    X_vic = np.empty_like(X)
    alpha = np.full(n, float(config.beta_alpha))
    failures = np.zeros(n, dtype=int)
    pending = np.arange(n)
    attempts = rejections = escalations = forced = 0
    check = reference is not None and not math.isinf(config.mu)
    attempt = 0
    while len(pending):
        attempt += 1
        j = _draw_from_rows(cdf, pending, rng)
        lj = rng.beta(alpha[pending], config.beta_alpha)
        xv = lj[:, None] * X[pending] + (1.0 - lj[:, None]) * X[j]
        partner[pending] = j
        lam[pending] = lj
        X_vic[pending] = xv
        attempts += len(pending)
        if not check:
            break
        keep = intrusion_check(reference.predict(xv), Y[pending], Y[j], lj, config.mu)
        if attempt >= MAX_ATTEMPTS:
            forced += int((~keep).sum())
            break
        bad = pending[~keep]
        rejections += len(bad)
        failures[bad] += 1
        escalate = bad[failures[bad] % ESCALATE_EVERY == 0]
        if len(escalate):
            alpha[escalate] *= ESCALATE_FACTOR
            escalations += len(escalate)
            log.debug("beta alpha escalated for %d instance(s) after %d failures: %s",
                      len(escalate), int(failures[escalate[0]]), escalate.tolist())
        pending = bad
    return VicinalSet(
        X_vic=_frozen(X_vic), kept=_frozen(np.ones(n, dtype=bool)),
        partner=_frozen(partner), lam=_frozen(lam), attempts=attempts,
        rejections=rejections, escalations=escalations, forced=forced)


def synthesize(X_std: np.ndarray, Y_std: np.ndarray, config: VicinalConfig,
               reference=None, rng=None) -> list[VicinalSet]:
    """Build ``config.K`` vicinal sets.

    ``reference`` is any fitted model with ``predict`` (normally an
    :class:`~vjmgp.xtrees.ExtraForest`); it is only consulted for mixup with
    a finite margin ``config.mu``.
    """
    X = np.asarray(X_std, dtype=float)
    Y = np.asarray(Y_std, dtype=float)
    rng = np.random.default_rng(rng)
    sets = []
    if config.kind == GAUSSIAN:
        ones = _frozen(np.ones(len(Y), dtype=bool))
        for _ in range(config.K):
            noise = rng.normal(0.0, 1.0, size=X.shape) * config.sigma
            sets.append(VicinalSet(X_vic=_frozen(X + noise), kept=ones, attempts=len(Y)))
        return sets
    P = partner_probabilities(Y, config.gamma, X if config.kernel_space == "xy" else None)
    cdf = _cdf(P)
    for _ in range(config.K):
        sets.append(_mixup_set(X, Y, cdf, config, reference, rng))
    total = sum(s.escalations for s in sets)
    if total:
        log.info("intrusion filter escalated the beta parameter %d time(s)", total)
    return sets


def synthesis_stats(sets: Sequence[VicinalSet]) -> dict:
    attempts = sum(s.attempts for s in sets)
    rejections = sum(s.rejections for s in sets)
    return {
        "attempts": attempts,
        "rejections": rejections,
        "escalations": sum(s.escalations for s in sets),
        "forced": sum(s.forced for s in sets),
        "discard_fraction": rejections / attempts if attempts else 0.0,
    }


# --------------------------------------------------------------------------
# regularizers

def _targets(F_train: np.ndarray, vset: VicinalSet, mode: str) -> np.ndarray:
    if mode == JENSEN_GAP:
        if vset.partner is None:
            raise ValueError("the Jensen gap needs mixup vicinal sets")
        return vset.lam * F_train + (1.0 - vset.lam) * F_train[vset.partner]
    if mode == FINITE_DIFFERENCE:
        return F_train
    raise ValueError(f"unknown regularizer mode {mode!r}")


def iter_regularizer(individual, readout, vicinal_sets, X_std, mode,
                     F_train: Optional[np.ndarray] = None) -> Iterator[tuple[float, np.ndarray]]:
    """Yield ``(V_current, V_i)`` after each vicinal set.

    ``V_i`` is the running per-instance maximum of the squared deviation; it
    never decreases as more sets are consumed.
    """
    if F_train is None:
        F_train = readout.predict(construct_features(individual, X_std))
    V_i = np.zeros(len(F_train))
    for vset in vicinal_sets:
        target = _targets(F_train, vset, mode)
        pred = readout.predict(construct_features(individual, vset.X_vic))
        sq = np.where(vset.kept, (pred - target) ** 2, 0.0)
        V_i = np.maximum(V_i, sq)
        yield float(V_i.mean()), V_i


def regularizer(individual, readout, vicinal_sets, X_std, mode=JENSEN_GAP,
                F_train=None) -> tuple[float, np.ndarray]:
    V, V_i = 0.0, None
    for V, V_i in iter_regularizer(individual, readout, vicinal_sets, X_std, mode, F_train):
        pass
    return V, V_i


def regularizer_early_stop(individual, readout, vicinal_sets, X_std, best_combined: float,
                           tau: float, mode=JENSEN_GAP, o1: Optional[float] = None,
                           F_train=None):
    """Regularizer that stops once the individual cannot beat ``best_combined``.

    Returns ``(V, V_i, terminated, rounds)``. ``terminated`` is only set when
    some vicinal sets were actually skipped, so an unterminated result is
    exactly the full regularizer.
    """
    o1 = individual.o1 if o1 is None else o1
    K = len(vicinal_sets)
    V, V_i, k = 0.0, None, 0
    for k, (V, V_i) in enumerate(
            iter_regularizer(individual, readout, vicinal_sets, X_std, mode, F_train), 1):
        if k < K and o1 + tau * V > best_combined:
            return V, V_i, True, k
    return V, V_i, False, k


# --------------------------------------------------------------------------
# decomposition bounds

@dataclass(frozen=True)
class TheoremSample:
    """Scalars (or equally shaped arrays) entering both decomposition bounds.

    For the perturbation bound ``f_vic`` is ``f(x_i + ε)``; for the mixup
    bound it is ``f(λ x_i + (1-λ) x_j)``.
    """

    y_i: float
    y_j: float
    f_xi: float
    f_xj: float
    f_vic: float
    lam: float = 0.5
    epsilon: float = 0.0


def check_theorem_bounds(sample: TheoremSample, tol: float = 1e-12):
    """Evaluate both bounds; returns ``((lhs, rhs, holds), (lhs, rhs, holds))``."""
    s = sample
    lhs1 = (s.y_i - s.f_vic) ** 2
    rhs1 = 2 * (s.y_i - s.f_xi) ** 2 + 2 * (s.f_xi - s.f_vic) ** 2
    y_vic = s.lam * s.y_i + (1 - s.lam) * s.y_j
    lhs2 = (y_vic - s.f_vic) ** 2
    rhs2 = (3 * (s.lam * (s.y_i - s.f_xi)) ** 2
            + 3 * ((1 - s.lam) * (s.y_j - s.f_xj)) ** 2
            + 3 * (s.lam * s.f_xi + (1 - s.lam) * s.f_xj - s.f_vic) ** 2)
    return (lhs1, rhs1, (rhs1 - lhs1) >= -tol), (lhs2, rhs2, (rhs2 - lhs2) >= -tol)
