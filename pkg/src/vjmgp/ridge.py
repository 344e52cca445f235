"""Ridge readout over constructed features with closed-form leave-one-out CV."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEVERAGE_CAP = 1.0 - 1e-6


@dataclass(frozen=True)
class RidgeReadout:
    """Linear model on z-scored features, predicting ``y_mean + Z @ weights``.

    Columns with zero training variance get ``feature_stds == 1`` and are
    flagged in ``constant_mask``; their standardized values are forced to 0.
    """

    weights: np.ndarray
    intercept: float
    alpha: float
    feature_means: np.ndarray
    feature_stds: np.ndarray
    constant_mask: np.ndarray
    y_mean: float

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def standardize(self, Phi: np.ndarray) -> np.ndarray:
        Phi = np.asarray(Phi, dtype=float)
        if Phi.ndim != 2 or Phi.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} feature columns, got shape {Phi.shape}")
        Z = (Phi - self.feature_means) / self.feature_stds
        Z[:, self.constant_mask] = 0.0
        return Z

    def predict(self, Phi: np.ndarray) -> np.ndarray:
        return self.standardize(Phi) @ self.weights + self.intercept


def _design(Phi, Y):
    Phi = np.asarray(Phi, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    if Phi.shape[0] != Y.shape[0]:
        raise ValueError("Phi and Y have different numbers of rows")
    if Phi.shape[0] < 2:
        raise ValueError("ridge fitting needs at least two rows")
    means = Phi.mean(axis=0)
    stds = Phi.std(axis=0)
    const = ~(stds > 1e-12 * np.maximum(1.0, np.abs(means)))
    stds = np.where(const, 1.0, stds)
    Z = (Phi - means) / stds
    Z[:, const] = 0.0
    y_mean = float(Y.mean())
    return Z, Y - y_mean, means, stds, const, y_mean


def _inverse(Z: np.ndarray, alpha: float) -> np.ndarray:
    """(ZᵀZ + αI)⁻¹, with a pseudo-inverse when α = 0."""
    A = Z.T @ Z
    if alpha > 0:
        A[np.diag_indices_from(A)] += alpha
        try:
            return np.linalg.inv(A)
        except np.linalg.LinAlgError:
            pass
    return np.linalg.pinv(A, hermitian=True)


def _fit(Phi, Y, alpha):
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    Z, yc, means, stds, const, y_mean = _design(Phi, Y)
    A_inv = _inverse(Z, alpha)
    w = A_inv @ (Z.T @ yc)
    readout = RidgeReadout(w, y_mean, float(alpha), means, stds, const, y_mean)
    return readout, Z, yc, A_inv


def fit_ridge(Phi: np.ndarray, Y: np.ndarray, alpha: float = 0.1) -> RidgeReadout:
    return _fit(Phi, Y, alpha)[0]


def leverage(Z: np.ndarray, A_inv: np.ndarray) -> np.ndarray:
    return np.einsum("ij,jk,ik->i", Z, A_inv, Z)


def loocv_errors(Phi: np.ndarray, Y: np.ndarray, alpha: float = 0.1):
    """Squared leave-one-out residuals from a single ridge fit.

    Returns
    -------
    e : ndarray of shape (n,)
        ``((Y - Ŷ) / (1 - h))**2`` with the leverages ``h`` of the
        standardized design, capped at ``1 - 1e-6``.
    readout : RidgeReadout
        The model fitted on all rows.
    """
    readout, Z, yc, A_inv = _fit(Phi, Y, alpha)
    h = np.minimum(leverage(Z, A_inv), LEVERAGE_CAP)
    resid = yc - Z @ readout.weights
    return (resid / (1.0 - h)) ** 2, readout


def predict(readout: RidgeReadout, Phi_new: np.ndarray) -> np.ndarray:
    return readout.predict(Phi_new)
