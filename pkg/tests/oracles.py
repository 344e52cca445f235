"""Independent brute-force references shared by the unit and acceptance tests."""

import numpy as np


def standardized_design(Phi, Y):
    """Z-scored features (zero-variance columns zeroed) and centered labels."""
    Phi = np.asarray(Phi, dtype=float)
    mean = Phi.mean(axis=0)
    std = Phi.std(axis=0)
    const = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    Z = np.where(const, 0.0, (Phi - mean) / np.where(const, 1.0, std))
    return Z, Y - Y.mean()


def solve_ridge(Z, y, alpha):
    A = Z.T @ Z + alpha * np.eye(Z.shape[1])
    if alpha == 0:
        return np.linalg.lstsq(Z, y, rcond=None)[0]
    return np.linalg.solve(A, Z.T @ y)


def brute_loocv(Phi, Y, alpha):
    """Drop each row, refit on the rest of the fixed standardized design, predict it."""
    Z, yc = standardized_design(Phi, Y)
    n = len(yc)
    e = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        w = solve_ridge(Z[keep], yc[keep], alpha)
        e[i] = (yc[i] - Z[i] @ w) ** 2
    return e


def brute_fronts(F):
    """Front ranks by repeated O(n²) pairwise dominance scans."""
    F = np.asarray(F, dtype=float)
    remaining = list(range(len(F)))
    fronts = []
    while remaining:
        front = []
        for i in remaining:
            dominated = False
            for j in remaining:
                if j != i and np.all(F[j] <= F[i]) and np.any(F[j] < F[i]):
                    dominated = True
                    break
            if not dominated:
                front.append(i)
        fronts.append(sorted(front))
        remaining = [i for i in remaining if i not in front]
    return fronts
