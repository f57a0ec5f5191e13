"""Pfaffians of real antisymmetric matrices."""

from __future__ import annotations

import numpy as np

__all__ = ["pfaffian", "pfaffian_expansion", "pfaffian_ltl", "EXPANSION_MAX_DIM"]

EXPANSION_MAX_DIM = 8
ANTISYMMETRY_TOL = 1e-12


def _validated(M) -> np.ndarray:
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("pfaffian needs a square matrix")
    if A.shape[0] % 2:
        raise ValueError("pfaffian of an odd-dimensional matrix is undefined")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A + A.T)) > ANTISYMMETRY_TOL * scale:
        raise ValueError("matrix is not antisymmetric")
    return A


def pfaffian_expansion(A: np.ndarray) -> float:
    """Expansion along the first row: Pf(A) = sum_j (-1)^(j+1) a_0j Pf(A without rows/cols 0, j)."""
    n = A.shape[0]
    if n == 0:
        return 1.0
    if n == 2:
        return float(A[0, 1])
    total = 0.0
    rest = np.arange(1, n)
    for j in range(1, n):
        if A[0, j] == 0.0:
            continue
        keep = rest[rest != j]
        sign = 1.0 if j % 2 == 1 else -1.0
        total += sign * A[0, j] * pfaffian_expansion(A[np.ix_(keep, keep)])
    return total


def pfaffian_ltl(A: np.ndarray) -> float:
    """Parlett-Reid skew-tridiagonalization with partial pivoting."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return 1.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0.0:
            return 0.0
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            col = A[k + 2:, k + 1].copy()
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return float(pf)


def pfaffian(M) -> float:
    """Pfaffian of an antisymmetric matrix of even dimension.

    Exact recursive expansion up to dimension 8, skew-tridiagonalization beyond.
    """
    A = _validated(M)
    if A.shape[0] <= EXPANSION_MAX_DIM:
        return pfaffian_expansion(A)
    return pfaffian_ltl(A)
