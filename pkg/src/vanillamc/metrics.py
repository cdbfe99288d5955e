"""Rotation-aligned distances between a factor pair and the planted truth."""

import numpy as np

from .linalg import norm_2inf, procrustes, spectral_norm

__all__ = ["stack", "aligned_errors", "relative_recovery_error", "balance_gap"]


def stack(X, Y):
    return np.vstack([X, Y])


def aligned_errors(X, Y, gt):
    """Frobenius, spectral and 2,inf norms of ``[X; Y] R - [U; V]`` at the optimal ``R``.

    Returns ``(frob, spec, two_inf, R)``.
    """
    F = stack(X, Y)
    F_star = stack(gt.U, gt.V)
    R = procrustes(F, F_star)
    E = F @ R - F_star
    return float(np.linalg.norm(E)), spectral_norm(E), norm_2inf(E), R


def relative_recovery_error(X, Y, M):
    nrm = np.linalg.norm(M)
    return float(np.linalg.norm(X @ Y.T - M) / nrm) if nrm > 0 else float(np.linalg.norm(X @ Y.T))


def balance_gap(X, Y):
    return float(np.linalg.norm(X.T @ X - Y.T @ Y))
