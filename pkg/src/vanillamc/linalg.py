"""Dense linear-algebra kernels: partial SVD, spectral norm, sign matrix, Procrustes."""

from typing import NamedTuple

import numpy as np

__all__ = [
    "PartialSVD",
    "as_dense",
    "top_r_svd",
    "spectral_norm",
    "sign_matrix",
    "procrustes",
    "norm_2inf",
]

# below this size the Gram eigenproblem is solved directly instead of iterated
_DIRECT_NORM_DIM = 16


class PartialSVD(NamedTuple):
    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray


def as_dense(A, name="A"):
    """Return ``A`` as a finite 2-D float64 array, raising otherwise."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def _fix_signs(left, right):
    # largest-magnitude entry of each left vector is made positive
    idx = np.argmax(np.abs(left), axis=0)
    signs = np.sign(left[idx, np.arange(left.shape[1])])
    signs[signs == 0] = 1.0
    return left * signs, right * signs


def top_r_svd(A, r):
    """Leading ``r`` singular triplets of ``A``.

    A full LAPACK decomposition is truncated, which is deterministic for a
    fixed input. Each left singular vector is sign-normalised so that its
    largest-magnitude entry is positive (the matching right vector is
    flipped with it). When singular values tie at the cut-off only the
    spanned subspace is meaningful.

    Parameters
    ----------
    A : array_like, shape (n, m)
    r : int
        Number of triplets, ``1 <= r <= min(n, m)``.

    Returns
    -------
    PartialSVD
        ``left`` (n, r), ``singulars`` (r,) nonincreasing, ``right`` (m, r).
    """
    A = as_dense(A)
    if not 1 <= r <= min(A.shape):
        raise ValueError(f"r={r} out of range for shape {A.shape}")
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    left, right = _fix_signs(u[:, :r], vt[:r].T)
    return PartialSVD(np.ascontiguousarray(left), s[:r].copy(), np.ascontiguousarray(right))


def spectral_norm(A, rel_tol=1e-8, max_iter=10000, return_converged=False):
    """Largest singular value of ``A`` by power iteration on the Gram matrix.

    Iteration stops once successive estimates differ by less than
    ``rel_tol`` relatively, or after ``max_iter`` sweeps, in which case the
    best estimate so far is returned and the convergence flag is False.
    Matrices with a side of at most 16 are handled exactly through the
    eigenvalues of their small Gram matrix.

    Returns
    -------
    float, or (float, bool) if ``return_converged``
    """
    A = as_dense(A)
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    if not np.any(A):
        return (0.0, True) if return_converged else 0.0

    if min(A.shape) <= _DIRECT_NORM_DIM:
        G = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
        est = float(np.sqrt(max(np.linalg.eigvalsh(G)[-1], 0.0)))
        return (est, True) if return_converged else est

    # deterministic start that is never orthogonal to a nonnegative-ish top vector
    rng = np.random.default_rng(0)
    v = rng.standard_normal(A.shape[1]) + 1.0
    v /= np.linalg.norm(v)
    est = 0.0
    converged = False
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            break
        new = float(np.sqrt(nrm))
        v = w / nrm
        if abs(new - est) <= rel_tol * new:
            est = new
            converged = True
            break
        est = new
    return (est, converged) if return_converged else est


def sign_matrix(C):
    """Orthogonal factor ``U @ V.T`` of the SVD ``C = U diag(s) V.T``.

    Accepts a single square matrix or a stack of shape ``(..., r, r)``.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim < 2 or C.shape[-1] != C.shape[-2]:
        raise ValueError(f"C must be square, got {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("C contains non-finite entries")
    u, _, vt = np.linalg.svd(C)
    return u @ vt


def procrustes(A, B):
    """Orthogonal ``R`` minimising ``||A R - B||_F``.

    The minimiser is ``sign_matrix(A.T @ B)``. If ``A.T @ B`` is singular
    the minimiser is not unique and one element of the solution set is
    returned.
    """
    A = as_dense(A)
    B = as_dense(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    if A.shape[1] < 1:
        raise ValueError("need at least one column")
    return sign_matrix(A.T @ B)


def norm_2inf(A):
    """Largest row l2 norm."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.sqrt(np.max(np.sum(A * A, axis=1))))
