"""Leave-one-out gradient sequences and their alignment diagnostics.

Sequence ``l`` (0-based, ``0 <= l < n1 + n2``) treats row ``l`` of the
data as fully observed when ``l < n1`` and column ``l - n1`` otherwise, so
its iterates are independent of the sampling pattern on that row/column.
Index ``l`` is also the row of the stacked matrix ``[X; Y]`` that the
sequence is meant to control.

The ensemble is stored as stacked arrays and advanced with batched numpy
operations. Each sequence only depends on its own slice, so the chunk size
used to bound memory does not change any result.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .linalg import norm_2inf, sign_matrix, spectral_norm, top_r_svd
from .problem import project_omega
from .solver import FactorPair, balanced_factors, gd_step, gradient_from_residual

__all__ = [
    "LooEnsemble",
    "LooAlignments",
    "LooDiagnostics",
    "loo_matrix",
    "loo_init",
    "init_ensemble",
    "loo_step",
    "loo_alignments",
    "loo_diagnostics",
    "track",
    "write_loo_csv",
    "LOO_HEADER",
    "DEFAULT_LOO_CAP",
]

LOO_HEADER = ("iter", "spec_err", "max_rowwise", "max_pairdist", "two_inf_err")
DEFAULT_LOO_CAP = 400


def _split(l, n1, n2):
    if not 0 <= l < n1 + n2:
        raise IndexError(f"leave-one-out index {l} out of range [0, {n1 + n2})")
    return ("row", l) if l < n1 else ("column", l - n1)


def _weights(mask, l):
    # sampling weights of the l-th modified objective: 1/p on Omega, 1 on the full row/column
    W = mask.observed / mask.p
    axis, k = _split(l, *mask.shape)
    if axis == "row":
        W[k, :] = 1.0
    else:
        W[:, k] = 1.0
    return W


def loo_matrix(M, mask, l):
    """``P_Omega(M)/p`` with row/column ``l`` replaced by that of ``M``."""
    M = np.asarray(M, dtype=np.float64)
    out = project_omega(M, mask) / mask.p
    axis, k = _split(l, *mask.shape)
    if axis == "row":
        out[k, :] = M[k, :]
    else:
        out[:, k] = M[:, k]
    return out


def loo_init(M, mask, l, r):
    """Balanced top-``r`` factors of :func:`loo_matrix`."""
    return balanced_factors(top_r_svd(loo_matrix(M, mask, l), r))


@dataclass
class LooEnsemble:
    """Current iterates of a set of leave-one-out sequences.

    ``X[k]``, ``Y[k]`` hold the pair of sequence ``indices[k]``.
    """

    indices: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    t: int = 0

    def __len__(self):
        return len(self.indices)

    @property
    def subsampled(self):
        return len(self.indices) != self.X.shape[1] + self.Y.shape[1]

    def pair(self, l):
        k = int(np.searchsorted(self.indices, l))
        if k >= len(self.indices) or self.indices[k] != l:
            raise KeyError(l)
        return FactorPair(self.X[k], self.Y[k])

    def stacked(self):
        return np.concatenate([self.X, self.Y], axis=1)


def init_ensemble(M, mask, r, indices=None, cap=DEFAULT_LOO_CAP):
    """Leave-one-out initialisations for ``indices`` (default: all ``n1 + n2``).

    The full ensemble is refused above ``cap`` sequences; pass an explicit
    subset of indices to track larger problems.
    """
    n1, n2 = mask.shape
    if indices is None:
        if n1 + n2 > cap:
            raise ValueError(f"n1 + n2 = {n1 + n2} exceeds the ensemble cap {cap}; pass a subset of indices")
        indices = np.arange(n1 + n2)
    indices = np.unique(np.asarray(indices, dtype=np.int64))
    for l in indices:
        _split(int(l), n1, n2)
    pairs = [loo_init(M, mask, int(l), r) for l in indices]
    X = np.stack([p.X for p in pairs]) if pairs else np.zeros((0, n1, r))
    Y = np.stack([p.Y for p in pairs]) if pairs else np.zeros((0, n2, r))
    return LooEnsemble(indices, X, Y, 0)


def loo_step(ensemble, M, mask, eta, chunk=64):
    """Advance every sequence by one gradient step of its own modified objective."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    M = np.asarray(M, dtype=np.float64)
    if M.shape != mask.shape or ensemble.X.shape[1:2] + ensemble.Y.shape[1:2] != M.shape:
        raise ValueError("ensemble, matrix and mask shapes disagree")
    n1 = M.shape[0]
    base = mask.observed / mask.p
    Xn = np.empty_like(ensemble.X)
    Yn = np.empty_like(ensemble.Y)
    for lo in range(0, len(ensemble), chunk):
        sl = slice(lo, lo + chunk)
        X, Y, idx = ensemble.X[sl], ensemble.Y[sl], ensemble.indices[sl]
        W = np.broadcast_to(base, (len(idx),) + M.shape).copy()
        k = np.arange(len(idx))
        rows = idx < n1
        W[k[rows], idx[rows], :] = 1.0
        W[k[~rows], :, idx[~rows] - n1] = 1.0
        res = (X @ np.swapaxes(Y, -1, -2) - M) * W
        gX, gY = gradient_from_residual(X, Y, res)
        Xn[sl] = X - eta * gX
        Yn[sl] = Y - eta * gY
    return LooEnsemble(ensemble.indices, Xn, Yn, ensemble.t + 1)


@dataclass(frozen=True)
class LooAlignments:
    """``R`` aligns the main pair to the truth; ``R_loo[k]`` aligns sequence
    ``indices[k]`` to the truth; ``T[k]`` aligns it to the aligned main pair."""

    R: np.ndarray
    R_loo: np.ndarray
    T: np.ndarray


def _batched_procrustes(A, B):
    return sign_matrix(np.swapaxes(A, -1, -2) @ B)


def loo_alignments(main, ensemble, gt):
    F = np.vstack([main.X, main.Y])
    F_star = np.vstack([gt.U, gt.V])
    if F.shape != F_star.shape or ensemble.stacked().shape[1:] != F.shape:
        raise ValueError("main pair, ensemble and ground truth shapes disagree")
    R = sign_matrix(F.T @ F_star)
    S = ensemble.stacked()
    R_loo = _batched_procrustes(S, F_star)
    T = _batched_procrustes(S, F @ R)
    # a sequence that coincides with the main one is aligned by R itself
    same = np.array([np.array_equal(s, F) for s in S], dtype=bool)
    if same.any():
        R_loo[same] = R
        T[same] = R
    return LooAlignments(R, R_loo, T)


@dataclass(frozen=True)
class LooDiagnostics:
    """Left-hand sides of the four induction inequalities at iteration ``t``.

    ``subsampled`` marks maxima taken over a subset of sequences only.
    """

    t: int
    main_err_spec: float
    max_rowwise_err: float
    max_pair_dist_frob: float
    main_err_2inf: float
    subsampled: bool = False

    def row(self):
        return [self.t, self.main_err_spec, self.max_rowwise_err, self.max_pair_dist_frob, self.main_err_2inf]


def loo_diagnostics(main, ensemble, gt, alignments=None):
    al = alignments if alignments is not None else loo_alignments(main, ensemble, gt)
    F = np.vstack([main.X, main.Y])
    F_star = np.vstack([gt.U, gt.V])
    E = F @ al.R - F_star
    S = ensemble.stacked()
    k = np.arange(len(ensemble))
    if len(ensemble):
        rows = np.einsum("kj,kjm->km", S[k, ensemble.indices], al.R_loo) - F_star[ensemble.indices]
        rowwise = float(np.sqrt(np.max(np.sum(rows * rows, axis=1))))
        diff = (F @ al.R)[None] - S @ al.T
        pair = float(np.sqrt(np.max(np.sum(diff * diff, axis=(1, 2)))))
    else:
        rowwise = pair = 0.0
    return LooDiagnostics(ensemble.t, spectral_norm(E), rowwise, pair, norm_2inf(E), ensemble.subsampled)


def track(gt, mask, eta, steps, record_every=1, indices=None, cap=DEFAULT_LOO_CAP, chunk=64):
    """Run the main sequence and the ensemble side by side for ``steps`` iterations.

    Returns the list of :class:`LooDiagnostics` recorded at ``t = 0``, every
    ``record_every`` steps and at ``t = steps``.
    """
    M = gt.M
    observed_M = project_omega(M, mask)
    main = balanced_factors(top_r_svd(observed_M / mask.p, gt.r))
    ens = init_ensemble(M, mask, gt.r, indices, cap)
    out = []
    for t in range(steps + 1):
        if t % record_every == 0 or t == steps:
            out.append(loo_diagnostics(main, ens, gt))
        if t == steps:
            break
        main = gd_step(main, observed_M, mask, eta)
        ens = loo_step(ens, M, mask, eta, chunk)
    return out


def write_loo_csv(diags, path_or_file):
    """Write diagnostics with header ``iter,spec_err,max_rowwise,max_pairdist,two_inf_err``."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOO_HEADER)
        for d in diags:
            row = d.row()
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    finally:
        if own:
            fh.close()
