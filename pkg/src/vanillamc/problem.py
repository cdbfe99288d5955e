"""Planted low-rank problems, Bernoulli masks and the observation projectors.

Random draws use numpy's ``PCG64`` bit generator seeded through
``SeedSequence``; its output stream is specified and platform independent,
so a seed pins down a ground truth or a mask exactly.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .linalg import as_dense

__all__ = [
    "GroundTruth",
    "SamplingMask",
    "make_rng",
    "generate_ground_truth",
    "incoherence",
    "condition_number",
    "sample_mask",
    "mask_from_indices",
    "project_omega",
    "project_omega_restricted",
    "project_row_or_column",
]


def make_rng(*key):
    """PCG64 generator keyed by one or more nonnegative integers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Rank-``r`` matrix ``M = U @ V.T`` with balanced factors.

    ``U = U_tilde diag(s)^(1/2)`` and ``V = V_tilde diag(s)^(1/2)``, so
    ``U.T @ U == V.T @ V == diag(s)``.
    """

    U: np.ndarray
    V: np.ndarray
    singulars: np.ndarray
    mu: float
    kappa: float
    seed: int | None = None

    @property
    def n1(self):
        return self.U.shape[0]

    @property
    def n2(self):
        return self.V.shape[0]

    @property
    def r(self):
        return self.U.shape[1]

    @cached_property
    def M(self):
        return self.U @ self.V.T

    @property
    def sigma1(self):
        return float(self.singulars[0])

    @property
    def sigmar(self):
        return float(self.singulars[-1])

    @property
    def aspect_ratio(self):
        return self.n1 / self.n2

    def to_dict(self):
        return {
            "n1": self.n1,
            "n2": self.n2,
            "r": self.r,
            "seed": self.seed,
            "singulars": self.singulars.tolist(),
            "mu": self.mu,
            "kappa": self.kappa,
            "U": self.U.tolist(),
            "V": self.V.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        U = np.asarray(d["U"], dtype=np.float64).reshape(d["n1"], d["r"])
        V = np.asarray(d["V"], dtype=np.float64).reshape(d["n2"], d["r"])
        return cls(U, V, np.asarray(d["singulars"], dtype=np.float64),
                   float(d["mu"]), float(d["kappa"]), d.get("seed"))

    def dumps(self):
        # repr of a float64 round-trips exactly through json
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class SamplingMask:
    """Observed index set of an ``n1 x n2`` matrix.

    ``observed`` is the boolean membership view; ``indices`` gives the same
    set as a row-major sorted ``(k, 2)`` integer array. ``p`` is the
    sampling rate the mask was drawn with (used for the ``1/p`` rescaling),
    not the empirical rate.
    """

    observed: np.ndarray
    p: float
    seed: int | None = None
    _indices: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=bool)
        if obs.ndim != 2:
            raise ValueError("mask must be 2-D")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        obs.setflags(write=False)
        object.__setattr__(self, "observed", obs)
        idx = np.argwhere(obs)
        idx.setflags(write=False)
        object.__setattr__(self, "_indices", idx)

    @property
    def shape(self):
        return self.observed.shape

    @property
    def n1(self):
        return self.observed.shape[0]

    @property
    def n2(self):
        return self.observed.shape[1]

    @property
    def indices(self):
        return self._indices

    @property
    def count(self):
        return len(self._indices)

    @property
    def empirical_rate(self):
        return self.count / self.observed.size

    def __contains__(self, ij):
        i, j = ij
        return bool(self.observed[i, j])

    def as_float(self):
        return self.observed.astype(np.float64)

    def to_dict(self):
        return {
            "n1": self.n1,
            "n2": self.n2,
            "p": self.p,
            "seed": self.seed,
            "observed": self._indices.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return mask_from_indices(d["n1"], d["n2"], d["observed"], d["p"], d.get("seed"))

    def dumps(self):
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def mask_from_indices(n1, n2, pairs, p, seed=None):
    """Build a mask from explicit ``(i, j)`` pairs; duplicates are rejected."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs[:, 0].max() >= n1 or pairs[:, 1].max() >= n2):
        raise IndexError("mask index out of range")
    obs = np.zeros((n1, n2), dtype=bool)
    obs[pairs[:, 0], pairs[:, 1]] = True
    if obs.sum() != len(pairs):
        raise ValueError("duplicate index pairs in mask")
    return SamplingMask(obs, float(p), seed)


def incoherence(Q, tol=1e-8):
    """Incoherence ``(n/r) * max_i ||Q[i]||^2`` of an orthonormal basis ``Q``."""
    Q = as_dense(Q, "Q")
    n, r = Q.shape
    if np.linalg.norm(Q.T @ Q - np.eye(r)) > tol:
        raise ValueError("Q must have orthonormal columns")
    return float(n / r * np.max(np.sum(Q * Q, axis=1)))


def condition_number(singulars):
    s = np.asarray(singulars, dtype=np.float64)
    if s.size == 0 or np.any(s <= 0):
        raise ValueError("singular values must be positive")
    if np.any(np.diff(s) > 0):
        raise ValueError("singular values must be nonincreasing")
    return float(s[0] / s[-1])


def _orthonormal(rng, n, r):
    q, rr = np.linalg.qr(rng.standard_normal((n, r)))
    # make the factorisation unique: positive diagonal in the triangular factor
    return q * np.where(np.diag(rr) < 0, -1.0, 1.0)


def generate_ground_truth(n1, n2, r, kappa=1.0, seed=0):
    """Random rank-``r`` matrix with singular values spaced geometrically in ``[1, kappa]``.

    The singular subspaces are orthonormalised Gaussian matrices; the
    realised incoherence is measured, not targeted. With ``r == 1`` the
    single singular value is 1 and ``kappa`` is ignored.
    """
    if not 1 <= r <= min(n1, n2):
        raise ValueError(f"r={r} out of range for {n1}x{n2}")
    if not kappa >= 1.0:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    rng = make_rng(seed)
    Ut = _orthonormal(rng, n1, r)
    Vt = _orthonormal(rng, n2, r)
    if r == 1:
        s = np.ones(1)
    else:
        s = kappa ** (np.arange(r - 1, -1, -1) / (r - 1))
    root = np.sqrt(s)
    mu = max(incoherence(Ut), incoherence(Vt))
    return GroundTruth(Ut * root, Vt * root, s, mu, float(s[0] / s[-1]), seed)


def sample_mask(n1, n2, p, seed=0):
    """Bernoulli(``p``) mask: each entry observed independently."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    rng = make_rng(seed)
    obs = rng.random((n1, n2)) < p
    return SamplingMask(obs, float(p), seed)


def _check_shape(M, mask):
    if M.shape != mask.shape:
        raise ValueError(f"shape mismatch: matrix {M.shape} vs mask {mask.shape}")


def project_omega(M, mask):
    """Zero every unobserved entry of ``M``."""
    M = np.asarray(M, dtype=np.float64)
    _check_shape(M, mask)
    return np.where(mask.observed, M, 0.0)


def _check_axis(axis, l, shape):
    if axis not in ("row", "column"):
        raise ValueError(f"axis must be 'row' or 'column', got {axis!r}")
    n = shape[0] if axis == "row" else shape[1]
    if not 0 <= l < n:
        raise IndexError(f"{axis} index {l} out of range [0, {n})")


def project_omega_restricted(M, mask, axis, l, mode):
    """Masked projection with row/column ``l`` removed (``exclude``) or kept alone (``only``)."""
    if mode not in ("exclude", "only"):
        raise ValueError(f"mode must be 'exclude' or 'only', got {mode!r}")
    out = project_omega(M, mask)
    _check_axis(axis, l, out.shape)
    if mode == "only":
        return project_row_or_column(out, axis, l)
    if axis == "row":
        out[l, :] = 0.0
    else:
        out[:, l] = 0.0
    return out


def project_row_or_column(M, axis, l):
    """Keep row (or column) ``l`` of ``M`` and zero everything else."""
    M = np.asarray(M, dtype=np.float64)
    _check_axis(axis, l, M.shape)
    out = np.zeros_like(M)
    if axis == "row":
        out[l, :] = M[l, :]
    else:
        out[:, l] = M[:, l]
    return out
