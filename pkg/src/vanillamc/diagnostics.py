"""Numerical checks of the local geometry of the factorised objective.

Everything here is a measurement: functions return statistics and leave
pass/fail thresholds to the caller, except :class:`CheckSummary`, which
packages a statistic with a verdict for the harness.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import as_dense, norm_2inf, procrustes, spectral_norm
from .problem import make_rng
from .solver import FactorPair, gradient, objective

__all__ = [
    "HessianSample",
    "CheckSummary",
    "hessian_quadratic_form",
    "hessian_radius",
    "sample_hessian_pairs",
    "hessian_bounds_check",
    "sampling_deviation",
    "deviation_bound",
    "spectral_gap",
    "directional_derivatives",
    "gradient_fd_check",
    "second_difference",
    "fit_exponent",
    "SUMMARY_HEADER",
]

SUMMARY_HEADER = ("name", "parameters", "statistic", "passed")


def _inner(A, B):
    return float(np.sum(A * B))


def hessian_quadratic_form(fp, D, M, mask):
    """``vec(D)^T  Hess f(X, Y)  vec(D)`` evaluated in closed form.

    ``M`` is the full matrix; only its observed entries enter. ``D`` is a
    pair ``(D_X, D_Y)`` shaped like ``fp``.
    """
    X, Y = fp
    DX, DY = D
    if DX.shape != X.shape or DY.shape != Y.shape:
        raise ValueError("direction and point shapes differ")
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (X.shape[0], Y.shape[0]) or mask.shape != M.shape:
        raise ValueError("matrix, mask and factor shapes disagree")
    p = mask.p
    obs = mask.observed
    res = np.where(obs, X @ Y.T - M, 0.0)
    cross = np.where(obs, DX @ DY.T, 0.0)
    lin = np.where(obs, DX @ Y.T + X @ DY.T, 0.0)
    gap = X.T @ X - Y.T @ Y
    dgap = DX.T @ DX - DY.T @ DY
    sym = DX.T @ X + X.T @ DX - Y.T @ DY - DY.T @ Y
    return (2.0 / p) * _inner(res, cross) + _inner(lin, lin) / p + 0.5 * _inner(gap, dgap) + 0.25 * _inner(sym, sym)


def second_difference(fp, D, observed_M, mask, h=1e-4):
    """``[f(x + hD) - 2 f(x) + f(x - hD)] / h^2``."""
    X, Y = fp
    DX, DY = D
    fp_ = objective(FactorPair(X + h * DX, Y + h * DY), observed_M, mask)
    fm_ = objective(FactorPair(X - h * DX, Y - h * DY), observed_M, mask)
    f0 = objective(fp, observed_M, mask)
    return (fp_ - 2.0 * f0 + fm_) / (h * h)


class HessianSample(NamedTuple):
    quad_form: float
    direction_norm_sq: float
    lower_ok: bool
    upper_ok: bool


def hessian_radius(gt):
    """Row-wise radius ``sqrt(sigma_1) / (500 kappa sqrt(n1 + n2))`` of the local neighbourhood."""
    return math.sqrt(gt.sigma1) / (500.0 * gt.kappa * math.sqrt(gt.n1 + gt.n2))


def _random_orthogonal(rng, r):
    q, rr = np.linalg.qr(rng.standard_normal((r, r)))
    return q * np.sign(np.diag(rr))


def sample_hessian_pairs(gt, n_samples, neighborhood_scale=1.0, seed=0, structured=True):
    """Draw ``(point, direction)`` pairs for the local Hessian bounds.

    Point: ``[U; V] + G`` with ``G`` Gaussian, rescaled so that
    ``||G||_{2,inf} = u * neighborhood_scale * hessian_radius(gt)``,
    ``u ~ Uniform(0, 1]``.

    Structured direction: ``F1 @ R_hat - F2`` where ``F2 = [U; V] + H2`` with
    ``||H2|| = u2 * sqrt(sigma_1) / (500 kappa)``, ``F1 = [U; V] Q + H1`` with
    ``Q`` Haar-orthogonal and ``||H1||_F = 10^a sqrt(sigma_1 r)``,
    ``a ~ Uniform(-3, 0)``, and ``R_hat = procrustes(F1, F2)``. Unstructured
    directions are plain Gaussian. Sample ``k`` uses the generator keyed by
    ``(seed, k)``, so results do not depend on ``n_samples`` or order.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be nonnegative")
    if not 0.0 <= neighborhood_scale <= 1.0:
        raise ValueError("neighborhood_scale must lie in [0, 1]")
    n1, r = gt.U.shape
    F_star = np.vstack([gt.U, gt.V])
    rad = neighborhood_scale * hessian_radius(gt)
    near = math.sqrt(gt.sigma1) / (500.0 * gt.kappa)
    out = []
    for k in range(n_samples):
        rng = make_rng(seed, k)
        G = rng.standard_normal(F_star.shape)
        u = 1.0 - rng.random()
        point = F_star + G * (u * rad / norm_2inf(G)) if rad > 0 else F_star.copy()
        if structured:
            H2 = rng.standard_normal(F_star.shape)
            F2 = F_star + H2 * ((1.0 - rng.random()) * near / spectral_norm(H2))
            H1 = rng.standard_normal(F_star.shape)
            scale = 10.0 ** rng.uniform(-3.0, 0.0) * math.sqrt(gt.sigma1 * r)
            F1 = F_star @ _random_orthogonal(rng, r) + H1 * (scale / np.linalg.norm(H1))
            Dst = F1 @ procrustes(F1, F2) - F2
        else:
            Dst = rng.standard_normal(F_star.shape)
        out.append((FactorPair(point[:n1], point[n1:]), FactorPair(Dst[:n1], Dst[n1:])))
    return out


def hessian_bounds_check(gt, mask, n_samples, neighborhood_scale=1.0, seed=0,
                         structured=True, return_samples=False):
    """Fraction of sampled pairs with ``sigma_r/5 ||D||^2 <= form <= 5 sigma_1 ||D||^2``.

    With ``structured=False`` the directions are unconstrained and only the
    upper bound is counted.
    """
    pairs = sample_hessian_pairs(gt, n_samples, neighborhood_scale, seed, structured)
    M = gt.M
    samples = []
    for fp, D in pairs:
        q = hessian_quadratic_form(fp, D, M, mask)
        nsq = float(np.sum(D.X * D.X) + np.sum(D.Y * D.Y))
        if nsq <= 0:
            raise ValueError("degenerate zero direction")
        samples.append(HessianSample(q, nsq, q >= gt.sigmar / 5.0 * nsq, q <= 5.0 * gt.sigma1 * nsq))
    if not samples:
        raise ValueError("n_samples must be positive")
    ok = [s.upper_ok and (s.lower_ok or not structured) for s in samples]
    frac = sum(ok) / len(ok)
    return (frac, samples) if return_samples else frac


def sampling_deviation(A, C, B, D, mask):
    """``(1/p) <P_Omega(A C^T), P_Omega(B D^T)> - <A C^T, B D^T>``."""
    A, B, C, D = (as_dense(Z, n) for Z, n in ((A, "A"), (B, "B"), (C, "C"), (D, "D")))
    if A.shape[0] != mask.n1 or B.shape[0] != mask.n1 or C.shape[0] != mask.n2 or D.shape[0] != mask.n2:
        raise ValueError("factor row counts disagree with the mask")
    if A.shape[1] != C.shape[1] or B.shape[1] != D.shape[1]:
        raise ValueError("inner dimensions disagree")
    P = A @ C.T
    Q = B @ D.T
    return float(np.sum(P * Q * mask.observed) / mask.p - np.sum(P * Q))


def deviation_bound(A, C, B, D, mask, gap=None):
    """Right-hand side of the spectral-gap bound on :func:`sampling_deviation`."""
    g = spectral_gap(mask) if gap is None else gap
    fro = np.linalg.norm
    left = min(norm_2inf(A) * fro(B), fro(A) * norm_2inf(B))
    right = min(norm_2inf(C) * fro(D), fro(C) * norm_2inf(D))
    return float(g / mask.p * left * right)


def spectral_gap(mask):
    """``||Omega - p J||`` for the 0/1 mask matrix ``Omega``."""
    return spectral_norm(mask.observed - mask.p)


def _unit_directions(rng, shapeX, shapeY, n):
    for _ in range(n):
        d = rng.standard_normal(int(np.prod(shapeX)) + int(np.prod(shapeY)))
        d /= np.linalg.norm(d)
        k = int(np.prod(shapeX))
        yield FactorPair(d[:k].reshape(shapeX), d[k:].reshape(shapeY))


def directional_derivatives(fp, observed_M, mask, directions, h):
    """Analytic ``<grad f, d>`` and central differences for each direction.

    Returns two arrays ``(analytic, finite_difference)``.
    """
    g = gradient(fp, observed_M, mask)
    an, fd = [], []
    for d in directions:
        an.append(_inner(g.X, d.X) + _inner(g.Y, d.Y))
        fplus = objective(FactorPair(fp.X + h * d.X, fp.Y + h * d.Y), observed_M, mask)
        fminus = objective(FactorPair(fp.X - h * d.X, fp.Y - h * d.Y), observed_M, mask)
        fd.append((fplus - fminus) / (2.0 * h))
    return np.array(an), np.array(fd)


def gradient_fd_check(fp, observed_M, mask, n_directions=20, h=1e-5, seed=0, atol=1e-10):
    """Worst relative gap between ``<grad f, d>`` and central differences.

    The relative error is ``|fd - an| / max(|an|, atol)`` over random unit
    directions ``d`` in the joint ``(X, Y)`` space.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if n_directions < 1:
        raise ValueError("n_directions must be positive")
    rng = make_rng(seed)
    dirs = list(_unit_directions(rng, fp.X.shape, fp.Y.shape, n_directions))
    an, fd = directional_derivatives(fp, observed_M, mask, dirs, h)
    return float(np.max(np.abs(fd - an) / np.maximum(np.abs(an), atol)))


def fit_exponent(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass(frozen=True)
class CheckSummary:
    name: str
    parameters: dict
    statistic: float
    passed: bool

    def csv_row(self):
        params = ";".join(f"{k}={v}" for k, v in self.parameters.items())
        return [self.name, params, repr(float(self.statistic)), "pass" if self.passed else "fail"]

    def csv_line(self):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(self.csv_row())
        return buf.getvalue()
