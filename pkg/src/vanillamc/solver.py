"""Factorised objective, its gradient, spectral initialisation and gradient descent.

The solver only ever sees ``P_Omega(M)``; the planted truth is used by
:func:`run` for metrics and the optional truth-based stopping rule.
"""

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import top_r_svd
from .metrics import aligned_errors, balance_gap, relative_recovery_error
from .problem import project_omega

__all__ = [
    "FactorPair",
    "SolverConfig",
    "TrajectoryRecord",
    "objective",
    "gradient",
    "spectral_init",
    "gd_step",
    "default_step_size",
    "projected_gd_step",
    "oracle_radii",
    "solve",
    "run",
    "write_trajectory_csv",
    "TRAJECTORY_HEADER",
]

TRAJECTORY_HEADER = ("iter", "objective", "frob_err", "spec_err", "two_inf_err", "balance_gap")


class FactorPair(NamedTuple):
    X: np.ndarray
    Y: np.ndarray

    @property
    def r(self):
        return self.X.shape[1]

    def stacked(self):
        return np.vstack([self.X, self.Y])


@dataclass(frozen=True)
class SolverConfig:
    """Gradient-descent settings.

    ``eta=None`` selects the largest step admitted by the linear-rate
    guarantee, ``sigma_r / (200 sigma_1^2)``, with the two singular values
    taken from the spectral initialisation (``eta_source="init"``) or from
    the planted truth (``eta_source="oracle"``).

    ``stop_mode="truth"`` stops once ``frob_err / sqrt(sigma_r) <= stop_tol``
    (checked at recorded iterations);
    ``"plateau"`` stops when the objective changed by less than
    ``plateau_tol`` relatively over the last ``plateau_window`` iterations;
    ``"none"`` always runs ``max_iters`` steps.
    """

    eta: float | None = None
    max_iters: int = 50000
    stop_tol: float = 1e-6
    record_every: int = 1
    eta_source: str = "init"
    stop_mode: str = "truth"
    plateau_tol: float = 1e-12
    plateau_window: int = 100
    radius_slack: float = 0.02

    def __post_init__(self):
        if self.eta is not None and not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.eta_source not in ("init", "oracle"):
            raise ValueError(f"unknown eta_source {self.eta_source!r}")
        if self.stop_mode not in ("truth", "plateau", "none"):
            raise ValueError(f"unknown stop_mode {self.stop_mode!r}")


@dataclass(frozen=True)
class TrajectoryRecord:
    iter: int
    objective: float
    aligned_frob_err: float
    aligned_spec_err: float
    aligned_2inf_err: float
    balance_gap: float
    rel_err: float = math.nan

    def row(self):
        """Values in :data:`TRAJECTORY_HEADER` order."""
        return [self.iter, self.objective, self.aligned_frob_err, self.aligned_spec_err,
                self.aligned_2inf_err, self.balance_gap]


def _check(fp, observed_M, mask):
    X, Y = fp
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise ValueError(f"inconsistent factor shapes {X.shape}, {Y.shape}")
    shape = (X.shape[0], Y.shape[0])
    if observed_M.shape != shape or mask.shape != shape:
        raise ValueError(f"factor shapes {shape} disagree with data {observed_M.shape} / mask {mask.shape}")


def _residual(X, Y, observed_M, mask):
    # P_Omega(X Y^T - M), given observed_M = P_Omega(M)
    return np.where(mask.observed, X @ Y.T, 0.0) - observed_M


def objective(fp, observed_M, mask):
    """``(1/2p) ||P_Omega(X Y^T - M)||_F^2 + (1/8) ||X^T X - Y^T Y||_F^2``."""
    _check(fp, observed_M, mask)
    X, Y = fp
    res = _residual(X, Y, observed_M, mask)
    gap = X.T @ X - Y.T @ Y
    return float(np.sum(res * res) / (2.0 * mask.p) + np.sum(gap * gap) / 8.0)


def _mT(A):
    return np.swapaxes(A, -1, -2)


def gradient_from_residual(X, Y, res):
    """Gradient pair given the weighted residual; broadcasts over leading axes."""
    gap = _mT(X) @ X - _mT(Y) @ Y
    return res @ Y + 0.5 * (X @ gap), _mT(res) @ X - 0.5 * (Y @ gap)


def gradient(fp, observed_M, mask):
    """Partial gradients of :func:`objective` with respect to ``X`` and ``Y``."""
    _check(fp, observed_M, mask)
    X, Y = fp
    res = _residual(X, Y, observed_M, mask) / mask.p
    return FactorPair(*gradient_from_residual(X, Y, res))


def balanced_factors(svd):
    root = np.sqrt(svd.singulars)
    return FactorPair(svd.left * root, svd.right * root)


def spectral_init(observed_M, mask, r, return_singulars=False):
    """Balanced factors of the top-``r`` SVD of ``P_Omega(M) / p``."""
    observed_M = np.asarray(observed_M, dtype=np.float64)
    if observed_M.shape != mask.shape:
        raise ValueError("observed matrix and mask shapes differ")
    svd = top_r_svd(observed_M / mask.p, r)
    fp = balanced_factors(svd)
    return (fp, svd.singulars) if return_singulars else fp


def gd_step(fp, observed_M, mask, eta):
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    gX, gY = gradient(fp, observed_M, mask)
    return FactorPair(fp.X - eta * gX, fp.Y - eta * gY)


def default_step_size(sigma1, sigmar):
    """``(sigma_r / (1000 sigma_1^2), sigma_r / (200 sigma_1^2))``."""
    if not (sigmar > 0 and sigma1 > 0):
        raise ValueError("singular values must be positive")
    if sigmar > sigma1:
        raise ValueError("need sigma1 >= sigmar")
    return sigmar / (1000.0 * sigma1**2), sigmar / (200.0 * sigma1**2)


def _clip_rows(A, radius):
    if math.isinf(radius):
        return A
    norms = np.sqrt(np.sum(A * A, axis=1))
    over = norms > radius
    if not np.any(over):
        return A
    out = A.copy()
    out[over] *= (radius / norms[over])[:, None]
    return out


def projected_gd_step(fp, observed_M, mask, eta, radius_X, radius_Y):
    """Gradient step followed by clipping every row into an l2 ball."""
    if not (radius_X > 0 and radius_Y > 0):
        raise ValueError("radii must be positive")
    X, Y = gd_step(fp, observed_M, mask, eta)
    return FactorPair(_clip_rows(X, radius_X), _clip_rows(Y, radius_Y))


def oracle_radii(gt, slack=0.02):
    """Shared radius ``(1 + slack) max(||U||_{2,inf}, ||V||_{2,inf})`` for both factors."""
    row = lambda A: float(np.sqrt(np.max(np.sum(A * A, axis=1))))
    rad = (1.0 + slack) * max(row(gt.U), row(gt.V))
    return rad, rad


def _record(t, fp, observed_M, mask, gt):
    frob, spec, tinf, _ = aligned_errors(fp.X, fp.Y, gt)
    return TrajectoryRecord(t, objective(fp, observed_M, mask), frob, spec, tinf, balance_gap(*fp),
                            relative_recovery_error(fp.X, fp.Y, gt.M))


class SolveResult(NamedTuple):
    final: FactorPair
    records: list
    iterations: int
    eta: float
    rel_err: float


def solve(gt, mask, cfg=SolverConfig(), variant="vanilla", init=None):
    """Spectral initialisation followed by (projected) gradient descent.

    Records are taken at ``t = 0``, every ``cfg.record_every`` iterations
    and at the final iterate. The truth-based stopping rule is evaluated
    at recorded iterations only. Returns a :class:`SolveResult`.
    """
    if variant not in ("vanilla", "projected"):
        raise ValueError(f"unknown variant {variant!r}")
    if mask.shape != gt.M.shape:
        raise ValueError("mask and ground truth shapes differ")
    observed_M = project_omega(gt.M, mask)
    fp, s0 = spectral_init(observed_M, mask, gt.r, return_singulars=True)
    if init is not None:
        fp = FactorPair(*init)

    if cfg.eta is not None:
        eta = cfg.eta
    elif cfg.eta_source == "oracle":
        eta = default_step_size(gt.sigma1, gt.sigmar)[1]
    else:
        eta = default_step_size(s0[0], s0[-1])[1]

    if variant == "projected":
        rX, rY = oracle_radii(gt, cfg.radius_slack)
        step = lambda f: projected_gd_step(f, observed_M, mask, eta, rX, rY)
    else:
        step = lambda f: gd_step(f, observed_M, mask, eta)

    scale = math.sqrt(gt.sigmar)
    records = []
    history = []
    t = 0
    while True:
        rec = None
        if t % cfg.record_every == 0 or t == cfg.max_iters:
            rec = _record(t, fp, observed_M, mask, gt)
            records.append(rec)
        if t >= cfg.max_iters:
            break
        if cfg.stop_mode == "truth":
            if rec is not None and rec.aligned_frob_err / scale <= cfg.stop_tol:
                break
        elif cfg.stop_mode == "plateau":
            history.append(objective(fp, observed_M, mask) if rec is None else rec.objective)
            if len(history) > cfg.plateau_window:
                old = history.pop(0)
                if abs(old - history[-1]) <= cfg.plateau_tol * max(abs(old), np.finfo(float).tiny):
                    if rec is None:
                        records.append(_record(t, fp, observed_M, mask, gt))
                    break
        fp = step(fp)
        if not (np.all(np.isfinite(fp.X)) and np.all(np.isfinite(fp.Y))):
            raise FloatingPointError(f"iterates diverged at t={t + 1} (eta={eta:g})")
        t += 1
    return SolveResult(fp, records, t, eta, relative_recovery_error(fp.X, fp.Y, gt.M))


def run(gt, mask, cfg=SolverConfig(), variant="vanilla"):
    """Trajectory records of :func:`solve`."""
    return solve(gt, mask, cfg, variant).records


def write_trajectory_csv(records, path_or_file):
    """Write records with header ``iter,objective,frob_err,spec_err,two_inf_err,balance_gap``."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for rec in records:
            w.writerow([rec.iter] + [repr(float(v)) for v in rec.row()[1:]])
    finally:
        if own:
            fh.close()
