"""Seeded experiment grids, phase-transition sweeps and CSV reports.

Config grammar
--------------
One ``key = value`` pair per line. ``#`` starts a comment, blank lines are
ignored. A value is a scalar (integer, float, ``true``/``false``, ``auto``
or a bare word) or a list: ``[a, b, c]``, ``a, b, c`` or an inclusive
integer range ``a..b``. Keys::

    n1, n2, r, kappa, p     grid axes (scalar or list)            required
    seeds                   list of integers                       required
    eta                     step size or ``auto``                  auto
    eta_source              init | oracle                          init
    max_iters               iteration cap                          50000
    stop_tol                aligned error / sqrt(sigma_r) to stop  1e-6
    stop_mode               truth | plateau | none                 truth
    record_every            recording stride                       10
    radius_slack            projected-baseline radius slack        0.02
    variant                 vanilla | projected | both             vanilla
    success_threshold       relative recovery error for success    1e-4
    loo_enabled             run leave-one-out diagnostics          false
    loo_cap                 max n1 + n2 for the full ensemble      400
    loo_steps               leave-one-out iterations               500
    hessian_check           run the local Hessian check            false
    hessian_samples         samples for the Hessian check          200
    output_dir              report directory                       $VANILLAMC_OUTPUT_DIR or vanillamc_out

Seeding
-------
The planted matrix of a run is keyed by ``(seed, n1, n2, r, kappa)`` and the
mask uniforms by ``(seed, n1, n2)``, both through ``SeedSequence`` hashing.
Runs that differ only in ``p`` therefore share the matrix and use nested
masks, and no result depends on how the grid is partitioned across workers.

Report layout
-------------
``sweep.csv``            one row per cell, header :data:`SWEEP_HEADER`; with
                         ``variant = both`` the columns describe vanilla GD
                         and ``vanilla_success_rate,projected_success_rate``
                         are appended
``trajectories/*.csv``   one file per run, header ``iter,objective,frob_err,
                         spec_err,two_inf_err,balance_gap``
``diagnostics/*.csv``    leave-one-out traces (``iter,spec_err,max_rowwise,
                         max_pairdist,two_inf_err``) and ``checks.csv``
                         (``name,parameters,statistic,passed``)
``summary.txt``          human-readable digest
"""

import csv
import itertools
import logging
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import SUMMARY_HEADER, CheckSummary, hessian_bounds_check
from .leaveoneout import track, write_loo_csv
from .problem import SamplingMask, generate_ground_truth, project_omega
from .solver import SolverConfig, default_step_size, solve, spectral_init, write_trajectory_csv

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepResult",
    "RunOutcome",
    "parse_config",
    "parse_config_text",
    "format_config",
    "planned_runs",
    "cells",
    "instance",
    "run_sweep",
    "emit_report",
    "SWEEP_HEADER",
    "OUTPUT_ENV",
]

log = logging.getLogger(__name__)

OUTPUT_ENV = "VANILLAMC_OUTPUT_DIR"
SWEEP_HEADER = ("n1", "n2", "r", "kappa", "p", "variant", "seeds", "success_rate", "mean_iters", "mean_final_err")
PAIRED_COLUMNS = ("vanilla_success_rate", "projected_success_rate")

_GRID_KEYS = ("n1", "n2", "r", "kappa", "p")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` maps each offending key to a message."""

    def __init__(self, errors):
        self.errors = dict(errors)
        msg = "; ".join(f"{k}: {v}" for k, v in self.errors.items())
        super().__init__(f"invalid config ({', '.join(self.errors)}): {msg}")


def _default_output_dir():
    return os.environ.get(OUTPUT_ENV, "vanillamc_out")


@dataclass(frozen=True)
class ExperimentConfig:
    n1: tuple
    n2: tuple
    r: tuple
    kappa: tuple
    p: tuple
    seeds: tuple
    solver: SolverConfig = SolverConfig(record_every=10)
    variant: str = "vanilla"
    success_threshold: float = 1e-4
    loo_enabled: bool = False
    loo_cap: int = 400
    loo_steps: int = 500
    hessian_check: bool = False
    hessian_samples: int = 200
    output_dir: str = field(default_factory=_default_output_dir)

    @property
    def variants(self):
        return ("vanilla", "projected") if self.variant == "both" else (self.variant,)


_SOLVER_KEYS = {
    "eta": "eta",
    "eta_source": "eta_source",
    "max_iters": "max_iters",
    "stop_tol": "stop_tol",
    "stop_mode": "stop_mode",
    "record_every": "record_every",
    "radius_slack": "radius_slack",
}
_TOP_KEYS = ("variant", "success_threshold", "loo_enabled", "loo_cap", "loo_steps",
             "hessian_check", "hessian_samples", "output_dir")
_KNOWN = set(_GRID_KEYS) | {"seeds"} | set(_SOLVER_KEYS) | set(_TOP_KEYS)


def _scalar(tok):
    tok = tok.strip()
    low = tok.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        return tok


def _value(raw):
    raw = raw.strip()
    m = re.fullmatch(r"(-?\d+)\s*\.\.\s*(-?\d+)", raw)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        return list(range(a, b + 1))
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        return [_scalar(t) for t in inner.split(",")] if inner else []
    if "," in raw:
        return [_scalar(t) for t in raw.split(",")]
    return _scalar(raw)


def _read_pairs(text):
    pairs, errors = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors[f"line {lineno}"] = f"expected 'key = value', got {line!r}"
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            errors[key] = "given more than once"
        pairs[key] = _value(raw)
    return pairs, errors


def _as_list(v):
    return list(v) if isinstance(v, list) else [v]


def parse_config_text(text):
    """Parse and validate config text; see the module docstring for the grammar."""
    pairs, errors = _read_pairs(text)
    for k in pairs:
        if k not in _KNOWN:
            errors[k] = "unknown key"

    grid = {}
    for k in _GRID_KEYS:
        if k not in pairs:
            errors[k] = "required"
            continue
        vals = _as_list(pairs[k])
        if not vals:
            errors[k] = "empty list"
            continue
        if k in ("n1", "n2", "r"):
            if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in vals):
                errors[k] = "must be positive integers"
                continue
        else:
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
                errors[k] = "must be numbers"
                continue
            vals = [float(v) for v in vals]
            if k == "p" and not all(0.0 < v <= 1.0 for v in vals):
                errors[k] = "each p must lie in (0, 1]"
                continue
            if k == "kappa" and not all(v >= 1.0 for v in vals):
                errors[k] = "each kappa must be >= 1"
                continue
        grid[k] = tuple(vals)
    if "r" in grid and "n1" in grid and "n2" in grid:
        if max(grid["r"]) > min(min(grid["n1"]), min(grid["n2"])):
            errors["r"] = "r exceeds min(n1, n2) for some cell"

    seeds = _as_list(pairs.get("seeds", []))
    if "seeds" not in pairs or not seeds:
        errors["seeds"] = "required, nonempty"
    elif not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        errors["seeds"] = "must be nonnegative integers"

    solver_kw = {}
    for key, attr in _SOLVER_KEYS.items():
        if key not in pairs:
            continue
        v = pairs[key]
        if key == "eta":
            if v == "auto":
                v = None
            elif not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                errors[key] = "must be a positive number or 'auto'"
                continue
            else:
                v = float(v)
        elif key in ("max_iters", "record_every"):
            if not isinstance(v, int) or isinstance(v, bool) or v < (1 if key == "record_every" else 0):
                errors[key] = "must be a nonnegative integer" if key == "max_iters" else "must be a positive integer"
                continue
        elif key in ("stop_tol", "radius_slack"):
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
                errors[key] = "must be a nonnegative number"
                continue
            v = float(v)
        elif key == "eta_source" and v not in ("init", "oracle"):
            errors[key] = "must be 'init' or 'oracle'"
            continue
        elif key == "stop_mode" and v not in ("truth", "plateau", "none"):
            errors[key] = "must be 'truth', 'plateau' or 'none'"
            continue
        solver_kw[attr] = v

    top = {}
    checks = {
        "variant": lambda v: v in ("vanilla", "projected", "both"),
        "success_threshold": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0,
        "loo_enabled": lambda v: isinstance(v, bool),
        "hessian_check": lambda v: isinstance(v, bool),
        "loo_cap": lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0,
        "loo_steps": lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0,
        "hessian_samples": lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1,
        "output_dir": lambda v: not isinstance(v, list),
    }
    for key in _TOP_KEYS:
        if key in pairs:
            if checks[key](pairs[key]):
                v = pairs[key]
                top[key] = float(v) if key == "success_threshold" else (str(v) if key == "output_dir" else v)
            else:
                errors[key] = "invalid value"

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**grid, seeds=tuple(seeds),
                            solver=SolverConfig(**{"record_every": 10, **solver_kw}), **top)


def parse_config(path):
    """Read and validate a config file."""
    return parse_config_text(Path(path).read_text())


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "auto"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg):
    """Serialise a config to text that :func:`parse_config_text` reads back unchanged."""
    lines = []
    for k in _GRID_KEYS:
        lines.append(f"{k} = [{', '.join(_fmt(v) for v in getattr(cfg, k))}]")
    lines.append(f"seeds = [{', '.join(str(s) for s in cfg.seeds)}]")
    for key, attr in _SOLVER_KEYS.items():
        lines.append(f"{key} = {_fmt(getattr(cfg.solver, attr))}")
    for key in _TOP_KEYS:
        lines.append(f"{key} = {_fmt(getattr(cfg, key))}")
    return "\n".join(lines) + "\n"


def cells(cfg):
    """Grid cells ``(n1, n2, r, kappa, p)`` in deterministic order."""
    return list(itertools.product(cfg.n1, cfg.n2, cfg.r, cfg.kappa, cfg.p))


def planned_runs(cfg):
    return len(cells(cfg)) * len(cfg.seeds) * len(cfg.variants)


def _derive(*key):
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def instance(n1, n2, r, kappa, p, seed):
    """Planted matrix and mask of one grid run (see the module docstring)."""
    gt = generate_ground_truth(n1, n2, r, kappa, _derive(seed, n1, n2, r, round(kappa * 1_000_000)))
    mseed = _derive(seed, n1, n2, 7)
    uniforms = np.random.Generator(np.random.PCG64(mseed)).random((n1, n2))
    return gt, SamplingMask(uniforms < p, float(p), mseed)


@dataclass(frozen=True)
class RunOutcome:
    seed: int
    variant: str
    final_err: float
    iterations: int
    iters_to_threshold: int | None
    success: bool
    error: str | None = None
    records: tuple = ()


@dataclass(frozen=True)
class SweepResult:
    """Aggregate over seeds of one ``(cell, variant)``."""

    n1: int
    n2: int
    r: int
    kappa: float
    p: float
    variant: str
    seeds: tuple
    final_errors: tuple
    iterations: tuple
    failures: dict
    success_rate: float
    mean_iters: float
    mean_final_err: float
    cell_index: int = 0


def _one_run(cell_index, cell, seed, variant, cfg):
    n1, n2, r, kappa, p = cell
    gt, mask = instance(n1, n2, r, kappa, p, seed)
    try:
        with np.errstate(all="ignore"):
            res = solve(gt, mask, cfg.solver, variant)
    except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("run failed cell=%d seed=%d variant=%s: %s", cell_index, seed, variant, exc)
        return RunOutcome(seed, variant, math.nan, 0, None, False, f"{type(exc).__name__}: {exc}")
    hit = next((rec.iter for rec in res.records if rec.rel_err <= cfg.success_threshold), None)
    ok = bool(res.rel_err <= cfg.success_threshold)
    return RunOutcome(seed, variant, res.rel_err, res.iterations, hit, ok, None, tuple(res.records))


def _aggregate(cell_index, cell, variant, outcomes):
    n1, n2, r, kappa, p = cell
    errs = tuple(o.final_err for o in outcomes)
    iters = tuple(o.iterations for o in outcomes)
    succ = [o for o in outcomes if o.success]
    hits = [o.iters_to_threshold for o in succ if o.iters_to_threshold is not None]
    finite = [e for e in errs if math.isfinite(e)]
    return SweepResult(
        n1, n2, r, kappa, p, variant,
        tuple(o.seed for o in outcomes), errs, iters,
        {o.seed: o.error for o in outcomes if o.error is not None},
        len(succ) / len(outcomes),
        float(np.mean(hits)) if hits else math.nan,
        float(np.mean(finite)) if finite else math.nan,
        cell_index,
    )


def _traj_name(cell_index, seed, variant):
    return f"cell{cell_index:03d}_seed{seed}_{variant}.csv"


def run_sweep(cfg, threads=1, output_dir=None):
    """Execute every ``(cell, seed, variant)`` run.

    A failing run (divergence, numerical error) is recorded as an
    unsuccessful seed and never aborts the sweep. If ``output_dir`` is
    given, each trajectory CSV is written as soon as its run completes.
    Returns the :class:`SweepResult` list ordered by cell, then variant.
    """
    grid = cells(cfg)
    jobs = [(ci, c, s, v) for ci, c in enumerate(grid) for v in cfg.variants for s in cfg.seeds]
    tdir = None
    if output_dir is not None:
        tdir = Path(output_dir) / "trajectories"
        tdir.mkdir(parents=True, exist_ok=True)

    def work(job):
        ci, c, s, v = job
        out = _one_run(ci, c, s, v, cfg)
        if tdir is not None and out.error is None:
            write_trajectory_csv(out.records, tdir / _traj_name(ci, s, v))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            outcomes = list(ex.map(work, jobs))
    else:
        outcomes = [work(j) for j in jobs]

    by_key = {}
    for (ci, c, s, v), o in zip(jobs, outcomes):
        by_key.setdefault((ci, v), []).append(o)
    return [_aggregate(ci, grid[ci], v, by_key[(ci, v)]) for ci in range(len(grid)) for v in cfg.variants]


def _num(v):
    return "nan" if isinstance(v, float) and math.isnan(v) else repr(v) if isinstance(v, float) else str(v)


def sweep_rows(results):
    """Header and rows of ``sweep.csv``."""
    grouped = {}
    for res in results:
        grouped.setdefault(res.cell_index, {})[res.variant] = res
    paired = any(len(g) > 1 for g in grouped.values())
    header = list(SWEEP_HEADER) + (list(PAIRED_COLUMNS) if paired else [])
    rows = []
    for ci in sorted(grouped):
        g = grouped[ci]
        lead = g.get("vanilla") or next(iter(g.values()))
        variant = "both" if len(g) > 1 else lead.variant
        row = [lead.n1, lead.n2, lead.r, _num(lead.kappa), _num(lead.p), variant, len(lead.seeds),
               _num(lead.success_rate), _num(lead.mean_iters), _num(lead.mean_final_err)]
        if paired:
            row += [_num(g["vanilla"].success_rate) if "vanilla" in g else "nan",
                    _num(g["projected"].success_rate) if "projected" in g else "nan"]
        rows.append(row)
    return header, rows


def emit_report(results, output_dir, diagnostics=None, loo_traces=None):
    """Write ``sweep.csv``, ``summary.txt`` and any diagnostics under ``output_dir``.

    ``diagnostics`` is a list of :class:`CheckSummary`; ``loo_traces`` maps a
    file stem to a list of leave-one-out diagnostics. Returns written paths.
    """
    if not results:
        raise ValueError("no results to report")
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        header, rows = sweep_rows(results)
        path = out / "sweep.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        written.append(path)

        if diagnostics or loo_traces:
            ddir = out / "diagnostics"
            ddir.mkdir(exist_ok=True)
            if diagnostics:
                path = ddir / "checks.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(SUMMARY_HEADER)
                    for d in diagnostics:
                        w.writerow(d.csv_row())
                written.append(path)
            for stem, trace in sorted((loo_traces or {}).items()):
                path = ddir / f"{stem}.csv"
                write_loo_csv(trace, path)
                written.append(path)

        path = out / "summary.txt"
        lines = [f"{len(results)} (cell, variant) aggregates"]
        for res in results:
            lines.append(
                f"cell {res.cell_index:3d}  n1={res.n1} n2={res.n2} r={res.r} kappa={res.kappa:g} p={res.p:g} "
                f"{res.variant:9s} success={res.success_rate:.2f} mean_iters={_num(res.mean_iters)} "
                f"mean_final_err={_num(res.mean_final_err)} failures={len(res.failures)}"
            )
            for seed, err in sorted(res.failures.items()):
                lines.append(f"    seed {seed}: {err}")
        for d in diagnostics or ():
            lines.append(f"check {d.name}: statistic={d.statistic!r} {'pass' if d.passed else 'fail'}")
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    except OSError as exc:
        raise OSError(f"could not write report under {out}: {exc}") from exc
    return written


def cell_diagnostics(cfg):
    """Leave-one-out traces and Hessian checks requested by ``cfg``, first seed of each cell."""
    traces, checks = {}, []
    seed = cfg.seeds[0]
    for ci, cell in enumerate(cells(cfg)):
        n1, n2, r, kappa, p = cell
        gt, mask = instance(*cell, seed)
        if cfg.loo_enabled and n1 + n2 <= cfg.loo_cap:
            if cfg.solver.eta is not None:
                eta = cfg.solver.eta
            else:
                _, s0 = spectral_init(project_omega(gt.M, mask), mask, r, return_singulars=True)
                eta = default_step_size(s0[0], s0[-1])[1]
            traces[f"loo_cell{ci:03d}_seed{seed}"] = track(gt, mask, eta, cfg.loo_steps,
                                                           cfg.solver.record_every, cap=cfg.loo_cap)
        if cfg.hessian_check:
            frac = hessian_bounds_check(gt, mask, cfg.hessian_samples, 1.0, seed)
            params = {"cell": ci, "n1": n1, "n2": n2, "r": r, "kappa": kappa, "p": p,
                      "samples": cfg.hessian_samples}
            checks.append(CheckSummary("hessian_bounds", params, frac, frac >= 0.95))
    return traces, checks


def execute(cfg, threads=1, output_dir=None):
    """Sweep plus requested diagnostics, written under ``output_dir`` (default ``cfg.output_dir``)."""
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    results = run_sweep(cfg, threads, out)
    traces, checks = cell_diagnostics(cfg)
    emit_report(results, out, checks, traces)
    return results
