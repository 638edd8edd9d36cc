"""Numerical realization of the limiting regularized value functions.

For an instance with data (C, A, b), the regularized pair at (eps, eta)
has a common optimal value v(eps, eta). This module traces

    va(theta)  = lim_{t -> 0} v(t cos theta, t sin theta)
    vtilde(b)  = lim_{t -> 0} v(t, t b),    vtilde(inf) = lim v(0, t)
    vbar(a)    = lim_{t -> 0} v(t a, t),    vbar(inf)   = lim v(t, 0)

by descending a geometric t-schedule and extrapolating the converged
prefix with a power-law fit. Boundary rays (eps = 0 or eta = 0) are
solved directly and labeled; they provide the endpoint estimates vp_hat
and vd_hat. The extrapolation error estimate is heuristic: the limits
exist, but no convergence rate is guaranteed in general.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    InsufficientData,
    TooFewConvergedPoints,
    ValueDisagreement,
)
from .model import SdpInstance, perturb
from .solver import SolveOptions, Status, solve

# A (theta, t) cell is usable for extrapolation when its residuals are at
# this relative level and primal/dual values agree to _CELL_VALUE_AGREE.
# Near weak feasibility the solver can stall just short of its 1e-9 target
# while the returned values are still accurate to ~1e-5; insisting on
# status Optimal would discard them for no gain at the 1e-2 tolerances of
# the traced limits.
_CELL_RES_TOL = 1e-6
_CELL_VALUE_AGREE = 5e-5

# Boundary calls return a labeled midpoint unless the values disagree by
# more than this (relative); then the cell is a genuine failure.
_BOUNDARY_DISAGREE_CAP = 2e-2

_POWER_WINDOW = 5
_POWER_RANGE = (0.05, 5.0)


@dataclass(frozen=True)
class TSchedule:
    """Geometric descent t0 * ratio^k for k = 0..steps."""

    t0: float = 1e-1
    ratio: float = 0.5
    steps: int = 14

    def __post_init__(self):
        if self.t0 <= 0 or not 0.0 < self.ratio < 1.0 or self.steps < 1:
            raise ValueError("need t0 > 0, 0 < ratio < 1, steps >= 1")

    def values(self):
        return [self.t0 * self.ratio ** k for k in range(self.steps + 1)]


@dataclass(frozen=True)
class CellSample:
    theta: float
    t: float
    eps: float
    eta: float
    v: float
    primal_value: float
    dual_value: float
    gap: float
    primal_res: float
    dual_res: float
    status: str
    boundary: bool
    accepted: bool


@dataclass(eq=False)
class GapProfile:
    """Traced samples plus extrapolated limits along each direction."""

    theta_grid: np.ndarray
    samples: list
    va_hat: np.ndarray
    va_err: np.ndarray
    va_model: list
    vp_hat: float
    vp_err: float
    vd_hat: float
    vd_err: float
    alpha_t: float = float("nan")
    alpha_grid: np.ndarray = field(default_factory=lambda: np.array([]))
    alpha_values: np.ndarray = field(default_factory=lambda: np.array([]))

    @property
    def gap_hat(self):
        return self.vp_hat - self.vd_hat

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta", "t", "eps", "eta", "v", "primal_res",
                             "dual_res", "gap", "status"])
            for s in self.samples:
                writer.writerow([repr(s.theta), repr(s.t), repr(s.eps),
                                 repr(s.eta), repr(s.v), repr(s.primal_res),
                                 repr(s.dual_res), repr(s.gap), s.status])

    def to_json_dict(self):
        return {
            "theta_grid": [float(t) for t in self.theta_grid],
            "va_hat": [float(v) for v in self.va_hat],
            "err": [float(e) for e in self.va_err],
            "model": list(self.va_model),
            "vp_hat": float(self.vp_hat),
            "vd_hat": float(self.vd_hat),
            "vp_err": float(self.vp_err),
            "vd_err": float(self.vd_err),
            "gap_hat": float(self.gap_hat),
            "alpha_t": float(self.alpha_t),
            "alpha_grid": [float(a) for a in self.alpha_grid],
            "alpha_values": [float(v) for v in self.alpha_values],
        }


def default_theta_grid(points=33):
    """Chebyshev-Lobatto points on [0, pi/2], endpoints exact.

    Clusters near the ends, which resolves both the kink of piecewise
    limiting profiles and the endpoint-continuity comparison.
    """
    if points < 2:
        raise ValueError("need at least two grid points")
    j = np.arange(points)
    grid = (np.pi / 4.0) * (1.0 - np.cos(np.pi * j / (points - 1)))
    grid[0] = 0.0
    grid[-1] = np.pi / 2.0
    return grid


def _ray_direction(theta):
    ce, se = math.cos(theta), math.sin(theta)
    if abs(ce) < 1e-14:
        ce = 0.0
    if abs(se) < 1e-14:
        se = 0.0
    return ce, se


def value_sample(inst, eps, eta, opts=None, theta=float("nan"),
                 t=float("nan")) -> CellSample:
    """Solve one perturbed pair and classify the outcome."""
    if opts is None:
        opts = SolveOptions()
    pair = perturb(inst, eps, eta)
    boundary = eps == 0.0 or eta == 0.0
    res = solve(pair.instance)
    pv, dv = res.primal_value, res.dual_value
    scale = 1.0 + abs(pv) + abs(dv)
    agree = abs(pv - dv) / scale
    rel_p = res.primal_res / (1.0 + np.abs(pair.instance.b).max())
    rel_d = res.dual_res / (1.0 + pair.instance.C.norm())
    accepted = (res.status == Status.OPTIMAL
                or (rel_p <= _CELL_RES_TOL and rel_d <= _CELL_RES_TOL
                    and agree <= _CELL_VALUE_AGREE))
    return CellSample(
        theta=theta, t=t, eps=float(eps), eta=float(eta),
        v=0.5 * (pv + dv), primal_value=pv, dual_value=dv, gap=res.gap,
        primal_res=res.primal_res, dual_res=res.dual_res,
        status=res.status.value, boundary=boundary, accepted=accepted)


def value_at(inst, eps, eta, opts=None) -> float:
    """Common value of the regularized pair at (eps, eta).

    Interior calls must agree to solver tolerance. Boundary calls
    (eps = 0 or eta = 0) are best-effort: the midpoint is returned as a
    labeled estimate unless primal and dual values disagree badly.
    """
    if opts is None:
        opts = SolveOptions()
    sample = value_sample(inst, eps, eta, opts)
    scale = 1.0 + abs(sample.primal_value) + abs(sample.dual_value)
    agree = abs(sample.primal_value - sample.dual_value) / scale
    if sample.boundary:
        if agree > _BOUNDARY_DISAGREE_CAP:
            raise ValueDisagreement(sample.primal_value, sample.dual_value)
        return sample.v
    if not sample.accepted or agree > max(10.0 * opts.tol_gap,
                                          _CELL_VALUE_AGREE):
        raise ValueDisagreement(sample.primal_value, sample.dual_value)
    return sample.v


def extrapolate(t_values, v_values):
    """Estimate lim v(t) as t -> 0 from a decreasing-t sample sequence.

    Fits v(t) ~ v_inf + c * t^p over the last few points, with p from a
    log-difference regression. Returns (limit, error estimate, model
    tag). Falls back to last-value plus last-difference continuation
    when the power fit is ill-conditioned.
    """
    t = np.asarray(t_values, dtype=float)
    v = np.asarray(v_values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise InsufficientData("t and v must be 1-d arrays of equal length")
    if t.shape[0] < 3:
        raise InsufficientData(f"need >= 3 samples, got {t.shape[0]}")
    if np.any(np.diff(t) >= 0):
        raise InsufficientData("t must be strictly decreasing")

    vscale = 1.0 + abs(float(v[-1]))
    if np.abs(v - v[-1]).max() <= 1e-14 * vscale:
        return float(v[-1]), 0.0, "constant"

    k = min(_POWER_WINDOW, t.shape[0])
    tw, vw = t[-k:], v[-k:]
    d = vw[:-1] - vw[1:]
    if np.any(np.abs(d) <= 1e-15 * vscale) or np.abs(np.sign(d).sum()) != k - 1:
        return _fallback(v)

    slope, intercept = np.polyfit(np.log(tw[:-1]), np.log(np.abs(d)), 1)
    p = float(slope)
    if not (_POWER_RANGE[0] <= p <= _POWER_RANGE[1]):
        return _fallback(v)

    basis = np.column_stack([np.ones_like(tw), tw ** p])
    coef, *_ = np.linalg.lstsq(basis, vw, rcond=None)
    v_inf, c = float(coef[0]), float(coef[1])
    resid = np.abs(basis @ coef - vw)
    corrected = vw - c * tw ** p
    err = max(float(resid.max()), float(abs(corrected[-1] - corrected[-2])))
    return v_inf, err, f"power p={p:.3g}"


def _fallback(v):
    d = float(v[-1] - v[-2])
    return float(v[-1]) + d, abs(d), "fallback"


def _descend_ray(inst, eps_of_t, eta_of_t, sched, opts, theta):
    """Solve down the schedule; stop at the first unusable cell."""
    cells = []
    for t in sched.values():
        try:
            cell = value_sample(inst, eps_of_t(t), eta_of_t(t), opts,
                                theta=theta, t=t)
        except Exception:
            cell = CellSample(theta=theta, t=t, eps=eps_of_t(t),
                              eta=eta_of_t(t), v=float("nan"),
                              primal_value=float("nan"),
                              dual_value=float("nan"), gap=float("nan"),
                              primal_res=float("nan"),
                              dual_res=float("nan"),
                              status="SolveError", boundary=False,
                              accepted=False)
        cells.append(cell)
        if not cell.accepted:
            break
    return cells


def _ray_limit(cells, theta):
    good = [c for c in cells if c.accepted]
    if len(good) < 3:
        raise TooFewConvergedPoints(theta, len(good))
    t = [c.t for c in good]
    v = [c.v for c in good]
    limit, err, tag = extrapolate(t, v)
    cell_noise = max(abs(c.primal_value - c.dual_value) for c in good)
    return limit, max(err, cell_noise), tag


def trace_theta(inst, theta_grid=None, sched=None, opts=None, jobs=1,
                alpha_grid=None) -> GapProfile:
    """Trace va over a theta grid, plus both boundary rays.

    Every (theta, t) cell is recorded with its status; failed cells
    terminate the descent for that theta and extrapolation uses the
    converged prefix. An auxiliary sweep of v(t*alpha, t) at a fixed t
    is attached for the structural checks.
    """
    if theta_grid is None:
        theta_grid = default_theta_grid()
    theta_grid = np.asarray(theta_grid, dtype=float)
    if sched is None:
        sched = TSchedule()
    if opts is None:
        opts = SolveOptions()
    if alpha_grid is None:
        alpha_grid = np.array([0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0,
                               4.0, 8.0])
    alpha_grid = np.asarray(alpha_grid, dtype=float)

    def run_theta(theta):
        ce, se = _ray_direction(theta)
        return _descend_ray(inst, lambda t: t * ce, lambda t: t * se,
                            sched, opts, theta)

    work = list(theta_grid)
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            per_theta = list(pool.map(run_theta, work))
    else:
        per_theta = [run_theta(th) for th in work]

    # Boundary rays give the endpoint estimates.
    ray_p = _descend_ray(inst, lambda t: t, lambda t: 0.0, sched, opts, 0.0)
    ray_d = _descend_ray(inst, lambda t: 0.0, lambda t: t, sched, opts,
                         float(np.pi / 2))
    vp_hat, vp_err, _ = _ray_limit(ray_p, 0.0)
    vd_hat, vd_err, _ = _ray_limit(ray_d, float(np.pi / 2))

    samples = []
    va_hat = np.empty(theta_grid.shape[0])
    va_err = np.empty(theta_grid.shape[0])
    va_model = []
    for idx, (theta, cells) in enumerate(zip(theta_grid, per_theta)):
        samples.extend(cells)
        limit, err, tag = _ray_limit(cells, float(theta))
        va_hat[idx] = limit
        va_err[idx] = err
        va_model.append(tag)

    alpha_t = sched.values()[min(6, sched.steps)]
    alpha_cells = [value_sample(inst, alpha_t * a, alpha_t, opts,
                                theta=float("nan"), t=alpha_t)
                   for a in alpha_grid]
    samples.extend(alpha_cells)
    alpha_values = np.array([c.v if c.accepted else float("nan")
                             for c in alpha_cells])

    return GapProfile(
        theta_grid=theta_grid, samples=samples, va_hat=va_hat,
        va_err=va_err, va_model=va_model, vp_hat=vp_hat, vp_err=vp_err,
        vd_hat=vd_hat, vd_err=vd_err, alpha_t=alpha_t,
        alpha_grid=alpha_grid, alpha_values=alpha_values)


def tilde_v_estimate(inst, beta, sched=None, opts=None):
    """(limit, error) of v(t, t*beta); beta = inf uses the (0, t) ray."""
    if sched is None:
        sched = TSchedule()
    if opts is None:
        opts = SolveOptions()
    if beta is None or beta < 0:
        raise DomainError(f"beta must be in [0, inf], got {beta!r}")
    if math.isinf(beta):
        cells = _descend_ray(inst, lambda t: 0.0, lambda t: t, sched, opts,
                             float("inf"))
    else:
        cells = _descend_ray(inst, lambda t: t, lambda t: t * beta, sched,
                             opts, float(beta))
    limit, err, _ = _ray_limit(cells, beta)
    return limit, err


def bar_v_estimate(inst, alpha, sched=None, opts=None):
    """(limit, error) of v(t*alpha, t); alpha = inf uses the (t, 0) ray."""
    if sched is None:
        sched = TSchedule()
    if opts is None:
        opts = SolveOptions()
    if alpha is None or alpha < 0:
        raise DomainError(f"alpha must be in [0, inf], got {alpha!r}")
    if math.isinf(alpha):
        cells = _descend_ray(inst, lambda t: t, lambda t: 0.0, sched, opts,
                             float("inf"))
    else:
        cells = _descend_ray(inst, lambda t: t * alpha, lambda t: t, sched,
                             opts, float(alpha))
    limit, err, _ = _ray_limit(cells, alpha)
    return limit, err


def tilde_v(inst, beta, sched=None, opts=None) -> float:
    return tilde_v_estimate(inst, beta, sched, opts)[0]


def bar_v(inst, alpha, sched=None, opts=None) -> float:
    return bar_v_estimate(inst, alpha, sched, opts)[0]


@dataclass(eq=False)
class StructureReport:
    """Structural diagnostics of a traced profile."""

    monotonicity_ok: bool
    monotonicity_violations: list
    discontinuity_score_at_0: float
    discontinuity_score_at_pi2: float
    alpha_monotone_ok: bool
    alpha_concave_ok: bool
    alpha_violations: list
    range_coverage: float
    sandwich_ok: bool

    def to_json_dict(self):
        return {
            "monotonicity_ok": self.monotonicity_ok,
            "monotonicity_violations": self.monotonicity_violations,
            "discontinuity_scores": {
                "0": self.discontinuity_score_at_0,
                "pi/2": self.discontinuity_score_at_pi2,
            },
            "alpha_monotone_ok": self.alpha_monotone_ok,
            "alpha_concave_ok": self.alpha_concave_ok,
            "alpha_violations": self.alpha_violations,
            "range_coverage": self.range_coverage,
            "sandwich_ok": self.sandwich_ok,
        }


def structure_report(profile: GapProfile, sandwich_tol=1e-2) -> StructureReport:
    """Check the structural claims a traced profile should satisfy.

    (a) va_hat decreasing along theta beyond error bars, (b) endpoint
    discontinuity scores against the boundary-ray limits, (c) per-fixed-t
    monotonicity and concavity of alpha -> v(t*alpha, t) by divided
    differences, (d) coverage of the [vd_hat, vp_hat] range.
    """
    th = profile.theta_grid
    va = profile.va_hat
    err = profile.va_err

    violations = []
    for i in range(len(th) - 1):
        excess = va[i + 1] - va[i] - (err[i] + err[i + 1])
        if excess > 0:
            violations.append({"theta_low": float(th[i]),
                               "theta_high": float(th[i + 1]),
                               "excess": float(excess)})

    interior = [i for i, t in enumerate(th) if 0.0 < t < np.pi / 2]
    score0 = abs(va[interior[0]] - profile.vp_hat) if interior else 0.0
    score2 = abs(va[interior[-1]] - profile.vd_hat) if interior else 0.0

    a = profile.alpha_grid
    w = profile.alpha_values
    alpha_viol = []
    mono_ok = True
    conc_ok = True
    if a.size >= 3 and np.all(np.isfinite(w)):
        slack = 1e-7 * (1.0 + np.abs(w).max())
        first = np.diff(w) / np.diff(a)
        if np.any(np.diff(w) < -slack):
            mono_ok = False
            alpha_viol.append({"kind": "monotone",
                               "max_drop": float(-np.diff(w).min())})
        second = np.diff(first) / (a[2:] - a[:-2])
        if np.any(second > 1e-6 * (1.0 + np.abs(w).max())):
            conc_ok = False
            alpha_viol.append({"kind": "concave",
                               "max_curvature": float(second.max())})

    gap = profile.vp_hat - profile.vd_hat
    finite = va[np.isfinite(va)]
    if gap > 1e-9 and finite.size:
        coverage = float((finite.max() - finite.min()) / gap)
    else:
        coverage = 1.0

    sandwich_ok = bool(np.all(
        (va >= profile.vd_hat - sandwich_tol)
        & (va <= profile.vp_hat + sandwich_tol)))

    return StructureReport(
        monotonicity_ok=not violations,
        monotonicity_violations=violations,
        discontinuity_score_at_0=float(score0),
        discontinuity_score_at_pi2=float(score2),
        alpha_monotone_ok=mono_ok,
        alpha_concave_ok=conc_ok,
        alpha_violations=alpha_viol,
        range_coverage=coverage,
        sandwich_ok=sandwich_ok,
    )
