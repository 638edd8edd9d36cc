"""Infeasible-start primal-dual path-following solver for dense SDPs.

Nesterov-Todd scaling with a Mehrotra predictor-corrector step, solved
through the svec-space normal equations. Designed for desk-scale dense
instances, including ones driven deliberately close to weak feasibility:
the Newton systems get a Tikhonov fallback, and callers are expected to
handle NumericalFailure near the boundary of the solvable region.

The solver is deterministic: fixed starting point, no randomness, and a
fixed sequence of dense LAPACK calls, so repeated runs are bit-identical.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SolverError, ValueDisagreement
from .linalg import SymMatrix, smat_dense, svec_dense
from .model import PerturbedPair, SdpInstance

# Iterate-norm blowup factor that triggers the divergence heuristics.
_DIVERGENCE_FACTOR = 1e13
# Objective scale that classifies divergence as unbounded/infeasible.
_CERTIFICATE_SCALE = 1e8
# Consecutive collapsed steps tolerated before declaring failure.
_MAX_STALLS = 3


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITERS = "MaxIters"
    NUMERICAL_FAILURE = "NumericalFailure"
    UNBOUNDED = "Unbounded"
    INFEASIBLE_DETECTED = "InfeasibleDetected"


@dataclass(frozen=True)
class SolveOptions:
    tol_gap: float = 1e-9
    tol_feas: float = 1e-9
    max_iters: int = 200
    step_fraction: float = 0.98

    def __post_init__(self):
        if min(self.tol_gap, self.tol_feas) <= 0 or self.max_iters <= 0:
            raise ValueError("tolerances and max_iters must be positive")
        if not 0.0 < self.step_fraction < 1.0:
            raise ValueError("step_fraction must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class SolveResult:
    X: SymMatrix
    y: np.ndarray
    S: SymMatrix
    primal_value: float
    dual_value: float
    gap: float
    primal_res: float
    dual_res: float
    status: Status
    iters: int

    @property
    def ok(self):
        return self.status == Status.OPTIMAL


def _sym(mat):
    return 0.5 * (mat + mat.T)


def _psd_sqrt_pair(mat, floor=0.0):
    """Return (M^{1/2}, M^{-1/2}) for a symmetric PD matrix."""
    lam, q = np.linalg.eigh(mat)
    if lam[0] <= floor:
        raise np.linalg.LinAlgError("matrix not positive definite")
    root = np.sqrt(lam)
    return (q * root) @ q.T, (q / root) @ q.T


def _nt_scaling(X, S):
    """NT scaling point W with W S W = X, plus R = W^{1/2} and R^{-1}."""
    xh, _ = _psd_sqrt_pair(X)
    t = _sym(xh @ S @ xh)
    _, tih = _psd_sqrt_pair(t)
    w = _sym(xh @ tih @ xh)
    r, rinv = _psd_sqrt_pair(w)
    return w, r, rinv


def _max_step(P, D, chol):
    """Largest alpha with P + alpha D psd, via eigs of L^{-1} D L^{-T}."""
    half = scipy.linalg.solve_triangular(chol, D, lower=True)
    k = scipy.linalg.solve_triangular(chol, half.T, lower=True)
    lam_min = np.linalg.eigvalsh(_sym(k))[0]
    if lam_min >= -1e-16:
        return np.inf
    return -1.0 / lam_min


def _factor_with_fallback(m_mat):
    """Cholesky of the normal matrix, with an escalating Tikhonov shift."""
    scale = 1.0 + np.linalg.norm(m_mat)
    shift = 0.0
    for _ in range(8):
        try:
            cho = scipy.linalg.cho_factor(
                m_mat + shift * np.eye(m_mat.shape[0]), lower=True)
            return lambda rhs: scipy.linalg.cho_solve(cho, rhs)
        except np.linalg.LinAlgError:
            shift = 1e-14 * scale if shift == 0.0 else shift * 100.0
            if shift > 1e-6 * scale:
                break
    raise np.linalg.LinAlgError("normal matrix factorization failed")


def solve(inst: SdpInstance, opts: SolveOptions = None, log=None) -> SolveResult:
    """Solve the primal-dual pair carried by ``inst``.

    Intended for instances where both sides have interior points; calls
    at the boundary are permitted best-effort and typically end in
    MaxIters or NumericalFailure with a still-useful iterate.
    """
    if opts is None:
        opts = SolveOptions()
    n, m = inst.n, inst.m
    amat = inst.amat
    cvec = np.array(inst.C.packed)
    bvec = inst.b
    a_dense = inst.A_dense
    cd = inst.C_dense

    rho = 1.0 + inst.C.norm() + float(np.linalg.norm(bvec))
    X = rho * np.eye(n)
    S = rho * np.eye(n)
    y = np.zeros(m)

    b_scale = 1.0 + float(np.abs(bvec).max())
    c_scale = 1.0 + inst.C.norm()
    obj_scale = 1.0 + inst.C.norm() + float(np.linalg.norm(bvec))

    status = Status.MAX_ITERS
    iters = 0
    stalls = 0
    eye = np.eye(n)

    def operator_t(yy):
        out = np.zeros((n, n))
        for yi, ai in zip(yy, a_dense):
            out += yi * ai
        return out

    for it in range(opts.max_iters):
        iters = it
        x = svec_dense(X)
        s = svec_dense(S)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s))
                and np.all(np.isfinite(y))):
            status = Status.NUMERICAL_FAILURE
            break

        rp = bvec - amat @ x
        Rd = cd - operator_t(y) - S
        gap = float(x @ s)
        pv = float(cvec @ x)
        dv = float(bvec @ y)
        rel_gap = gap / (1.0 + abs(pv) + abs(dv))
        rel_p = float(np.abs(rp).max()) / b_scale
        rel_d = float(np.linalg.norm(Rd)) / c_scale

        if log is not None:
            log(f"iter {it:3d}  mu {gap / n:9.3e}  gap {rel_gap:9.3e}  "
                f"pres {rel_p:9.3e}  dres {rel_d:9.3e}  pv {pv: .9e}  "
                f"dv {dv: .9e}")

        if rel_gap <= opts.tol_gap and rel_p <= opts.tol_feas \
                and rel_d <= opts.tol_feas:
            status = Status.OPTIMAL
            break

        norms = max(np.linalg.norm(X), np.linalg.norm(S),
                    np.abs(y).max() if m else 0.0)
        if norms > _DIVERGENCE_FACTOR * rho:
            if dv > _CERTIFICATE_SCALE * obj_scale and rel_d <= 1e-6:
                status = Status.INFEASIBLE_DETECTED
            elif pv < -_CERTIFICATE_SCALE * obj_scale and rel_p <= 1e-6:
                status = Status.UNBOUNDED
            else:
                status = Status.NUMERICAL_FAILURE
            break

        try:
            w, r, rinv = _nt_scaling(X, S)
            v_mat = _sym(r @ S @ r)
            lam_v, q_v = np.linalg.eigh(v_mat)
            if lam_v[0] <= 0:
                raise np.linalg.LinAlgError("scaled point not PD")
            # Normal matrix M_ij = <A_i, W A_j W>.
            aw = np.vstack([svec_dense(_sym(w @ ai @ w)) for ai in a_dense])
            m_mat = _sym(amat @ aw.T)
            solve_m = _factor_with_fallback(m_mat)
            chol_x = np.linalg.cholesky(X)
            chol_s = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            status = Status.NUMERICAL_FAILURE
            break

        rd_vec = svec_dense(Rd)
        e_rd = svec_dense(_sym(w @ Rd @ w))

        def directions(h_mat):
            rhs = rp - amat @ svec_dense(h_mat) + amat @ e_rd
            dy = solve_m(rhs)
            ds = Rd - operator_t(dy)
            dx = h_mat - _sym(w @ ds @ w)
            return dx, dy, ds

        # Predictor (affine scaling).
        dx_a, dy_a, ds_a = directions(-X)
        ap = min(1.0, _max_step(X, dx_a, chol_x))
        ad = min(1.0, _max_step(S, ds_a, chol_s))
        mu = gap / n
        mu_aff = max(0.0, float(np.tensordot(X + ap * dx_a, S + ad * ds_a))) / n
        sigma = min(1.0, max((mu_aff / mu) ** 3 if mu > 0 else 0.0, 1e-12))

        # Corrector in the scaled space; L_V is the Lyapunov operator of V.
        dxb = rinv @ dx_a @ rinv
        dsb = r @ ds_a @ r
        rhs_v = sigma * mu * eye - v_mat @ v_mat - _sym(dxb @ dsb)
        u = q_v.T @ rhs_v @ q_v
        u = 2.0 * u / np.add.outer(lam_v, lam_v)
        h_mat = r @ (q_v @ u @ q_v.T) @ r

        dx, dy, ds = directions(_sym(h_mat))
        tau = opts.step_fraction
        ap = min(1.0, tau * _max_step(X, dx, chol_x))
        ad = min(1.0, tau * _max_step(S, ds, chol_s))
        if max(ap, ad) < 1e-13:
            stalls += 1
            if stalls >= _MAX_STALLS:
                status = Status.NUMERICAL_FAILURE
                break
        else:
            stalls = 0

        X = _sym(X + ap * dx)
        S = _sym(S + ad * ds)
        y = y + ad * dy
        iters = it + 1

    x = svec_dense(X)
    s = svec_dense(S)
    pv = float(cvec @ x)
    dv = float(bvec @ y)
    rp = bvec - amat @ x
    Rd = cd - operator_t(y) - S
    return SolveResult(
        X=SymMatrix(n, x),
        y=np.array(y),
        S=SymMatrix(n, s),
        primal_value=pv,
        dual_value=dv,
        gap=float(x @ s),
        primal_res=float(np.abs(rp).max()) if m else 0.0,
        dual_res=float(np.linalg.norm(Rd)),
        status=status,
        iters=iters,
    )


def solve_pair(pair: PerturbedPair, opts: SolveOptions = None, log=None):
    """Solve a regularized pair and return (result, common value).

    The common value is the midpoint of the primal and dual values when
    they agree to 10x the gap tolerance (relative); otherwise the solve
    is flagged as a disagreement, which signals boundary-of-domain
    numerical trouble.
    """
    if opts is None:
        opts = SolveOptions()
    res = solve(pair.instance, opts, log=log)
    scale = 1.0 + abs(res.primal_value) + abs(res.dual_value)
    if abs(res.primal_value - res.dual_value) > 10.0 * opts.tol_gap * scale:
        raise ValueDisagreement(res.primal_value, res.dual_value, res)
    return res, 0.5 * (res.primal_value + res.dual_value)


def solve_value(inst: SdpInstance, opts: SolveOptions = None) -> float:
    """Common optimal value of a strongly feasible instance."""
    if opts is None:
        opts = SolveOptions()
    res = solve(inst, opts)
    scale = 1.0 + abs(res.primal_value) + abs(res.dual_value)
    if abs(res.primal_value - res.dual_value) > 10.0 * opts.tol_gap * scale:
        raise ValueDisagreement(res.primal_value, res.dual_value, res)
    return 0.5 * (res.primal_value + res.dual_value)
