"""SDP data model and the primal-dual regularization machinery.

A standard-form pair is carried by a single :class:`SdpInstance`:

    min  C . X   s.t.  A_i . X = b_i,  X psd        (primal)
    max  b^T y   s.t.  C - sum_i A_i y_i psd        (dual)

``perturb`` builds the regularized pair in which the cost matrix gains
``eps * I`` and each right-hand side gains ``eta * trace(A_i)``; both
problems of the pair share the perturbed data. ``dualize`` rewrites the
primal in dual format over a null-space basis, keeping the dropped
constant term explicit as an offset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    InconsistentConstraints,
    NegativeParameter,
    NoFeasiblePoint,
)
from .linalg import SymMatrix, smat_dense, svec_dense

# Singular values below RANK_CUTOFF * s_max count as zero in rank decisions.
RANK_CUTOFF = 1e-10


@dataclass(frozen=True, eq=False)
class SdpInstance:
    """Immutable data (C, A^1..A^m, b) of a standard-form primal/dual pair.

    Construction verifies matching dimensions and linear independence of
    the constraint matrices. Dependent families are reduced to a basis
    with consistent b (the optimal values are unchanged by the
    reduction); inconsistent dependent rows are rejected.
    """

    C: SymMatrix
    A: tuple
    b: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(self.A))
        b = np.array(self.b, dtype=float).reshape(-1)
        object.__setattr__(self, "b", b)
        n = self.C.n
        if len(self.A) < 1:
            raise DimensionMismatch("need at least one constraint matrix")
        if any(a.n != n for a in self.A):
            raise DimensionMismatch("constraint matrices must match dim of C")
        if len(self.A) != b.shape[0]:
            raise DimensionMismatch(
                f"|A| = {len(self.A)} but |b| = {b.shape[0]}")
        if not np.all(np.isfinite(b)):
            raise ValueError("b contains NaN or Inf")
        self._reduce_dependent()
        object.__setattr__(
            self, "_amat", np.vstack([a.packed for a in self.A]))
        object.__setattr__(self, "_cd", self.C.dense())
        object.__setattr__(self, "_ad", [a.dense() for a in self.A])
        self.b.setflags(write=False)

    def _reduce_dependent(self):
        stack = np.vstack([a.packed for a in self.A])
        _, rdiag, piv = scipy.linalg.qr(stack.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(rdiag)) if rdiag.size else np.array([])
        scale = diag[0] if diag.size else 0.0
        rank = int(np.sum(diag > RANK_CUTOFF * (1.0 + scale)))
        if rank == len(self.A):
            return
        if rank == 0:
            raise InconsistentConstraints("all constraint matrices are zero")
        keep = sorted(piv[:rank])
        basis = stack[keep]
        btol = 1e-9 * (1.0 + np.abs(self.b).max())
        for j in range(len(self.A)):
            if j in keep:
                continue
            coeff, *_ = np.linalg.lstsq(basis.T, stack[j], rcond=None)
            if abs(self.b[j] - coeff @ self.b[keep]) > btol:
                raise InconsistentConstraints(
                    f"constraint {j} is dependent but its rhs is not")
        object.__setattr__(self, "A", tuple(self.A[i] for i in keep))
        object.__setattr__(self, "b", np.array(self.b[keep]))
        meta = dict(self.meta)
        meta["basis_rows"] = [int(i) for i in keep]
        object.__setattr__(self, "meta", meta)

    @property
    def n(self):
        return self.C.n

    @property
    def m(self):
        return len(self.A)

    @property
    def amat(self):
        """Stacked svec rows of the constraint matrices, shape (m, n(n+1)/2)."""
        return self._amat

    @property
    def C_dense(self):
        return self._cd

    @property
    def A_dense(self):
        return self._ad

    def constraint_traces(self):
        return np.array([a.trace() for a in self.A])

    def __repr__(self):
        return f"SdpInstance(name={self.name!r}, n={self.n}, m={self.m})"


def make_instance(C, A, b, name=""):
    """Build an SdpInstance from dense arrays."""
    return SdpInstance(
        C=SymMatrix.from_dense(C),
        A=tuple(SymMatrix.from_dense(a) for a in A),
        b=np.asarray(b, dtype=float),
        name=name,
    )


@dataclass(frozen=True, eq=False)
class PerturbedPair:
    """Regularized pair at (eps, eta); primal and dual share the data."""

    base: SdpInstance
    eps: float
    eta: float
    instance: SdpInstance

    @property
    def primal(self):
        return self.instance

    @property
    def dual(self):
        return self.instance


def perturb(inst: SdpInstance, eps: float, eta: float) -> PerturbedPair:
    """Shift the cost by eps*I and each rhs entry by eta*trace(A_i)."""
    if eps < 0 or eta < 0:
        raise NegativeParameter(f"eps={eps}, eta={eta} must be >= 0")
    shifted = SdpInstance(
        C=inst.C.add_scaled_identity(eps),
        A=inst.A,
        b=inst.b + eta * inst.constraint_traces(),
        name=f"{inst.name}(eps={eps:g},eta={eta:g})" if inst.name else "",
        meta=dict(inst.meta),
    )
    return PerturbedPair(base=inst, eps=float(eps), eta=float(eta),
                         instance=shifted)


class ObjectiveReport(NamedTuple):
    primal_value: float
    dual_value: float
    primal_res: float
    dual_res: float


def objective_and_residuals(inst, X, y, S) -> ObjectiveReport:
    """Objective values and feasibility residuals of a candidate triple."""
    Xd = X.dense() if isinstance(X, SymMatrix) else np.asarray(X, float)
    Sd = S.dense() if isinstance(S, SymMatrix) else np.asarray(S, float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if Xd.shape != (inst.n, inst.n) or Sd.shape != (inst.n, inst.n):
        raise DimensionMismatch("X or S dimension does not match instance")
    if y.shape[0] != inst.m:
        raise DimensionMismatch("y length does not match m")
    pv = float(np.tensordot(inst.C_dense, Xd))
    dv = float(inst.b @ y)
    pres = max(abs(float(np.tensordot(a, Xd)) - bi)
               for a, bi in zip(inst.A_dense, inst.b))
    dual_slack = inst.C_dense - sum(yi * a for yi, a in zip(y, inst.A_dense))
    dres = float(np.linalg.norm(dual_slack - Sd))
    return ObjectiveReport(pv, dv, pres, dres)


@dataclass(frozen=True, eq=False)
class DualizedInstance:
    """Dual-format rewrite over an orthonormal null-space basis.

    ``instance`` carries (X*, Aperp^1..Aperp^nbar, btilde) so that
    solving its perturbed pair at (eps=eta0, eta=eps0) produces the
    rewritten value v1(eta0, eps0). The constant term dropped in the
    rewrite is kept explicit:

        v1(eta, eps) + v(eps, eta) = (C + eps*I) . (X* + eta*I)

    for eps, eta > 0, which ``offset`` evaluates.
    """

    base: SdpInstance
    instance: SdpInstance
    xstar: SymMatrix
    nbar: int

    def offset(self, eps: float, eta: float) -> float:
        c_dot_x = self.base.C.dot(self.xstar)
        return (c_dot_x + eps * self.xstar.trace()
                + eta * self.base.C.trace() + eps * eta * self.base.n)


def dualize(inst: SdpInstance, xstar=None) -> DualizedInstance:
    """Rewrite the primal in dual format.

    The null-space basis of the constraint map is orthonormal (from the
    SVD of the stacked svec rows); X* defaults to the minimum-norm
    solution of the affine system and may be overridden with any other
    particular solution.
    """
    amat = inst.amat
    nu = amat.shape[1]
    u, sing, vt = np.linalg.svd(amat, full_matrices=True)
    cutoff = RANK_CUTOFF * (1.0 + (sing[0] if sing.size else 0.0))
    rank = int(np.sum(sing > cutoff))
    null_rows = vt[rank:]
    nbar = nu - rank

    if xstar is None:
        coeff = (u.T @ inst.b)[:rank] / sing[:rank]
        xvec = vt[:rank].T @ coeff
        xstar = SymMatrix(inst.n, xvec)
    else:
        if not isinstance(xstar, SymMatrix):
            xstar = SymMatrix.from_dense(xstar)
    if np.abs(amat @ xstar.packed - inst.b).max() > 1e-8 * (1 + np.abs(inst.b).max()):
        raise NoFeasiblePoint("affine system A_i . X = b_i is inconsistent")

    aperp = tuple(SymMatrix(inst.n, row) for row in null_rows)
    btilde = np.array([inst.C.dot(a) for a in aperp])
    rewritten = SdpInstance(
        C=xstar, A=aperp, b=btilde,
        name=f"{inst.name}_dualized" if inst.name else "dualized")
    return DualizedInstance(base=inst, instance=rewritten, xstar=xstar,
                            nbar=nbar)


# --- JSON export -----------------------------------------------------------

def instance_to_json_dict(inst: SdpInstance) -> dict:
    return {
        "name": inst.name,
        "n": inst.n,
        "m": inst.m,
        "C": [[float(v) for v in row] for row in inst.C_dense],
        "A": [[[float(v) for v in row] for row in a] for a in inst.A_dense],
        "b": [float(v) for v in inst.b],
    }


def instance_to_json(inst: SdpInstance) -> str:
    return json.dumps(instance_to_json_dict(inst), sort_keys=True, indent=2)


def instance_from_json(text: str) -> SdpInstance:
    data = json.loads(text)
    return make_instance(np.array(data["C"]),
                         [np.array(a) for a in data["A"]],
                         np.array(data["b"]),
                         name=data.get("name", ""))
