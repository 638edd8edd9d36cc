"""Facial reduction: reducing directions, face chains, the reduced
problem, and its admissible perturbations.

A reducing direction for the dual side is a nonzero psd matrix
orthogonal to C and to every A_i; cutting the cone with it shrinks the
feasible slacks onto a proper face. Iterating until an interior point of
the face exists yields a chain whose length, with maximal-rank
directions at every step, upper-bounds (and generically equals) the
singularity degree.

Directions are computed from an auxiliary SDP: maximize trace(s) subject
to s psd, trace(s) <= 1 and the orthogonality conditions. Its optimal
value is 1 exactly when a direction exists and 0 otherwise, and the
central path limits at the relative interior of the solution face, which
is what makes the greedy ranks maximal. At steps beyond the first, the
blocks of s outside the current face are unconstrained members of the
face's dual cone; they are eliminated from the orthogonality system
before the solve.

All rescalings V are orthogonal (eigenvector matrices), so congruences
and their inverses are transposes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AuxiliarySolveFailed,
    InconsistentConstraints,
    InfeasibleDetected,
    NotInPerturbationSpace,
    PreconditionViolated,
    SolverError,
    WitnessNotFound,
)
from .linalg import BlockSplit, SymMatrix, min_eig, smat_dense, svec_dense
from .model import RANK_CUTOFF, SdpInstance
from .solver import SolveOptions, Status, solve

PRIMAL = "primal"
DUAL = "dual"

# Eigenvalues below RANK_TOL * (largest + 1) count as zero when deciding
# the rank of a direction; separates exact-zero blocks from solver noise.
RANK_TOL = 1e-7

# Orthogonality and membership systems are accepted at this residual.
ORTH_TOL = 1e-8

_AUX_OPTS = SolveOptions(tol_gap=1e-10, tol_feas=1e-10, max_iters=150)


def _accept(res, rel_tol=1e-6):
    if res.status == Status.OPTIMAL:
        return True
    scale = 1.0 + abs(res.primal_value) + abs(res.dual_value)
    return (abs(res.primal_value - res.dual_value) / scale <= rel_tol
            and res.primal_res <= rel_tol * scale
            and res.dual_res <= rel_tol * scale)


def _null_basis(mat, cutoff=RANK_CUTOFF):
    """Orthonormal basis (columns) of the null space of a stacked system."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape[0] == 0 or not np.any(mat):
        return np.eye(mat.shape[1])
    _, sing, vt = np.linalg.svd(mat, full_matrices=True)
    rank = int(np.sum(sing > cutoff * (1.0 + sing[0])))
    return vt[rank:].T


def _range_complement(mat, cutoff=RANK_CUTOFF):
    """Orthonormal basis (columns) of the orthogonal complement of Range."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    q = mat.shape[0]
    if mat.shape[1] == 0 or not np.any(mat):
        return np.eye(q)
    u, sing, _ = np.linalg.svd(mat, full_matrices=True)
    rank = int(np.sum(sing > cutoff * (1.0 + sing[0])))
    return u[:, rank:]


def _orthonormal_rows(mat, cutoff=RANK_CUTOFF):
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape[0] == 0:
        return mat
    _, sing, vt = np.linalg.svd(mat, full_matrices=False)
    if sing.size == 0 or sing[0] <= cutoff:
        return np.zeros((0, mat.shape[1]))
    rank = int(np.sum(sing > cutoff * (1.0 + sing[0])))
    return vt[:rank]


@dataclass(eq=False)
class StepRecord:
    direction: SymMatrix          # full direction, original coordinates
    face_block_mineig: float      # psd certificate of the on-face block
    orthogonality_residual: float
    rank_after: int
    aux_value: float


@dataclass(eq=False)
class FaceChain:
    """Chain of reducing directions with the accumulated rescaling."""

    side: str
    directions: list
    ranks: list
    V: np.ndarray
    r: int
    sd_upper: int
    steps: list = field(default_factory=list)

    def direction_rescaled(self, i=0):
        """Direction i expressed in the final rescaled coordinates."""
        s = self.directions[i].dense()
        return self.V @ s @ self.V.T

    def to_json_dict(self):
        return {
            "side": self.side,
            "steps": self.sd_upper,
            "ranks": [int(r) for r in self.ranks],
            "r": int(self.r),
            "directions": [[[float(v) for v in row]
                            for row in d.dense()] for d in self.directions],
            "V": [[float(v) for v in row] for row in self.V],
            "residuals": {
                "orthogonality": [float(s.orthogonality_residual)
                                  for s in self.steps],
                "face_block_mineig": [float(s.face_block_mineig)
                                      for s in self.steps],
            },
        }


def certificate_json(chain: FaceChain) -> str:
    return json.dumps(chain.to_json_dict(), sort_keys=True, indent=2)


def _sigma_constraints_dual(data, r):
    """Constraint matrices on the leading r x r block of a direction.

    ``data`` are the (rescaled) matrices the direction must annihilate.
    Blocks outside the leading one are free; they are eliminated by
    projecting the constraint rows onto the complement of the range of
    the free-coordinate columns.
    """
    nu_r = r * (r + 1) // 2
    rows = np.vstack([svec_dense(d) for d in data])
    k_sigma = rows[:, :nu_r]
    k_rest = rows[:, nu_r:]
    u_perp = _range_complement(k_rest)
    g = _orthonormal_rows(u_perp.T @ k_sigma)
    return g, k_sigma, k_rest


def _recover_free_blocks(sigma, k_sigma, k_rest, n, r):
    """Pad sigma with the minimum-norm free blocks satisfying the
    original orthogonality system, returning the full n x n direction."""
    nu_r = r * (r + 1) // 2
    sig_vec = svec_dense(sigma)
    if k_rest.shape[1]:
        rest, *_ = np.linalg.lstsq(k_rest, -k_sigma @ sig_vec, rcond=None)
    else:
        rest = np.zeros(0)
    full = np.concatenate([sig_vec, rest])
    pad = np.zeros(n * (n + 1) // 2)
    pad[:full.shape[0]] = full
    return smat_dense(pad)


def _solve_aux_dual_side(data, r):
    """Max-trace direction in the leading block orthogonal to ``data``.

    Embeds the slack of the trace normalization as an extra diagonal
    entry, so the auxiliary problem is a standard-form SDP over
    S^{r+1}: min -trace(sigma) s.t. <G_k, sigma> = 0, trace(sigma)+u = 1.
    """
    g, k_sigma, k_rest = _sigma_constraints_dual(data, r)

    def pad(mat_r):
        out = np.zeros((r + 1, r + 1))
        out[:r, :r] = mat_r
        return out

    c_mat = -pad(np.eye(r))
    a_mats = [pad(smat_dense(row)) for row in g]
    norm_mat = np.eye(r + 1)
    b = np.zeros(len(a_mats) + 1)
    b[-1] = 1.0
    try:
        inst = SdpInstance(
            C=SymMatrix.from_dense(c_mat),
            A=tuple(SymMatrix.from_dense(a) for a in a_mats)
            + (SymMatrix.from_dense(norm_mat),),
            b=b, name="aux-direction")
    except InconsistentConstraints:
        # trace sigma = 1 is incompatible with the orthogonality system:
        # only the zero matrix satisfies it, i.e. no direction exists.
        return None, 0.0
    res = solve(inst, _AUX_OPTS)
    if not _accept(res):
        raise AuxiliarySolveFailed(
            f"direction subproblem ended {res.status.value}")
    value = -0.5 * (res.primal_value + res.dual_value)
    if value < 0.5:
        return None, value
    sigma = res.X.dense()[:r, :r]
    sigma = 0.5 * (sigma + sigma.T)
    kernel_rows = _null_basis(g).T if g.shape[0] else np.eye(r * (r + 1) // 2)
    polished = _polish_direction(sigma, kernel_rows, _detect_rank(sigma))
    if polished is not None:
        sigma = polished
    full = _recover_free_blocks(sigma, k_sigma, k_rest,
                                data[0].shape[0], r)
    return (sigma, full), value


def _solve_aux_primal_side(a_mats, b, r):
    """Max-trace block (sum_i y_i A_i)_11 over b^T y = 0, psd block.

    Formulated in dual format over the null space of b^T, with the
    trace bound as an extra diagonal slack entry.
    """
    m = len(a_mats)
    brow = np.asarray(b, dtype=float).reshape(1, m)
    nmat = _null_basis(brow) if np.any(brow) else np.eye(m)
    if nmat.shape[1] == 0:
        return None, 0.0
    f_mats = [sum(nmat[i, j] * a_mats[i][:r, :r] for i in range(m))
              for j in range(nmat.shape[1])]
    c_vec = np.array([float(np.trace(f)) for f in f_mats])
    if all(np.abs(f).max() <= 1e-14 for f in f_mats):
        return None, 0.0

    def blk(mat_r, corner):
        out = np.zeros((r + 1, r + 1))
        out[:r, :r] = mat_r
        out[r, r] = corner
        return out

    c_mat = blk(np.zeros((r, r)), 1.0)
    a_list = [blk(-f, c) for f, c in zip(f_mats, c_vec)]
    try:
        inst = SdpInstance(
            C=SymMatrix.from_dense(c_mat),
            A=tuple(SymMatrix.from_dense(a) for a in a_list),
            b=c_vec, name="aux-direction")
    except InconsistentConstraints:
        return None, 0.0
    res = solve(inst, _AUX_OPTS)
    if not _accept(res):
        raise AuxiliarySolveFailed(
            f"direction subproblem ended {res.status.value}")
    value = 0.5 * (res.primal_value + res.dual_value)
    if value < 0.5:
        return None, value
    z = res.y
    y_dir = nmat @ z
    sigma = np.array(sum(yi * ai for yi, ai in zip(y_dir, a_mats))[:r, :r])
    sigma = 0.5 * (sigma + sigma.T)
    span_rows = _orthonormal_rows(np.vstack(
        [svec_dense(f) for f in f_mats]))
    polished = _polish_direction(sigma, span_rows, _detect_rank(sigma))
    if polished is not None:
        sigma = polished
        # refit within the b-orthogonal span so b^T y = 0 stays exact
        f_stack = np.vstack([svec_dense(f) for f in f_mats])
        z_fit, *_ = np.linalg.lstsq(f_stack.T, svec_dense(sigma), rcond=None)
        y_dir = nmat @ z_fit
    full = sum(yi * ai for yi, ai in zip(y_dir, a_mats))
    return (sigma, np.array(full)), value


def _detect_rank(sigma):
    """Rank of a noisy psd direction via the largest spectral ratio gap.

    Anything below the hard floor RANK_TOL * (max + 1) is zero; above it,
    the split with the largest multiplicative jump separates solver noise
    (~sqrt of the final complementarity) from genuine eigenvalues.
    """
    lam = np.linalg.eigvalsh(sigma)
    lmax = lam[-1]
    floor = RANK_TOL * (lmax + 1.0)
    above = [v for v in lam if v > floor]
    if not above:
        return 0
    best_idx, best_ratio = 0, 0.0
    prev = floor
    for i, v in enumerate(above):
        ratio = v / max(prev, 1e-300)
        if ratio > best_ratio:
            best_ratio, best_idx = ratio, i
        prev = v
    if best_ratio < 1e3:
        return len(above)
    return len(above) - best_idx


def _alternating_projection(sigma, kernel_rows, rank, sweeps=300):
    """Nearest rank-``rank`` psd point of the span, by alternating
    projections; returns None if the trace collapses."""
    r = sigma.shape[0]
    cur = np.array(sigma)
    scale = 1.0 + np.abs(sigma).max()
    for _ in range(sweeps):
        vec = svec_dense(cur)
        vec = kernel_rows.T @ (kernel_rows @ vec)
        lam, q = np.linalg.eigh(smat_dense(vec))
        lam[:r - rank] = 0.0
        lam = np.maximum(lam, 0.0)
        new = (q * lam) @ q.T
        delta = np.abs(new - cur).max()
        cur = new
        if delta <= 1e-15 * scale:
            break
    tr = float(np.trace(cur))
    if tr <= 1e-8:
        return None
    return cur / tr


def _restrict_kernel(kernel_rows, support, r):
    """Basis of the kernel span intersected with matrices supported on
    the given index set (rows/columns outside it forced to zero)."""
    outside = []
    k = 0
    for j in range(r):
        for i in range(j + 1):
            if i not in support or j not in support:
                outside.append(k)
            k += 1
    if not outside:
        return kernel_rows
    k_out = kernel_rows[:, outside]
    w = _null_basis(k_out.T)
    return _orthonormal_rows(w.T @ kernel_rows)


def _polish_direction(sigma, kernel_rows, rank):
    """Refine a direction to the exact zero structure.

    Interior-point iterates are accurate only to about sqrt(mu) when the
    direction set has no relative interior. Alternating projections
    between the admissible span and the fixed-rank psd set restore
    first-order structure; zero diagonals then force their whole rows to
    vanish (psd-ness), so the support is shrunk and the projection
    repeated until stable. The tangential directions that survive a
    plain projection are exactly the ones support propagation kills.
    Returns the refined matrix, or None if no candidate verifies.
    """
    if rank <= 0:
        return None
    r = sigma.shape[0]
    support = set(range(r))
    best = None
    cur = np.array(sigma)
    for _ in range(r + 1):
        rows = _restrict_kernel(kernel_rows, support, r)
        if rows.shape[0] == 0:
            break
        cand = _alternating_projection(cur, rows, min(rank, len(support)))
        if cand is None:
            break
        vec = svec_dense(cand)
        gap = np.abs(vec - kernel_rows.T @ (kernel_rows @ vec)).max()
        if gap <= 1e-10 and min_eig(cand) >= -1e-12:
            best = 0.5 * (cand + cand.T)
        diag = np.diag(cand)
        drop = {i for i in support if diag[i] <= 1e-6 * (1.0 + diag.max())}
        if not drop or drop == support:
            break
        support -= drop
        cur = cand
    return best


def _direction_eigenbasis(sigma):
    """Eigenpairs of a direction, zero eigenspace first, deterministic.

    Directions that are diagonal up to solver noise get an exact
    permutation basis preserving the original index order, so that
    axis-aligned faces keep their natural coordinates. Otherwise the
    eigenvectors are sign-canonicalized (largest component positive);
    within clusters the LAPACK order is kept, which is deterministic for
    identical inputs.
    """
    r = sigma.shape[0]
    diag = np.diag(sigma)
    off = np.abs(sigma - np.diag(diag)).max() if r > 1 else 0.0
    if off <= 1e-8 * (1.0 + np.abs(diag).max()):
        thresh = RANK_TOL * (diag.max() + 1.0)
        order = ([i for i in range(r) if diag[i] < thresh]
                 + [i for i in range(r) if diag[i] >= thresh])
        return diag[order], np.eye(r)[:, order]
    lam, q = np.linalg.eigh(sigma)
    for col in range(q.shape[1]):
        pivot = np.argmax(np.abs(q[:, col]))
        if q[pivot, col] < 0:
            q[:, col] = -q[:, col]
    return lam, q


def _step_direction(side, c_resc, a_resc, b, r):
    if side == DUAL:
        return _solve_aux_dual_side([c_resc] + list(a_resc), r)
    return _solve_aux_primal_side(list(a_resc), b, r)


def find_reducing_direction(inst: SdpInstance, side: str):
    """First-step reducing direction of the requested side, or None.

    The direction is psd with unit trace and annihilates the problem
    data; None certifies that Slater's condition already holds.
    """
    _check_side(side)
    found, _ = _step_direction(side, inst.C_dense, inst.A_dense, inst.b,
                               inst.n)
    if found is None:
        return None
    _, full = found
    return SymMatrix.from_dense(full, sym_tol=np.inf)


def _check_side(side):
    if side not in (PRIMAL, DUAL):
        raise ValueError(f"side must be {PRIMAL!r} or {DUAL!r}, got {side!r}")


def facial_reduction(inst: SdpInstance, side: str) -> FaceChain:
    """Run the reduction to the minimal face of the requested side.

    Returns the chain of directions (original coordinates), the face
    ranks, and the accumulated orthogonal rescaling V. The number of
    steps upper-bounds the singularity degree and equals it when every
    step's direction has maximal rank, which the interior-point
    auxiliary solves target.
    """
    _check_side(side)
    n = inst.n
    v_cum = np.eye(n)
    r = n
    directions, ranks, steps = [], [], []

    for _ in range(n):
        if r == 0:
            break
        c_resc = v_cum @ inst.C_dense @ v_cum.T
        a_resc = [v_cum @ a @ v_cum.T for a in inst.A_dense]
        found, value = _step_direction(side, c_resc, a_resc, inst.b, r)
        if found is None:
            break
        sigma, full_cur = found

        lam, q = _direction_eigenbasis(sigma)
        r_next = int(np.sum(lam < RANK_TOL * (lam.max() + 1.0)))
        if r_next >= r:
            raise AuxiliarySolveFailed(
                "direction reported but numerically zero")
        v_step = np.eye(n)
        v_step[:r, :r] = q.T

        s_orig = v_cum.T @ full_cur @ v_cum
        data_orig = ([inst.C_dense] if side == DUAL else []) + inst.A_dense
        orth = max(abs(float(np.tensordot(s_orig, d))) for d in data_orig)
        directions.append(SymMatrix.from_dense(s_orig, sym_tol=np.inf))
        ranks.append(r_next)
        steps.append(StepRecord(
            direction=directions[-1],
            face_block_mineig=float(lam.min()),
            orthogonality_residual=orth,
            rank_after=r_next,
            aux_value=float(value)))

        v_cum = v_step @ v_cum
        r = r_next

    if r == 0 and side == DUAL:
        # Face shrank to the origin: the only candidate slack is 0.
        c_resc = v_cum @ inst.C_dense @ v_cum.T
        a_stack = np.vstack([svec_dense(v_cum @ a @ v_cum.T)
                             for a in inst.A_dense])
        y_fit, *_ = np.linalg.lstsq(a_stack.T, svec_dense(c_resc), rcond=None)
        if np.abs(a_stack.T @ y_fit - svec_dense(c_resc)).max() > ORTH_TOL:
            raise InfeasibleDetected("no feasible slack exists")

    return FaceChain(side=side, directions=directions, ranks=ranks,
                     V=v_cum, r=r, sd_upper=len(directions), steps=steps)


def singularity_degree(chain: FaceChain) -> int:
    """Number of reduction steps taken.

    An upper bound on the singularity degree; equal to it when each
    step's direction has maximal rank (the interior-point solves aim
    for this, but minimality over all chains is not searched).
    """
    return chain.sd_upper


@dataclass(eq=False)
class ReducedInstance:
    """Rescaled instance with the minimal-face block division.

    L(y) = C - sum_i A_i y_i over the rescaled data; the feasible slacks
    of the original dual are exactly the L(y) with vanishing 12 and 22
    blocks and psd leading block, and that reduced problem satisfies
    Slater's condition (witness included).
    """

    base: SdpInstance
    split: BlockSplit
    slater_witness: np.ndarray
    witness_mineig: float
    chain: FaceChain = None

    def L(self, y):
        y = np.asarray(y, dtype=float)
        return self.base.C_dense - sum(
            yi * a for yi, a in zip(y, self.base.A_dense))

    def L11(self, y):
        return self.split.blocks(self.L(y))[0]

    def L12(self, y):
        return self.split.blocks(self.L(y))[1]

    def L22(self, y):
        return self.split.blocks(self.L(y))[2]

    def l11(self, y):
        return float(np.trace(self.L11(y)))

    def l22(self, y):
        return float(np.trace(self.L22(y)))

    def l12sq(self, y):
        l12 = self.L12(y)
        return float(np.sum(l12 * l12))

    @property
    def r(self):
        return self.split.r

    @property
    def n(self):
        return self.split.n


def _equality_rows(red: ReducedInstance, t12, t22):
    """Linear system {L12(y) = T12, L22(y) = T22} in entrywise form."""
    r, n = red.r, red.n
    c = red.base.C_dense
    a_mats = red.base.A_dense
    rows, rhs = [], []
    for i in range(r):
        for j in range(r, n):
            rows.append([a[i, j] for a in a_mats])
            rhs.append(c[i, j] - t12[i, j - r])
    for i in range(r, n):
        for j in range(i, n):
            rows.append([a[i, j] for a in a_mats])
            rhs.append(c[i, j] - t22[i - r, j - r])
    return np.array(rows), np.array(rhs)


def _solve_equalities(red, t12, t22):
    rows, rhs = _equality_rows(red, t12, t22)
    if rows.shape[0] == 0:
        return np.zeros(red.base.m), np.eye(red.base.m), 0.0
    y0, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    resid = float(np.abs(rows @ y0 - rhs).max()) if rhs.size else 0.0
    nmat = _null_basis(rows)
    return y0, nmat, resid


def _restricted_lmi_value(red, y0, nmat, shift, what):
    """max b^T y over y = y0 + N z with L11(y) + shift*I psd."""
    b = red.base.b
    offset = float(b @ y0)
    c_mat = red.L11(y0) + shift * np.eye(red.r)
    f_mats = [sum(nmat[i, j] * red.base.A_dense[i][:red.r, :red.r]
                  for i in range(red.base.m))
              for j in range(nmat.shape[1])]
    b_red = nmat.T @ b
    live = [j for j, f in enumerate(f_mats) if np.abs(f).max() > 1e-13]
    dead_obj = max((abs(b_red[j]) for j in range(len(f_mats))
                    if j not in live), default=0.0)
    if dead_obj > 1e-10 * (1.0 + np.abs(b).max()):
        raise SolverError(f"{what}: unbounded along a free direction")
    if not live:
        if min_eig(c_mat) < -1e-9 * (1.0 + np.linalg.norm(c_mat)):
            raise SolverError(f"{what}: restricted problem infeasible")
        return offset, None
    inst = SdpInstance(
        C=SymMatrix.from_dense(c_mat),
        A=tuple(SymMatrix.from_dense(f_mats[j]) for j in live),
        b=b_red[live], name=what)
    res = solve(inst, _AUX_OPTS)
    if not _accept(res):
        raise SolverError(f"{what}: solve ended {res.status.value}")
    return offset + 0.5 * (res.primal_value + res.dual_value), res


def reduce_to_rd(inst: SdpInstance, chain: FaceChain) -> ReducedInstance:
    """Rescale by the chain's V and locate a Slater witness.

    The optimal value of the reduced problem (leading block psd, other
    blocks zero) equals the dual optimal value of ``inst``.
    """
    if chain.side != DUAL:
        raise PreconditionViolated("reduce_to_rd expects a dual-side chain")
    v = chain.V
    rescaled = SdpInstance(
        C=SymMatrix.from_dense(v @ inst.C_dense @ v.T, sym_tol=np.inf),
        A=tuple(SymMatrix.from_dense(v @ a @ v.T, sym_tol=np.inf)
                for a in inst.A_dense),
        b=inst.b,
        name=f"{inst.name}_rd" if inst.name else "rd")
    split = BlockSplit(r=chain.r, n=inst.n)
    red = ReducedInstance(base=rescaled, split=split,
                          slater_witness=np.zeros(inst.m),
                          witness_mineig=float("-inf"), chain=chain)

    y0, nmat, resid = _solve_equalities(
        red, np.zeros((red.r, red.n - red.r)),
        np.zeros((red.n - red.r, red.n - red.r)))
    if resid > ORTH_TOL:
        raise WitnessNotFound(
            f"reduced equality system inconsistent (residual {resid:.3g})")

    witness = _find_witness(red, y0, nmat)
    red.slater_witness = witness
    red.witness_mineig = min_eig(red.L11(witness))
    if red.witness_mineig <= 0:
        raise WitnessNotFound(
            f"no interior point located (min eig {red.witness_mineig:.3g})")
    return red


def _find_witness(red, y0, nmat):
    """Maximize the smallest eigenvalue of L11 over the equality set."""
    r = red.r
    k = nmat.shape[1]

    def blk(mat_r, corner):
        out = np.zeros((r + 1, r + 1))
        out[:r, :r] = mat_r
        out[r, r] = corner
        return out

    c_mat = blk(red.L11(y0), 1.0)
    a_list = [blk(sum(nmat[i, j] * red.base.A_dense[i][:r, :r]
                      for i in range(red.base.m)), 0.0)
              for j in range(k)]
    a_list.append(blk(np.eye(r), 1.0))   # the epigraph variable tau
    b = np.zeros(k + 1)
    b[-1] = 1.0
    try:
        inst = SdpInstance(C=SymMatrix.from_dense(c_mat),
                           A=tuple(SymMatrix.from_dense(a) for a in a_list),
                           b=b, name="slater-witness")
        res = solve(inst, _AUX_OPTS)
    except InconsistentConstraints as exc:
        raise WitnessNotFound(str(exc)) from exc
    z = res.y[:-1] if res.y.shape[0] == k + 1 else res.y[:k]
    return y0 + nmat @ z


@dataclass(frozen=True)
class PerturbationS:
    """Admissible perturbation: s11 * I plus an L-space part."""

    s11: float
    S12: np.ndarray
    S22: np.ndarray

    def full(self, split: BlockSplit):
        out = np.zeros((split.n, split.n))
        out[:split.r, :split.r] = self.s11 * np.eye(split.r)
        out[:split.r, split.r:] = self.S12
        out[split.r:, :split.r] = self.S12.T
        out[split.r:, split.r:] = self.S22
        return out

    def norm(self, split: BlockSplit):
        return float(np.linalg.norm(self.full(split)))


def decompose_perturbation(red: ReducedInstance, S) -> PerturbationS:
    """Split S into s11*I plus an L-part, verifying membership.

    Membership requires some y-hat with L12(y-hat) = S12 and
    L22(y-hat) = S22 - s11*I; it is checked by least squares and
    violations are rejected with the residual attached.
    """
    s_dense = S.dense() if isinstance(S, SymMatrix) else np.asarray(S, float)
    r, n = red.r, red.n
    if s_dense.shape != (n, n):
        raise NotInPerturbationSpace(
            f"perturbation shape {s_dense.shape} does not match n={n}")
    s11 = float(s_dense[0, 0]) if r else 0.0
    lead = s_dense[:r, :r] - s11 * np.eye(r)
    if np.abs(lead).max() > ORTH_TOL:
        raise NotInPerturbationSpace(
            "leading block is not a multiple of the identity",
            residual=float(np.abs(lead).max()))
    s12 = np.array(s_dense[:r, r:])
    s22 = np.array(s_dense[r:, r:])
    _, _, resid = _solve_equalities(red, s12, s22 - s11 * np.eye(n - r))
    if resid > ORTH_TOL:
        raise NotInPerturbationSpace(
            f"L-part not realizable (residual {resid:.3g})", residual=resid)
    return PerturbationS(s11=s11, S12=s12, S22=s22)


def w_of_S(red: ReducedInstance, pert: PerturbationS) -> float:
    """Optimal value of the perturbed reduced problem.

    The equality constraints L12(y) = S12, L22(y) + s11*I = S22 are
    eliminated by parametrizing y on their affine solution set; the
    remainder is a pure LMI solve. w(0) reproduces the dual optimal
    value, and w is continuous at 0.
    """
    r, n = red.r, red.n
    t22 = pert.S22 - pert.s11 * np.eye(n - r)
    y0, nmat, resid = _solve_equalities(red, pert.S12, t22)
    if resid > ORTH_TOL:
        raise NotInPerturbationSpace(
            f"perturbation outside admissible space (residual {resid:.3g})",
            residual=resid)
    value, _ = _restricted_lmi_value(red, y0, nmat, pert.s11, "w(S)")
    return value
