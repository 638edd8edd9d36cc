"""Dense symmetric-matrix kernels.

Packed symmetric storage with an isometric vectorization, deterministic
eigenvalue routines, PSD tests, Schur complements and congruence
transforms. Everything here is pure and safe to call concurrently;
matrices are small and dense by design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import IllConditioned, SingularBlock

SQRT2 = float(np.sqrt(2.0))

# Absolute PSD tolerance, applied after scaling by (1 + ||M||).
PSD_TOL = 1e-9

# Congruence transforms reject V whose 2-norm condition number exceeds this.
COND_LIMIT = 1e12


def _require_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains NaN or Inf")


def _packed_len(n):
    return n * (n + 1) // 2


def svec_dense(mat):
    """Isometric vectorization of a dense symmetric array.

    Upper triangle in column-major order, off-diagonal entries scaled by
    sqrt(2), so that ``svec_dense(A) @ svec_dense(B) == trace(A @ B)``.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    out = np.empty(_packed_len(n))
    k = 0
    for j in range(n):
        for i in range(j):
            out[k] = mat[i, j] * SQRT2
            k += 1
        out[k] = mat[j, j]
        k += 1
    return out


def smat_dense(vec):
    """Inverse of :func:`svec_dense`, returning a dense symmetric array."""
    vec = np.asarray(vec, dtype=float)
    ln = vec.shape[0]
    n = int(round((np.sqrt(8 * ln + 1) - 1) / 2))
    if _packed_len(n) != ln:
        raise ValueError(f"packed length {ln} is not triangular")
    out = np.empty((n, n))
    k = 0
    for j in range(n):
        for i in range(j):
            out[i, j] = out[j, i] = vec[k] / SQRT2
            k += 1
        out[j, j] = vec[k]
        k += 1
    return out


class SymMatrix:
    """Real symmetric matrix stored as a packed upper triangle.

    The canonical representation is the isometric packed vector itself
    (column-major upper triangle, off-diagonals scaled by sqrt(2)); dense
    arrays are produced on demand. Storing the packed vector makes
    ``smat(svec(M)) == M`` hold bit for bit, and makes the Frobenius norm
    and trace inner product exact dot products.
    """

    __slots__ = ("n", "packed")

    def __init__(self, n, packed):
        packed = np.array(packed, dtype=float)
        if packed.shape != (_packed_len(n),):
            raise ValueError(
                f"packed length {packed.shape} does not match n={n}")
        _require_finite(packed, "SymMatrix")
        packed.setflags(write=False)
        self.n = int(n)
        self.packed = packed

    @classmethod
    def from_dense(cls, mat, sym_tol=1e-8):
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got {mat.shape}")
        _require_finite(mat, "SymMatrix")
        skew = np.abs(mat - mat.T).max() if mat.size else 0.0
        if skew > sym_tol * (1.0 + np.abs(mat).max()):
            raise ValueError(f"matrix is not symmetric (skew {skew:.3g})")
        return cls(mat.shape[0], svec_dense(0.5 * (mat + mat.T)))

    def dense(self):
        return smat_dense(self.packed)

    def norm(self):
        """Frobenius norm (exact, by isometry of the packed storage)."""
        return float(np.linalg.norm(self.packed))

    def trace(self):
        idx = np.cumsum(np.arange(1, self.n + 1)) - 1
        return float(self.packed[idx].sum())

    def dot(self, other):
        """Trace inner product with another SymMatrix."""
        return float(self.packed @ other.packed)

    def add_scaled_identity(self, t):
        out = np.array(self.packed)
        idx = np.cumsum(np.arange(1, self.n + 1)) - 1
        out[idx] += t
        return SymMatrix(self.n, out)

    def scale(self, t):
        return SymMatrix(self.n, self.packed * t)

    def allclose(self, other, tol=1e-12):
        if self.n != other.n:
            return False
        return bool(np.all(np.abs(self.packed - other.packed) <= tol))

    def __repr__(self):
        return f"SymMatrix(n={self.n})"


def svec(mat: SymMatrix) -> np.ndarray:
    """Packed isometric vector of a SymMatrix (exact accessor)."""
    return np.array(mat.packed)


def smat(vec) -> SymMatrix:
    """Exact inverse of :func:`svec`."""
    vec = np.asarray(vec, dtype=float)
    ln = vec.shape[0]
    n = int(round((np.sqrt(8 * ln + 1) - 1) / 2))
    return SymMatrix(n, vec)


def identity(n) -> SymMatrix:
    return SymMatrix.from_dense(np.eye(n))


def zeros(n) -> SymMatrix:
    return SymMatrix(n, np.zeros(_packed_len(n)))


def _as_dense(mat):
    if isinstance(mat, SymMatrix):
        return mat.dense()
    return np.asarray(mat, dtype=float)


def min_eig(mat) -> float:
    """Smallest eigenvalue, via a deterministic symmetric eigensolver."""
    dense = _as_dense(mat)
    if dense.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(dense)[0])


def max_eig(mat) -> float:
    dense = _as_dense(mat)
    if dense.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(dense)[-1])


def default_psd_tol(mat) -> float:
    dense = _as_dense(mat)
    return PSD_TOL * (1.0 + float(np.linalg.norm(dense)))


def is_psd(mat, tol=None) -> bool:
    """True iff the smallest eigenvalue is at least -tol."""
    if tol is None:
        tol = default_psd_tol(mat)
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    return min_eig(mat) >= -tol


@dataclass(frozen=True)
class BlockSplit:
    """2x2 block division of an n x n matrix with a leading r x r block."""

    r: int
    n: int

    def __post_init__(self):
        if not 0 <= self.r <= self.n:
            raise ValueError(f"need 0 <= r <= n, got r={self.r}, n={self.n}")

    def blocks(self, mat):
        dense = _as_dense(mat)
        if dense.shape != (self.n, self.n):
            raise ValueError(
                f"matrix shape {dense.shape} does not match n={self.n}")
        r = self.r
        return dense[:r, :r], dense[:r, r:], dense[r:, r:]


def schur_complement(mat, split: BlockSplit, tol=None) -> SymMatrix:
    """Leading-block Schur complement M11 - M12 M22^{-1} M12^T.

    The trailing block must be positive definite; it is eliminated. With
    that precondition, the result is positive definite exactly when the
    full matrix is.
    """
    m11, m12, m22 = split.blocks(mat)
    if tol is None:
        tol = default_psd_tol(mat)
    if split.r == split.n:
        return SymMatrix.from_dense(m11)
    if min_eig(m22) <= tol:
        raise SingularBlock(
            f"trailing {split.n - split.r} x {split.n - split.r} block is "
            f"not positive definite (min eig {min_eig(m22):.3g})")
    cho = scipy.linalg.cho_factor(m22, lower=True)
    reduced = m11 - m12 @ scipy.linalg.cho_solve(cho, m12.T)
    return SymMatrix.from_dense(0.5 * (reduced + reduced.T), sym_tol=np.inf)


def congruence(mat, v, cond_limit=COND_LIMIT) -> SymMatrix:
    """Congruence transform V M V^T. Preserves inertia.

    Rejects transforms whose condition number estimate reaches
    ``cond_limit`` since those no longer preserve numerical rank
    decisions.
    """
    dense = _as_dense(mat)
    v = np.asarray(v, dtype=float)
    if v.shape != dense.shape:
        raise ValueError(f"V shape {v.shape} does not match {dense.shape}")
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond >= cond_limit:
        raise IllConditioned(f"condition estimate {cond:.3g} >= {cond_limit:.3g}")
    out = v @ dense @ v.T
    return SymMatrix.from_dense(0.5 * (out + out.T), sym_tol=np.inf)
