import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapscope.errors import IllConditioned, SingularBlock
from gapscope.linalg import (
    BlockSplit,
    SQRT2,
    SymMatrix,
    congruence,
    identity,
    is_psd,
    min_eig,
    schur_complement,
    smat,
    smat_dense,
    svec,
    svec_dense,
)

from conftest import rand_pd, rand_sym

finite_entries = st.floats(min_value=-1e8, max_value=1e8,
                           allow_nan=False, allow_infinity=False)


def test_svec_identity():
    assert np.array_equal(svec(identity(2)), np.array([1.0, 0.0, 1.0]))


def test_svec_offdiagonal_scaling():
    m = SymMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(svec(m), np.array([0.0, SQRT2, 0.0]))


def test_trace_product_matches_double_loop():
    rng = np.random.default_rng(11)
    for _ in range(5):
        a = rand_sym(rng, 3)
        b = rand_sym(rng, 3)
        # direct double-loop trace(AB) for symmetric matrices
        oracle = sum(a[i, j] * b[j, i] for i in range(3) for j in range(3))
        got = float(svec_dense(a) @ svec_dense(b))
        assert abs(got - oracle) <= 1e-12 * (
            1 + np.linalg.norm(a) * np.linalg.norm(b))


@given(st.lists(finite_entries, min_size=1, max_size=21).filter(
    lambda v: int(round((math.sqrt(8 * len(v) + 1) - 1) / 2))
    * (int(round((math.sqrt(8 * len(v) + 1) - 1) / 2)) + 1) // 2 == len(v)))
def test_svec_smat_mutual_inverse_bit_exact(packed):
    vec = np.array(packed)
    assert np.array_equal(svec(smat(vec)), vec)


@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_smat_svec_roundtrip_bit_exact(seed, n):
    m = SymMatrix.from_dense(rand_sym(np.random.default_rng(seed), n))
    again = smat(svec(m))
    assert np.array_equal(again.packed, m.packed)


def test_symmatrix_rejects_nonfinite():
    with pytest.raises(ValueError):
        SymMatrix.from_dense(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        SymMatrix(2, np.array([1.0, np.inf, 1.0]))


def test_symmatrix_rejects_asymmetric():
    with pytest.raises(ValueError):
        SymMatrix.from_dense(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_min_eig_examples():
    assert min_eig(identity(3)) == pytest.approx(1.0, abs=1e-12)
    assert min_eig(np.diag([2.0, -1.0])) == pytest.approx(-1.0, abs=1e-12)
    # characteristic polynomial of [[0,1],[1,0]] is l^2 - 1
    assert min_eig(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(
        -1.0, abs=1e-12)


def test_min_eig_accuracy_scaled():
    rng = np.random.default_rng(5)
    for _ in range(10):
        m = rand_sym(rng, 4, scale=10.0)
        exact = np.linalg.eigvalsh(m)[0]
        assert abs(min_eig(m) - exact) <= 1e-12 * (1 + np.linalg.norm(m))


def test_is_psd_tolerance_semantics():
    assert is_psd(identity(2), tol=0.0)
    assert not is_psd(np.diag([1.0, -1e-6]), tol=1e-9)
    assert is_psd(np.diag([1.0, -1e-6]), tol=1e-5)
    with pytest.raises(ValueError):
        is_psd(identity(2), tol=-1.0)


def test_schur_block_diagonal_returns_leading_block():
    m = np.diag([3.0, 2.0, 5.0])
    out = schur_complement(m, BlockSplit(r=2, n=3))
    assert np.allclose(out.dense(), np.diag([3.0, 2.0]))


def test_schur_counterexample_corner_entry():
    # shifted 4x4 slack of the sd2 dual at y=(0.2,-0.5,-0.1), t*alpha=0.02;
    # eliminating the (4,4) entry puts 1 + ta - y1 - y3^2/(ta) in the corner
    y1, y2, y3, ta = 0.2, -0.5, -0.1, 0.02
    m = np.array([
        [1 + ta - y1, 0.0, -y3, -y3],
        [0.0, ta - y2, -y1, 0.0],
        [-y3, -y1, -y3 + ta, 0.0],
        [-y3, 0.0, 0.0, ta],
    ])
    out = schur_complement(m, BlockSplit(r=3, n=4)).dense()
    assert out[0, 0] == pytest.approx(1 + ta - y1 - y3 ** 2 / ta, abs=1e-12)


def test_schur_singular_block_raises():
    m = np.diag([1.0, 1.0, 0.0])
    with pytest.raises(SingularBlock):
        schur_complement(m, BlockSplit(r=2, n=3))


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_schur_pd_agreement(seed):
    # eigenvalue oracle: M is PD iff its Schur complement is, given a PD
    # trailing block
    rng = np.random.default_rng(seed)
    m = rand_sym(rng, 3)
    m[2, 2] = abs(m[2, 2]) + 1.0
    split = BlockSplit(r=2, n=3)
    reduced = schur_complement(m, split, tol=0.0)
    assert (min_eig(m) > 0) == (min_eig(reduced) > 0)


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_schur_pd_preserved_on_random_pd(seed):
    m = rand_pd(np.random.default_rng(seed), 4)
    out = schur_complement(m, BlockSplit(r=2, n=4), tol=0.0)
    assert min_eig(out) > 0


def test_congruence_identity_and_scaling():
    m = SymMatrix.from_dense(np.array([[1.0, 0.5], [0.5, 2.0]]))
    assert congruence(m, np.eye(2)).allclose(m)
    four = congruence(identity(2), 2.0 * np.eye(2))
    assert np.allclose(four.dense(), 4.0 * np.eye(2))


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_congruence_preserves_inertia_sign(seed):
    # Sylvester: V M V^T has the same signature as M for nonsingular V
    rng = np.random.default_rng(seed)
    m = rand_sym(rng, 3)
    v = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
    if abs(np.linalg.det(v)) < 1e-6:
        return
    out = congruence(m, v)
    assert np.sign(min_eig(out)) == np.sign(min_eig(m))


def test_congruence_rejects_ill_conditioned():
    v = np.diag([1.0, 1e-13])
    with pytest.raises(IllConditioned):
        congruence(identity(2), v)


def test_block_split_validation_and_views():
    with pytest.raises(ValueError):
        BlockSplit(r=3, n=2)
    split = BlockSplit(r=1, n=3)
    m = np.arange(9, dtype=float).reshape(3, 3)
    m = 0.5 * (m + m.T)
    m11, m12, m22 = split.blocks(m)
    assert m11.shape == (1, 1) and m12.shape == (1, 2) and m22.shape == (2, 2)
    rebuilt = np.block([[m11, m12], [m12.T, m22]])
    assert np.array_equal(rebuilt, m)


def test_frobenius_norm_exact_through_packing():
    rng = np.random.default_rng(3)
    m = rand_sym(rng, 4)
    sm = SymMatrix.from_dense(m)
    assert sm.norm() == pytest.approx(np.linalg.norm(m), rel=1e-14)
    assert sm.trace() == pytest.approx(np.trace(m), rel=1e-14)
