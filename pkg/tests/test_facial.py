import json

import numpy as np
import pytest

from gapscope.errors import (
    NotInPerturbationSpace,
    PreconditionViolated,
    WitnessNotFound,
)
from gapscope.facial import (
    DUAL,
    PRIMAL,
    PerturbationS,
    certificate_json,
    decompose_perturbation,
    facial_reduction,
    find_reducing_direction,
    reduce_to_rd,
    singularity_degree,
    w_of_S,
)
from gapscope.linalg import is_psd, min_eig


def off_support_mass(mat, idx):
    total = np.abs(mat).sum()
    return total - abs(mat[idx, idx])


# --- reducing directions ----------------------------------------------------

def test_ramana_dual_direction_is_e33(ramana):
    # C.s = s11 = 0 and A2.s = s22 = 0 force rows 1, 2 to vanish under
    # psd-ness, so every direction is a multiple of E33
    d = find_reducing_direction(ramana.instance, DUAL).dense()
    assert d[2, 2] == pytest.approx(1.0, abs=1e-8)
    assert off_support_mass(d, 2) <= 1e-6
    assert min_eig(d) >= -1e-10


def test_sd2_first_direction_supported_on_corner(sd2):
    d = find_reducing_direction(sd2.instance, DUAL).dense()
    assert d[3, 3] == pytest.approx(1.0, abs=1e-8)
    assert off_support_mass(d, 3) <= 1e-6


def test_control_has_no_direction(control):
    assert find_reducing_direction(control.instance, DUAL) is None
    assert find_reducing_direction(control.instance, PRIMAL) is None


def test_side_validation(ramana):
    with pytest.raises(ValueError):
        find_reducing_direction(ramana.instance, "sideways")


# --- chains ------------------------------------------------------------------

def test_ramana_chains_one_step_each_side(ramana, ramana_dual_chain):
    assert ramana_dual_chain.sd_upper == 1
    assert ramana_dual_chain.ranks == [2]
    primal = facial_reduction(ramana.instance, PRIMAL)
    assert primal.sd_upper == 1
    # the primal direction is y2 * A2 with b^T y = y1 = 0, i.e. E22
    d = primal.directions[0].dense()
    assert d[1, 1] == pytest.approx(1.0, abs=1e-8)
    assert off_support_mass(d, 1) <= 1e-6


def test_sd2_dual_chain_two_steps(sd2_dual_chain):
    assert sd2_dual_chain.sd_upper == 2
    assert singularity_degree(sd2_dual_chain) == 2
    assert sd2_dual_chain.ranks == [3, 2]
    assert sd2_dual_chain.r == 2


def test_control_chain_empty(control):
    for side in (PRIMAL, DUAL):
        chain = facial_reduction(control.instance, side)
        assert chain.sd_upper == 0
        assert chain.ranks == []
        assert chain.r == control.instance.n


def test_chain_invariants(sd2, sd2_dual_chain):
    chain = sd2_dual_chain
    # ranks strictly decrease and the count is bounded by the dimension
    assert all(a > b for a, b in zip([sd2.instance.n] + chain.ranks,
                                     chain.ranks))
    assert chain.sd_upper <= sd2.instance.n
    data = [sd2.instance.C_dense] + list(sd2.instance.A_dense)
    for step in chain.steps:
        # orthogonality of the full direction to every data matrix
        d = step.direction.dense()
        assert max(abs(float(np.tensordot(d, m))) for m in data) <= 1e-8
        # the on-face block is psd even where the full direction is not
        assert step.face_block_mineig >= -1e-10
    # first-step direction lies in the full cone
    assert min_eig(chain.directions[0]) >= -1e-10
    # V is orthogonal, so rescaling preserves feasibility exactly
    assert np.allclose(chain.V @ chain.V.T, np.eye(sd2.instance.n),
                       atol=1e-12)


def test_certificate_json_shape(ramana_dual_chain):
    payload = json.loads(certificate_json(ramana_dual_chain))
    assert payload["side"] == DUAL
    assert payload["steps"] == 1
    assert payload["ranks"] == [2]
    assert len(payload["directions"]) == 1
    assert len(payload["V"]) == 3
    assert payload["residuals"]["orthogonality"][0] <= 1e-8


# --- reduced problem ---------------------------------------------------------

def test_reduce_to_rd_blocks_match_hand_reduction(ramana_red):
    # with V = I the blocks are L11 = diag(1-y1, -y2), L12 = (0, -y1)^T,
    # L22 = 0
    y = np.array([0.3, -0.7])
    assert np.allclose(ramana_red.L11(y), np.diag([0.7, 0.7]), atol=1e-9)
    assert np.allclose(ramana_red.L12(y).ravel(), [0.0, -0.3], atol=1e-9)
    assert np.allclose(ramana_red.L22(y), [[0.0]], atol=1e-9)
    assert ramana_red.l12sq(y) == pytest.approx(0.09, abs=1e-9)
    assert ramana_red.l11(y) == pytest.approx(1.4, abs=1e-9)
    assert ramana_red.l22(y) == pytest.approx(0.0, abs=1e-9)


def test_rd_value_and_witness(ramana_red):
    zero = PerturbationS(0.0, np.zeros((2, 1)), np.zeros((1, 1)))
    assert w_of_S(ramana_red, zero) == pytest.approx(0.0, abs=1e-6)
    assert ramana_red.witness_mineig > 0
    # the hand witness (0, -1) gives L11 = I
    assert min_eig(ramana_red.L11([0.0, -1.0])) == pytest.approx(1.0,
                                                                 abs=1e-12)


def test_reduce_to_rd_requires_dual_chain(ramana):
    primal = facial_reduction(ramana.instance, PRIMAL)
    with pytest.raises(PreconditionViolated):
        reduce_to_rd(ramana.instance, primal)


def test_sd2_rd_value_zero(sd2_red):
    k = sd2_red.n - sd2_red.r
    zero = PerturbationS(0.0, np.zeros((sd2_red.r, k)), np.zeros((k, k)))
    assert w_of_S(sd2_red, zero) == pytest.approx(0.0, abs=1e-6)


# --- perturbation space -------------------------------------------------------

def test_decompose_identity(ramana_red):
    pert = decompose_perturbation(ramana_red, np.eye(3))
    assert pert.s11 == 1.0
    assert np.allclose(pert.S12, 0.0)
    assert np.allclose(pert.S22, np.eye(1))


def test_decompose_accepts_realizable_offdiagonal(ramana_red):
    # L12(y-hat) = (0, -y-hat_1): the (2,3) slot is reachable with
    # y-hat = (0.05, .)
    s = np.zeros((3, 3))
    s[0, 0] = s[1, 1] = 0.1
    s[1, 2] = s[2, 1] = -0.05
    s[2, 2] = 0.1
    pert = decompose_perturbation(ramana_red, s)
    assert pert.s11 == pytest.approx(0.1)
    assert np.allclose(pert.S12.ravel(), [0.0, -0.05])


def test_decompose_rejects_unreachable_slot(ramana_red):
    # the (1,3) component of L12 is identically zero, so mass there is
    # outside the admissible space
    s = np.zeros((3, 3))
    s[0, 2] = s[2, 0] = 1.0
    with pytest.raises(NotInPerturbationSpace) as err:
        decompose_perturbation(ramana_red, s)
    assert err.value.residual is None or err.value.residual > 1e-8


def test_decompose_rejects_non_scalar_leading_block(ramana_red):
    s = np.zeros((3, 3))
    s[0, 0] = 0.2
    s[1, 1] = 0.1
    with pytest.raises(NotInPerturbationSpace):
        decompose_perturbation(ramana_red, s)


def test_w_of_s_one_variable_reduction(ramana_red):
    # L12(y) = S12 forces y1 = 0.05; the objective is y1 alone
    s = np.zeros((3, 3))
    s[0, 0] = s[1, 1] = 0.1
    s[1, 2] = s[2, 1] = -0.05
    s[2, 2] = 0.1
    pert = decompose_perturbation(ramana_red, s)
    assert w_of_S(ramana_red, pert) == pytest.approx(0.05, abs=1e-6)


def test_w_of_s_halving_sequence_tends_to_zero(ramana_red):
    s = np.zeros((3, 3))
    s[0, 0] = s[1, 1] = 0.1
    s[1, 2] = s[2, 1] = -0.05
    s[2, 2] = 0.1
    values = []
    for k in range(6):
        pert = decompose_perturbation(ramana_red, s / 2 ** k)
        values.append(w_of_S(ramana_red, pert))
    assert values == pytest.approx([0.05 / 2 ** k for k in range(6)],
                                   abs=1e-7)


def test_rank_complement_certificate(ramana_red, ramana_dual_chain):
    # on a degree-1 dual chain the rescaled direction has a vanishing
    # leading block and positive definite trailing block
    d = ramana_dual_chain.direction_rescaled(0)
    x11, x12, x22 = ramana_red.split.blocks(d)
    assert np.abs(x11).max() <= 1e-8
    assert np.abs(x12).max() <= 1e-8
    assert min_eig(x22) > 0.5
