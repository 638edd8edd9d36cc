import numpy as np
import pytest

from gapscope.errors import ValueDisagreement
from gapscope.linalg import min_eig
from gapscope.model import make_instance, objective_and_residuals, perturb
from gapscope.solver import SolveOptions, Status, solve, solve_pair

from conftest import rand_pd


def test_scalar_instance():
    # max y s.t. 1 - y >= 0 and its primal min x s.t. x = 1
    inst = make_instance(np.array([[1.0]]), [np.array([[1.0]])], [1.0])
    res = solve(inst)
    assert res.status == Status.OPTIMAL
    assert res.dual_value == pytest.approx(1.0, abs=1e-8)
    assert res.primal_value == pytest.approx(1.0, abs=1e-8)


def test_min_trace_rank_one_optimum():
    # min trace(X) s.t. X11 = 1: optimum 1, approached by X -> E11
    inst = make_instance(np.eye(2), [np.diag([1.0, 0.0])], [1.0])
    res = solve(inst)
    assert res.status == Status.OPTIMAL
    assert res.primal_value == pytest.approx(1.0, abs=1e-7)
    assert res.X.dense()[0, 0] == pytest.approx(1.0, abs=1e-6)
    assert res.X.dense()[1, 1] <= 1e-6


def _grid_oracle_ramana(eps, eta):
    """Brute-force maximum of the regularized ramana dual.

    Feasibility of (y1, y2) by the explicit Schur conditions of the
    3x3 slack; coarse grid then two local refinements down to 1e-4.
    """
    def value(y1, y2):
        return (1.0 + eta) * y1 + eta * y2

    def feasible(y1, y2):
        return (1.0 + eps - y1 >= 0 and eps - y2 >= 0
                and (eps - y2) * eps - y1 * y1 >= 0)

    lo1, hi1 = 0.0, 1.0 + eps
    lo2, hi2 = eps - (1.0 + eps) ** 2 / eps, eps
    best = (0.0, 0.0)
    step1 = (hi1 - lo1) / 100
    step2 = (hi2 - lo2) / 100
    for _ in range(3):
        grid1 = np.arange(lo1, hi1 + step1, step1)
        grid2 = np.arange(lo2, hi2 + step2, step2)
        vals = [((y1, y2)) for y1 in grid1 for y2 in grid2
                if feasible(y1, y2)]
        best = max(vals, key=lambda p: value(*p))
        lo1, hi1 = best[0] - 2 * step1, best[0] + 2 * step1
        lo2, hi2 = best[1] - 2 * step2, best[1] + 2 * step2
        step1 /= 25
        step2 /= 25
    return value(*best)


def test_ramana_perturbed_matches_grid_oracle(ramana):
    oracle = _grid_oracle_ramana(0.1, 0.1)
    # the exact optimum is eta*eps + (1+eta)^2 eps / (4 eta) = 0.3125
    assert oracle == pytest.approx(0.3125, abs=2e-4)
    res, v = solve_pair(perturb(ramana.instance, 0.1, 0.1))
    assert res.status == Status.OPTIMAL
    assert v == pytest.approx(oracle, abs=1e-4)


def test_solver_deterministic_bit_identical(ramana):
    pair = perturb(ramana.instance, 1e-3, 1e-3)
    a = solve(pair.instance)
    b = solve(pair.instance)
    assert np.array_equal(a.X.packed, b.X.packed)
    assert np.array_equal(a.S.packed, b.S.packed)
    assert np.array_equal(a.y, b.y)
    assert a.primal_value == b.primal_value
    assert a.dual_value == b.dual_value
    assert a.iters == b.iters


def test_optimal_result_invariants(ramana):
    opts = SolveOptions()
    res = solve(perturb(ramana.instance, 1e-2, 1e-2).instance, opts)
    assert res.status == Status.OPTIMAL
    scale = 1.0 + abs(res.primal_value) + abs(res.dual_value)
    assert res.gap <= opts.tol_gap * scale
    assert min_eig(res.X) >= -opts.tol_feas
    assert min_eig(res.S) >= -opts.tol_feas
    # weak duality at the returned near-feasible point
    assert res.primal_value >= res.dual_value - 10 * opts.tol_gap * scale


def test_solve_pair_returns_midpoint(ramana):
    pair = perturb(ramana.instance, 1e-2, 1e-2)
    res, v = solve_pair(pair)
    assert v == pytest.approx(
        0.5 * (res.primal_value + res.dual_value), abs=0.0)


def test_solve_pair_flags_boundary_disagreement(sd2):
    # eta-only regularization of the sd2 pair has no dual interior; the
    # solver stalls with a small but over-tolerance primal/dual spread
    with pytest.raises(ValueDisagreement):
        solve_pair(perturb(sd2.instance, 0.0, 1e-4))


def test_sd2_interior_value_between_bounds(sd2):
    res, v = solve_pair(perturb(sd2.instance, 1e-3, 1e-3))
    assert 0.0 < v < 1.0


def test_ramana_interior_value_between_bounds(ramana):
    res, v = solve_pair(perturb(ramana.instance, 1e-3, 1e-3))
    assert 0.0 < v < 1.0
    # closed form: t^2 + (1+t)^2/4 at eps = eta = t
    t = 1e-3
    assert v == pytest.approx(t * t + (1 + t) ** 2 / 4, abs=1e-8)


def test_unbounded_primal_detected():
    inst = make_instance(-np.eye(2), [np.diag([1.0, 0.0])], [1.0])
    res = solve(inst)
    assert res.status == Status.UNBOUNDED


def test_infeasible_primal_detected():
    inst = make_instance(np.eye(2), [np.diag([1.0, 0.0])], [-1.0])
    res = solve(inst)
    assert res.status == Status.INFEASIBLE_DETECTED


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_strongly_feasible_instances(seed):
    rng = np.random.default_rng(seed)
    n, m = 4, 3
    a_mats = []
    while len(a_mats) < m:
        g = rng.standard_normal((n, n))
        a_mats.append(0.5 * (g + g.T))
    x0 = rand_pd(rng, n)
    s0 = rand_pd(rng, n)
    y0 = rng.standard_normal(m)
    c = s0 + sum(yi * a for yi, a in zip(y0, a_mats))
    b = [float(np.tensordot(a, x0)) for a in a_mats]
    inst = make_instance(c, a_mats, b)
    res = solve(inst)
    assert res.status == Status.OPTIMAL
    rep = objective_and_residuals(inst, res.X, res.y, res.S)
    scale = 1.0 + abs(rep.primal_value) + abs(rep.dual_value)
    assert abs(rep.primal_value - rep.dual_value) <= 1e-7 * scale
    assert rep.primal_res <= 1e-7 * scale
    assert rep.dual_res <= 1e-7 * scale


def test_solve_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(tol_gap=0.0)
    with pytest.raises(ValueError):
        SolveOptions(step_fraction=1.0)
    with pytest.raises(ValueError):
        SolveOptions(max_iters=0)


def test_log_sink_receives_lines(ramana):
    lines = []
    solve(perturb(ramana.instance, 1e-2, 1e-2).instance, log=lines.append)
    assert lines and "iter" in lines[0]
