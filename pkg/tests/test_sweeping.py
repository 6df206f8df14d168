import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from intfunc.cli import PROBLEMS_DIR
from intfunc.grid import StructuralError, TimeGrid
from intfunc.sets import MovingBall, MovingBox, Piecewise, set_from_description
from intfunc.sweeping import (
    FAULTS,
    BVSolution,
    catching_up,
    check_differential_measure,
    check_integral_solution,
    coupled_tolerance,
    equivalence_report,
    generate_test_selections,
    grid_with_jumps,
    hausdorff_lipschitz_estimate,
    inject_fault,
)

CORRIDOR = MovingBox(lambda t: t, lambda t: t + 1)
JUMP = Piecewise([(-np.inf, MovingBox(0.0, 1.0)), (0.5, MovingBox(2.0, 3.0))])
SWEEPS = sorted(p for p in PROBLEMS_DIR.glob("sweep_*.json") if "fault" not in p.stem)


def scenario(path, N=None):
    body = json.loads(path.read_text())["body"]
    C = set_from_description(body["set"])
    g = grid_with_jumps(C, body.get("a", 0.0), body.get("b", 1.0), N or body.get("N", 200))
    return C, catching_up(C, body["x0"], g)


# -- catching-up ------------------------------------------------------------------


def test_corridor_push():
    g = TimeGrid.uniform(0, 1, 400)
    sol = catching_up(CORRIDOR, [0.5], g)
    assert np.max(np.abs(sol.x_right[:, 0] - np.maximum(0.5, g.nodes))) <= 2 * 1 / 400
    assert sol.jump_nodes == ()


def test_idle_in_fixed_ball():
    g = TimeGrid.uniform(0, 1, 50)
    sol = catching_up(MovingBall([0.0, 0.0], 1.0, dim=2), [0.0, 0.0], g)
    assert not sol.x_right.any() and not sol.density.any()


def test_single_jump():
    g = grid_with_jumps(JUMP, 0, 1, 10)
    sol = catching_up(JUMP, [0.5], g)
    k = int(np.flatnonzero(g.nodes == 0.5)[0])
    assert sol.jump_nodes == (k,)
    np.testing.assert_allclose(sol.x_right[:k, 0], 0.5)
    np.testing.assert_allclose(sol.x_right[k:, 0], 2.0)
    assert sol.x_left[k, 0] == 0.5
    np.testing.assert_allclose(sol.atom_density, [[1.5]])
    assert sol.measure.atoms == ((k, 1.0),)


def test_jump_must_be_a_node():
    with pytest.raises(StructuralError):
        catching_up(JUMP, [0.5], TimeGrid.uniform(0, 1, 3))


def test_infeasible_start():
    with pytest.raises(ValueError):
        catching_up(CORRIDOR, [2.0], TimeGrid.uniform(0, 1, 4))
    with pytest.raises(StructuralError):
        catching_up(CORRIDOR, [0.5, 0.5], TimeGrid.uniform(0, 1, 4))


@pytest.mark.parametrize("path", SWEEPS, ids=lambda p: p.stem)
def test_feasibility_consistency_and_projection_inequality(path):
    C, sol = scenario(path, 100)
    g = sol.grid
    assert np.all(C.contains(g.nodes, sol.x_right, 1e-9))
    assert sol.consistency_residual() <= 1e-12
    # discrete projection inequality <x_{k+1} - x_k, y - x_{k+1}> >= 0 for y in C(t_{k+1})
    d = sol.x_left[1:] - sol.x_right[:-1]
    lhs = np.sum(d * sol.x_left[1:], axis=1) + C.support(g.nodes[1:], -d)
    jumps = set(sol.jump_nodes) | {k for k in range(g.nodes.size) if g.nodes[k] in C.jump_times}
    keep = np.array([k + 1 not in jumps for k in range(g.n_cells)])
    assert np.all(lhs[keep] <= 1e-9 * (1 + np.linalg.norm(d[keep], axis=1)))


def test_bv_solution_evaluation():
    g = TimeGrid.uniform(0, 1, 2)
    sol = BVSolution(g, [[0.0], [1.0], [1.0]], [[0.0], [0.5], [1.0]], (1,))
    assert sol(0.25)[0] == pytest.approx(0.25)
    assert sol(0.5)[0] == 1.0
    assert sol(1.0)[0] == 1.0
    np.testing.assert_allclose(sol.density[:, 0], [1.0, 0.0])
    np.testing.assert_allclose(sol.atom_density, [[0.5]])
    assert sol.rc_constant()(0.49)[0] == 0.0
    with pytest.raises(StructuralError):
        BVSolution(g, [[0.0], [1.0]], [[0.0], [1.0]])


# -- Hausdorff rate and tolerances ------------------------------------------------------


def test_hausdorff_examples():
    g = TimeGrid.uniform(0, 1, 100)
    assert hausdorff_lipschitz_estimate(CORRIDOR, g) == pytest.approx(1.0, abs=1e-9)
    assert hausdorff_lipschitz_estimate(MovingBall([1.0, 2.0], 1.0, dim=2), g) == 0.0
    grow = MovingBall([0.0, 0.0], lambda t: 1 + np.asarray(t) / 2, dim=2)
    assert hausdorff_lipschitz_estimate(grow, g) == pytest.approx(0.5, abs=1e-9)
    # pairs straddling the jump are skipped
    assert hausdorff_lipschitz_estimate(JUMP, grid_with_jumps(JUMP, 0, 1, 10)) == 0.0


def test_coupled_tolerance():
    g = TimeGrid.uniform(0, 1, 100)
    assert coupled_tolerance(CORRIDOR, g) == pytest.approx(2 * 2 * 0.01)
    assert coupled_tolerance(CORRIDOR, g, c=1.0, kappa=0.0) == pytest.approx(0.01)


# -- selections ------------------------------------------------------------------------


def test_selections_trace_the_boundary():
    g = TimeGrid.uniform(0, 1, 50)
    sels = generate_test_selections(CORRIDOR, 16, g)
    assert len(sels) == 16
    rights = [s.right[:, 0] for s in sels]
    assert any(np.allclose(r, g.nodes + 1) for r in rights)
    assert any(np.allclose(r, g.nodes) for r in rights)
    for s in sels:
        assert np.all(CORRIDOR.contains(g.nodes, s.right, 1e-9))


def test_selections_in_fixed_ball_are_constant():
    g = TimeGrid.uniform(0, 1, 20)
    for s in generate_test_selections(MovingBall([0.0, 0.0], 1.0, dim=2), 32, g):
        np.testing.assert_allclose(s.right - s.right[0], 0.0, atol=1e-12)


def test_selections_are_deterministic():
    g = TimeGrid.uniform(0, 1, 20)
    a = generate_test_selections(CORRIDOR, 12, g, seed=4)
    b = generate_test_selections(CORRIDOR, 12, g, seed=4)
    for s, t in zip(a, b):
        np.testing.assert_array_equal(s.mid, t.mid)


# -- checkers --------------------------------------------------------------------------


def test_checkers_on_constant_interior_solution():
    g = TimeGrid.uniform(0, 1, 20)
    C = MovingBall([0.0], 1.0)
    sol = catching_up(C, [0.2], g)
    assert check_differential_measure(C, sol, 1e-9).passed
    rep = check_integral_solution(C, sol, generate_test_selections(C, 8, g), 1e-9)
    assert rep.passed and rep.residual == 0.0


def test_corridor_checkers_pass_and_sign_flip_fails():
    g = TimeGrid.uniform(0, 1, 200)
    sol = catching_up(CORRIDOR, [0.5], g)
    tol = coupled_tolerance(CORRIDOR, g)
    sels = generate_test_selections(CORRIDOR, 32, g)
    assert check_differential_measure(CORRIDOR, sol, tol).passed
    assert check_integral_solution(CORRIDOR, sol, sels, tol).passed
    bad = inject_fault(sol, "sign-flip")
    rd = check_differential_measure(CORRIDOR, bad, tol)
    ri = check_integral_solution(CORRIDOR, bad, sels, tol)
    assert not rd.passed and not ri.passed
    assert len(rd.witnesses["failing_cells"]) > 0


def test_integral_check_against_explicit_integrand():
    # catching-up on the corridor vs y = t + 1: <1, t + 1 - t> = 1 on the active region t > 1/2
    g = TimeGrid.uniform(0, 1, 200)
    sol = catching_up(CORRIDOR, [0.5], g)
    upper = [s for s in generate_test_selections(CORRIDOR, 16, g) if np.allclose(s.right[:, 0], g.nodes + 1)]
    rep = check_integral_solution(CORRIDOR, sol, upper, 1e-9, localize=False)
    assert rep.passed
    assert rep.witnesses["global_integrals"][0] == pytest.approx(0.5, abs=1e-2)


@pytest.mark.parametrize("kind", sorted(FAULTS))
def test_faults_keep_nodes_and_are_caught(kind):
    C = JUMP if kind == "atom-flip" else CORRIDOR
    g = grid_with_jumps(C, 0, 1, 200)
    sol = catching_up(C, [0.5], g)
    bad = inject_fault(sol, kind, seed=7)
    np.testing.assert_array_equal(bad.x_right, sol.x_right)
    rep = equivalence_report(C, bad)
    assert rep.passed and rep.witnesses["verdict"] == "both fail"


def test_unknown_fault():
    g = TimeGrid.uniform(0, 1, 4)
    with pytest.raises(ValueError):
        inject_fault(catching_up(CORRIDOR, [0.5], g), "gremlin")


@pytest.mark.parametrize("path", SWEEPS, ids=lambda p: p.stem)
def test_clean_scenarios_both_pass(path):
    C, sol = scenario(path)
    rep = equivalence_report(C, sol)
    assert rep.passed and rep.witnesses["verdict"] == "both pass", rep.witnesses


def test_verdict_labels_for_disagreement():
    g = TimeGrid.uniform(0, 1, 100)
    sol = catching_up(CORRIDOR, [0.5], g)
    rep = equivalence_report(CORRIDOR, sol)
    rd, ri = rep.lhs, rep.rhs
    assert rd != ri
    lo, hi = sorted((rd, ri))
    mid = 0.5 * (lo + hi)
    rep = equivalence_report(CORRIDOR, sol, mid)
    assert not rep.passed and rep.witnesses["verdict"] == "violation"
    tolerances = {"differential": mid, "integral": 10.0} if rd > ri else {"differential": 10.0, "integral": mid}
    rep = equivalence_report(CORRIDOR, sol, tolerances)
    assert not rep.passed and rep.witnesses["verdict"] == "inconclusive"


@given(factor=st.floats(1.0, 100.0))
def test_monotone_tolerance(factor):
    g = TimeGrid.uniform(0, 1, 60)
    C = MovingBall(lambda t: np.stack([np.cos(3 * t), np.sin(3 * t)], axis=-1), 0.5, dim=2)
    sol = catching_up(C, [1.0, 0.0], g)
    sels = generate_test_selections(C, 16, g)
    for tol in (0.005, 0.02, 0.1):
        if check_differential_measure(C, sol, tol).passed:
            assert check_differential_measure(C, sol, tol * factor).passed
        if check_integral_solution(C, sol, sels, tol).passed:
            assert check_integral_solution(C, sol, sels, tol * factor).passed


def test_convergence_on_corridor():
    errs = []
    for N in (64, 128, 256, 512):
        g = TimeGrid.uniform(0, 1, N)
        x = catching_up(CORRIDOR, [0.5], g).rc_constant()
        ts = np.linspace(0, 1, 20001)
        errs.append(np.max(np.abs(x(ts)[:, 0] - np.maximum(0.5, ts))))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((1.5 <= ratios) & (ratios <= 3.0)), errs
