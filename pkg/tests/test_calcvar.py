import json
import math
from dataclasses import replace

import numpy as np
import pytest

from intfunc.calcvar import (
    Adjoint,
    AffineEnds,
    Arc,
    BallEnds,
    BolzaProblem,
    EndpointCost,
    FreeEnds,
    LeftPinned,
    ModulusEstimationError,
    PinnedEnds,
    _default_init,
    adjoint_reconstruct,
    estimate_K0,
    euler_lagrange_residual,
    objective,
    penalized_objective,
    problem_from_description,
    solve,
)
from intfunc.cli import PROBLEMS_DIR
from intfunc.grid import Curve, StepFunction, StructuralError, TimeGrid
from intfunc.integrand import abs_dev, quadratic

LQ = {"lagrangian": {"kind": "quadratic", "center": [0, 0], "dim": 2}, "constraint": {"kind": "pinned", "u": [0], "w": [1]}}
KINETIC = {"kind": "quadratic", "center": [0, 0], "weight": [0, 1], "dim": 2}
ABS_VEL = {"kind": "sum", "terms": [{"kind": "weighted_l1", "weights": [0, 1]}, {"kind": "affine", "slope": [1, 0]}], "dim": 2}


def arc_of(fun, N):
    g = TimeGrid.uniform(0, 1, N)
    return Arc.from_curve(Curve(g, fun(g.nodes)))


def certified(desc, N):
    P = problem_from_description(desc)
    init = _default_init(P, P.grid(N))
    K0 = estimate_K0(P, init)
    arc = solve(P, init, 2 * K0)
    return P, arc, adjoint_reconstruct(P, arc)


@pytest.fixture(scope="module")
def lq200():
    return certified(LQ, 200)


# -- objective, K0, penalty ----------------------------------------------------------


def test_objective_examples():
    P = problem_from_description({"lagrangian": KINETIC})
    assert objective(P, arc_of(lambda t: t, 50)) == pytest.approx(0.5)
    P = problem_from_description({"lagrangian": KINETIC, "endpoint_cost": "u**2 + w**2"})
    assert objective(P, arc_of(lambda t: 0 * t, 50)) == 0.0
    P = problem_from_description(LQ)
    val = objective(P, arc_of(lambda t: np.sinh(t) / np.sinh(1), 500))
    assert val == pytest.approx(1 / (2 * np.tanh(1)), abs=1e-4)


def test_problem_dimension_checks():
    f = quadratic(dim=3)
    with pytest.raises(StructuralError):
        BolzaProblem(1, 0, 1, f, EndpointCost.zero(1), FreeEnds(1))
    with pytest.raises(StructuralError):
        BolzaProblem(1, 1, 0, quadratic(dim=2), EndpointCost.zero(1), FreeEnds(1))


def _with_modulus(k):
    f = abs_dev(center=[0.0, 0.0], dim=2)
    return replace(f, lipschitz=k)


def test_K0_examples():
    anchor = arc_of(lambda t: 0 * t, 50)
    P = BolzaProblem(1, 0, 1, _with_modulus(lambda t: np.ones(np.shape(t))), EndpointCost.from_expression("w", 1), FreeEnds(1))
    assert estimate_K0(P, anchor) == pytest.approx(2.0, abs=1e-6)
    P = BolzaProblem(1, 0, 1, _with_modulus(lambda t: np.zeros(np.shape(t))), EndpointCost.zero(1), FreeEnds(1))
    assert estimate_K0(P, anchor) == 0.0
    anchor = arc_of(lambda t: t, 50)
    P = BolzaProblem(1, 0, 1, _with_modulus(lambda t: np.asarray(t)), EndpointCost.from_expression("abs(w - 1)", 1), FreeEnds(1))
    assert estimate_K0(P, anchor) == pytest.approx(1.5, abs=1e-3)


def test_K0_divergent_quotients():
    anchor = arc_of(lambda t: 0 * t, 10)
    P = BolzaProblem(1, 0, 1, _with_modulus(lambda t: np.ones(np.shape(t))), EndpointCost.from_expression("sqrt(abs(w))", 1), FreeEnds(1))
    with pytest.raises(ModulusEstimationError):
        estimate_K0(P, anchor)


def test_penalized_objective_examples():
    P = problem_from_description({"lagrangian": KINETIC, "constraint": {"kind": "pinned", "u": [0], "w": [1]}})
    arc = arc_of(lambda t: t, 20)
    assert penalized_objective(P, arc, 5.0) == pytest.approx(objective(P, arc))
    arc = arc_of(lambda t: 1.5 * t, 20)
    assert penalized_objective(P, arc, 2.0) == pytest.approx(objective(P, arc) + 1.0)
    P = problem_from_description({"lagrangian": KINETIC, "constraint": {"kind": "affine", "A": [[1, -1]], "c": [0]}})
    arc = arc_of(lambda t: 0.3 * t, 20)
    assert penalized_objective(P, arc, 10.0) == pytest.approx(objective(P, arc) + 10 * 0.3 / math.sqrt(2))
    with pytest.raises(ValueError):
        penalized_objective(P, arc, 0.0)


@pytest.mark.parametrize(
    "S, z",
    [
        (PinnedEnds([0.0], [1.0]), [3.0, -2.0]),
        (LeftPinned([0.5]), [3.0, -2.0]),
        (AffineEnds([[1.0, -1.0]], [0.2]), [3.0, -2.0]),
        (BallEnds([0.0, 1.0], 0.2), [3.0, -2.0]),
        (FreeEnds(1), [3.0, -2.0]),
    ],
    ids=["pinned", "left", "affine", "ball", "free"],
)
def test_endpoint_set_projection(S, z):
    p = S.project(np.array(z))
    assert S.contains(p, 1e-9)
    np.testing.assert_allclose(S.project(p), p, atol=1e-12)
    # no feasible point is closer than the projection
    rng = np.random.default_rng(0)
    cand = S.project(p + rng.normal(size=(500, 2)))
    assert np.all(np.linalg.norm(cand - z, axis=1) >= np.linalg.norm(p - z) - 1e-12)


# -- solver and certificate on LQ ------------------------------------------------------


def test_lq_solution(lq200):
    P, arc, adj = lq200
    g = arc.grid
    assert np.max(np.abs(arc.x.values[:, 0] - np.sinh(g.nodes) / np.sinh(1))) <= 1e-3
    assert objective(P, arc) == pytest.approx(1 / (2 * np.tanh(1)), abs=1e-4)
    assert np.max(np.abs(adj.p_curve.values[:, 0] - np.cosh(g.nodes) / np.sinh(1))) <= 1e-2
    rep = euler_lagrange_residual(P, arc, adj)
    assert rep.passed and rep.residual <= 1e-2
    assert arc.info["infeasibility"] <= 1e-4


def test_solver_history_is_monotone(lq200):
    h = np.asarray(lq200[1].info["history"])
    assert np.all(np.diff(h) <= 1e-12)


def test_adjoint_is_integral_of_pdot(lq200):
    _, arc, adj = lq200
    g = arc.grid
    p = adj.p_curve.values[:, 0]
    tail = np.concatenate([np.cumsum((adj.pdot.cell_values[:, 0] * g.widths)[::-1])[::-1], [0.0]])
    np.testing.assert_allclose(p[-1] - p, tail, atol=1e-12)


@pytest.mark.parametrize("shift", [0.1, 0.5])
def test_certificate_rejects_shifted_costate(lq200, shift):
    P, arc, adj = lq200
    bad = Adjoint(Curve(adj.p_curve.grid, adj.p_curve.values + shift), adj.pdot)
    rep = euler_lagrange_residual(P, arc, bad)
    assert not rep.passed
    assert rep.residual == pytest.approx(shift, rel=0.2)


def test_certificate_rejects_corrupted_arc(lq200):
    P, arc, adj = lq200
    g = arc.grid
    y = arc.y.cell_values.copy()
    y[80:120] += 0.5 * np.sin(np.linspace(0, 2 * np.pi, 40))[:, None]  # endpoints unchanged, sup change 0.1
    rep = euler_lagrange_residual(P, Arc(arc.u, StepFunction(g, y)), adj)
    assert not rep.passed


def test_lq_convergence_order():
    errs = []
    for N in (25, 50, 100):
        _, arc, _ = certified(LQ, N)
        g = arc.grid
        errs.append(np.max(np.abs(arc.x.values[:, 0] - np.sinh(g.nodes) / np.sinh(1))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.9), (errs, orders)


# -- other catalog problems -------------------------------------------------------------


def test_pinned_kinetic_gives_zero_arc():
    P, arc, adj = certified({"lagrangian": KINETIC, "constraint": {"kind": "pinned", "u": [0], "w": [0]}}, 50)
    assert np.max(np.abs(arc.x.values)) <= 1e-8
    rep = euler_lagrange_residual(P, arc, adj)
    assert rep.passed and rep.residual <= 1e-6


def test_free_right_end_forces_zero_costate():
    P, arc, adj = certified({"lagrangian": KINETIC, "constraint": {"kind": "left-pinned", "u": [0.3]}}, 50)
    np.testing.assert_allclose(arc.x.values, 0.3, atol=1e-6)
    np.testing.assert_allclose(adj.p_curve.values, 0.0, atol=1e-6)
    assert euler_lagrange_residual(P, arc, adj).passed


def test_abs_velocity_costate_slope():
    desc = {"lagrangian": ABS_VEL, "endpoint_cost": "(w - 1)**2/2", "constraint": {"kind": "left-pinned", "u": [0]}}
    P, arc, adj = certified(desc, 100)
    np.testing.assert_allclose(adj.pdot.cell_values, 1.0, atol=1e-9)   # d/dx of (x + |v|) is 1
    assert np.all(np.abs(adj.p_curve.values) <= 1 + 1e-2)               # p in d|v| = [-1, 1]
    assert euler_lagrange_residual(P, arc, adj).passed


@pytest.mark.parametrize("path", sorted(PROBLEMS_DIR.glob("bolza_*.json")), ids=lambda p: p.stem)
def test_bundled_problems_are_certified(path):
    body = json.loads(path.read_text())["body"]
    P, arc, adj = certified(body, int(body.get("N", 100)))
    assert arc.info["infeasibility"] <= 1e-4
    assert penalized_objective(P, arc, arc.info["K"]) == pytest.approx(objective(P, arc), abs=1e-4)
    assert euler_lagrange_residual(P, arc, adj).passed
