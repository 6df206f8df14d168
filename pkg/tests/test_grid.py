import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from intfunc.grid import (
    Curve,
    DiscreteMeasure,
    Report,
    ReportKind,
    StepFunction,
    StructuralError,
    TimeGrid,
    cumulative_integral,
    curve_derivative,
    curve_from_json,
    curve_to_json,
    ext_sum,
    lp_norm,
    quadrature,
    seeded_rng,
)

finite = st.floats(-10, 10, allow_nan=False)


def leb(N=10, a=0.0, b=1.0):
    return DiscreteMeasure.lebesgue(TimeGrid.uniform(a, b, N))


# -- construction -----------------------------------------------------------


def test_grid_rejects_bad_nodes():
    with pytest.raises(StructuralError):
        TimeGrid([0.0])
    with pytest.raises(StructuralError):
        TimeGrid([0.0, 0.5, 0.5, 1.0])
    with pytest.raises(StructuralError):
        TimeGrid([0.0, np.inf])
    with pytest.raises(StructuralError):
        TimeGrid.uniform(0, 1, 0)


def test_grid_basic_geometry():
    g = TimeGrid([0.0, 0.25, 1.0])
    assert g.a == 0.0 and g.b == 1.0 and g.n_cells == 2
    np.testing.assert_allclose(g.widths, [0.25, 0.75])
    np.testing.assert_allclose(g.midpoints, [0.125, 0.625])
    assert g.cell_of(0.25) == 1 and g.cell_of(1.0) == 1 and g.cell_of(0.0) == 0
    assert g.with_nodes([0.5, 0.25]).nodes.tolist() == [0.0, 0.25, 0.5, 1.0]


def test_grid_is_immutable():
    g = TimeGrid.uniform(0, 1, 4)
    with pytest.raises(ValueError):
        g.nodes[0] = 3.0


def test_value_counts_checked():
    g = TimeGrid.uniform(0, 1, 4)
    with pytest.raises(StructuralError):
        Curve(g, np.zeros(4))
    with pytest.raises(StructuralError):
        StepFunction(g, np.zeros(5))
    with pytest.raises(StructuralError):
        Curve(g, np.zeros(5), "cubic")


def test_measure_validation():
    g = TimeGrid.uniform(0, 1, 4)
    with pytest.raises(ValueError):
        DiscreteMeasure(g, [1, 1, -1, 1])
    with pytest.raises(ValueError):
        DiscreteMeasure(g, 1.0, ((2, -0.5),))
    with pytest.raises(StructuralError):
        DiscreteMeasure(g, 1.0, ((9, 1.0),))
    m = DiscreteMeasure(g, 2.0, ((4, 0.5), (0, 1.0)))
    assert m.atoms == ((0, 1.0), (4, 0.5))
    assert m.total_mass == pytest.approx(3.5)


def test_rc_constant_curve_is_right_continuous():
    g = TimeGrid.uniform(0, 1, 2)
    c = Curve(g, [0.0, 1.0, 2.0], "rc-constant")
    assert c(0.5)[0] == 1.0
    assert c(0.4999)[0] == 0.0
    assert c(1.0)[0] == 2.0
    np.testing.assert_allclose(Curve(g, [0.0, 1.0, 2.0])(0.25), [0.5])


# -- quadrature -------------------------------------------------------------


def test_quadrature_examples():
    m = leb(1000)
    assert quadrature(np.ones(1000), m) == pytest.approx(1.0)
    assert quadrature(np.zeros(1000), m) == 0.0
    # int_0^1 t dt = 1/2 (oracle: antiderivative)
    assert quadrature(m.grid.midpoints, m) == pytest.approx(0.5, abs=1e-6)


def test_quadrature_atoms_need_node_samples():
    g = TimeGrid.uniform(0, 1, 4)
    m = DiscreteMeasure.lebesgue(g, [(2, 3.0)])
    with pytest.raises(StructuralError):
        quadrature(np.ones(4), m)
    assert quadrature(np.ones(4), m, np.arange(5.0)) == pytest.approx(1.0 + 3.0 * 2.0)


def test_quadrature_length_mismatch():
    with pytest.raises(StructuralError):
        quadrature(np.ones(3), leb(4))


def test_quadrature_infinity_convention():
    m = leb(4)
    assert quadrature([0, np.inf, 1, 1], m) == math.inf
    # zero-measure cells do not see +inf
    z = DiscreteMeasure(m.grid, [1, 0, 1, 1])
    assert quadrature([0, np.inf, 1, 1], z) == pytest.approx(0.5)
    assert ext_sum([math.inf, -math.inf, 1.0]) == math.inf


@pytest.mark.parametrize("fun", [np.sin, np.exp, lambda t: 1 / (1 + t * t)])
def test_quadrature_refinement_order_against_scipy(fun):
    exact = quad(fun, 0.0, 2.0)[0]
    errs = []
    for N in (40, 80, 160):
        m = leb(N, 0.0, 2.0)
        errs.append(abs(quadrature(fun(m.grid.midpoints), m) - exact))
    for e0, e1 in zip(errs, errs[1:]):
        assert 3.0 < e0 / e1 < 5.0


def test_quadrature_density_against_scipy():
    g = TimeGrid.uniform(0.0, 1.0, 2000)
    m = DiscreteMeasure(g, 1.0 + g.midpoints)
    exact = quad(lambda t: np.cos(t) * (1 + t), 0, 1)[0]
    assert quadrature(np.cos(g.midpoints), m) == pytest.approx(exact, abs=1e-7)


@given(st.lists(finite, min_size=8, max_size=8), st.lists(finite, min_size=8, max_size=8), finite, finite)
def test_quadrature_is_linear(g, h, alpha, beta):
    m = DiscreteMeasure(TimeGrid.uniform(0, 1, 8), np.linspace(0.5, 2, 8), ((3, 0.7),))
    g, h = np.array(g), np.array(h)
    gn, hn = np.append(g, 1.0), np.append(h, -2.0)
    lhs = quadrature(alpha * g + beta * h, m, alpha * gn + beta * hn)
    rhs = alpha * quadrature(g, m, gn) + beta * quadrature(h, m, hn)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(alpha) + abs(beta)) * 100)


def test_quadrature_independent_of_order():
    rng = seeded_rng(3)
    N = 8192
    g = rng.standard_normal(N) * 1e8
    m = DiscreteMeasure.lebesgue(TimeGrid(np.arange(N + 1) / N))  # dyadic: all widths equal bitwise
    perm = rng.permutation(N)
    assert quadrature(g, m) == quadrature(g[perm], m)


# -- derivative and cumulative integral --------------------------------------


def test_curve_derivative_examples():
    g = TimeGrid.uniform(0, 1, 10)
    np.testing.assert_allclose(curve_derivative(Curve(g, g.nodes)).cell_values, 1.0)
    np.testing.assert_allclose(curve_derivative(Curve(g, np.full(11, 3.0))).cell_values, 0.0)
    g = TimeGrid.uniform(0, 1, 100)
    d = curve_derivative(Curve(g, g.nodes**2)).cell_values[:, 0]
    np.testing.assert_allclose(d, g.nodes[:-1] + g.nodes[1:], atol=1e-12)


def test_curve_derivative_rejects_rc_constant():
    g = TimeGrid.uniform(0, 1, 3)
    with pytest.raises(ValueError):
        curve_derivative(Curve(g, np.zeros(4), "rc-constant"))


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=20), st.data())
def test_derivative_inverts_cumulative_integral(widths, data):
    g = TimeGrid(np.concatenate([[0.0], np.cumsum(widths)]))
    vals = np.array(data.draw(st.lists(finite, min_size=g.n_cells, max_size=g.n_cells)))
    y = StepFunction(g, vals)
    x = cumulative_integral([1.5], y)
    np.testing.assert_allclose(curve_derivative(x).cell_values, y.cell_values, atol=1e-9)
    back = cumulative_integral(x.values[0], curve_derivative(x))
    np.testing.assert_allclose(back.values, x.values, atol=1e-9)


# -- norms ---------------------------------------------------------------------


def test_lp_norm_examples():
    m = leb(10)
    assert lp_norm(StepFunction.constant(m.grid, 1.0), 2, m) == pytest.approx(1.0)
    for p in (1, 2, 3.5, math.inf):
        assert lp_norm(StepFunction.constant(m.grid, 0.0), p, m) == 0.0
    y = StepFunction.from_function(m.grid, lambda t: np.where(t < 0.5, 1.0, 3.0))
    assert lp_norm(y, math.inf, m) == 3.0
    with pytest.raises(ValueError):
        lp_norm(y, 0.5, m)


def test_lp_norm_against_closed_form():
    m = leb(4000)
    y = StepFunction.from_function(m.grid, lambda t: t)
    assert lp_norm(y, 2, m) == pytest.approx(1 / math.sqrt(3), abs=1e-6)
    assert lp_norm(y, 1, m) == pytest.approx(0.5, abs=1e-9)


@given(
    st.lists(finite, min_size=12, max_size=12),
    st.lists(finite, min_size=12, max_size=12),
    st.sampled_from([1.0, 1.5, 2.0, 4.0, math.inf]),
)
def test_lp_norm_triangle_inequality(a, b, p):
    m = DiscreteMeasure(TimeGrid.uniform(0, 2, 6), [1, 2, 0, 1, 1, 3], ((2, 0.5),))
    u = StepFunction(m.grid, np.reshape(a, (6, 2)))
    v = StepFunction(m.grid, np.reshape(b, (6, 2)))
    assert lp_norm(u + v, p, m) <= lp_norm(u, p, m) + lp_norm(v, p, m) + 1e-9


# -- reports, serialization, rng ---------------------------------------------


def test_report_pass_follows_residual():
    assert Report(ReportKind.INTERCHANGE, 0, 0, 1e-7, 1e-6).passed
    assert not Report(ReportKind.INTERCHANGE, 0, 0, 1e-5, 1e-6).passed
    r = Report(ReportKind.CONJUGATE, math.inf, math.inf, 0.0, 1e-5, witnesses={"x": np.arange(3)})
    d = r.to_dict()
    assert d["pass"] and d["witnesses"]["x"] == [0, 1, 2]
    assert '"lhs"' in r.to_json()


def test_curve_json_round_trip():
    g = TimeGrid([0.0, 0.3, 1.0])
    for obj in (Curve(g, [[0, 1], [2, 3], [4, 5]]), Curve(g, [1, 2, 3], "rc-constant"), StepFunction(g, [1, 2])):
        back = curve_from_json(curve_to_json(obj))
        assert type(back) is type(obj) and back.grid == obj.grid
    d = curve_to_json(Curve(g, [1, 2, 3]))
    assert set(d) == {"a", "b", "nodes", "values", "interp"} and d["interp"] == "linear"


def test_seeded_rng_streams():
    a = seeded_rng(5, 1, 2).standard_normal(4)
    b = seeded_rng(5, 1, 2).standard_normal(4)
    c = seeded_rng(5, 2, 1).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
