import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from intfunc.clarke import (
    ClarkeEstimatorConfig,
    ClarkeEstimatorError,
    clarke_dirderiv,
    clarke_dirderiv_detail,
    clarke_membership,
    clarke_upper_bound_check,
    integral_clarke_inclusion,
)
from intfunc.duality import IntegralFunctional
from intfunc.grid import DiscreteMeasure, StepFunction, TimeGrid
from intfunc.integrand import abs_dev, eps_subdiff_contains, neg_abs, norm_power, quadratic, weighted_l1

CFG = ClarkeEstimatorConfig()


def absf(Y):
    return np.abs(Y[..., 0])


def negabs(Y):
    return -np.abs(Y[..., 0])


def smooth(Y):
    return 0.5 * Y[..., 0] ** 2


def wells(Y):
    x = Y[..., 0]
    return np.minimum((x + 1) ** 2, (x - 1) ** 2)


def norm2(Y):
    return np.linalg.norm(Y, axis=-1)


def lattice_dirderiv(g, x, v, delta=1e-4, n=2001):
    """Brute-force oracle: sup of difference quotients over a fine (y, tau) lattice."""
    ys = x + delta * np.linspace(-1, 1, n)
    taus = delta * np.geomspace(1e-3, 1, 60)
    Y = ys[:, None, None]
    q = (g(Y + taus[None, :, None] * v) - g(Y)) / taus[None, :]
    return float(q.max())


@pytest.mark.parametrize(
    "g, x, v, exact, tol",
    [
        (absf, 0.0, 1.0, 1.0, 5e-2),
        (absf, 0.0, -1.0, 1.0, 5e-2),
        (negabs, 0.0, 1.0, 1.0, 5e-2),
        (negabs, 0.0, -1.0, 1.0, 5e-2),
        (smooth, 1.0, 1.0, 1.0, 1e-2),
        (smooth, -0.5, 2.0, -1.0, 1e-2),
        (wells, 0.0, 1.0, 2.0, 5e-2),
        (wells, 0.0, -1.0, 2.0, 5e-2),
        (wells, 1.0, 1.0, 0.0, 5e-2),
        (absf, 0.3, -1.0, -1.0, 5e-2),
    ],
)
def test_dirderiv_against_analytic(g, x, v, exact, tol):
    assert clarke_dirderiv(g, [x], [v]) == pytest.approx(exact, abs=tol)


@pytest.mark.parametrize("g", [absf, negabs, wells, smooth])
def test_dirderiv_against_lattice_oracle(g):
    for x in (0.0, 0.5, -1.0):
        for v in (1.0, -1.0):
            assert clarke_dirderiv(g, [x], [v]) == pytest.approx(lattice_dirderiv(g, x, v), abs=5e-2)


def test_dirderiv_2d_norm():
    # Clarke derivative of the Euclidean norm at 0 is ||v||
    for v in ([1.0, 0.0], [0.6, 0.8], [-2.0, 1.0]):
        assert clarke_dirderiv(norm2, [0.0, 0.0], v) == pytest.approx(np.linalg.norm(v), abs=5e-2)


def test_non_lipschitz_detected():
    with pytest.raises(ClarkeEstimatorError):
        clarke_dirderiv(lambda Y: np.sqrt(np.abs(Y[..., 0])), [0.0], [1.0])
    with pytest.raises(ClarkeEstimatorError):
        clarke_dirderiv(lambda Y: np.where(Y[..., 0] > 0.5, np.inf, 0.0), [0.5], [1.0])


def test_config_validation():
    with pytest.raises(ValueError):
        ClarkeEstimatorConfig(radii=(1e-2, 1e-1))
    with pytest.raises(ValueError):
        ClarkeEstimatorConfig(step_fractions=(0.0,))
    with pytest.raises(ValueError):
        ClarkeEstimatorConfig(samples_per_radius=1)


def test_detail_reports_stabilization():
    est = clarke_dirderiv_detail(absf, [0.0], [1.0])
    assert est.stabilized and est.per_radius.shape == (4,)


def test_membership_examples():
    r = clarke_membership(absf, [0.0], [0.5])
    assert r.member and r.margin == pytest.approx(0.5, abs=5e-2)
    r = clarke_membership(absf, [0.0], [1.2])
    assert not r.member and r.margin == pytest.approx(-0.2, abs=5e-2) and r.worst_direction[0] == 1.0
    assert clarke_membership(negabs, [0.0], [0.0]).member


# -- properties ------------------------------------------------------------------

SPECIMENS = {"abs": absf, "negabs": negabs, "wells": wells, "smooth": smooth}


@pytest.mark.parametrize("name", sorted(SPECIMENS))
@given(x=st.floats(-1.5, 1.5), v=st.floats(-2, 2), lam=st.sampled_from([0.5, 2.0]))
def test_positive_homogeneity(name, x, v, lam):
    g = SPECIMENS[name]
    a = clarke_dirderiv_detail(g, [x], [lam * v]).value
    b = clarke_dirderiv_detail(g, [x], [v]).value
    assert a == pytest.approx(lam * b, abs=5e-2 * max(1.0, lam))


@pytest.mark.parametrize("name", sorted(SPECIMENS))
@given(x=st.floats(-1.5, 1.5), v=st.floats(-2, 2), w=st.floats(-2, 2))
def test_subadditivity(name, x, v, w):
    g = SPECIMENS[name]
    d = lambda u: clarke_dirderiv_detail(g, [x], [u]).value
    assert d(v + w) <= d(v) + d(w) + 5e-2


@given(x=st.lists(st.floats(-1, 1), min_size=2, max_size=2), v=st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_lipschitz_bound(x, v):
    k = 1.0  # the Euclidean norm is 1-Lipschitz
    assert abs(clarke_dirderiv_detail(norm2, x, v).value) <= (k + 5e-2) * np.linalg.norm(v) + 1e-12


@pytest.mark.parametrize("f", [abs_dev(center=0.2), quadratic(center=0.1), norm_power(1.5), weighted_l1([2.0])], ids=["abs", "quad", "pow1.5", "wl1"])
@given(x=st.sampled_from([-0.5, 0.0, 0.1, 0.2, 0.7]), s=st.floats(-2.5, 2.5))
def test_convex_case_agrees_with_subdifferential(f, x, s):
    g = lambda Y: f(0.0, Y)
    clarke = clarke_membership(g, [x], [s])
    exact = eps_subdiff_contains(f, 0.0, [x], [s], 0.0)
    # away from the boundary of the subdifferential the verdicts must coincide
    if abs(clarke.margin) > 5e-2:
        assert clarke.member == exact


# -- integral functionals -------------------------------------------------------------


def leb(N=50):
    return DiscreteMeasure.lebesgue(TimeGrid.uniform(0, 1, N))


def test_inclusion_examples():
    m = leb()
    g = m.grid
    F = IntegralFunctional(abs_dev(), m)
    zero = StepFunction.constant(g, 0.0)
    rep = integral_clarke_inclusion(F, zero, StepFunction.constant(g, 0.3))
    assert rep.passed and rep.residual == 0.0
    rep = integral_clarke_inclusion(F, zero, StepFunction.constant(g, 1.5))
    assert not rep.passed and rep.residual == pytest.approx(1.0) and len(rep.witnesses["violating_cells"]) == g.n_cells
    F = IntegralFunctional(abs_dev(center=lambda t: t), m)
    rep = integral_clarke_inclusion(F, StepFunction.from_function(g, lambda t: t), StepFunction.constant(g, 0.7))
    assert rep.passed


def test_inclusion_flags_injected_costates():
    m = leb(40)
    g = m.grid
    F = IntegralFunctional(neg_abs(), m)
    zero = StepFunction.constant(g, 0.0)
    s = np.full(g.n_cells, 0.5)
    s[10:15] = 1.6      # outside [-1, 1] on a window of measure 1/8
    s[30] = -1.3
    rep = integral_clarke_inclusion(F, zero, StepFunction(g, s))
    assert not rep.passed
    assert sorted(rep.witnesses["violating_cells"].tolist()) == [10, 11, 12, 13, 14, 30]
    assert rep.residual == pytest.approx(6 / 40)


def test_inclusion_requires_modulus():
    m = leb(4)
    from intfunc.integrand import min_quadratics

    F = IntegralFunctional(min_quadratics([-1, 1], [0, 0]), m)
    z = StepFunction.constant(m.grid, 0.0)
    with pytest.raises(ValueError):
        integral_clarke_inclusion(F, z, z)


def test_upper_bound_examples():
    m = leb(20)
    g = m.grid
    one = StepFunction.constant(g, 1.0)
    zero = StepFunction.constant(g, 0.0)
    rep = clarke_upper_bound_check(IntegralFunctional(abs_dev(), m), zero, one)
    assert rep.passed and rep.lhs == pytest.approx(1.0, abs=5e-2) and rep.rhs == pytest.approx(1.0, abs=5e-2)
    rep = clarke_upper_bound_check(IntegralFunctional(neg_abs(), m), zero, one)
    assert rep.passed and rep.rhs == pytest.approx(1.0, abs=5e-2)


def test_upper_bound_smooth_equality():
    m = leb(20)
    g = m.grid
    f = quadratic()
    f = type(f)(**{**f.__dict__, "lipschitz": lambda t: np.full(np.shape(t), 10.0)})
    x = StepFunction.from_function(g, lambda t: np.sin(3 * t))
    v = StepFunction.from_function(g, lambda t: 1 - t)
    rep = clarke_upper_bound_check(IntegralFunctional(f, m), x, v)
    exact = float(np.sum(x.cell_values[:, 0] * v.cell_values[:, 0] * m.cell_masses))
    assert rep.passed
    assert rep.lhs == pytest.approx(exact, abs=1e-2) and rep.rhs == pytest.approx(exact, abs=1e-2)


@pytest.mark.parametrize("f", [abs_dev(center=lambda t: t), neg_abs(center=0.3), weighted_l1([1.0, 2.0])], ids=["abs", "negabs", "wl1"])
@given(seed=st.integers(0, 10**6))
def test_upper_bound_never_fails_on_lipschitz_suite(f, seed):
    m = leb(10)
    rng = np.random.default_rng(seed)
    x = StepFunction(m.grid, rng.uniform(-1, 1, (10, f.dim)))
    v = StepFunction(m.grid, rng.uniform(-1, 1, (10, f.dim)))
    assert clarke_upper_bound_check(IntegralFunctional(f, m), x, v, ClarkeEstimatorConfig(samples_per_radius=60)).passed
