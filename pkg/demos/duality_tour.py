"""Interchange of infimum and integral, conjugates of integral functionals and pointwise argmins.

Run: python3 demos/duality_tour.py
"""

import numpy as np

from intfunc.duality import (
    IntegralFunctional,
    argmin_equivalence,
    conjugate_of_integral,
    continuous_eps_selection,
    eps_subdiff_membership,
    verify_interchange,
)
from intfunc.grid import DiscreteMeasure, StepFunction, TimeGrid
from intfunc.integrand import abs_dev, add, indicator, infimal_values, min_quadratics, quadratic
from intfunc.sets import MovingBox


def main():
    m = DiscreteMeasure.lebesgue(TimeGrid.uniform(0, 1, 400))
    g = m.grid

    # tracking plus a kink plus a moving tube: the infimum over functions is the integral of pointwise infima
    f = add(add(quadratic(center=lambda t: np.sin(4 * t)), abs_dev(center=0.2)), indicator(MovingBox(lambda t: t - 1, lambda t: t + 0.5)))
    F = IntegralFunctional(f, m)
    rep = verify_interchange(F)
    print(f"interchange: inf I_f = {rep.lhs:.8f}, integral of m_f = {rep.rhs:.8f}, passed={rep.passed}")

    # a continuous curve staying within 1e-3 of the pointwise infimum everywhere
    sel = continuous_eps_selection(F, lambda t: infimal_values(f, t)[0] + 1e-3)
    print(f"continuous 1e-3 selection: {sel.grid.nodes.size} nodes after refinement")

    # the conjugate computed cell by cell through f_t^* and by direct maximization
    s = StepFunction.from_function(g, lambda t: np.cos(3 * t))
    pw, di, rep = conjugate_of_integral(IntegralFunctional(quadratic(center=lambda t: t), m), s)
    print(f"conjugate: pointwise {pw:.8f}, direct {di:.8f}, gap {abs(pw - di):.1e}")

    # epsilon-subgradients: the Young-Fenchel residual is the smallest witness
    zero = StepFunction.constant(g, 0.0)
    for eps in (0.004, 0.005):
        ok, w = eps_subdiff_membership(IntegralFunctional(quadratic(), m), zero, StepFunction.constant(g, 0.1), eps)
        print(f"slope 0.1 at x = 0 in the {eps}-subdifferential: {ok} (witness total {w.total:.4f})")

    # pointwise argmins solve the integral problem, convex or not
    wells = min_quadratics([-1.0, 1.0], [0.0, lambda t: t])
    rep = argmin_equivalence(IntegralFunctional(wells, m), trials=1000)
    print(f"nonconvex wells: I_f(argmin) = {rep.lhs:.2e}, best of 1000 random = {rep.witnesses['best_random']:.2e}")


if __name__ == "__main__":
    main()
