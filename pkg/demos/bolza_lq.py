"""Clarke directional derivatives and a penalized Bolza problem with its costate certificate.

Run: python3 demos/bolza_lq.py
"""

import numpy as np

from intfunc.calcvar import (
    Adjoint,
    _default_init,
    adjoint_reconstruct,
    estimate_K0,
    euler_lagrange_residual,
    objective,
    problem_from_description,
    solve,
)
from intfunc.clarke import clarke_dirderiv
from intfunc.grid import Curve


def main():
    # generalized directional derivatives at kinks
    for name, g, exact in [
        ("|x|", lambda Y: np.abs(Y[..., 0]), 1.0),
        ("-|x|", lambda Y: -np.abs(Y[..., 0]), 1.0),
        ("min((x+1)^2, (x-1)^2)", lambda Y: np.minimum((Y[..., 0] + 1) ** 2, (Y[..., 0] - 1) ** 2), 2.0),
    ]:
        print(f"f = {name:22s} f°(0; 1) ~ {clarke_dirderiv(g, [0.0], [1.0]):.4f} (exact {exact})")

    # minimize int (x'^2 + x^2)/2 with x(0) = 0, x(1) = 1 through the exact penalty at K = 2 K0
    desc = {"lagrangian": {"kind": "quadratic", "center": [0, 0], "dim": 2}, "constraint": {"kind": "pinned", "u": [0], "w": [1]}}
    P = problem_from_description(desc)
    init = _default_init(P, P.grid(200))
    K0 = estimate_K0(P, init)
    arc = solve(P, init, 2 * K0)
    adj = adjoint_reconstruct(P, arc)
    t = arc.grid.nodes
    print(f"K0 estimate {K0:.3f}; endpoint infeasibility {arc.info['infeasibility']:.1e}")
    print(f"sup |x - sinh t / sinh 1| = {np.max(np.abs(arc.x.values[:, 0] - np.sinh(t) / np.sinh(1))):.2e}")
    print(f"objective {objective(P, arc):.6f} vs coth(1)/2 = {0.5 / np.tanh(1):.6f}")
    print(f"sup |p - cosh t / sinh 1| = {np.max(np.abs(adj.p_curve.values[:, 0] - np.cosh(t) / np.sinh(1))):.2e}")
    rep = euler_lagrange_residual(P, arc, adj)
    print(f"Euler-Lagrange certificate: residual {rep.residual:.2e}, passed={rep.passed}")

    # the same certificate rejects a costate shifted by a constant
    shifted = Adjoint(Curve(adj.p_curve.grid, adj.p_curve.values + 0.2), adj.pdot)
    print(f"shifted costate: passed={euler_lagrange_residual(P, arc, shifted).passed}")


if __name__ == "__main__":
    main()
