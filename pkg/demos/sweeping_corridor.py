"""Catching-up for a sweeping process, and the two solution checkers on clean and corrupted output.

Run: python3 demos/sweeping_corridor.py
"""

import numpy as np

from intfunc.grid import TimeGrid
from intfunc.sets import MovingBall, MovingBox, Piecewise
from intfunc.sweeping import catching_up, equivalence_report, grid_with_jumps, inject_fault


def main():
    # C(t) = [t, t + 1] starting at 0.5: the point idles, then gets pushed by the lower wall
    C = MovingBox(lambda t: t, lambda t: t + 1)
    # node values are exact here; the error lives in the right-continuous step interpolant
    print("h        node error  interpolant error")
    for N in (64, 128, 256, 512):
        g = TimeGrid.uniform(0, 1, N)
        x = catching_up(C, [0.5], g).x_right[:, 0]
        exact = np.maximum(0.5, g.nodes)
        interp = np.max(np.maximum(np.abs(x[:-1] - exact[:-1]), np.abs(x[:-1] - exact[1:])))
        print(f"1/{N:<5d}  {np.max(np.abs(x - exact)):.1e}     {interp:.2e}")

    g = TimeGrid.uniform(0, 1, 200)
    sol = catching_up(C, [0.5], g)
    print("clean:", equivalence_report(C, sol).witnesses["verdict"])
    for kind in ("sign-flip", "drift", "window"):
        print(f"{kind}:", equivalence_report(C, inject_fault(sol, kind)).witnesses["verdict"])

    # a disc that circles, then jumps: the jump produces an atom in the measure
    disc = MovingBall(lambda t: np.stack([np.cos(2 * t), np.sin(2 * t)], axis=-1), 0.5, dim=2)
    jumped = Piecewise([(-np.inf, disc), (0.5, MovingBall([2.0, 0.0], 0.5, dim=2))])
    g = grid_with_jumps(jumped, 0, 1, 200)
    sol = catching_up(jumped, [1.0, 0.0], g)
    print(f"jump nodes {sol.jump_nodes}, atoms {sol.measure.atoms}; verdict:", equivalence_report(jumped, sol).witnesses["verdict"])


if __name__ == "__main__":
    main()
