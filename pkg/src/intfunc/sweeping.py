"""Sweeping process ``-dx in N_{C(t)}(x) dnu``: catching-up scheme and two solution checkers.

A :class:`BVSolution` stores right values ``x(t_k)`` and left limits
``x(t_k-)`` at the nodes; the trajectory is linear inside each cell and
may jump at nodes.  The reference measure is Lebesgue plus a unit atom at
every jump actually taken, so ``dx/dnu`` is the slope on cells and the
jump vector on atoms.

Two checkers are provided: a differential-measure check (``dx/dnu`` lies in
``-N_{C(t)}(x(t))``, tested through support functions) and an integral
check against continuous selections ``y`` of ``C``.  For exact solutions
both verdicts coincide; :func:`equivalence_report` compares them at
coupled tolerances.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import (
    Curve,
    DiscreteMeasure,
    Report,
    ReportKind,
    StepFunction,
    StructuralError,
    TimeGrid,
    seeded_rng,
)
from .sets import MovingSet, sample_directions

__all__ = [
    "OracleError",
    "SelectionWarning",
    "BVSolution",
    "Selection",
    "catching_up",
    "grid_with_jumps",
    "hausdorff_lipschitz_estimate",
    "coupled_tolerance",
    "check_differential_measure",
    "generate_test_selections",
    "check_integral_solution",
    "equivalence_report",
    "inject_fault",
    "FAULTS",
]


class OracleError(RuntimeError):
    """A set oracle failed (e.g. projection not feasible)."""


class SelectionWarning(UserWarning):
    """Fewer than half of the requested test selections survived validation."""


@dataclass(frozen=True)
class BVSolution:
    grid: TimeGrid
    x_right: np.ndarray
    x_left: np.ndarray
    jump_nodes: tuple = ()
    density: np.ndarray | None = None
    atom_density: np.ndarray | None = None

    def __post_init__(self):
        xr = np.atleast_2d(np.asarray(self.x_right, dtype=float))
        xl = np.atleast_2d(np.asarray(self.x_left, dtype=float))
        if xr.shape != xl.shape or xr.shape[0] != self.grid.nodes.size:
            raise StructuralError("right and left node values must have one row per node")
        object.__setattr__(self, "x_right", xr)
        object.__setattr__(self, "x_left", xl)
        jn = tuple(int(j) for j in self.jump_nodes)
        object.__setattr__(self, "jump_nodes", jn)
        if self.density is None:
            dens = (xl[1:] - xr[:-1]) / self.grid.widths[:, None]
            object.__setattr__(self, "density", dens)
        if self.atom_density is None:
            object.__setattr__(self, "atom_density", np.array([xr[j] - xl[j] for j in jn]).reshape(len(jn), xr.shape[1]))

    @property
    def dim(self) -> int:
        return self.x_right.shape[1]

    @property
    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.lebesgue(self.grid, [(j, 1.0) for j in self.jump_nodes])

    @property
    def density_step(self) -> StepFunction:
        return StepFunction(self.grid, self.density)

    def __call__(self, t) -> np.ndarray:
        """Right-continuous evaluation: linear inside cells, right values at nodes."""
        t = np.asarray(t, dtype=float)
        g = self.grid
        k = np.clip(np.searchsorted(g.nodes, t, side="right") - 1, 0, g.n_cells - 1)
        lam = ((t - g.nodes[k]) / g.widths[k])[..., None]
        out = (1 - lam) * self.x_right[k] + lam * self.x_left[k + 1]
        at_end = t >= g.b
        if np.any(at_end):
            out = np.where(at_end[..., None], self.x_right[-1], out)
        return out

    def rc_constant(self) -> Curve:
        """The piecewise-constant right-continuous trajectory ``x(t) = x(t_k)`` on ``[t_k, t_{k+1})``."""
        return Curve(self.grid, self.x_right, "rc-constant")

    def consistency_residual(self) -> float:
        """Largest mismatch between node increments and the integral of ``dx/dnu``."""
        g = self.grid
        cell = np.abs(self.x_left[1:] - self.x_right[:-1] - self.density * g.widths[:, None]).max(initial=0.0)
        jumps = np.zeros_like(self.x_right)
        for j, d in zip(self.jump_nodes, self.atom_density):
            jumps[j] = d
        atom = np.abs(self.x_right - self.x_left - jumps).max(initial=0.0)
        return float(max(cell, atom))


def grid_with_jumps(C: MovingSet, a: float, b: float, N: int) -> TimeGrid:
    """Uniform grid on ``[a, b]`` with the jump times of ``C`` inserted as nodes."""
    g = TimeGrid.uniform(a, b, N)
    inside = [t for t in C.jump_times if a < t < b]
    return g.with_nodes(inside) if inside else g


def _jump_node_indices(C: MovingSet, grid: TimeGrid) -> list[int]:
    out = []
    for t in C.jump_times:
        if grid.a < t <= grid.b:
            k = int(np.searchsorted(grid.nodes, t))
            if k >= grid.nodes.size or abs(grid.nodes[k] - t) > 1e-12 * max(1.0, abs(t)):
                raise StructuralError(f"jump time {t:g} is not a grid node")
            out.append(k)
    return out


def catching_up(C: MovingSet, x0, grid: TimeGrid, feas_tol: float = 1e-9) -> BVSolution:
    """``x(t_{k+1}-) = P_{C(t_{k+1}-)}(x_k)``, then at jump nodes ``x(t_{k+1}) = P_{C(t_{k+1})}(x(t_{k+1}-))``.

    Jumps that move the state are recorded as unit atoms of the reference
    measure with the displacement as density.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.size != C.dim:
        raise StructuralError(f"initial point has dimension {x0.size}, set has {C.dim}")
    if not bool(C.contains(grid.a, x0, feas_tol)):
        raise ValueError(f"initial point {x0.tolist()} is not in C({grid.a:g})")
    jumps = set(_jump_node_indices(C, grid))
    n_nodes = grid.nodes.size
    xr = np.empty((n_nodes, C.dim))
    xl = np.empty((n_nodes, C.dim))
    xr[0] = xl[0] = x0
    taken = []
    for k in range(n_nodes - 1):
        t = grid.nodes[k + 1]
        try:
            left = C.left(t) if (k + 1) in jumps else C
            xl[k + 1] = left.project(t, xr[k])
            xr[k + 1] = C.project(t, xl[k + 1]) if (k + 1) in jumps else xl[k + 1]
        except Exception as exc:  # oracle failure is reported with its time
            raise OracleError(f"projection failed at t={t:g}: {exc}") from exc
        if not bool(C.contains(t, xr[k + 1], max(feas_tol, 1e-7))):
            raise OracleError(f"projection at t={t:g} is not feasible")
        if (k + 1) in jumps and np.any(xr[k + 1] != xl[k + 1]):
            taken.append(k + 1)
    return BVSolution(grid, xr, xl, tuple(taken))


def hausdorff_lipschitz_estimate(C: MovingSet, grid: TimeGrid, samples: int = 64) -> float:
    """``max |sigma_{C(t)}(d) - sigma_{C(t')}(d)| / |t - t'|`` over consecutive nodes and unit directions.

    Pairs that straddle a jump time are skipped.
    """
    D = sample_directions(C.dim, samples)
    t = grid.nodes
    jumps = np.asarray(C.jump_times, dtype=float)
    keep = np.ones(t.size - 1, dtype=bool)
    for tj in jumps:
        keep &= ~((t[:-1] < tj) & (tj <= t[1:]))
    if not keep.any():
        return 0.0
    sig = C.support(t[:, None], np.broadcast_to(D, (t.size,) + D.shape))
    rates = np.abs(np.diff(sig, axis=0)) / np.diff(t)[:, None]
    return float(np.max(rates[keep]))


def coupled_tolerance(C: MovingSet, grid: TimeGrid, c: float = 2.0, kappa: float | None = None) -> float:
    """Shared checker tolerance ``c * (kappa + 1) * h`` with ``h`` the largest cell width."""
    kappa = hausdorff_lipschitz_estimate(C, grid) if kappa is None else kappa
    return c * (kappa + 1.0) * float(np.max(grid.widths))


def _feasibility(C: MovingSet, sol: BVSolution) -> float:
    """Largest distance of the node values (right values and left limits) to ``C``."""
    g = sol.grid
    worst = float(np.max(np.linalg.norm(sol.x_right - C.project(g.nodes, sol.x_right), axis=1)))
    for j in _jump_node_indices(C, g):
        t = g.nodes[j]
        worst = max(worst, float(np.linalg.norm(sol.x_left[j] - C.left(t).project(t, sol.x_left[j]))))
    return worst


def _live_density(sol: BVSolution) -> tuple[np.ndarray, np.ndarray]:
    """Cell and atom densities with round-off sized entries set to zero.

    Projections return interior points up to rounding, which leaves
    densities of order 1e-14 that would otherwise be normalized into O(1)
    violations.
    """
    u = sol.density.copy()
    d = sol.atom_density.copy()
    scale = max(
        1.0,
        float(np.max(np.abs(sol.x_right))),
        float(np.max(np.linalg.norm(u, axis=1), initial=0.0) * (sol.grid.b - sol.grid.a)),
    )
    u[np.linalg.norm(u, axis=1) * sol.grid.widths <= 1e-12 * scale] = 0.0
    if len(d):
        d[np.linalg.norm(d, axis=1) <= 1e-12 * scale] = 0.0
    return u, d


def _normal_violation(S: MovingSet, t, x, u):
    """``(<u, x> + sigma(-u)) / ||u||``: positive when ``u`` is not in ``-N(x)``; 0 for ``u = 0``."""
    u = np.atleast_2d(u)
    x = np.atleast_2d(x)
    nu = np.linalg.norm(u, axis=1)
    live = nu > 0
    out = np.zeros(u.shape[0])
    if live.any():
        tt = np.broadcast_to(np.asarray(t, dtype=float), (u.shape[0],))[live]
        val = np.sum(u[live] * x[live], axis=1) + S.support(tt, -u[live])
        out[live] = val / nu[live]
    return out


def check_differential_measure(C: MovingSet, sol: BVSolution, tol: float) -> Report:
    """Test ``dx/dnu in -N_{C(t)}(x(t))`` on every cell and atom.

    Each cell is checked at its midpoint and at its right end (against the
    left-limit set); atoms at their node against the right set.  The
    violation is normalized by ``||dx/dnu||``, so it is a distance, and the
    trajectory must also stay in ``C`` at every node.
    """
    g = sol.grid
    u, ad = _live_density(sol)
    mids = g.midpoints
    viol_mid = _normal_violation(C, mids, sol(mids), u)
    ends = g.nodes[1:]
    viol_end = _normal_violation(C, ends, sol.x_left[1:], u)
    for k in _jump_node_indices(C, g):
        t = g.nodes[k]
        viol_end[k - 1] = _normal_violation(C.left(t), t, sol.x_left[k], u[k - 1])[0]
    viol_atom = np.array(
        [_normal_violation(C, g.nodes[j], sol.x_right[j], d)[0] for j, d in zip(sol.jump_nodes, ad)]
    )
    feas = _feasibility(C, sol)
    cell_viol = np.maximum(viol_mid, viol_end)
    worst = max(float(cell_viol.max(initial=0.0)), float(viol_atom.max(initial=0.0)), feas)
    failing = np.flatnonzero(cell_viol > tol)
    return Report(
        ReportKind.DIFFERENTIAL_MEASURE,
        worst,
        0.0,
        worst,
        tol,
        witnesses={
            "failing_cells": failing,
            "failing_times": g.midpoints[failing],
            "failing_atoms": [int(j) for j, v in zip(sol.jump_nodes, viol_atom) if v > tol],
            "infeasibility": feas,
        },
        notes=f"{failing.size} failing cell(s)",
    )


@dataclass(frozen=True, eq=False)
class Selection:
    """A test curve sampled at node right values, node left limits and cell midpoints."""

    right: np.ndarray
    left: np.ndarray
    mid: np.ndarray
    label: str = ""

    def combine(self, other: "Selection", lam: float, label: str = "") -> "Selection":
        return Selection(
            lam * self.right + (1 - lam) * other.right,
            lam * self.left + (1 - lam) * other.left,
            lam * self.mid + (1 - lam) * other.mid,
            label,
        )


def _projection_selection(C: MovingSet, grid: TimeGrid, z, label: str) -> Selection:
    t = grid.nodes
    right = C.project(t, np.broadcast_to(z, (t.size, C.dim)))
    left = right.copy()
    for k in _jump_node_indices(C, grid):
        left[k] = C.left(t[k]).project(t[k], z)
    mid = C.project(grid.midpoints, np.broadcast_to(z, (grid.n_cells, C.dim)))
    return Selection(right, left, mid, label)


def _valid(C: MovingSet, grid: TimeGrid, s: Selection, bound: float, tol: float) -> bool:
    if not np.all(C.contains(grid.nodes, s.right, tol)) or not np.all(C.contains(grid.midpoints, s.mid, tol)):
        return False
    steps = np.linalg.norm(s.left[1:] - s.right[:-1], axis=1)
    return bool(np.all(steps <= bound * grid.widths + tol))


def generate_test_selections(
    C: MovingSet,
    count: int,
    grid: TimeGrid,
    *,
    seed: int = 0,
    kappa: float | None = None,
    tol: float = 1e-7,
) -> list[Selection]:
    """``count`` continuous selections ``t -> P_{C(t)}(z)`` of ``C`` and convex mixtures of them.

    Anchors ``z`` are far points along quasi-uniform directions (these trace
    the boundary), random points of an enlarged bounding box, and convex
    combinations of the resulting curves.  Candidates failing containment
    or the displacement bound ``4 (kappa + 1) h`` per cell are discarded
    with a :class:`SelectionWarning` when fewer than half survive.
    """
    rng = seeded_rng(seed, 31, count)
    kappa = hausdorff_lipschitz_estimate(C, grid) if kappa is None else kappa
    bound = 4.0 * (kappa + 1.0)
    lo, hi = C.bbox(grid.nodes)
    lo, hi = lo.min(axis=0), hi.max(axis=0)
    center = 0.5 * (lo + hi)
    span = np.maximum(hi - lo, 1.0)
    n_dirs = min(max(2, count // 4), 16)
    dirs = sample_directions(C.dim, n_dirs)[: max(n_dirs, 2 * C.dim)]
    cands = [_projection_selection(C, grid, center + 1e3 * span * d, f"extreme{i}") for i, d in enumerate(dirs)]
    while len(cands) < count - count // 4:
        z = rng.uniform(lo - 0.5 * span, hi + 0.5 * span)
        cands.append(_projection_selection(C, grid, z, f"anchor{len(cands)}"))
    base = list(cands)
    while len(cands) < count:
        i, j = rng.choice(len(base), size=2, replace=False)
        cands.append(base[i].combine(base[j], float(rng.uniform()), f"mix{len(cands)}"))
    kept = [s for s in cands if _valid(C, grid, s, bound, tol)]
    if len(kept) < count / 2:
        warnings.warn(f"only {len(kept)} of {count} requested selections survived", SelectionWarning, stacklevel=2)
    return kept


def _hats(grid: TimeGrid, min_width: float):
    """Hat functions at dyadic half-widths ``L/4, L/8, ...`` down to ``min_width``, centers every half width.

    Returns the values at nodes ``(B, N+1)``, at midpoints ``(B, N)`` and the labels.
    """
    L = grid.b - grid.a
    rows_n, rows_m, labels = [], [], []
    w = L / 4
    while w >= min_width * (1 - 1e-9):
        for c in np.arange(grid.a, grid.b + 1e-12 * L, w / 2):
            rows_n.append(np.clip(1.0 - np.abs(grid.nodes - c) / w, 0.0, 1.0))
            rows_m.append(np.clip(1.0 - np.abs(grid.midpoints - c) / w, 0.0, 1.0))
            labels.append(f"hat(w={w:.3g},c={c:.3g})")
        w /= 2
    return np.array(rows_n).reshape(-1, grid.nodes.size), np.array(rows_m).reshape(-1, grid.n_cells), labels


def check_integral_solution(
    C: MovingSet, sol: BVSolution, selections: list[Selection], tol: float, *, localize: bool = True
) -> Report:
    """``int <dx/dnu, y - x> dnu >= -tol * int phi ||dx/dnu|| dnu`` over a family of test selections ``y``.

    The family holds the given selections (``phi = 1``) and, when
    ``localize`` is set and ``x`` stays in ``C`` up to ``tol``, the blends
    ``y = x + phi (s - x)`` for every given ``s`` and every hat ``phi`` at
    dyadic widths down to one cell; these are selections by convexity and
    see faults confined to short windows.  The residual is the worst
    weighted average of ``-<dx/dnu, y - x> / ||dx/dnu||``, a distance like
    the residual of :func:`check_differential_measure`.  Cell integrals use
    Simpson's rule; atoms add ``<dx/dnu, y - x>`` at their node.
    """
    if not selections:
        raise ValueError("no test selections")
    g = sol.grid
    u, ad = _live_density(sol)
    un = np.linalg.norm(u, axis=1)
    jn = list(sol.jump_nodes)
    an = np.linalg.norm(ad, axis=1) if len(ad) else np.zeros(0)
    xa, xb, xm = sol.x_right[:-1], sol.x_left[1:], sol(g.midpoints)
    R = np.array([s.right for s in selections])
    Lf = np.array([s.left for s in selections])
    M = np.array([s.mid for s in selections])
    # per selection and cell: <u, s - x> at the left end, midpoint, right end (left limit)
    Pa = np.einsum("kn,jkn->jk", u, R[:, :-1] - xa)
    Pm = np.einsum("kn,jkn->jk", u, M - xm)
    Pb = np.einsum("kn,jkn->jk", u, Lf[:, 1:] - xb)
    Pj = np.einsum("an,jan->ja", ad, R[:, jn] - sol.x_right[jn]) if jn else np.zeros((len(selections), 0))
    h6 = g.widths / 6.0
    vals = (Pa + 4 * Pm + Pb) @ h6 + Pj.sum(axis=1)
    mass = np.full(len(selections), float(un @ g.widths + an.sum()))
    labels = [s.label for s in selections]
    feas = _feasibility(C, sol)
    x_mid_gap = float(np.max(np.linalg.norm(xm - C.project(g.midpoints, xm), axis=1)))
    localized = localize and max(feas, x_mid_gap) <= max(tol, 1e-9)
    if localized:
        Hn, Hm, hl = _hats(g, float(np.max(g.widths)))
        # int phi <u, s - x>: hats weight the three Simpson samples of each cell
        Iv = (Hn[:, :-1] * h6) @ Pa.T + 4 * (Hm * h6) @ Pm.T + (Hn[:, 1:] * h6) @ Pb.T
        if jn:
            Iv += Hn[:, jn] @ Pj.T
        Im = (Hn[:, :-1] + 4 * Hm + Hn[:, 1:]) @ (h6 * un) + (Hn[:, jn] @ an if jn else 0.0)
        vals = np.concatenate([vals, Iv.ravel()])
        mass = np.concatenate([mass, np.repeat(Im, len(selections))])
        labels += [f"{a}/{b}" for a in hl for b in (s.label for s in selections)]
    live = mass > 1e-12 * max(1.0, float(mass.max(initial=0.0)))
    ratio = np.where(live, -vals / np.where(live, mass, 1.0), 0.0)
    k = int(np.argmax(ratio))
    residual = max(float(ratio[k]), feas)
    return Report(
        ReportKind.INTEGRAL_SOLUTION,
        float(vals[k]),
        float(mass[k]),
        residual,
        tol,
        witnesses={
            "worst_selection": labels[k],
            "global_integrals": vals[: len(selections)],
            "family_size": int(vals.size),
            "infeasibility": feas,
        },
        notes=f"{len(selections)} selections" + (f", {vals.size - len(selections)} localized blends" if localized else ""),
    )


def equivalence_report(
    C: MovingSet,
    sol: BVSolution,
    tolerances: dict | float | None = None,
    *,
    count: int = 64,
    seed: int = 0,
) -> Report:
    """Run both checkers; the report passes iff their verdicts agree.

    ``tolerances`` is a shared float, a dict with ``"differential"`` and
    ``"integral"`` entries, or None for the coupled default
    :func:`coupled_tolerance`.  A disagreement at equal tolerances is a
    violation; at unequal tolerances it is inconclusive.
    """
    if tolerances is None:
        tolerances = coupled_tolerance(C, sol.grid)
    if isinstance(tolerances, dict):
        td, ti = float(tolerances["differential"]), float(tolerances["integral"])
    else:
        td = ti = float(tolerances)
    sels = generate_test_selections(C, count, sol.grid, seed=seed)
    rd = check_differential_measure(C, sol, td)
    ri = check_integral_solution(C, sol, sels, ti)
    agree = rd.passed == ri.passed
    if agree:
        verdict = "both pass" if rd.passed else "both fail"
    elif td == ti:
        verdict = "violation"
    else:
        verdict = "inconclusive"
    return Report(
        ReportKind.EQUIVALENCE,
        rd.residual,
        ri.residual,
        0.0 if agree else 1.0,
        0.0,
        passed=agree,
        witnesses={"verdict": verdict, "tolerances": [td, ti], "differential": rd.to_dict(), "integral": ri.to_dict()},
        notes=verdict,
    )


def _flip_active(sol, rng):
    d = sol.density.copy()
    active = np.linalg.norm(d, axis=1) > 0
    d[active] *= -1
    return replace(sol, density=d)


def _drift(sol, rng):
    d = sol.density + 0.5 * sample_directions(sol.dim, 8)[1]
    return replace(sol, density=d)


def _rotate(sol, rng):
    d = sol.density.copy()
    if sol.dim == 1:
        return _flip_active(sol, rng)
    d[:, [0, 1]] = np.stack([-d[:, 1], d[:, 0]], axis=1)
    active = np.linalg.norm(sol.density, axis=1) > 0
    return replace(sol, density=np.where(active[:, None], d, 0.5))


def _window(sol, rng):
    d = sol.density.copy()
    N = d.shape[0]
    k0 = int(rng.integers(0, max(1, N - N // 10)))
    w = slice(k0, k0 + max(1, N // 10))
    new = -d[w] - 1.0
    same = np.all(np.abs(new - d[w]) < 1e-12, axis=1)
    new[same] = -d[w][same] + 1.0
    d[w] = new
    return replace(sol, density=d)


def _atom_flip(sol, rng):
    if not len(sol.atom_density):
        return _flip_active(sol, rng)
    return replace(sol, atom_density=-sol.atom_density)


FAULTS = {
    "sign-flip": _flip_active,
    "drift": _drift,
    "rotate": _rotate,
    "window": _window,
    "atom-flip": _atom_flip,
}


def inject_fault(sol: BVSolution, kind: str = "sign-flip", seed: int = 0) -> BVSolution:
    """Corrupt the density of ``sol`` (the node values are left untouched)."""
    if kind not in FAULTS:
        raise ValueError(f"unknown fault {kind!r}; choose from {sorted(FAULTS)}")
    return FAULTS[kind](sol, seeded_rng(seed, 41))
