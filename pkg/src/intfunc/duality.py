"""Integral functionals over step functions: interchange, conjugates, epsilon-subdifferentials.

Step functions on a time grid play the role of a decomposable function
space: every cell can be modified independently.  Cell values are sampled
at cell midpoints and atoms of the measure at their grid nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import (
    Curve,
    DiscreteMeasure,
    Report,
    ReportKind,
    StepFunction,
    StructuralError,
    TimeGrid,
    quadrature,
)
from .integrand import (
    EmptyDomainError,
    IntegrandOracle,
    UnsupportedError,
    conjugate_values,
    infimal_values,
    minimize_box,
    subdifferential,
    sup_affine_minus,
)
from .sets import as_interval

__all__ = [
    "SelectionError",
    "UnsupportedDomainError",
    "IntegralFunctional",
    "EpsWitness",
    "infimal_integral",
    "continuous_eps_selection",
    "verify_interchange",
    "conjugate_of_integral",
    "eps_subdiff_membership",
    "argmin_equivalence",
    "expected_value",
    "expected_subgradient_witness_check",
    "expected_conjugate",
]


class SelectionError(RuntimeError):
    """No continuous selection below the level function within the refinement cap."""

    def __init__(self, msg: str, cells=()):
        super().__init__(msg)
        self.cells = list(cells)


class UnsupportedDomainError(UnsupportedError):
    """The expected functional is not finite on the whole space."""


@dataclass(frozen=True)
class EpsWitness:
    """Error density ``ell`` (per cell, plus per atom) certifying an epsilon-subgradient."""

    ell: np.ndarray
    total: float
    ell_atoms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    infinite: bool = False


@dataclass(frozen=True)
class IntegralFunctional:
    """``I_f(x) = int f_t(x(t)) dmu`` over step functions (or curves) on ``measure.grid``."""

    f: IntegrandOracle
    measure: DiscreteMeasure
    p: float = 2.0

    @property
    def grid(self) -> TimeGrid:
        return self.measure.grid

    def samples(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Cell-midpoint and node values of ``x`` (StepFunction, Curve or constant point)."""
        g = self.grid
        if isinstance(x, StepFunction):
            if x.grid != g:
                raise StructuralError("step function and measure use different grids")
            return x.cell_values, x.node_values()
        if isinstance(x, Curve):
            return x(g.midpoints), x(g.nodes)
        u = np.atleast_1d(np.asarray(x, dtype=float))
        return np.tile(u, (g.n_cells, 1)), np.tile(u, (g.n_cells + 1, 1))

    def cell_values(self, x) -> tuple[np.ndarray, np.ndarray]:
        xm, xn = self.samples(x)
        if xm.shape[1] != self.f.dim:
            raise StructuralError(f"argument has dimension {xm.shape[1]}, integrand expects {self.f.dim}")
        fm = self.f(self.grid.midpoints, xm)
        fn = self.f(self.grid.nodes, xn) if self.measure.atoms else None
        return fm, fn

    def __call__(self, x) -> float:
        fm, fn = self.cell_values(x)
        return quadrature(fm, self.measure, fn)

    def batch(self, Z: np.ndarray) -> np.ndarray:
        """``I_f`` for a stack of step functions given as cell values ``(trials, N, n)``."""
        Z = np.asarray(Z, dtype=float)
        F = self.f(self.grid.midpoints[None, :], Z)
        w = self.measure.cell_masses
        inf_rows = np.any(np.isinf(F[:, w > 0]), axis=1)
        with np.errstate(invalid="ignore"):
            out = np.where(np.isfinite(F), F, 0.0) @ w
        out = np.where(inf_rows, np.inf, out)
        if self.measure.atoms:
            nodes = self.measure.atom_nodes
            # node value of a step function is the value of the cell to its right
            cells = np.minimum(nodes, self.grid.n_cells - 1)
            Fa = self.f(self.grid.nodes[nodes][None, :], Z[:, cells])
            masses = self.measure.atom_masses
            ainf = np.any(np.isinf(Fa[:, masses > 0]), axis=1)
            out = np.where(ainf, np.inf, out + np.where(np.isfinite(Fa), Fa, 0.0) @ masses)
        return out


def _infimal_with_cells(F: IntegralFunctional, ts: np.ndarray, label: str):
    try:
        return infimal_values(F.f, ts)
    except EmptyDomainError as exc:
        where = ""
        if exc.t is not None:
            k = F.grid.cell_of(exc.t) if label == "cell" else int(np.argmin(np.abs(F.grid.nodes - exc.t)))
            where = f" ({label} {k})"
        raise EmptyDomainError(f"{exc}{where}", exc.t) from None


def infimal_integral(F: IntegralFunctional) -> float:
    """``int m_f dmu`` with ``m_f(t) = min_x f_t(x)`` sampled at cell midpoints (and atom nodes)."""
    m_mid, _ = _infimal_with_cells(F, F.grid.midpoints, "cell")
    m_nodes = None
    if F.measure.atoms:
        m_nodes = np.zeros(F.grid.n_cells + 1)
        nodes = F.measure.atom_nodes
        m_nodes[nodes], _ = _infimal_with_cells(F, F.grid.nodes[nodes], "node")
    return quadrature(m_mid, F.measure, m_nodes)


def continuous_eps_selection(
    F: IntegralFunctional,
    alpha: Curve | Callable,
    *,
    max_rounds: int = 30,
    max_nodes: int = 200_000,
    slack: float = 1e-12,
) -> Curve:
    """Piecewise-linear ``phi`` with ``f_t(phi(t)) <= alpha(t)`` at every node and cell midpoint.

    Nodes carry pointwise minimizers; cells whose midpoint violates the
    bound are bisected (the minimizer at the new node is added) until all
    checks pass.  ``alpha`` is a real-valued Curve or a vectorized callable.
    """
    f = F.f
    level = alpha if callable(alpha) and not isinstance(alpha, Curve) else (lambda t: alpha(t)[..., 0])
    nodes = F.grid.nodes.copy()
    m, X = _infimal_with_cells(F, nodes, "node")
    a_nodes = level(nodes)
    if np.any(a_nodes <= m):
        bad = np.flatnonzero(a_nodes <= m)
        raise SelectionError(
            f"level does not dominate m_f at {bad.size} node(s); min margin {float(np.min(a_nodes - m)):.3g}",
            bad,
        )
    for _ in range(max_rounds):
        mids = 0.5 * (nodes[1:] + nodes[:-1])
        xm = 0.5 * (X[1:] + X[:-1])
        bad = f(mids, xm) > level(mids) + slack
        if not bad.any():
            return Curve(TimeGrid(nodes), X, "linear")
        if nodes.size + bad.sum() > max_nodes:
            break
        new_t = mids[bad]
        m_new, X_new = _infimal_with_cells(F, new_t, "node")
        if np.any(level(new_t) <= m_new):
            break
        order = np.argsort(np.concatenate([nodes, new_t]), kind="stable")
        nodes = np.concatenate([nodes, new_t])[order]
        X = np.concatenate([X, X_new])[order]
    mids = 0.5 * (nodes[1:] + nodes[:-1])
    bad = np.flatnonzero(f(mids, 0.5 * (X[1:] + X[:-1])) > level(mids) + slack)
    raise SelectionError(
        f"selection still violates the level on {bad.size} cell(s) after refinement; "
        f"first offending interval [{nodes[bad[0]]:g}, {nodes[bad[0] + 1]:g}]" if bad.size else "refinement cap reached",
        bad,
    )


def verify_interchange(
    F: IntegralFunctional,
    *,
    eps_schedule=tuple(10.0 ** -j for j in range(1, 7)),
    tol: float = 1e-5,
    stable_tol: float | None = None,
) -> Report:
    """Compare ``inf over continuous phi of I_f(phi)`` with ``int m_f dmu``.

    The left side is the minimum of ``I_f`` over the selections built for
    levels ``m_f + eps``; the schedule stops early once successive values
    agree to ``stable_tol`` (default ``tol / 10``).
    """
    if not F.f.convex:
        raise UnsupportedError(f"{F.f.name} is not declared convex; interchange needs convex values")
    stable_tol = tol / 10 if stable_tol is None else stable_tol
    rhs = infimal_integral(F)

    def m_of(t):
        return infimal_values(F.f, np.atleast_1d(t))[0].reshape(np.shape(t))

    lhs = math.inf
    best = None
    history = []
    prev = None
    for eps in eps_schedule:
        phi = continuous_eps_selection(F, lambda t, e=eps: m_of(t) + e)
        val = F(phi)
        history.append([float(eps), val])
        if val < lhs:
            lhs, best = val, phi
        if prev is not None and abs(val - prev) <= stable_tol:
            break
        prev = val
    residual = lhs - rhs if math.isfinite(lhs) or math.isfinite(rhs) else 0.0
    return Report(
        ReportKind.INTERCHANGE,
        lhs,
        rhs,
        residual,
        tol,
        passed=abs(residual) <= tol,
        witnesses={"selection": best, "eps_history": history},
        notes=f"{len(history)} level(s) tried",
    )


def _step_samples(F: IntegralFunctional, s: StepFunction):
    if s.grid != F.grid:
        raise StructuralError("dual step function and measure use different grids")
    if s.dim != F.f.dim:
        raise StructuralError(f"dual step function has dimension {s.dim}, integrand expects {F.f.dim}")
    return s.cell_values, s.node_values()


def conjugate_of_integral(F: IntegralFunctional, s: StepFunction, tol: float = 1e-5) -> tuple[float, float, Report]:
    """``(pointwise, direct, report)`` for the conjugate of ``I_f`` at ``s``.

    ``pointwise = int f_t^*(s(t)) dmu`` (closed-form conjugate when the
    oracle has one); ``direct`` maximizes ``<s_k, x> - f_{t_k}(x)`` cell by
    cell with the lattice-plus-ascent solver, never touching the closed form.
    A direct maximizer stuck on the search box counts as ``+inf``.
    """
    f = F.f
    g = F.grid
    feasible = F(StepFunction(g, infimal_values(f, g.midpoints)[1]))
    if not math.isfinite(feasible):
        raise EmptyDomainError(f"I_f is +inf at the pointwise minimizer of {f.name}")
    sm, sn = _step_samples(F, s)
    atoms = F.measure.atom_nodes if F.measure.atoms else np.zeros(0, dtype=int)

    pw_cells = conjugate_values(f, g.midpoints, sm)
    pw_nodes = None
    if atoms.size:
        pw_nodes = np.zeros(g.n_cells + 1)
        pw_nodes[atoms] = conjugate_values(f, g.nodes[atoms], sn[atoms])
    pointwise = quadrature(pw_cells, F.measure, pw_nodes)

    d_cells, _, at_b = sup_affine_minus(f, g.midpoints, sm)
    d_cells = np.where(at_b, np.inf, d_cells)
    d_nodes = None
    if atoms.size:
        d_nodes = np.zeros(g.n_cells + 1)
        vals, _, ab = sup_affine_minus(f, g.nodes[atoms], sn[atoms])
        d_nodes[atoms] = np.where(ab, np.inf, vals)
    direct = quadrature(d_cells, F.measure, d_nodes)

    if math.isinf(pointwise) and math.isinf(direct):
        report = Report(ReportKind.CONJUGATE, pointwise, direct, 0.0, tol, passed=True, notes="both infinite")
    elif math.isinf(pointwise) or math.isinf(direct):
        report = Report(ReportKind.CONJUGATE, pointwise, direct, math.inf, tol, passed=False, notes="one side infinite")
    else:
        report = Report(
            ReportKind.CONJUGATE,
            pointwise,
            direct,
            abs(pointwise - direct),
            tol,
            witnesses={"pointwise_cells": pw_cells, "direct_cells": d_cells},
        )
    return pointwise, direct, report


def _yf_cells(f: IntegrandOracle, ts, X, S) -> np.ndarray:
    fx = f(ts, X)
    if not np.all(np.isfinite(fx)):
        raise ValueError(f"{f.name} is not finite along the primal step function")
    fs = conjugate_values(f, ts, S)
    ell = np.where(np.isinf(fs), np.inf, fx + fs - np.sum(S * X, axis=-1))
    return np.maximum(ell, 0.0)


def eps_subdiff_membership(
    F: IntegralFunctional, x: StepFunction, s: StepFunction, eps: float, tol: float = 1e-9
) -> tuple[bool, EpsWitness]:
    """Is ``s`` an ``eps``-subgradient of ``I_f`` at ``x``?

    The witness is the cellwise Young-Fenchel residual, the smallest error
    density that can certify membership.
    """
    if not F.f.convex:
        raise UnsupportedError(f"{F.f.name} is not declared convex")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    g = F.grid
    xm, xn = F.samples(x)
    sm, sn = _step_samples(F, s)
    ell = _yf_cells(F.f, g.midpoints, xm, sm)
    ell_nodes = None
    ell_atoms = np.zeros(0)
    if F.measure.atoms:
        nodes = F.measure.atom_nodes
        ell_atoms = _yf_cells(F.f, g.nodes[nodes], xn[nodes], sn[nodes])
        ell_nodes = np.zeros(g.n_cells + 1)
        ell_nodes[nodes] = ell_atoms
    total = quadrature(ell, F.measure, ell_nodes)
    infinite = math.isinf(total)
    member = (not infinite) and total <= eps + tol
    return member, EpsWitness(ell, total, ell_atoms, infinite)


def argmin_equivalence(
    F: IntegralFunctional,
    trials: int = 1000,
    rng: np.random.Generator | None = None,
    tol: float = 1e-6,
    spread: float = 0.5,
) -> Report:
    """Check that the cellwise minimizer beats random step functions and attains ``int m_f``.

    Random competitors are drawn uniformly from the search boxes (half of
    them) or as Gaussian perturbations of the minimizer at log-uniformly
    spread sizes (the other half).
    Needs no convexity.
    """
    rng = rng or np.random.default_rng(0)
    g = F.grid
    m_mid, X = _infimal_with_cells(F, g.midpoints, "cell")
    xbar = StepFunction(g, X)
    m_nodes = None
    if F.measure.atoms:
        # atoms see the cell to their right, so lhs may exceed rhs there
        m_nodes = np.zeros(g.n_cells + 1)
        nodes = F.measure.atom_nodes
        m_nodes[nodes] = _infimal_with_cells(F, g.nodes[nodes], "node")[0]
    lhs = F(xbar)
    rhs = quadrature(m_mid, F.measure, m_nodes)
    lo, hi = F.f.box(g.midpoints)
    half = trials // 2
    Z = np.empty((trials, g.n_cells, F.f.dim))
    Z[:half] = rng.uniform(lo, hi, size=(half,) + lo.shape)
    # perturbation sizes log-uniform over four decades, so near-optimal competitors are tried too
    scale = spread * (hi - lo) / 10
    sizes = 10.0 ** rng.uniform(-4, 0, size=(trials - half, 1, 1))
    Z[half:] = X[None] + sizes * scale[None] * rng.standard_normal((trials - half,) + X.shape)
    vals = F.batch(Z)
    best = float(np.min(vals)) if trials else math.inf
    below = int(np.sum(vals < lhs - tol))
    residual = max(abs(lhs - rhs), max(0.0, lhs - best))
    return Report(
        ReportKind.ARGMIN,
        lhs,
        rhs,
        residual,
        tol,
        witnesses={"argmin": xbar, "best_random": best, "violations": below},
        notes=f"{trials} random competitors",
    )


def expected_value(f: IntegrandOracle, m: DiscreteMeasure, u) -> float:
    """``E_f(u) = int f_t(u) dmu`` for a constant point ``u``."""
    return IntegralFunctional(f, m)(np.atleast_1d(np.asarray(u, dtype=float)))


def _expected_batch(f: IntegrandOracle, m: DiscreteMeasure, U: np.ndarray) -> np.ndarray:
    """``E_f`` at many points ``U`` (..., n)."""
    U = np.asarray(U, dtype=float)
    g = m.grid
    F = f(g.midpoints, U[..., None, :])
    w = m.cell_masses
    out = np.where(np.isfinite(F), F, 0.0) @ w
    out = np.where(np.any(np.isinf(F[..., w > 0]), axis=-1), np.inf, out)
    if m.atoms:
        Fa = f(g.nodes[m.atom_nodes], U[..., None, :])
        out = out + np.where(np.isfinite(Fa), Fa, 0.0) @ m.atom_masses
        out = np.where(np.any(np.isinf(Fa), axis=-1), np.inf, out)
    return out


def _vector_integral(v: StepFunction, m: DiscreteMeasure) -> np.ndarray:
    nodes = v.node_values()
    return np.array([quadrature(v.cell_values[:, j], m, nodes[:, j] if m.atoms else None) for j in range(v.dim)])


def _sample_around(f: IntegrandOracle, m: DiscreteMeasure, u, rng, count: int) -> np.ndarray:
    lo, hi = f.box(m.grid.midpoints)
    lo, hi = lo.min(axis=0), hi.max(axis=0)
    return rng.uniform(lo, hi, size=(count, f.dim))


def expected_subgradient_witness_check(
    f: IntegrandOracle,
    m: DiscreteMeasure,
    u,
    v: StepFunction,
    eps: float,
    *,
    rng: np.random.Generator | None = None,
    samples: int = 64,
    tol: float = 1e-9,
) -> tuple[bool, EpsWitness]:
    """Does the selection ``v`` certify ``int v dmu`` as an ``eps``-subgradient of ``E_f`` at ``u``?

    Only the case where ``E_f`` is finite everywhere is handled; a sampled
    point with ``E_f = +inf`` raises :class:`UnsupportedDomainError`.
    """
    if not f.convex:
        raise UnsupportedError(f"{f.name} is not declared convex")
    rng = rng or np.random.default_rng(0)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    W = _sample_around(f, m, u, rng, samples)
    EW = _expected_batch(f, m, W)
    if not np.all(np.isfinite(EW)):
        raise UnsupportedDomainError(f"E_f is +inf at sampled points: dom E_f is not the whole space for {f.name}")
    Eu = float(_expected_batch(f, m, u))
    if not math.isfinite(Eu):
        raise ValueError("E_f(u) is not finite")
    F = IntegralFunctional(f, m)
    member, witness = eps_subdiff_membership(F, StepFunction.constant(m.grid, u), v, eps, tol)
    s = _vector_integral(v, m)
    gap = EW - Eu - (W - u) @ s + eps
    direct_ok = bool(np.all(gap >= -tol * (1 + np.abs(EW))))
    return member and direct_ok, witness


def expected_conjugate(
    f: IntegrandOracle, m: DiscreteMeasure, s, box=None, tol: float = 1e-6, rng: np.random.Generator | None = None
) -> Report:
    """Conjugate of ``E_f`` at ``s``: direct sup versus the dual reduction.

    ``lhs = sup_u <s, u> - E_f(u)`` over the box.  ``rhs = int f_t^*(v(t)) dmu``
    for a selection ``v(t)`` of ``subdiff f_t(u*)`` at the primal maximizer
    ``u*``, tuned so that ``int v dmu = s``.  In dimension above one the
    selection is least-norm plus a constant shift, which only bounds the
    infimum from above.
    """
    rng = rng or np.random.default_rng(0)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.size != f.dim:
        raise StructuralError(f"slope has dimension {s.size}, integrand expects {f.dim}")
    g = m.grid
    W = _sample_around(f, m, s, rng, 64)
    if not np.all(np.isfinite(_expected_batch(f, m, W))):
        raise UnsupportedDomainError(f"{f.name} is not finite everywhere")
    if box is None:
        lo, hi = f.box(g.midpoints)
        lo, hi = lo.min(axis=0), hi.max(axis=0)
    else:
        lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    u_star, val = minimize_box(lambda U: _expected_batch(f, m, U) - U @ s, lo, hi)
    lhs = -val
    width = np.maximum(hi - lo, 1e-12)
    on_edge = bool(np.any((u_star <= lo + 1e-9 * width) | (u_star >= hi - 1e-9 * width)))

    ts = g.midpoints
    total = m.total_mass
    if f.dim == 1:
        ends = [as_interval(subdifferential(f, t, u_star)) for t in ts]
        v_lo = np.array([e.lo[0] for e in ends])
        v_hi = np.array([e.hi[0] for e in ends])
        i_lo = quadrature(v_lo, m, np.append(v_lo, v_lo[-1]) if m.atoms else None)
        i_hi = quadrature(v_hi, m, np.append(v_hi, v_hi[-1]) if m.atoms else None)
        theta = 0.0 if i_hi - i_lo <= 0 else min(1.0, max(0.0, (s[0] - i_lo) / (i_hi - i_lo)))
        V = (v_lo + theta * (v_hi - v_lo))[:, None]
        notes = "one-dimensional dual reduction"
    else:
        V = np.array([subdifferential(f, t, u_star).least_norm() for t in ts])
        notes = "least-norm selection: right side is an upper bound"
    vs = StepFunction(g, V)
    V = V + (s - _vector_integral(vs, m)) / total
    vs = StepFunction(g, V)
    fs_cells = conjugate_values(f, ts, V)
    fs_nodes = None
    if m.atoms:
        fs_nodes = np.zeros(g.n_cells + 1)
        nodes = m.atom_nodes
        fs_nodes[nodes] = conjugate_values(f, g.nodes[nodes], vs.node_values()[nodes])
    rhs = quadrature(fs_cells, m, fs_nodes)
    if on_edge:
        notes += "; primal maximizer on the box boundary"
    return Report(
        ReportKind.EXPECTED_CONJUGATE,
        lhs,
        rhs,
        abs(lhs - rhs),
        tol,
        witnesses={"u_star": u_star, "selection": vs},
        notes=notes,
    )
