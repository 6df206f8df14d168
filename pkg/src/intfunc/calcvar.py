"""Discretized Bolza problems: exact penalization, descent, adjoint and Euler-Lagrange certificate.

An arc is stored as its initial point ``u`` and its derivative ``y`` (a
step function), so ``x(t) = u + int_a^t y`` holds by construction.  The
discrete cost is

    J(u, y) = ell(x(a), x(b)) + sum_k h_k f(t_k, xbar_k, y_k)

with ``t_k`` the cell midpoint and ``xbar_k = (x_k + x_{k+1}) / 2``.  The
integrand ``f`` is an :class:`IntegrandOracle` on ``z = (x, v)`` in R^{2n}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize, minimize_scalar, nnls

from .clarke import ClarkeEstimatorConfig, _membership_batch
from .expr import compile_expr
from .grid import (
    Curve,
    Report,
    ReportKind,
    StepFunction,
    StructuralError,
    TimeGrid,
    cumulative_integral,
    curve_derivative,
    quadrature,
    DiscreteMeasure,
    seeded_rng,
)
from .integrand import IntegrandOracle, from_description, subdifferential
from .sets import Ball, Box, Cone, point, sample_directions, whole_space

__all__ = [
    "ModulusEstimationError",
    "EndpointSet",
    "PinnedEnds",
    "LeftPinned",
    "AffineEnds",
    "BallEnds",
    "FreeEnds",
    "endpoint_set_from_description",
    "EndpointCost",
    "BolzaProblem",
    "problem_from_description",
    "Arc",
    "Adjoint",
    "SolverOptions",
    "objective",
    "estimate_K0",
    "penalized_objective",
    "solve",
    "adjoint_reconstruct",
    "euler_lagrange_residual",
]


class ModulusEstimationError(RuntimeError):
    """Sampled Lipschitz quotients of the endpoint cost blow up."""


# --------------------------------------------------------------------------
# endpoint sets in R^{2n}


class EndpointSet:
    """Closed set of admissible endpoint pairs ``(x(a), x(b))``."""

    dim: int

    def project(self, z):
        raise NotImplementedError

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.linalg.norm(z - self.project(z), axis=-1)

    def contains(self, z, tol: float = 1e-9) -> bool:
        return bool(np.all(self.distance(z) <= tol))

    def normal_cone(self, z):
        raise NotImplementedError


class PinnedEnds(EndpointSet):
    """Both endpoints fixed: ``S = {(u0, w0)}``."""

    def __init__(self, u0, w0):
        self.target = np.concatenate([np.atleast_1d(u0), np.atleast_1d(w0)]).astype(float)
        self.dim = self.target.size

    def project(self, z):
        return np.broadcast_to(self.target, np.shape(z)).copy()

    def normal_cone(self, z):
        return whole_space(self.dim)

    def __repr__(self):
        return f"PinnedEnds({self.target.tolist()})"


class LeftPinned(EndpointSet):
    """``x(a) = u0``, right end free."""

    def __init__(self, u0):
        self.u0 = np.atleast_1d(np.asarray(u0, dtype=float))
        self.n = self.u0.size
        self.dim = 2 * self.n

    def project(self, z):
        z = np.array(z, dtype=float)
        z[..., : self.n] = self.u0
        return z

    def normal_cone(self, z):
        inf = np.full(self.n, np.inf)
        zero = np.zeros(self.n)
        return Box(np.concatenate([-inf, zero]), np.concatenate([inf, zero]))

    def __repr__(self):
        return f"LeftPinned({self.u0.tolist()})"


class AffineEnds(EndpointSet):
    """``S = {z : A z = c}`` for a full-row-rank matrix ``A``."""

    def __init__(self, A, c):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.c = np.atleast_1d(np.asarray(c, dtype=float))
        self.dim = self.A.shape[1]
        self._pinv = self.A.T @ np.linalg.inv(self.A @ self.A.T)

    def project(self, z):
        z = np.asarray(z, dtype=float)
        r = z @ self.A.T - self.c
        return z - r @ self._pinv.T

    def normal_cone(self, z):
        return Cone(np.vstack([self.A, -self.A]))

    def __repr__(self):
        return f"AffineEnds(A={self.A.tolist()}, c={self.c.tolist()})"


class BallEnds(EndpointSet):
    """``S = closed ball(center, radius)`` in R^{2n}."""

    def __init__(self, center, radius: float):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        self.dim = self.center.size

    def project(self, z):
        z = np.asarray(z, dtype=float)
        d = z - self.center
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        scale = np.where(n > self.radius, self.radius / np.maximum(n, 1e-300), 1.0)
        return self.center + d * scale

    def normal_cone(self, z, tol: float = 1e-7):
        d = np.asarray(z, dtype=float) - self.center
        if np.linalg.norm(d) >= self.radius - tol:
            return Cone(d)
        return point(np.zeros(self.dim))

    def __repr__(self):
        return f"BallEnds({self.center.tolist()}, {self.radius})"


class FreeEnds(EndpointSet):
    def __init__(self, n: int):
        self.dim = 2 * n

    def project(self, z):
        return np.array(z, dtype=float)

    def normal_cone(self, z):
        return point(np.zeros(self.dim))

    def __repr__(self):
        return "FreeEnds()"


def endpoint_set_from_description(desc: dict, n: int) -> EndpointSet:
    kind = desc.get("kind", "free")
    if kind == "pinned":
        return PinnedEnds(desc["u"], desc["w"])
    if kind == "left-pinned":
        return LeftPinned(desc["u"])
    if kind == "affine":
        return AffineEnds(desc["A"], desc["c"])
    if kind == "ball":
        return BallEnds(desc["center"], desc["radius"])
    if kind == "free":
        return FreeEnds(n)
    raise ValueError(f"unknown constraint kind {kind!r}")


# --------------------------------------------------------------------------
# endpoint cost


class EndpointCost:
    """Vectorized ``ell(u, w)``; gradients by central differences unless supplied."""

    def __init__(self, fn: Callable, n: int, grad: Callable | None = None, source: str = ""):
        self.fn = fn
        self.n = n
        self._grad = grad
        self.source = source

    @classmethod
    def from_expression(cls, src: str | float, n: int) -> "EndpointCost":
        if n == 1:
            names = ("u", "w")
        else:
            names = tuple(f"u{i}" for i in range(n)) + tuple(f"w{i}" for i in range(n))
        e = compile_expr(src, names)

        def fn(U, W):
            U = np.asarray(U, dtype=float)
            W = np.asarray(W, dtype=float)
            args = [U[..., i] for i in range(n)] + [W[..., i] for i in range(n)]
            return e(*args)

        return cls(fn, n, source=str(src))

    @classmethod
    def zero(cls, n: int) -> "EndpointCost":
        return cls(lambda U, W: np.zeros(np.broadcast_shapes(np.shape(U)[:-1], np.shape(W)[:-1])), n, source="0")

    def __call__(self, U, W):
        return np.asarray(self.fn(U, W), dtype=float)

    def value(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self(z[..., : self.n], z[..., self.n :])

    def gradient(self, z, h: float = 1e-7) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(z), dtype=float)
        E = np.eye(2 * self.n) * h
        zp = z[..., None, :] + E
        zm = z[..., None, :] - E
        return (self.value(zp) - self.value(zm)) / (2 * h)


# --------------------------------------------------------------------------
# problem, arcs, adjoints


@dataclass(frozen=True)
class BolzaProblem:
    n: int
    a: float
    b: float
    f: IntegrandOracle
    ell: EndpointCost
    S: EndpointSet
    p: float = 2.0

    def __post_init__(self):
        if self.f.dim != 2 * self.n:
            raise StructuralError(f"lagrangian must act on (x, v) in R^{2 * self.n}, got dimension {self.f.dim}")
        if self.S.dim != 2 * self.n:
            raise StructuralError("endpoint set has the wrong dimension")
        if not self.b > self.a:
            raise StructuralError("need a < b")

    def grid(self, N: int) -> TimeGrid:
        return TimeGrid.uniform(self.a, self.b, N)


def problem_from_description(desc: dict) -> BolzaProblem:
    """Build a problem from ``{"lagrangian": {...}, "endpoint_cost": expr, "constraint": {...}, "n", "a", "b", "p"}``."""
    n = int(desc.get("n", 1))
    return BolzaProblem(
        n,
        float(desc.get("a", 0.0)),
        float(desc.get("b", 1.0)),
        from_description(desc["lagrangian"], 2 * n),
        EndpointCost.from_expression(desc.get("endpoint_cost", 0.0), n),
        endpoint_set_from_description(desc.get("constraint", {"kind": "free"}), n),
        float(desc.get("p", 2.0)),
    )


@dataclass(frozen=True)
class Arc:
    u: np.ndarray
    y: StepFunction
    info: dict = field(default_factory=dict, compare=False)

    @property
    def x(self) -> Curve:
        return cumulative_integral(self.u, self.y)

    @property
    def grid(self) -> TimeGrid:
        return self.y.grid

    @property
    def endpoints(self) -> np.ndarray:
        xv = self.x.values
        return np.concatenate([xv[0], xv[-1]])

    @classmethod
    def from_curve(cls, x: Curve) -> "Arc":
        return cls(np.array(x.values[0]), curve_derivative(x))


@dataclass(frozen=True)
class Adjoint:
    p_curve: Curve
    pdot: StepFunction
    selection_residual: float = 0.0


def _cell_states(u, Y, h):
    """Node values and cell-midpoint states of the arc (u, Y)."""
    X = np.vstack([u, u + np.cumsum(Y * h[:, None], axis=0)])
    xbar = X[:-1] + 0.5 * h[:, None] * Y
    return X, xbar


def _integral_terms(P: BolzaProblem, grid: TimeGrid, u, Y):
    h = grid.widths
    X, xbar = _cell_states(u, Y, h)
    Z = np.concatenate([xbar, Y], axis=1)
    return X, xbar, Z, P.f(grid.midpoints, Z)


def objective(P: BolzaProblem, arc: Arc) -> float:
    """``ell(x(a), x(b)) + sum_k h_k f(t_k, xbar_k, y_k)``."""
    g = arc.grid
    X, _, _, F = _integral_terms(P, g, arc.u, arc.y.cell_values)
    run = quadrature(F, DiscreteMeasure.lebesgue(g))
    return float(P.ell(X[0], X[-1])) + run


def penalized_objective(P: BolzaProblem, arc: Arc, K: float) -> float:
    """``J + K * dist((x(a), x(b)), S)``."""
    if K <= 0:
        raise ValueError("penalty weight must be positive")
    return objective(P, arc) + K * float(P.S.distance(arc.endpoints))


def estimate_K0(
    P: BolzaProblem,
    anchor: Arc,
    delta: float = 0.1,
    samples: int = 2000,
    seed: int = 0,
) -> float:
    """``K0 = M + int k``: ``M`` from sampled difference quotients of ``ell`` near the anchor endpoints.

    ``k`` is the declared Lipschitz modulus of the Lagrangian when present,
    otherwise the largest sampled gradient norm in a ``delta``-neighbourhood
    of each cell state.
    """
    z0 = anchor.endpoints
    rng = seeded_rng(seed, 11)

    def M_at(r):
        d = z0.size
        A = z0 + r * _ball(rng, samples, d)
        B = z0 + r * _ball(rng, samples, d)
        dirs = sample_directions(d, 64)
        C = z0 + r * _ball(rng, dirs.shape[0] * 8, d)
        Dp = C + 1e-3 * r * np.repeat(dirs, 8, axis=0)
        qa = np.abs(P.ell.value(A) - P.ell.value(B)) / np.maximum(np.linalg.norm(A - B, axis=1), 1e-300)
        qb = np.abs(P.ell.value(C) - P.ell.value(Dp)) / np.linalg.norm(C - Dp, axis=1)
        return float(max(qa.max(), qb.max()))

    Ms = [M_at(delta * 10.0**-j) for j in range(3)]
    # a Lipschitz cost cannot keep doubling its quotients per decade of radius
    growing = Ms[1] > 2 * max(Ms[0], 1e-12) and Ms[2] > 2 * Ms[1]
    if not all(math.isfinite(v) for v in Ms) or growing or Ms[1] > 8 * max(Ms[0], 1.0):
        raise ModulusEstimationError(
            "endpoint-cost quotients diverge: " + ", ".join(f"{v:g} at radius {delta * 10.0**-j:g}" for j, v in enumerate(Ms))
        )
    M = max(Ms)

    g = anchor.grid
    m = DiscreteMeasure.lebesgue(g)
    if P.f.lipschitz is not None:
        k = np.asarray(P.f.lipschitz(g.midpoints), dtype=float) + np.zeros(g.n_cells)
    else:
        _, _, Z, _ = _integral_terms(P, g, anchor.u, anchor.y.cell_values)
        offs = delta * _ball(rng, 32, Z.shape[1])
        Zs = Z[:, None, :] + np.vstack([np.zeros((1, Z.shape[1])), offs])[None]
        G = P.f.gradient(g.midpoints[:, None], Zs)
        k = np.linalg.norm(G, axis=-1).max(axis=1)
    return M + quadrature(k, m)


def _ball(rng, count, d):
    v = rng.standard_normal((count, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.uniform(0, 1, size=(count, 1)) ** (1.0 / d)


# --------------------------------------------------------------------------
# solver


@dataclass(frozen=True)
class SolverOptions:
    mu_schedule: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
    maxiter: int = 20000
    gtol: float = 1e-13
    subgrad_iters: int = 3000
    subgrad_step: float = 1e-3
    window: int = 100
    tol: float = 1e-13


def _pack(u, Y):
    return np.concatenate([np.ravel(u), np.ravel(Y)])


def _unpack(z, n, N):
    return z[:n], z[n:].reshape(N, n)


def _penalty(S: EndpointSet, ends, K, mu):
    """Value and gradient of ``K * d_S`` (Huber-smoothed with width ``mu`` when ``mu > 0``)."""
    proj = S.project(ends)
    r = ends - proj
    d = float(np.linalg.norm(r))
    if mu > 0 and d <= mu:
        return K * d * d / (2 * mu), K * r / mu
    if d == 0:
        return 0.0, np.zeros_like(ends)
    val = K * (d - mu / 2) if mu > 0 else K * d
    return val, K * r / d


def _make_fun(P: BolzaProblem, grid: TimeGrid, K: float, mu: float):
    n, N = P.n, grid.n_cells
    h = grid.widths
    mids = grid.midpoints

    def fun(z):
        u, Y = _unpack(z, n, N)
        X, xbar = _cell_states(u, Y, h)
        Zc = np.concatenate([xbar, Y], axis=1)
        F = P.f(mids, Zc)
        ends = np.concatenate([X[0], X[-1]])
        ell = float(P.ell.value(ends))
        pen, gpen = _penalty(P.S, ends, K, mu)
        val = ell + float(np.dot(h, F)) + pen
        G = P.f.gradient(mids, Zc)
        fx, fv = G[:, :n], G[:, n:]
        ge = P.ell.gradient(ends) + gpen
        gu_end, gw_end = ge[:n], ge[n:]
        hfx = h[:, None] * fx
        # sum over cells strictly to the right of k, then the half cell k itself
        tail = np.cumsum(hfx[::-1], axis=0)[::-1] - hfx
        gY = h[:, None] * (fv + 0.5 * hfx + tail + gw_end)
        gu = gu_end + gw_end + hfx.sum(axis=0)
        return val, _pack(gu, gY)

    return fun


def _default_init(P: BolzaProblem, grid: TimeGrid) -> Arc:
    ends = P.S.project(np.zeros(2 * P.n))
    u, w = ends[: P.n], ends[P.n :]
    slope = (w - u) / (P.b - P.a)
    return Arc(u, StepFunction.constant(grid, slope))


def solve(P: BolzaProblem, init: Arc | int, K: float, opts: SolverOptions = SolverOptions()) -> Arc:
    """Minimize the penalized cost ``J + K d_S`` over arcs on the grid of ``init``.

    Stage one runs L-BFGS on a sequence of Huber-smoothed penalties of
    decreasing width ``mu`` (warm started).  Stage two applies normalized
    subgradient steps ``c / sqrt(j)`` to the exact penalized cost and keeps
    the best iterate, stopping once the best value has not moved by more
    than ``opts.tol`` over ``opts.window`` steps.  The returned arc carries a
    solver :class:`Report` and the best-value history in ``arc.info``.
    """
    if isinstance(init, int):
        init = _default_init(P, P.grid(init))
    if K <= 0:
        raise ValueError("penalty weight must be positive")
    grid = init.grid
    n, N = P.n, grid.n_cells
    z = _pack(init.u, init.y.cell_values)
    exact = _make_fun(P, grid, K, 0.0)
    best_z, best_val = z.copy(), exact(z)[0]
    history = [best_val]
    lbfgs_ok = True
    for mu in opts.mu_schedule:
        res = minimize(
            _make_fun(P, grid, K, mu),
            z,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": opts.maxiter, "gtol": opts.gtol, "ftol": 1e-16, "maxcor": 30},
        )
        z = res.x
        lbfgs_ok = bool(res.success) or "ABNORMAL" in str(res.message)
        val = exact(z)[0]
        if val < best_val:
            best_z, best_val = z.copy(), val
        history.append(best_val)

    z = best_z.copy()
    scale = max(1.0, float(np.max(np.abs(z))))
    last_improve = 0
    converged = False
    for j in range(1, opts.subgrad_iters + 1):
        val, g = exact(z)
        if val < best_val - opts.tol:
            best_z, best_val = z.copy(), val
            last_improve = j
        history.append(best_val)
        if j - last_improve >= opts.window:
            converged = True
            break
        gn = np.linalg.norm(g)
        if gn == 0:
            converged = True
            break
        z = z - (opts.subgrad_step * scale / math.sqrt(j)) * g / gn
    u, Y = _unpack(best_z, n, N)
    arc = Arc(u.copy(), StepFunction(grid, Y.copy()))
    J = objective(P, arc)
    dS = float(P.S.distance(arc.endpoints))
    report = Report(
        ReportKind.SOLVER,
        best_val,
        J,
        dS,
        1e-4,
        passed=converged and lbfgs_ok,
        witnesses={"history": history},
        notes=f"K={K:g}; " + ("stabilized" if converged else "iteration cap reached without stabilization"),
    )
    arc.info.update({"report": report, "history": history, "K": K, "infeasibility": dS})
    return arc


# --------------------------------------------------------------------------
# adjoint and certificate


def _descriptor_points(D, dim):
    """Generators of a normal-cone descriptor: ``(None, None)`` for the whole space."""
    if isinstance(D, Box):
        if np.all(np.isinf(D.lo)) and np.all(np.isinf(D.hi)):
            return None, None
        gens = []
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = 1.0
            if D.hi[i] == np.inf:
                gens.append(e)
            if D.lo[i] == -np.inf:
                gens.append(-e)
        apex = np.where(np.isfinite(D.lo), D.lo, np.where(np.isfinite(D.hi), D.hi, 0.0))
        return apex, np.array(gens) if gens else np.zeros((0, dim))
    if isinstance(D, Cone):
        return D.apex, D.generators
    raise TypeError(f"unsupported normal cone descriptor {D!r}")


def _dist_hull_plus_cone(q, G, apex, C, rho: float = 1e4):
    """Distance from ``q`` to ``conv(G) + apex + cone(C)`` by NNLS with a weighted simplex row."""
    m = G.shape[0]
    A = np.vstack([G.T, np.zeros((1, m))])
    A[-1, :] = rho
    if C.shape[0]:
        A = np.hstack([A, np.vstack([C.T, np.zeros((1, C.shape[0]))])])
    rhs = np.concatenate([q - apex, [rho]])
    coef, _ = nnls(A, rhs, maxiter=50 * A.shape[1])
    lam = coef[:m]
    lam = lam / max(lam.sum(), 1e-300)
    mix = G.T @ lam + apex + (C.T @ coef[m:] if C.shape[0] else 0.0)
    return float(np.linalg.norm(q - mix))


def _ell_subgradients(P: BolzaProblem, z, count: int = 16, radius: float = 1e-5, seed: int = 0):
    """Gradients of ``ell`` at ``z`` and at nearby points (their hull approximates the Clarke set)."""
    rng = seeded_rng(seed, 23)
    pts = np.vstack([z[None], z + radius * _ball(rng, count, z.size)])
    return P.ell.gradient(pts)


def _endpoint_residual(P: BolzaProblem, ends, pa, pb) -> float:
    q = np.concatenate([pa, -pb])
    N = P.S.normal_cone(ends)
    apex, C = _descriptor_points(N, q.size)
    if apex is None:
        return 0.0
    G = _ell_subgradients(P, ends)
    return _dist_hull_plus_cone(q, G, apex, C)


def adjoint_reconstruct(P: BolzaProblem, arc: Arc) -> Adjoint:
    """Costate ``p`` with ``p(t) = p(b) - int_t^b pdot``, ``pdot_k`` the x-part of a subgradient.

    ``pdot_k`` is taken from the least-norm subgradient of ``f`` at the cell
    state (refined once towards the fitted costate), and ``p(b)`` minimizes
    the squared mismatch of ``(pdot_k, pbar_k)`` to the cellwise
    subdifferentials plus the squared endpoint residual.
    """
    n = P.n
    g = arc.grid
    h = g.widths
    X, xbar, Z, _ = _integral_terms(P, g, arc.u, arc.y.cell_values)
    D = [subdifferential(P.f, t, z) for t, z in zip(g.midpoints, Z)]
    pdot = np.array([d.least_norm()[:n] for d in D])
    ends = np.concatenate([X[0], X[-1]])

    def build(pb, pdot):
        hp = h[:, None] * pdot
        tail = np.cumsum(hp[::-1], axis=0)[::-1]          # int_{t_k}^b pdot
        nodes = np.vstack([pb - tail, pb[None]])
        return nodes, 0.5 * (nodes[1:] + nodes[:-1])

    def mismatch(pb, pdot):
        nodes, pbar = build(pb, pdot)
        S = np.concatenate([pdot, pbar], axis=1)
        inner = math.fsum(h[k] * D[k].distance(S[k]) ** 2 for k in range(len(D)))
        end = _endpoint_residual(P, ends, nodes[0], nodes[-1])
        return inner + end**2, inner

    def fit(pdot, start):
        if n == 1:
            res = minimize_scalar(lambda v: mismatch(np.array([v]), pdot)[0], bracket=(start[0] - 1, start[0] + 1), tol=1e-12)
            return np.array([res.x])
        res = minimize(lambda v: mismatch(v, pdot)[0], start, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000})
        return res.x

    start = Z[-1, n:] * 0 + D[-1].least_norm()[n:]
    pb = fit(pdot, start)
    nodes, pbar = build(pb, pdot)
    pdot = np.array([d.nearest(np.concatenate([pd, pv]))[:n] for d, pd, pv in zip(D, pdot, pbar)])
    pb = fit(pdot, pb)
    nodes, pbar = build(pb, pdot)
    total, inner = mismatch(pb, pdot)
    return Adjoint(Curve(g, nodes, "linear"), StepFunction(g, pdot), math.sqrt(inner / (g.b - g.a)))


def euler_lagrange_residual(
    P: BolzaProblem,
    arc: Arc,
    adj: Adjoint,
    tol: float = 1e-2,
    cfg: ClarkeEstimatorConfig = ClarkeEstimatorConfig(),
) -> Report:
    """Certificate for ``(pdot, p) in Clarke subdiff f`` cellwise and the endpoint transversality condition.

    Interior residual: the worst negative Clarke-membership margin of
    ``(pdot_k, pbar_k)`` at ``(xbar_k, y_k)``.  Endpoint residual: distance
    from ``(p(a), -p(b))`` to the hull of sampled gradients of ``ell`` plus
    the normal cone of ``S``.
    """
    n = P.n
    g = arc.grid
    if adj.p_curve.grid != g:
        raise StructuralError("adjoint and arc live on different grids")
    X, xbar, Z, _ = _integral_terms(P, g, arc.u, arc.y.cell_values)
    pn = adj.p_curve.values
    pbar = 0.5 * (pn[1:] + pn[:-1])
    S = np.concatenate([adj.pdot.cell_values, pbar], axis=1)
    margins, _ = _membership_batch(lambda t, Y: P.f(t, Y), g.midpoints, Z, S, None, cfg)
    interior = max(0.0, -float(np.min(margins)))
    ends = np.concatenate([X[0], X[-1]])
    endpoint = _endpoint_residual(P, ends, pn[0], pn[-1])
    residual = max(interior, endpoint)
    return Report(
        ReportKind.EULER_LAGRANGE,
        interior,
        endpoint,
        residual,
        tol,
        passed=interior <= tol and endpoint <= tol,
        witnesses={"margins": margins, "worst_cell": int(np.argmin(margins))},
        notes="Clarke-level necessary condition",
    )
