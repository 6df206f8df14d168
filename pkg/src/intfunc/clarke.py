"""Sampled Clarke directional derivatives and subdifferential inclusion checks.

The Clarke derivative ``d g(x)(v)`` is a limsup over base points ``y -> x``
and steps ``tau -> 0+``.  It is estimated as the maximum difference
quotient over samples with ``||y - x|| <= delta`` and ``tau <= delta`` for a
decreasing list of radii; the value at the smallest radius is returned and
the last two radii must agree to within ``cfg.tol``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Report, ReportKind, StepFunction, quadrature, seeded_rng
from .sets import sample_directions

__all__ = [
    "ClarkeEstimatorConfig",
    "ClarkeEstimatorError",
    "NonStabilizationWarning",
    "DirDerivEstimate",
    "SubdiffMembershipResult",
    "clarke_dirderiv",
    "clarke_dirderiv_detail",
    "clarke_dirderiv_batch",
    "clarke_membership",
    "integral_clarke_inclusion",
    "clarke_upper_bound_check",
]


class ClarkeEstimatorError(RuntimeError):
    """Difference quotients blow up as the radius shrinks (not locally Lipschitz)."""


class NonStabilizationWarning(UserWarning):
    """Estimates at the two smallest radii differ by more than the tolerance."""


@dataclass(frozen=True)
class ClarkeEstimatorConfig:
    radii: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    samples_per_radius: int = 200
    step_fractions: tuple = (1.0, 0.5, 0.2, 0.05, 0.01)
    tol: float = 5e-2
    directions: int = 64
    seed: int = 0
    blowup: float = 8.0

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.size < 2 or np.any(r <= 0) or np.any(np.diff(r) >= 0):
            raise ValueError("radii must be positive, strictly decreasing, at least two")
        fr = np.asarray(self.step_fractions, dtype=float)
        if np.any(fr <= 0) or np.any(fr > 1):
            raise ValueError("step fractions must lie in (0, 1]")
        if self.samples_per_radius < 2:
            raise ValueError("need at least two samples per radius")
        object.__setattr__(self, "radii", tuple(float(x) for x in r))
        object.__setattr__(self, "step_fractions", tuple(float(x) for x in fr))


@dataclass(frozen=True)
class DirDerivEstimate:
    value: float
    per_radius: np.ndarray
    stabilized: bool


@dataclass(frozen=True)
class SubdiffMembershipResult:
    member: bool
    worst_direction: np.ndarray
    margin: float
    margins: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _offsets(n: int, cfg: ClarkeEstimatorConfig) -> np.ndarray:
    """Base-point offsets in the unit ball: a lattice in 1D, seeded random points otherwise."""
    S = cfg.samples_per_radius
    if n == 1:
        return np.linspace(-1.0, 1.0, S)[:, None]
    rng = seeded_rng(cfg.seed, n, S)
    g = rng.standard_normal((S - 1, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.uniform(0, 1, size=(S - 1, 1)) ** (1.0 / n)
    return np.vstack([np.zeros((1, n)), g * r])


def clarke_dirderiv_batch(G: Callable, ts, X, V, cfg: ClarkeEstimatorConfig = ClarkeEstimatorConfig()):
    """Estimates for many (t, x, v) triples at once.

    ``G(t, Y)`` must broadcast ``t`` against the leading axes of ``Y``.
    Returns ``(values, per_radius, stabilized)`` with ``per_radius`` of
    shape ``(M, len(radii))``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    M, n = X.shape
    ts = np.broadcast_to(np.asarray(ts, dtype=float), (M,))
    chunk = max(1, 400_000 // (cfg.samples_per_radius * len(cfg.step_fractions)))
    if M > chunk:
        parts = [clarke_dirderiv_batch(G, ts[i : i + chunk], X[i : i + chunk], V[i : i + chunk], cfg) for i in range(0, M, chunk)]
        return tuple(np.concatenate(p) for p in zip(*parts))
    offs = _offsets(n, cfg)
    fr = np.asarray(cfg.step_fractions)
    per = np.empty((M, len(cfg.radii)))
    tcol = ts[:, None, None]
    for j, delta in enumerate(cfg.radii):
        Y = X[:, None, :] + delta * offs[None]                       # (M, S, n)
        tau = delta * fr                                             # (F,)
        Yt = Y[:, :, None, :] + tau[None, None, :, None] * V[:, None, None, :]
        with np.errstate(invalid="ignore", over="ignore"):
            g0 = np.asarray(G(ts[:, None], Y), dtype=float)
            g1 = np.asarray(G(tcol, Yt), dtype=float)
        if not (np.all(np.isfinite(g0)) and np.all(np.isfinite(g1))):
            raise ClarkeEstimatorError("function is not finite near the base point")
        q = (g1 - g0[:, :, None]) / tau[None, None, :]
        per[:, j] = q.reshape(M, -1).max(axis=1)
    first = np.abs(per[:, 0])
    last = np.abs(per[:, -1])
    rising = np.all(np.diff(np.abs(per), axis=1) > 0, axis=1)
    blown = rising & (last > cfg.blowup * np.maximum(first, 1.0))
    if blown.any():
        k = int(np.flatnonzero(blown)[0])
        raise ClarkeEstimatorError(
            f"difference quotients diverge as the radius shrinks (triple {k}: {per[k].tolist()})"
        )
    stabilized = np.abs(per[:, -1] - per[:, -2]) <= cfg.tol
    return per[:, -1].copy(), per, stabilized


def _as_G(g: Callable) -> Callable:
    return lambda t, Y: g(Y)


def clarke_dirderiv_detail(g: Callable, x, v, cfg: ClarkeEstimatorConfig = ClarkeEstimatorConfig()) -> DirDerivEstimate:
    """Like :func:`clarke_dirderiv` but returns the per-radius estimates and the stabilization flag."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    vals, per, stab = clarke_dirderiv_batch(_as_G(g), [0.0], x[None], v[None], cfg)
    return DirDerivEstimate(float(vals[0]), per[0], bool(stab[0]))


def clarke_dirderiv(g: Callable, x, v, cfg: ClarkeEstimatorConfig = ClarkeEstimatorConfig()) -> float:
    """Sampled Clarke directional derivative of ``g`` (vectorized over (..., n)) at ``x`` along ``v``."""
    est = clarke_dirderiv_detail(g, x, v, cfg)
    if not est.stabilized:
        warnings.warn(
            f"Clarke estimate did not stabilize: {est.per_radius.tolist()}", NonStabilizationWarning, stacklevel=2
        )
    return est.value


def _directions(n: int, directions, cfg: ClarkeEstimatorConfig) -> np.ndarray:
    if directions is None:
        return sample_directions(n, cfg.directions)
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    return D / np.linalg.norm(D, axis=1, keepdims=True)


def _membership_batch(G, ts, X, S, directions, cfg):
    """Margins ``min_v d(v) - <s, v>`` for many (t, x, s) triples; returns (margins, worst dirs)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    M, n = X.shape
    D = _directions(n, directions, cfg)
    K = D.shape[0]
    tt = np.repeat(np.broadcast_to(np.asarray(ts, dtype=float), (M,)), K)
    vals, _, _ = clarke_dirderiv_batch(G, tt, np.repeat(X, K, axis=0), np.tile(D, (M, 1)), cfg)
    marg = vals.reshape(M, K) - S @ D.T
    worst = np.argmin(marg, axis=1)
    return marg[np.arange(M), worst], D[worst]


def clarke_membership(
    g: Callable, x, s, directions=None, cfg: ClarkeEstimatorConfig = ClarkeEstimatorConfig()
) -> SubdiffMembershipResult:
    """Test ``<s, v> <= d g(x)(v)`` over a set of unit directions.

    In one dimension the directions ``{+1, -1}`` make this an exact interval
    test; in higher dimensions it is a necessary condition only.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    D = _directions(x.size, directions, cfg)
    vals, _, _ = clarke_dirderiv_batch(_as_G(g), np.zeros(len(D)), np.tile(x, (len(D), 1)), D, cfg)
    marg = vals - D @ s
    k = int(np.argmin(marg))
    return SubdiffMembershipResult(bool(marg[k] >= -cfg.tol), D[k], float(marg[k]), marg)


def _f_G(F) -> Callable:
    return lambda t, Y: F.f(t, Y)


def _check_lipschitz(F):
    if F.f.lipschitz is None:
        raise ValueError(f"{F.f.name} declares no Lipschitz modulus")
    q = F.p / (F.p - 1) if F.p > 1 else math.inf
    k = np.asarray(F.f.lipschitz(F.grid.midpoints), dtype=float)
    if math.isinf(q):
        bound = float(np.max(k))
    else:
        bound = quadrature(np.abs(k) ** q, F.measure, np.append(k, k[-1]) ** q if F.measure.atoms else None)
    if not math.isfinite(bound):
        raise ValueError("Lipschitz modulus is not integrable to the conjugate exponent")


def integral_clarke_inclusion(F, x: StepFunction, s: StepFunction, cfg: ClarkeEstimatorConfig = ClarkeEstimatorConfig(), measure_tol: float = 0.0) -> Report:
    """Cellwise test ``s(t) in Clarke subdifferential of f_t at x(t)``; fails on a violating set of positive measure."""
    _check_lipschitz(F)
    g = F.grid
    margins, dirs = _membership_batch(_f_G(F), g.midpoints, x.cell_values, s.cell_values, None, cfg)
    bad = margins < -cfg.tol
    bad_nodes = np.zeros(g.n_cells + 1)
    if F.measure.atoms:
        nodes = F.measure.atom_nodes
        am, _ = _membership_batch(_f_G(F), g.nodes[nodes], x.node_values()[nodes], s.node_values()[nodes], None, cfg)
        bad_nodes[nodes] = (am < -cfg.tol).astype(float)
    viol = quadrature(bad.astype(float), F.measure, bad_nodes if F.measure.atoms else None)
    return Report(
        ReportKind.CLARKE_INCLUSION,
        float(np.min(margins)),
        -cfg.tol,
        viol,
        measure_tol,
        witnesses={"violating_cells": np.flatnonzero(bad), "margins": margins},
        notes="exact interval test" if F.f.dim == 1 else f"{cfg.directions} sampled directions: necessary condition only",
    )


def clarke_upper_bound_check(
    F,
    x: StepFunction,
    v: StepFunction,
    cfg: ClarkeEstimatorConfig = ClarkeEstimatorConfig(),
    perturbations: int = 64,
) -> Report:
    """Compare the Clarke derivative of ``I_f`` at ``x`` along ``v`` with ``int d f_t(x(t))(v(t)) dmu``.

    The left side samples base points ``y = x + delta * xi`` on the
    step-function space, with ``xi`` either constant in time (a lattice of
    values) or random cell by cell, both with sup norm at most one.
    """
    _check_lipschitz(F)
    g = F.grid
    n = F.f.dim
    X = x.cell_values
    Vv = v.cell_values
    rhs_cells, _, stab = clarke_dirderiv_batch(_f_G(F), g.midpoints, X, Vv, cfg)
    rhs_nodes = None
    if F.measure.atoms:
        rhs_nodes = np.zeros(g.n_cells + 1)
        nodes = F.measure.atom_nodes
        rhs_nodes[nodes], _, _ = clarke_dirderiv_batch(
            _f_G(F), g.nodes[nodes], x.node_values()[nodes], v.node_values()[nodes], cfg
        )
    rhs = quadrature(rhs_cells, F.measure, rhs_nodes)

    rng = seeded_rng(cfg.seed, g.n_cells, 7)
    consts = _offsets(n, ClarkeEstimatorConfig(samples_per_radius=max(perturbations // 2, 2), seed=cfg.seed))
    rand = rng.uniform(-1, 1, size=(perturbations - len(consts), g.n_cells, n))
    if n > 1:
        rand /= np.maximum(1.0, np.linalg.norm(rand, axis=-1, keepdims=True))
    Xi = np.concatenate([np.broadcast_to(consts[:, None, :], (len(consts), g.n_cells, n)), rand])
    per = []
    for delta in cfg.radii:
        best = -math.inf
        Y = X[None] + delta * Xi
        base = F.batch(Y)
        for fr in cfg.step_fractions:
            tau = delta * fr
            q = (F.batch(Y + tau * Vv[None]) - base) / tau
            best = max(best, float(np.max(q)))
        per.append(best)
    lhs = per[-1]
    return Report(
        ReportKind.CLARKE_UPPER_BOUND,
        lhs,
        rhs,
        lhs - rhs,
        cfg.tol,
        witnesses={"lhs_per_radius": per, "rhs_cells": rhs_cells},
        notes="" if stab.all() else f"{int((~stab).sum())} cell estimate(s) not stabilized",
    )
