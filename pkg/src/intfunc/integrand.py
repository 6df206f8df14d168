"""Time-dependent integrands ``f_t(x)`` and pointwise convex-analysis tools.

An :class:`IntegrandOracle` wraps a vectorized function ``f(t, x)`` (``t``
broadcasts against the leading axes of ``x``, whose last axis is the state
dimension) together with optional closed forms: conjugate, subdifferential,
Lipschitz modulus and minimizer.  ``+inf`` encodes points outside the
effective domain; ``-inf`` and NaN are rejected.

Every numeric routine works inside the oracle's ``box(t)``, a compact box
that must contain the minimizers and conjugate maximizers of interest.  A
:class:`BoundaryWarning` is issued when an optimum sits on that box, since
the returned value is then only a bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import sets as _sets
from .expr import compile_expr, compile_vector
from .sets import Ball, Box, Cone, MovingSet, as_interval, minkowski_sum, point

__all__ = [
    "EmptyDomainError",
    "UnsupportedError",
    "BoundaryWarning",
    "IntegrandOracle",
    "quadratic",
    "affine",
    "norm_power",
    "abs_dev",
    "neg_abs",
    "weighted_l1",
    "indicator",
    "support",
    "min_quadratics",
    "add",
    "scale",
    "from_description",
    "infimal_value",
    "infimal_values",
    "minimize_box",
    "maximize_affine_minus",
    "sup_affine_minus",
    "conjugate_value",
    "conjugate_values",
    "numeric_conjugate",
    "discrete_legendre",
    "young_fenchel_residual",
    "eps_subdiff_contains",
    "eps_subgradient",
    "subdifferential",
    "subgradient_interval",
    "audit_convexity",
    "audit_lipschitz",
]


class EmptyDomainError(ValueError):
    """``f_t`` is identically ``+inf`` on its search box."""

    def __init__(self, msg: str, t: float | None = None):
        super().__init__(msg)
        self.t = t


class UnsupportedError(ValueError):
    """The requested characterization does not apply to this integrand."""


class BoundaryWarning(UserWarning):
    """An optimum was found on the search box boundary."""


@dataclass(frozen=True)
class IntegrandOracle:
    dim: int
    func: Callable
    box: Callable
    conj: Callable | None = None
    subdiff: Callable | None = None
    lipschitz: Callable | None = None
    argmin: Callable | None = None
    convex: bool = False
    name: str = "f"
    grad: Callable | None = None

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            x = x.reshape(np.shape(x) + (1,)) if self.dim == 1 else x
        if x.shape[-1] != self.dim:
            raise ValueError(f"{self.name}: expected points of dimension {self.dim}, got shape {x.shape}")
        with np.errstate(invalid="ignore", over="ignore"):
            v = np.asarray(self.func(np.asarray(t, dtype=float), x), dtype=float)
        if np.any(np.isnan(v)) or np.any(v == -np.inf):
            raise ValueError(f"{self.name}: NaN or -inf value")
        return v

    def gradient(self, t, x, h: float = 1e-6):
        """Vectorized (sub)gradient: closed form when declared, else central differences."""
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            t = np.asarray(t, dtype=float)
            return np.broadcast_to(np.asarray(self.grad(t, x), dtype=float), np.broadcast_shapes(t.shape + (1,), x.shape)).copy()
        out = np.empty(np.broadcast_shapes(np.shape(t) + (1,), x.shape))
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            out[..., i] = (self(t, x + e) - self(t, x - e)) / (2 * h)
        return out

    def value(self, t: float, x) -> float:
        return float(self(t, np.atleast_1d(np.asarray(x, dtype=float))))

    def box_at(self, t: float):
        lo, hi = self.box(np.asarray(float(t)))
        return np.asarray(lo, dtype=float).reshape(self.dim), np.asarray(hi, dtype=float).reshape(self.dim)

    def conj_at(self, t: float, s) -> float:
        if self.conj is None:
            raise UnsupportedError(f"{self.name} has no closed-form conjugate")
        with np.errstate(invalid="ignore", over="ignore"):
            return float(self.conj(np.asarray(float(t)), np.atleast_1d(np.asarray(s, dtype=float))))

    def with_box(self, box) -> "IntegrandOracle":
        return replace(self, box=box)

    def __repr__(self):
        return f"IntegrandOracle({self.name!r}, dim={self.dim}, convex={self.convex})"


# --------------------------------------------------------------------------
# helpers for t-dependent data


def _tvec(v, n: int) -> Callable:
    """Constant / array / callable -> ``t -> array of shape t.shape + (n,)``."""
    if callable(v):
        def fn(t):
            t = np.asarray(t, dtype=float)
            out = np.asarray(v(t), dtype=float)
            if n == 1 and out.shape == t.shape:
                out = out[..., None]
            return np.broadcast_to(out, t.shape + (n,))
        return fn
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size == 1:
        arr = np.full(n, arr[0])
    if arr.size != n:
        raise ValueError(f"expected {n} components, got {arr.size}")
    return lambda t: np.broadcast_to(arr, np.shape(t) + (n,))


def _tscal(v) -> Callable:
    if callable(v):
        return lambda t: np.asarray(v(np.asarray(t, dtype=float)), dtype=float) + np.zeros(np.shape(t))
    val = float(v)
    return lambda t: np.full(np.shape(t), val)


def _bt(t, x):
    """Times shaped to broadcast against points ``x`` (..., n)."""
    t = np.asarray(t, dtype=float)
    return np.broadcast_to(t, np.broadcast_shapes(t.shape, x.shape[:-1]))


def _centered_box(center: Callable, radius: float):
    def box(t):
        c = center(np.asarray(t, dtype=float))
        return c - radius, c + radius
    return box


def _const_box(n: int, radius: float):
    def box(t):
        shape = np.shape(t) + (n,)
        return np.full(shape, -radius), np.full(shape, radius)
    return box


# --------------------------------------------------------------------------
# catalog


def quadratic(center=0.0, offset=0.0, weight=1.0, dim: int = 1, radius: float = 5.0, name=None):
    """``1/2 * sum_i w_i (x_i - c_i(t))^2 + d(t)``.

    ``weight`` is a positive scalar or a vector of nonnegative per-coordinate
    weights (e.g. ``[0, 1]`` for ``v^2/2`` on ``(x, v)``); zero weights make
    the conjugate infinite off ``s_i = 0``.
    """
    c = _tvec(center, dim)
    d = _tscal(offset)
    w = np.broadcast_to(np.asarray(weight, dtype=float), (dim,)).copy()
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be nonnegative and not all zero")
    pos = w > 0
    winv = np.where(pos, 1.0 / np.where(pos, w, 1.0), 0.0)

    def func(t, x):
        t = _bt(t, x)
        return 0.5 * np.sum(w * (x - c(t)) ** 2, axis=-1) + d(t)

    def conj(t, s):
        t = _bt(t, s)
        val = np.sum(s * c(t), axis=-1) + 0.5 * np.sum(winv * s * s, axis=-1) - d(t)
        if pos.all():
            return val
        off = np.any(np.abs(s[..., ~pos]) > 1e-12, axis=-1)
        return np.where(off, np.inf, val)

    return IntegrandOracle(
        dim=dim,
        func=func,
        box=_centered_box(c, radius),
        conj=conj,
        subdiff=lambda t, x: point(w * (np.asarray(x, dtype=float) - c(np.asarray(float(t))))),
        argmin=c,
        convex=True,
        name=name or "quadratic",
        grad=lambda t, x: w * (x - c(_bt(t, x))),
    )


def affine(slope=1.0, offset=0.0, dim: int = 1, radius: float = 5.0, name=None):
    """``<a(t), x> + b(t)``; its conjugate is finite only at ``s = a(t)``."""
    a = _tvec(slope, dim)
    b = _tscal(offset)

    def func(t, x):
        t = _bt(t, x)
        return np.sum(a(t) * x, axis=-1) + b(t)

    def conj(t, s):
        t = _bt(t, s)
        hit = np.linalg.norm(s - a(t), axis=-1) <= 1e-12
        return np.where(hit, -b(t), np.inf)

    return IntegrandOracle(
        dim=dim,
        func=func,
        box=_const_box(dim, radius),
        conj=conj,
        subdiff=lambda t, x: point(a(np.asarray(float(t)))),
        lipschitz=lambda t: np.linalg.norm(a(np.asarray(t, dtype=float)), axis=-1),
        convex=True,
        name=name or "affine",
        grad=lambda t, x: a(_bt(t, x)) + 0.0 * x,
    )


def norm_power(p: float = 2.0, dim: int = 1, radius: float = 5.0, name=None):
    """``||x||^p / p`` for ``p > 1``; the Euclidean norm ``||x||`` for ``p = 1``."""
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return abs_dev(0.0, 1.0, dim=dim, radius=radius, name=name or "norm")
    q = p / (p - 1)

    def func(t, x):
        return np.linalg.norm(x, axis=-1) ** p / p + 0.0 * np.asarray(t)

    def conj(t, s):
        return np.linalg.norm(s, axis=-1) ** q / q + 0.0 * np.asarray(t)

    def subdiff(t, x):
        x = np.asarray(x, dtype=float)
        n = np.linalg.norm(x)
        return point(n ** (p - 2) * x if n > 0 else np.zeros(dim))

    def grad(t, x):
        n = np.linalg.norm(x, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(n > 0, n ** (p - 2) * x, 0.0)

    return IntegrandOracle(
        dim=dim,
        func=func,
        box=_const_box(dim, radius),
        conj=conj,
        subdiff=subdiff,
        argmin=lambda t: np.zeros(np.shape(t) + (dim,)),
        convex=True,
        name=name or f"norm_power({p:g})",
        grad=grad,
    )


def _unit_grad(c, w):
    def grad(t, x):
        d = x - c(_bt(t, x))
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(n > 0, w * d / n, 0.0)
    return grad


def abs_dev(center=0.0, weight=1.0, dim: int = 1, radius: float = 5.0, name=None):
    """``weight * ||x - c(t)||`` (``|x - c(t)|`` in one dimension)."""
    c = _tvec(center, dim)
    w = float(weight)

    def func(t, x):
        t = _bt(t, x)
        return w * np.linalg.norm(x - c(t), axis=-1)

    def conj(t, s):
        t = _bt(t, s)
        inside = np.linalg.norm(s, axis=-1) <= w * (1 + 1e-12)
        return np.where(inside, np.sum(s * c(t), axis=-1), np.inf)

    def subdiff(t, x):
        d = np.asarray(x, dtype=float) - c(np.asarray(float(t)))
        n = np.linalg.norm(d)
        return point(w * d / n) if n > 0 else Ball(np.zeros(dim), w)

    return IntegrandOracle(
        dim=dim,
        func=func,
        box=_centered_box(c, radius),
        conj=conj,
        subdiff=subdiff,
        lipschitz=lambda t: np.full(np.shape(t), w),
        argmin=c,
        convex=True,
        name=name or "abs",
        grad=_unit_grad(c, w),
    )


def neg_abs(center=0.0, weight=1.0, dim: int = 1, radius: float = 5.0, name=None):
    """``-weight * ||x - c(t)||``: Lipschitz, concave, Clarke subdifferential ``B(0, w)`` at the kink."""
    c = _tvec(center, dim)
    w = float(weight)

    def func(t, x):
        t = _bt(t, x)
        return -w * np.linalg.norm(x - c(t), axis=-1)

    def conj(t, s):
        return np.full(np.shape(_bt(t, s)), np.inf)

    return IntegrandOracle(
        dim=dim,
        func=func,
        box=_centered_box(c, radius),
        conj=conj,
        lipschitz=lambda t: np.full(np.shape(t), w),
        convex=False,
        name=name or "neg_abs",
        grad=_unit_grad(c, -w),
    )


def weighted_l1(weights, center=0.0, radius: float = 5.0, name=None):
    """``sum_i w_i |x_i - c_i(t)|`` with nonnegative weights; acts on selected coordinates."""
    wv = np.asarray(weights, dtype=float).reshape(-1)
    if np.any(wv < 0):
        raise ValueError("weights must be nonnegative")
    dim = wv.size
    c = _tvec(center, dim)

    def func(t, x):
        return np.sum(wv * np.abs(x - c(_bt(t, x))), axis=-1)

    def conj(t, s):
        t = _bt(t, s)
        inside = np.all(np.abs(s) <= wv * (1 + 1e-12), axis=-1)
        return np.where(inside, np.sum(s * c(t), axis=-1), np.inf)

    def subdiff(t, x):
        d = np.asarray(x, dtype=float) - c(np.asarray(float(t)))
        sg = np.sign(d)
        return Box(np.where(d == 0, -wv, wv * sg), np.where(d == 0, wv, wv * sg))

    return IntegrandOracle(
        dim=dim,
        func=func,
        box=_centered_box(c, radius),
        conj=conj,
        subdiff=subdiff,
        lipschitz=lambda t: np.full(np.shape(t), float(np.linalg.norm(wv))),
        argmin=c,
        convex=True,
        name=name or "weighted_l1",
        grad=lambda t, x: wv * np.sign(x - c(_bt(t, x))),
    )


def indicator(C: MovingSet, margin: float = 1.0, tol: float = 1e-12, name=None):
    """Indicator of the moving convex set ``C(t)``; conjugate is its support function."""

    def func(t, x):
        t = _bt(t, x)
        return np.where(C.contains(t, x, tol), 0.0, np.inf)

    def box(t):
        lo, hi = C.bbox(np.asarray(t, dtype=float))
        return lo - margin, hi + margin

    return IntegrandOracle(
        dim=C.dim,
        func=func,
        box=box,
        conj=lambda t, s: C.support(_bt(t, s), s),
        subdiff=lambda t, x: C.normal_cone(t, x),
        argmin=lambda t: C.center(np.asarray(t, dtype=float)),
        convex=True,
        name=name or f"indicator({C!r})",
    )


def support(C: MovingSet, radius: float = 5.0, name=None):
    """Support function ``x -> max_{y in C(t)} <x, y>``; conjugate is the indicator of ``C(t)``."""

    def conj(t, s):
        t = _bt(t, s)
        return np.where(C.contains(t, s, 1e-10), 0.0, np.inf)

    return IntegrandOracle(
        dim=C.dim,
        func=lambda t, x: C.support(_bt(t, x), x),
        box=_const_box(C.dim, radius),
        conj=conj,
        subdiff=lambda t, x: C.face(t, x),
        lipschitz=lambda t: C.norm_bound(np.asarray(t, dtype=float)),
        convex=True,
        name=name or f"support({C!r})",
    )


def min_quadratics(centers, offsets, weight=2.0, radius: float = 5.0, name=None):
    """Pointwise minimum of 1D parabolas ``weight/2 (x - c_i)^2 + d_i(t)`` (nonconvex).

    The conjugate of a minimum is the maximum of the conjugates, so a closed
    form is still available.
    """
    cs = [_tscal(c) for c in centers]
    ds = [_tscal(d) for d in offsets]
    if len(cs) != len(ds) or not cs:
        raise ValueError("need matching, nonempty centers and offsets")
    w = float(weight)

    def func(t, x):
        t = _bt(t, x)
        xs = x[..., 0]
        return np.min([0.5 * w * (xs - c(t)) ** 2 + d(t) for c, d in zip(cs, ds)], axis=0)

    def conj(t, s):
        t = _bt(t, s)
        ss = s[..., 0]
        return np.max([ss * c(t) + ss**2 / (2 * w) - d(t) for c, d in zip(cs, ds)], axis=0)

    def argmin(t):
        t = np.asarray(t, dtype=float)
        dv = np.array([d(t) for d in ds])
        cv = np.array([c(t) for c in cs])
        k = np.argmin(dv, axis=0)
        return np.take_along_axis(cv, k[None], axis=0)[0][..., None]

    def grad(t, x):
        t = _bt(t, x)
        xs = x[..., 0]
        vals = np.array([0.5 * w * (xs - c(t)) ** 2 + d(t) for c, d in zip(cs, ds)])
        k = np.argmin(vals, axis=0)
        cv = np.array([c(t) for c in cs])
        return (w * (xs - np.take_along_axis(cv, k[None], axis=0)[0]))[..., None]

    def box(t):
        t = np.asarray(t, dtype=float)
        cv = np.array([c(t) for c in cs])
        return (cv.min(axis=0) - radius)[..., None], (cv.max(axis=0) + radius)[..., None]

    return IntegrandOracle(
        dim=1, func=func, box=box, conj=conj, argmin=argmin, convex=False, name=name or "min_quadratics", grad=grad
    )


def add(*terms: IntegrandOracle, name=None) -> IntegrandOracle:
    """Sum of integrands.  The search box is the intersection of the terms' boxes when nonempty."""
    if not terms:
        raise ValueError("need at least one term")
    dim = terms[0].dim
    if any(f.dim != dim for f in terms):
        raise ValueError("terms have different dimensions")

    def func(t, x):
        total = terms[0].func(t, x)
        for f in terms[1:]:
            total = total + f.func(t, x)
        return total

    def box(t):
        los, his = zip(*(f.box(t) for f in terms))
        lo, hi = np.max(los, axis=0), np.min(his, axis=0)
        bad = lo > hi
        if np.any(bad):
            lo = np.where(bad, np.min(los, axis=0), lo)
            hi = np.where(bad, np.max(his, axis=0), hi)
        return lo, hi

    subdiff = None
    if all(f.subdiff is not None for f in terms):
        def subdiff(t, x):
            acc = terms[0].subdiff(t, x)
            for f in terms[1:]:
                acc = minkowski_sum(acc, f.subdiff(t, x))
            return acc

    lipschitz = None
    if all(f.lipschitz is not None for f in terms):
        def lipschitz(t):
            return sum(f.lipschitz(t) for f in terms)

    grad = None
    if all(f.grad is not None for f in terms):
        def grad(t, x):
            return sum(f.grad(t, x) for f in terms)

    return IntegrandOracle(
        dim=dim,
        func=func,
        box=box,
        subdiff=subdiff,
        lipschitz=lipschitz,
        convex=all(f.convex for f in terms),
        name=name or " + ".join(f.name for f in terms),
        grad=grad,
    )


def scale(c: float, f: IntegrandOracle, name=None) -> IntegrandOracle:
    """``c * f`` for ``c > 0``."""
    c = float(c)
    if c <= 0:
        raise ValueError("scale factor must be positive")
    return IntegrandOracle(
        dim=f.dim,
        func=lambda t, x: c * f.func(t, x),
        box=f.box,
        conj=None if f.conj is None else (lambda t, s: c * f.conj(t, np.asarray(s) / c)),
        subdiff=None if f.subdiff is None else (lambda t, x: _scaled(f.subdiff(t, x), c)),
        lipschitz=None if f.lipschitz is None else (lambda t: c * f.lipschitz(t)),
        argmin=f.argmin,
        convex=f.convex,
        name=name or f"{c:g}*({f.name})",
        grad=None if f.grad is None else (lambda t, x: c * f.grad(t, x)),
    )


def _scaled(d, c):
    return None if d is None else d.scaled(c)


# --------------------------------------------------------------------------
# declarative construction


def _expr_vec(v, n):
    if isinstance(v, (list, tuple)):
        return compile_vector(v)
    if isinstance(v, str):
        fn = compile_expr(v)
        return fn
    return v


def from_description(desc: dict, dim: int | None = None) -> IntegrandOracle:
    """Build a catalog integrand from a JSON-style description.

    Example: ``{"kind": "quadratic", "center": "sin(t)", "offset": "0"}``.
    Scalar fields are expressions in ``t``; vector fields are lists of
    expressions.
    """
    desc = dict(desc)
    kind = desc.pop("kind")
    d = int(desc.pop("dim", dim or 1))
    radius = float(desc.pop("radius", 5.0))
    name = desc.pop("name", None)

    def scalar(key, default):
        v = desc.pop(key, default)
        return compile_expr(v) if isinstance(v, str) else v

    def vector(key, default):
        v = desc.pop(key, default)
        return _expr_vec(v, d)

    if kind == "quadratic":
        f = quadratic(vector("center", 0.0), scalar("offset", 0.0), desc.pop("weight", 1.0), d, radius, name)
    elif kind == "affine":
        f = affine(vector("slope", 1.0), scalar("offset", 0.0), d, radius, name)
    elif kind == "norm_power":
        f = norm_power(float(desc.pop("p", 2.0)), d, radius, name)
    elif kind == "abs":
        f = abs_dev(vector("center", 0.0), float(desc.pop("weight", 1.0)), d, radius, name)
    elif kind == "weighted_l1":
        wts = desc.pop("weights")
        f = weighted_l1(wts, _expr_vec(desc.pop("center", 0.0), len(wts)), radius, name)
    elif kind == "neg_abs":
        f = neg_abs(vector("center", 0.0), float(desc.pop("weight", 1.0)), d, radius, name)
    elif kind == "indicator":
        f = indicator(_sets.set_from_description(desc.pop("set")), float(desc.pop("margin", 1.0)), name=name)
    elif kind == "support":
        f = support(_sets.set_from_description(desc.pop("set")), radius, name)
    elif kind == "min_quadratics":
        cs = [compile_expr(c) if isinstance(c, str) else c for c in desc.pop("centers")]
        ds = [compile_expr(c) if isinstance(c, str) else c for c in desc.pop("offsets")]
        f = min_quadratics(cs, ds, float(desc.pop("weight", 2.0)), radius, name)
    elif kind == "sum":
        f = add(*(from_description(t, d) for t in desc.pop("terms")), name=name)
    elif kind == "scale":
        f = scale(float(desc.pop("factor")), from_description(desc.pop("term"), d), name)
    else:
        raise ValueError(f"unknown integrand kind {kind!r}")
    if "box" in desc:
        lo_src, hi_src = desc.pop("box")
        lo_fn, hi_fn = compile_vector(lo_src), compile_vector(hi_src)
        f = f.with_box(lambda t: (lo_fn(np.asarray(t, dtype=float)), hi_fn(np.asarray(t, dtype=float))))
    if desc:
        raise ValueError(f"unknown fields for {kind!r}: {sorted(desc)}")
    return f


# --------------------------------------------------------------------------
# numeric minimization on boxes

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_batch(fun, a, b, iters: int = 64):
    """Minimize row-wise on brackets ``[a_i, b_i]``; ``fun`` maps (M,) -> (M,).

    Tracks the best point ever evaluated, so ``+inf`` regions are harmless.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    best_x = np.where(fc <= fd, c, d)
    best_f = np.minimum(fc, fd)
    for _ in range(iters):
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_x = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        f_new = fun(new_x)
        d, fd, c, fc = (
            np.where(left, c, new_x),
            np.where(left, fc, f_new),
            np.where(left, new_x, d),
            np.where(left, f_new, fd),
        )
        better = f_new < best_f
        best_x = np.where(better, new_x, best_x)
        best_f = np.where(better, f_new, best_f)
    return best_x, best_f


def _local_minima_order(F: np.ndarray, k: int):
    """Indices of the ``k`` best lattice local minima per row of ``F``."""
    pad = np.pad(F, ((0, 0), (1, 1)), constant_values=np.inf)
    is_min = (F <= pad[:, :-2]) & (F <= pad[:, 2:]) & np.isfinite(F)
    masked = np.where(is_min, F, np.inf)
    order = np.argsort(masked, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(masked, order, axis=1)


def _minimize_1d_batch(obj, lo, hi, samples: int = 257, starts: int = 2):
    """Minimize ``obj(X)`` (X of shape (M, K) -> (M, K)) on intervals ``[lo_i, hi_i]``.

    Returns ``(x, value, empty)`` with ``empty`` flagging rows where every
    lattice sample was ``+inf``.
    """
    M = lo.shape[0]
    u = np.linspace(0.0, 1.0, samples)
    X = lo[:, None] + (hi - lo)[:, None] * u[None, :]
    F = obj(X)
    empty = ~np.any(np.isfinite(F), axis=1)
    order, vals = _local_minima_order(F, starts)
    h = (hi - lo) / (samples - 1)
    best_x = X[np.arange(M), np.argmin(F, axis=1)]
    best_f = F.min(axis=1)
    rows = np.arange(M)
    for j in range(order.shape[1]):
        idx = order[:, j]
        ok = np.isfinite(vals[:, j])
        if not ok.any():
            continue
        xc = X[rows, idx]
        a = np.maximum(xc - h, lo)
        b = np.minimum(xc + h, hi)

        def row_fun(z, _ok=ok):
            return obj(z[:, None])[:, 0]

        xr, fr = _golden_batch(row_fun, a, b)
        better = ok & (fr < best_f)
        best_x = np.where(better, xr, best_x)
        best_f = np.where(better, fr, best_f)
    return best_x, best_f, empty


def _pattern_dirs(n: int) -> np.ndarray:
    eye = np.eye(n)
    dirs = [eye, -eye]
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1, -1):
                for sj in (1, -1):
                    v = np.zeros(n)
                    v[i], v[j] = si, sj
                    dirs.append(v[None] / math.sqrt(2))
    return np.vstack(dirs)


def _pattern_search(fun, x0, lo, hi, step: float, tol: float = 1e-11, max_evals: int = 200_000):
    """Compass search with diagonal moves; ``fun`` maps (m, n) -> (m,)."""
    dirs = _pattern_dirs(x0.size)
    x = np.array(x0, dtype=float)
    fx = float(fun(x[None])[0])
    evals = 1
    while step > tol and evals < max_evals:
        cand = np.clip(x + step * dirs, lo, hi)
        fc = fun(cand)
        evals += len(cand)
        j = int(np.argmin(fc))
        if fc[j] < fx:
            x, fx = cand[j], float(fc[j])
            step *= 1.5
        else:
            step *= 0.5
    return x, fx


def _minimize_nd(obj, lo, hi, per_axis: int | None = None, starts: int = 3):
    """Lattice seeding plus compass-search refinement for one box in R^n."""
    n = lo.size
    per_axis = per_axis or {2: 41, 3: 15}.get(n, 7)
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    F = obj(grid)
    if not np.any(np.isfinite(F)):
        return None, math.inf
    order = np.argsort(F, kind="stable")[:starts]
    step = float(np.max(hi - lo)) / (per_axis - 1)
    best = (grid[order[0]], float(F[order[0]]))
    for i in order:
        if not np.isfinite(F[i]):
            continue
        x, fx = _pattern_search(obj, grid[i], lo, hi, step)
        if fx < best[1]:
            best = (x, fx)
    return best


def minimize_box(obj, lo, hi):
    """Minimize ``obj`` (vectorized over (..., n)) on the box ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.size == 1:
        x, fx, empty = _minimize_1d_batch(lambda X: obj(X[..., None]), lo[None, :1].ravel(), hi.ravel()[:1])
        if empty[0]:
            return None, math.inf
        return np.array([x[0]]), float(fx[0])
    return _minimize_nd(obj, lo, hi)


def _check_boundary(f, t, x, lo, hi, what: str, sign: float = 1.0, s=None):
    """Warn when ``x`` is on the box boundary and the objective improves outward."""
    width = np.maximum(hi - lo, 1e-12)
    on_lo = x <= lo + 1e-9 * width
    on_hi = x >= hi - 1e-9 * width
    if not (on_lo.any() or on_hi.any()):
        return False
    out = x + 1e-3 * width * (on_hi.astype(float) - on_lo.astype(float))

    def objective(z):
        v = f.value(t, z)
        if s is not None:
            v = v - float(np.dot(s, z))
        return v

    inside, outside = objective(x), objective(out)
    if outside < inside - 1e-12 * (1 + abs(inside)):
        warnings.warn(f"{what} for {f.name} at t={t:g} lies on the search box boundary", BoundaryWarning, stacklevel=3)
        return True
    return False


def infimal_values(f: IntegrandOracle, ts) -> tuple[np.ndarray, np.ndarray]:
    """``(m_f(t), argmin)`` for an array of times."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    M = ts.size
    X = np.full((M, f.dim), np.nan)
    vals = np.full(M, np.inf)
    todo = np.ones(M, dtype=bool)
    if f.argmin is not None:
        X = np.array(np.broadcast_to(f.argmin(ts), (M, f.dim)), dtype=float)
        vals = f(ts, X)
        todo = ~np.isfinite(vals)
    if todo.any():
        lo, hi = f.box(ts[todo])
        lo = np.broadcast_to(lo, (todo.sum(), f.dim))
        hi = np.broadcast_to(hi, (todo.sum(), f.dim))
        if f.dim == 1:
            tt = ts[todo][:, None]
            x, fx, empty = _minimize_1d_batch(lambda Z: f(tt, Z[..., None]), lo[:, 0], hi[:, 0])
            if empty.any():
                bad = ts[todo][empty][0]
                raise EmptyDomainError(f"{f.name} is +inf on its search box at t={bad:g}", bad)
            X[todo, 0] = x
            vals[todo] = fx
        else:
            for r, i in enumerate(np.flatnonzero(todo)):
                t = ts[i]
                x, fx = _minimize_nd(lambda Z, t=t: f(t, Z), lo[r], hi[r])
                if x is None:
                    raise EmptyDomainError(f"{f.name} is +inf on its search box at t={t:g}", t)
                X[i], vals[i] = x, fx
        for r, i in enumerate(np.flatnonzero(todo)):
            _check_boundary(f, ts[i], X[i], lo[r], hi[r], "minimizer")
    return vals, X


def infimal_value(f: IntegrandOracle, t: float) -> tuple[float, np.ndarray]:
    """``(min_x f_t(x), argmin)`` over the search box.

    Uses the closed-form minimizer when the oracle has one, otherwise lattice
    seeding refined by golden-section search (1D) or compass search (nD).
    """
    vals, X = infimal_values(f, [t])
    return float(vals[0]), X[0]


def maximize_affine_minus(f: IntegrandOracle, t: float, s) -> tuple[float, np.ndarray, bool]:
    """``sup_x <s, x> - f_t(x)`` on the box by lattice seeding plus local ascent.

    Never uses the closed-form conjugate.  Returns ``(value, maximizer,
    at_boundary)``; the value is only a lower bound when ``at_boundary``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    lo, hi = f.box_at(t)

    def obj(Z):
        return f(t, Z) - Z @ s

    x, val = minimize_box(obj, lo, hi)
    if x is None:
        raise EmptyDomainError(f"{f.name} is +inf on its search box at t={t:g}", t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        at_b = _check_boundary(f, t, x, lo, hi, "conjugate maximizer", s=s)
    return -val, x, at_b


def sup_affine_minus(f: IntegrandOracle, ts, S) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched :func:`maximize_affine_minus` over paired times and slopes.

    Returns ``(values, maximizers, at_boundary)``.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    S = np.asarray(S, dtype=float).reshape(ts.size, f.dim)
    if f.dim > 1:
        out = [maximize_affine_minus(f, t, s) for t, s in zip(ts, S)]
        return (
            np.array([o[0] for o in out]),
            np.array([o[1] for o in out]),
            np.array([o[2] for o in out]),
        )
    lo, hi = f.box(ts)
    lo = np.broadcast_to(lo, (ts.size, 1))[:, 0]
    hi = np.broadcast_to(hi, (ts.size, 1))[:, 0]
    sl = S[:, 0]
    tt = ts[:, None]

    def obj(Z):
        return f(tt, Z[..., None]) - sl[:, None] * Z

    x, val, empty = _minimize_1d_batch(obj, lo, hi)
    if empty.any():
        bad = float(ts[empty][0])
        raise EmptyDomainError(f"{f.name} is +inf on its search box at t={bad:g}", bad)
    width = np.maximum(hi - lo, 1e-12)
    out_dir = (x >= hi - 1e-9 * width).astype(float) - (x <= lo + 1e-9 * width).astype(float)
    at_b = out_dir != 0
    if at_b.any():
        z = x + 1e-3 * width * out_dir
        outside = obj(z[:, None])[:, 0]
        at_b &= outside < val - 1e-12 * (1 + np.abs(val))
    return -val, x[:, None], at_b


# --------------------------------------------------------------------------
# conjugates


def discrete_legendre(xs, fs, slopes):
    """Discrete Legendre transform ``max_i (s x_i - f_i)`` for many slopes at once.

    Linear-time algorithm: the lower convex hull of the samples is built by a
    monotone chain, then each slope selects the hull vertex whose adjacent
    edge slopes bracket it.  Returns ``(values, argmax_index)``.
    """
    xs = np.asarray(xs, dtype=float)
    fs = np.asarray(fs, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    keep = np.isfinite(fs)
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        return np.full(slopes.shape, -np.inf), np.zeros(slopes.shape, dtype=int)
    hull = []
    for i in idx:
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop i1 if it lies on or above the segment i0 -> i
            cross = (xs[i1] - xs[i0]) * (fs[i] - fs[i0]) - (fs[i1] - fs[i0]) * (xs[i] - xs[i0])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    hull = np.array(hull)
    edge = np.diff(fs[hull]) / np.diff(xs[hull])
    j = np.searchsorted(edge, slopes, side="left")
    k = hull[j]
    return slopes * xs[k] - fs[k], k


def numeric_conjugate(f: IntegrandOracle, t: float, s, samples: int = 4097) -> tuple[float, bool]:
    """Numeric ``f_t^*(s)`` and a flag telling whether the maximizer hit the box.

    One dimension: discrete Legendre transform on a uniform lattice of the
    box, polished by golden-section search in the winning lattice cell.
    Higher dimensions: lattice seeding plus compass-search ascent.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    lo, hi = f.box_at(t)
    if f.dim > 1:
        val, _, at_b = maximize_affine_minus(f, t, s)
        return val, at_b
    xs = np.linspace(lo[0], hi[0], samples)
    fs = f(t, xs[:, None])
    if not np.any(np.isfinite(fs)):
        raise EmptyDomainError(f"{f.name} is +inf on its search box at t={t:g}", t)
    val, k = discrete_legendre(xs, fs, s)
    k = int(k[0])
    h = xs[1] - xs[0]
    a, b = max(xs[k] - h, lo[0]), min(xs[k] + h, hi[0])
    xr, fr = _golden_batch(lambda z: f(t, z[:, None]) - s[0] * z, np.array([a]), np.array([b]))
    val = max(float(val[0]), -float(fr[0]))
    at_b = k in (0, samples - 1)
    return val, at_b


def conjugate_value(f: IntegrandOracle, t: float, s, *, numeric: bool = False, samples: int = 4097) -> float:
    """``f_t^*(s) = sup_x <s, x> - f_t(x)``.

    The closed form is used when available (unless ``numeric``).  A numeric
    maximizer on the search box boundary triggers a :class:`BoundaryWarning`;
    the returned value is then a lower bound.
    """
    if f.conj is not None and not numeric:
        return f.conj_at(t, s)
    val, at_b = numeric_conjugate(f, t, s, samples)
    if at_b:
        warnings.warn(
            f"conjugate of {f.name} at t={t:g}: maximizer on the search box boundary; value is a lower bound",
            BoundaryWarning,
            stacklevel=2,
        )
    return val


def conjugate_values(f: IntegrandOracle, ts, S, *, numeric: bool = False) -> np.ndarray:
    """Vectorized :func:`conjugate_value` over paired times and slopes."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    S = np.asarray(S, dtype=float).reshape(ts.size, f.dim)
    if f.conj is not None and not numeric:
        with np.errstate(invalid="ignore", over="ignore"):
            return np.asarray(f.conj(ts, S), dtype=float)
    if f.dim == 1:
        return _numeric_conjugates_1d(f, ts, S[:, 0])
    return np.array([conjugate_value(f, t, s, numeric=True) for t, s in zip(ts, S)])


def _numeric_conjugates_1d(f: IntegrandOracle, ts, s, samples: int = 4097, chunk: int = 256) -> np.ndarray:
    """Batched one-slope-per-time version of :func:`numeric_conjugate` (lattice max plus golden polish)."""
    out = np.empty(ts.size)
    hit = np.zeros(ts.size, dtype=bool)
    grid01 = np.linspace(0.0, 1.0, samples)
    for i0 in range(0, ts.size, chunk):
        sl = slice(i0, i0 + chunk)
        t, sv = ts[sl], s[sl]
        lo, hi = f.box(t)
        lo, hi = lo[:, 0], hi[:, 0]
        X = lo[:, None] + (hi - lo)[:, None] * grid01
        F = f(t[:, None], X[..., None])
        if np.any(~np.isfinite(F).any(axis=1)):
            bad = int(np.flatnonzero(~np.isfinite(F).any(axis=1))[0])
            raise EmptyDomainError(f"{f.name} is +inf on its search box at t={t[bad]:g}", float(t[bad]))
        with np.errstate(invalid="ignore"):
            G = np.where(np.isfinite(F), sv[:, None] * X - F, -np.inf)
        k = np.argmax(G, axis=1)
        rows = np.arange(t.size)
        step = (hi - lo) / (samples - 1)
        xk = X[rows, k]
        a, b = np.maximum(xk - step, lo), np.minimum(xk + step, hi)
        _, fr = _golden_batch(lambda z: f(t, z[:, None]) - sv * z, a, b)
        out[sl] = np.maximum(G[rows, k], -fr)
        hit[sl] = (k == 0) | (k == samples - 1)
    if hit.any():
        warnings.warn(
            f"conjugate of {f.name}: maximizer on the search box boundary at {int(hit.sum())} time(s); values are lower bounds",
            BoundaryWarning,
            stacklevel=3,
        )
    return out


def young_fenchel_residual(f: IntegrandOracle, t: float, x, s, *, numeric: bool = False) -> float:
    """``f_t(x) + f_t^*(s) - <s, x>``, nonnegative for every proper f."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    fx = f.value(t, x)
    if not math.isfinite(fx):
        raise ValueError(f"{f.name}(t={t:g}, x={x.tolist()}) is not finite")
    fs = conjugate_value(f, t, s, numeric=numeric)
    if fs == math.inf:
        return math.inf
    return fx + fs - float(np.dot(s, x))


def eps_subdiff_contains(f: IntegrandOracle, t: float, x, s, eps: float, tol: float = 1e-9) -> bool:
    """Is ``s`` an ``eps``-subgradient of ``f_t`` at ``x``?  Convex ``f`` only."""
    if not f.convex:
        raise UnsupportedError(f"{f.name} is not declared convex; the Young-Fenchel test does not apply")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return young_fenchel_residual(f, t, x, s) <= eps + tol


def subgradient_interval(f: IntegrandOracle, t: float, x, h: float = 1e-7) -> Box:
    """One-sided difference quotients ``[f'_-(x), f'_+(x)]`` of a 1D integrand."""
    x = float(np.atleast_1d(x)[0])
    f0 = f.value(t, [x])
    fl, fr = f.value(t, [x - h]), f.value(t, [x + h])
    lo = (f0 - fl) / h if math.isfinite(fl) else -math.inf
    hi = (fr - f0) / h if math.isfinite(fr) else math.inf
    if lo > hi:
        lo = hi = 0.5 * (lo + hi)
    return Box([lo], [hi])


def _central_gradient(f: IntegrandOracle, t: float, x, h: float = 1e-6):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    E = np.eye(x.size) * h
    fp = f(t, x[None] + E)
    fm = f(t, x[None] - E)
    return (fp - fm) / (2 * h)


def subdifferential(f: IntegrandOracle, t: float, x):
    """Closed-form subdifferential descriptor if available, else a numeric one.

    The fallback is the one-sided derivative interval in 1D and the central
    difference gradient (a point) in higher dimensions.
    """
    if f.subdiff is not None:
        d = f.subdiff(t, np.atleast_1d(np.asarray(x, dtype=float)))
        if d is not None:
            return d
    if f.dim == 1:
        return subgradient_interval(f, t, x)
    return point(_central_gradient(f, t, x))


def eps_subgradient(f: IntegrandOracle, t: float, x, level: float, direction: int = 1, tol: float = 1e-12) -> float:
    """A 1D slope ``s`` with Young-Fenchel residual exactly ``level`` at ``x``.

    Walks from the end of ``subdifferential(f, t, x)`` in ``direction``
    (falling back to the other direction if the residual cannot reach
    ``level`` there) and solves for the level with Brent's method (the residual is convex in ``s``).
    """
    if f.dim != 1:
        raise UnsupportedError("eps_subgradient is one-dimensional")
    if level < 0:
        raise ValueError("level must be nonnegative")
    sub = as_interval(subdifferential(f, t, x))
    for sign in (direction, -direction):
        s0 = float(sub.hi[0] if sign > 0 else sub.lo[0])
        if not math.isfinite(s0):
            continue
        if level == 0:
            return s0

        def r(lam, s0=s0, sign=sign):
            return young_fenchel_residual(f, t, x, s0 + sign * lam)

        lo_l, hi_l = 0.0, 1.0
        while r(hi_l) < level and hi_l < 1e8:
            lo_l, hi_l = hi_l, 2 * hi_l
        if r(hi_l) < level:
            continue
        if r(hi_l) == math.inf:
            # shrink onto the edge of dom f^*
            a, b = lo_l, hi_l
            for _ in range(200):
                m = 0.5 * (a + b)
                if r(m) == math.inf:
                    b = m
                else:
                    a = m
            if r(a) < level - tol:
                continue
            hi_l = a
        if r(lo_l) >= level:
            return s0 + sign * lo_l  # level below the round-off of the residual at the bracket start
        if r(hi_l) - level <= tol:
            return s0 + sign * hi_l
        lam = brentq(lambda lam: r(lam) - level, lo_l, hi_l, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return s0 + sign * lam
    raise UnsupportedError(f"no slope with residual {level:g} for {f.name} at t={t:g}")


# --------------------------------------------------------------------------
# audits


def audit_convexity(f: IntegrandOracle, ts, rng: np.random.Generator, pairs: int = 200) -> float:
    """Largest midpoint-convexity violation over random pairs in the boxes."""
    worst = 0.0
    for t in np.atleast_1d(ts):
        lo, hi = f.box_at(t)
        X = rng.uniform(lo, hi, size=(pairs, f.dim))
        Y = rng.uniform(lo, hi, size=(pairs, f.dim))
        lam = rng.uniform(0, 1, size=(pairs, 1))
        fx, fy = f(t, X), f(t, Y)
        ok = np.isfinite(fx) & np.isfinite(fy)
        if not ok.any():
            continue
        fz = f(t, lam * X + (1 - lam) * Y)
        viol = fz[ok] - (lam[ok, 0] * fx[ok] + (1 - lam[ok, 0]) * fy[ok])
        worst = max(worst, float(np.max(viol)))
    return worst


def audit_lipschitz(f: IntegrandOracle, ts, rng: np.random.Generator, pairs: int = 200) -> float:
    """Largest violation of ``|f(x) - f(y)| <= k(t) ||x - y||`` on random pairs."""
    if f.lipschitz is None:
        raise UnsupportedError(f"{f.name} declares no Lipschitz modulus")
    worst = 0.0
    for t in np.atleast_1d(ts):
        lo, hi = f.box_at(t)
        X = rng.uniform(lo, hi, size=(pairs, f.dim))
        Y = rng.uniform(lo, hi, size=(pairs, f.dim))
        k = float(f.lipschitz(np.asarray(t)))
        viol = np.abs(f(t, X) - f(t, Y)) - k * np.linalg.norm(X - Y, axis=1)
        worst = max(worst, float(np.max(viol)))
    return worst
