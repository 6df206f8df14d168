"""Convex sets: static descriptors and time-dependent (moving) set oracles.

Static descriptors (:class:`Box`, :class:`Ball`, :class:`Cone`) describe the
outputs of subdifferential and normal-cone queries.  Moving sets
(:class:`MovingBox`, :class:`MovingBall`, :class:`MovingPolytope`,
:class:`Piecewise`) are closed convex sets ``C(t)`` queried through metric
projection, support function, containment and normal cones.

Moving-set methods accept a scalar ``t`` or an array of times that
broadcasts against the leading axes of the point argument.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog, nnls

__all__ = [
    "Box",
    "Ball",
    "Cone",
    "point",
    "whole_space",
    "minkowski_sum",
    "as_interval",
    "sample_directions",
    "MovingSet",
    "MovingBox",
    "MovingBall",
    "MovingPolytope",
    "Piecewise",
    "Translated",
    "set_from_description",
]


# --------------------------------------------------------------------------
# static descriptors


class Box:
    """Axis-aligned box ``[lo, hi]``; bounds may be infinite."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
            raise ValueError("Box needs lo <= hi of equal shape")

    @property
    def dim(self) -> int:
        return self.lo.size

    def nearest(self, s):
        return np.clip(np.asarray(s, dtype=float), self.lo, self.hi)

    def distance(self, s) -> float:
        s = np.asarray(s, dtype=float)
        return float(np.linalg.norm(s - self.nearest(s)))

    def contains(self, s, tol: float = 1e-9) -> bool:
        return self.distance(s) <= tol

    def least_norm(self):
        return self.nearest(np.zeros(self.dim))

    def shifted(self, v):
        return Box(self.lo + v, self.hi + v)

    def scaled(self, c: float):
        lo, hi = c * self.lo, c * self.hi
        return Box(np.minimum(lo, hi), np.maximum(lo, hi))

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def point(p) -> Box:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return Box(p, p)


class Ball:
    def __init__(self, center, radius: float):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)

    @property
    def dim(self) -> int:
        return self.center.size

    def nearest(self, s):
        d = np.asarray(s, dtype=float) - self.center
        n = np.linalg.norm(d)
        if n <= self.radius:
            return self.center + d
        return self.center + d * (self.radius / n)

    def distance(self, s) -> float:
        return max(0.0, float(np.linalg.norm(np.asarray(s, dtype=float) - self.center)) - self.radius)

    def contains(self, s, tol: float = 1e-9) -> bool:
        return self.distance(s) <= tol

    def least_norm(self):
        return self.nearest(np.zeros(self.dim))

    def shifted(self, v):
        return Ball(self.center + v, self.radius)

    def scaled(self, c: float):
        return Ball(c * self.center, abs(c) * self.radius)

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class Cone:
    """``apex + cone(generators)``: nonnegative combinations of the rows."""

    def __init__(self, generators, apex=None):
        g = np.asarray(generators, dtype=float)
        if g.ndim == 1:
            g = g[None, :]
        self.generators = g
        self.apex = np.zeros(g.shape[1]) if apex is None else np.asarray(apex, dtype=float)

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    def nearest(self, s):
        r = np.asarray(s, dtype=float) - self.apex
        coef, _ = nnls(self.generators.T, r)
        return self.apex + self.generators.T @ coef

    def distance(self, s) -> float:
        return float(np.linalg.norm(np.asarray(s, dtype=float) - self.nearest(s)))

    def contains(self, s, tol: float = 1e-9) -> bool:
        return self.distance(s) <= tol

    def least_norm(self):
        return self.nearest(np.zeros(self.dim))

    def shifted(self, v):
        return Cone(self.generators, self.apex + v)

    def scaled(self, c: float):
        if c > 0:
            return Cone(self.generators, c * self.apex)
        return Cone(-self.generators, c * self.apex)

    def __repr__(self):
        return f"Cone(generators={self.generators.tolist()}, apex={self.apex.tolist()})"


def whole_space(n: int) -> Box:
    return Box(np.full(n, -np.inf), np.full(n, np.inf))


def _is_point(d) -> bool:
    return isinstance(d, Box) and np.array_equal(d.lo, d.hi)


def as_interval(d) -> Box | None:
    """One-dimensional descriptor rewritten as an interval, else None."""
    if d is None or d.dim != 1:
        return None
    if isinstance(d, Box):
        return d
    if isinstance(d, Ball):
        return Box(d.center - d.radius, d.center + d.radius)
    g = d.generators.ravel()
    lo = -np.inf if np.any(g < 0) else 0.0
    hi = np.inf if np.any(g > 0) else 0.0
    return Box(d.apex + lo, d.apex + hi)


def minkowski_sum(a, b):
    """Sum of two descriptors when the result is again a descriptor, else None."""
    if a is None or b is None:
        return None
    if _is_point(a):
        return b.shifted(a.lo)
    if _is_point(b):
        return a.shifted(b.lo)
    if a.dim == 1:
        a, b = as_interval(a), as_interval(b)
    if isinstance(a, Box) and isinstance(b, Box):
        with np.errstate(invalid="ignore"):
            return Box(a.lo + b.lo, a.hi + b.hi)
    if isinstance(a, Cone) and isinstance(b, Cone):
        return Cone(np.vstack([a.generators, b.generators]), a.apex + b.apex)
    return None


# --------------------------------------------------------------------------
# moving sets


def _tt(t, z):
    """Broadcast times against the leading axes of ``z``."""
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(t.shape, z.shape[:-1])
    return np.broadcast_to(t, shape), np.broadcast_to(z, shape + z.shape[-1:])


class MovingSet:
    """Base class for a closed convex set ``C(t)`` moving in R^n."""

    dim: int = 1
    jump_times: tuple = ()

    def project(self, t, z):
        raise NotImplementedError

    def support(self, t, s):
        raise NotImplementedError

    def contains(self, t, z, tol: float = 1e-9):
        t, z = _tt(t, z)
        p = self.project(t, z)
        return np.linalg.norm(z - p, axis=-1) <= tol

    def normal_cone(self, t: float, x) -> Box | Cone:
        raise NotImplementedError

    def face(self, t: float, d):
        """Maximizers of ``<d, .>`` over ``C(t)`` as a descriptor, or None."""
        return None

    def center(self, t):
        raise NotImplementedError

    def bbox(self, t):
        raise NotImplementedError

    def diameter(self, t) -> float:
        lo, hi = self.bbox(t)
        return float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))

    def norm_bound(self, t):
        """Upper bound for ``max ||y||`` over ``C(t)``."""
        lo, hi = self.bbox(t)
        return np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi)), axis=-1)

    def left(self, t: float) -> "MovingSet":
        """The set in force just before ``t`` (differs only at jump times)."""
        return self


def _vec_fn(f, n: int) -> Callable:
    """Turn a constant, array or callable into ``t -> (..., n)``."""
    if callable(f):
        def fn(t):
            v = np.asarray(f(t), dtype=float)
            t = np.asarray(t, dtype=float)
            if n == 1 and v.shape == t.shape:
                v = v[..., None]
            return np.broadcast_to(v, t.shape + (n,))
        return fn
    arr = np.asarray(f, dtype=float).reshape(-1)
    if arr.size == 1 and n > 1:
        arr = np.full(n, arr[0])
    if arr.size != n:
        raise ValueError(f"expected {n} components, got {arr.size}")
    return lambda t: np.broadcast_to(arr, np.shape(t) + (n,))


def _scalar_fn(f) -> Callable:
    if callable(f):
        return lambda t: np.asarray(f(t), dtype=float)
    val = float(f)
    return lambda t: np.full(np.shape(t), val)


class MovingBox(MovingSet):
    """``C(t) = [lo(t), hi(t)]`` coordinatewise (an interval when ``dim == 1``)."""

    def __init__(self, lo, hi, dim: int = 1):
        self.dim = dim
        self._lo = _vec_fn(lo, dim)
        self._hi = _vec_fn(hi, dim)

    def bounds(self, t):
        return self._lo(t), self._hi(t)

    def project(self, t, z):
        t, z = _tt(t, z)
        lo, hi = self.bounds(t)
        return np.clip(z, lo, hi)

    def support(self, t, s):
        t, s = _tt(t, s)
        lo, hi = self.bounds(t)
        return np.sum(np.maximum(s * lo, s * hi), axis=-1)

    def contains(self, t, z, tol: float = 1e-9):
        t, z = _tt(t, z)
        lo, hi = self.bounds(t)
        return np.all((z >= lo - tol) & (z <= hi + tol), axis=-1)

    def normal_cone(self, t, x, tol: float = 1e-9):
        lo, hi = self.bounds(float(t))
        x = np.asarray(x, dtype=float)
        at_lo = x <= lo + tol
        at_hi = x >= hi - tol
        clo = np.where(at_lo, -np.inf, 0.0)
        chi = np.where(at_hi, np.inf, 0.0)
        return Box(clo, chi)

    def face(self, t, d):
        lo, hi = self.bounds(float(t))
        d = np.asarray(d, dtype=float)
        flo = np.where(d > 0, hi, lo)
        fhi = np.where(d < 0, lo, hi)
        return Box(flo, fhi)

    def center(self, t):
        lo, hi = self.bounds(t)
        return 0.5 * (lo + hi)

    def bbox(self, t):
        return self.bounds(t)

    def __repr__(self):
        return f"MovingBox(dim={self.dim})"


class MovingBall(MovingSet):
    """Euclidean ball ``B(c(t), r(t))``."""

    def __init__(self, center, radius, dim: int = 1):
        self.dim = dim
        self._c = _vec_fn(center, dim)
        self._r = _scalar_fn(radius)

    def project(self, t, z):
        t, z = _tt(t, z)
        c, r = self._c(t), self._r(t)
        d = z - c
        n = np.linalg.norm(d, axis=-1)
        scale = np.where(n > r, r / np.where(n > 0, n, 1.0), 1.0)
        return c + d * scale[..., None]

    def support(self, t, s):
        t, s = _tt(t, s)
        return np.sum(s * self._c(t), axis=-1) + self._r(t) * np.linalg.norm(s, axis=-1)

    def contains(self, t, z, tol: float = 1e-9):
        t, z = _tt(t, z)
        return np.linalg.norm(z - self._c(t), axis=-1) <= self._r(t) + tol

    def normal_cone(self, t, x, tol: float = 1e-9):
        c, r = self._c(float(t)), float(self._r(float(t)))
        d = np.asarray(x, dtype=float) - c
        if np.linalg.norm(d) >= r - tol and np.linalg.norm(d) > 0:
            return Cone(d[None, :])
        if r <= tol:
            return whole_space(self.dim)
        return point(np.zeros(self.dim))

    def face(self, t, d):
        c, r = self._c(float(t)), float(self._r(float(t)))
        d = np.asarray(d, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            return Ball(c, r)
        return point(c + r * d / n)

    def center(self, t):
        return self._c(t)

    def bbox(self, t):
        c, r = self._c(t), self._r(t)
        return c - r[..., None], c + r[..., None]

    def norm_bound(self, t):
        return np.linalg.norm(self._c(t), axis=-1) + self._r(t)

    def __repr__(self):
        return f"MovingBall(dim={self.dim})"


class MovingPolytope(MovingSet):
    """Bounded polytope ``{y : A y <= b(t)}`` with a fixed matrix ``A``.

    Projection is exact: the active set is found by enumerating subsets of at
    most ``dim`` constraints and checking the KKT conditions, which is cheap
    for the handful of facets used at desk scale.
    """

    def __init__(self, A, b, tol: float = 1e-10):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.dim = self.A.shape[1]
        self._b = _vec_fn(b, self.A.shape[0])
        self._tol = tol
        m = self.A.shape[0]
        self._subsets = [
            list(s) for k in range(1, min(m, self.dim) + 1) for s in itertools.combinations(range(m), k)
        ]

    def _candidates(self):
        """Per active subset: ``(S, A_S, G^{-1})`` with ``G = A_S A_S^T`` nonsingular."""
        if not hasattr(self, "_cand"):
            out = []
            for S in self._subsets:
                AS = self.A[S]
                G = AS @ AS.T
                if abs(np.linalg.det(G)) > 1e-12:
                    out.append((S, AS, np.linalg.inv(G)))
            self._cand = out
        return self._cand

    def project(self, t, z):
        t, z = _tt(t, z)
        shape = z.shape
        zf = z.reshape(-1, self.dim)
        b = np.broadcast_to(self._b(t), t.shape + (self.A.shape[0],)).reshape(-1, self.A.shape[0])
        scale = 1.0 + np.abs(b).max(axis=1)
        out = zf.copy()
        best = np.where(np.all(zf @ self.A.T <= b + self._tol * scale[:, None], axis=1), 0.0, np.inf)
        for S, AS, Ginv in self._candidates():
            lam = (zf @ AS.T - b[:, S]) @ Ginv.T
            y = zf - lam @ AS
            ok = np.all(lam >= -self._tol, axis=1) & np.all(y @ self.A.T <= b + 1e-9 * scale[:, None], axis=1)
            d = np.linalg.norm(y - zf, axis=1)
            better = ok & (d < best - 1e-14)
            out[better] = y[better]
            best = np.where(better, d, best)
        if np.any(np.isinf(best)):
            raise RuntimeError("polytope projection failed (empty set?)")
        return out.reshape(shape)

    def vertices(self, t):
        """Vertices of ``C(t)`` for scalar ``t`` as rows."""
        b = self._b(np.asarray(float(t)))
        V = []
        for S in itertools.combinations(range(self.A.shape[0]), self.dim):
            AS = self.A[list(S)]
            if abs(np.linalg.det(AS)) < 1e-12:
                continue
            v = np.linalg.solve(AS, b[list(S)])
            if np.all(self.A @ v <= b + 1e-9 * (1 + np.abs(b).max())):
                V.append(v)
        if not V:
            raise RuntimeError("polytope has no vertices (empty or unbounded)")
        return np.array(V)

    def support(self, t, s):
        t, s = _tt(t, s)
        out = np.empty(s.shape[:-1])
        tf = t.reshape(-1)
        sf = s.reshape(-1, self.dim)
        of = out.reshape(-1)
        for tv in np.unique(tf):
            m = tf == tv
            of[m] = np.max(sf[m] @ self.vertices(tv).T, axis=1)
        return out

    def contains(self, t, z, tol: float = 1e-9):
        t, z = _tt(t, z)
        b = self._b(t)
        norms = np.linalg.norm(self.A, axis=1)
        return np.all(np.einsum("ij,...j->...i", self.A, z) <= b + tol * norms, axis=-1)

    def normal_cone(self, t, x, tol: float = 1e-9):
        b = self._b(float(t))
        x = np.asarray(x, dtype=float)
        active = self.A @ x >= b - tol * np.linalg.norm(self.A, axis=1)
        if not active.any():
            return point(np.zeros(self.dim))
        return Cone(self.A[active])

    def center(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (self.dim,))
        b = self._b(t)
        norms = np.linalg.norm(self.A, axis=1)
        for idx in np.ndindex(t.shape):
            c = np.zeros(self.dim + 1)
            c[-1] = -1.0
            A = np.hstack([self.A, norms[:, None]])
            res = linprog(c, A_ub=A, b_ub=b[idx], bounds=[(None, None)] * self.dim + [(0, None)], method="highs")
            out[idx] = res.x[:-1]
        return out

    def bbox(self, t):
        t = np.asarray(t, dtype=float)
        lo = np.empty(t.shape + (self.dim,))
        hi = np.empty_like(lo)
        for idx in np.ndindex(t.shape):
            V = self.vertices(t[idx])
            lo[idx], hi[idx] = V.min(axis=0), V.max(axis=0)
        return lo, hi

    def __repr__(self):
        return f"MovingPolytope(facets={self.A.shape[0]}, dim={self.dim})"


class Piecewise(MovingSet):
    """Right-continuous concatenation of moving sets.

    ``pieces`` is a list ``[(t_0, C_0), (t_1, C_1), ...]`` with increasing
    start times; ``C(t) = C_i(t)`` for ``t_i <= t < t_{i+1}``.  The start
    times after the first are the jump times.
    """

    def __init__(self, pieces: Sequence[tuple[float, MovingSet]]):
        pieces = sorted(((float(s), c) for s, c in pieces), key=lambda p: p[0])
        if not pieces:
            raise ValueError("need at least one piece")
        dims = {c.dim for _, c in pieces}
        if len(dims) != 1:
            raise ValueError("pieces have different dimensions")
        self.dim = dims.pop()
        self.starts = np.array([s for s, _ in pieces])
        self.sets = [c for _, c in pieces]
        self.jump_times = tuple(float(s) for s in self.starts[1:])

    def _index(self, t, left: bool = False):
        side = "left" if left else "right"
        return np.clip(np.searchsorted(self.starts, t, side=side) - 1, 0, len(self.sets) - 1)

    def piece(self, t: float, left: bool = False) -> MovingSet:
        return self.sets[int(self._index(float(t), left))]

    def left(self, t):
        return _LeftLimit(self, float(t))

    def _dispatch(self, name, t, z, out_shape_extra=()):
        t, z = _tt(t, z)
        idx = self._index(t)
        out = None
        for i, c in enumerate(self.sets):
            mask = idx == i
            if not mask.any():
                continue
            val = getattr(c, name)(t[mask], z[mask])
            if out is None:
                out = np.empty(t.shape + np.shape(val)[1:], dtype=np.asarray(val).dtype)
            out[mask] = val
        return out

    def project(self, t, z):
        return self._dispatch("project", t, z)

    def support(self, t, s):
        return self._dispatch("support", t, s)

    def contains(self, t, z, tol: float = 1e-9):
        t, z = _tt(t, z)
        idx = self._index(t)
        out = np.zeros(t.shape, dtype=bool)
        for i, c in enumerate(self.sets):
            mask = idx == i
            if mask.any():
                out[mask] = c.contains(t[mask], z[mask], tol)
        return out

    def normal_cone(self, t, x, tol: float = 1e-9):
        return self.piece(t).normal_cone(t, x, tol)

    def face(self, t, d):
        return self.piece(t).face(t, d)

    def _pointwise(self, name, t):
        t = np.asarray(t, dtype=float)
        idx = self._index(t)
        outs = None
        for i, c in enumerate(self.sets):
            mask = idx == i
            if not mask.any():
                continue
            val = getattr(c, name)(t[mask])
            if isinstance(val, tuple):
                if outs is None:
                    outs = tuple(np.empty(t.shape + v.shape[1:]) for v in val)
                for o, v in zip(outs, val):
                    o[mask] = v
            else:
                if outs is None:
                    outs = np.empty(t.shape + val.shape[1:])
                outs[mask] = val
        return outs

    def center(self, t):
        return self._pointwise("center", t)

    def bbox(self, t):
        return self._pointwise("bbox", t)

    def __repr__(self):
        return f"Piecewise(starts={self.starts.tolist()}, sets={self.sets})"


class _LeftLimit(MovingSet):
    """View of a :class:`Piecewise` set as seen just before time ``t0``."""

    def __init__(self, parent: Piecewise, t0: float):
        self.parent = parent
        self.t0 = t0
        self.dim = parent.dim
        self._set = parent.piece(t0, left=True)

    def project(self, t, z):
        return self._set.project(t, z)

    def support(self, t, s):
        return self._set.support(t, s)

    def contains(self, t, z, tol: float = 1e-9):
        return self._set.contains(t, z, tol)

    def normal_cone(self, t, x, tol: float = 1e-9):
        return self._set.normal_cone(t, x, tol)

    def face(self, t, d):
        return self._set.face(t, d)

    def center(self, t):
        return self._set.center(t)

    def bbox(self, t):
        return self._set.bbox(t)


class Translated(MovingSet):
    """``C(t) = base(t) + m(t)`` for a translation path ``m``."""

    def __init__(self, base: MovingSet, motion):
        self.base = base
        self.dim = base.dim
        self.jump_times = base.jump_times
        self._m = _vec_fn(motion, base.dim)

    def project(self, t, z):
        t, z = _tt(t, z)
        m = self._m(t)
        return self.base.project(t, z - m) + m

    def support(self, t, s):
        t, s = _tt(t, s)
        return self.base.support(t, s) + np.sum(s * self._m(t), axis=-1)

    def contains(self, t, z, tol: float = 1e-9):
        t, z = _tt(t, z)
        return self.base.contains(t, z - self._m(t), tol)

    def normal_cone(self, t, x, tol: float = 1e-9):
        x = np.asarray(x, dtype=float)
        return self.base.normal_cone(t, x - self._m(np.asarray(float(t))), tol)

    def face(self, t, d):
        f = self.base.face(t, d)
        return None if f is None else f.shifted(self._m(np.asarray(float(t))))

    def center(self, t):
        return self.base.center(t) + self._m(np.asarray(t, dtype=float))

    def bbox(self, t):
        lo, hi = self.base.bbox(t)
        m = self._m(np.asarray(t, dtype=float))
        return lo + m, hi + m

    def left(self, t):
        return Translated(self.base.left(t), self._m)

    def __repr__(self):
        return f"Translated({self.base!r})"


def _static_set(desc: dict) -> MovingSet:
    from .expr import compile_expr, compile_vector

    desc = dict(desc)
    kind = desc.pop("kind")
    desc.pop("jumps", None)
    motion = desc.pop("motion", None)

    def vec(v):
        return compile_vector(v) if isinstance(v, (list, tuple, str)) else v

    def scal(v):
        return compile_expr(v) if isinstance(v, str) else v

    if kind == "interval":
        c = MovingBox(scal(desc.pop("lo")), scal(desc.pop("hi")), 1)
    elif kind == "box":
        lo, hi = desc.pop("lo"), desc.pop("hi")
        c = MovingBox(vec(lo), vec(hi), len(lo) if isinstance(lo, list) else 1)
    elif kind == "ball":
        center = desc.pop("center", [0.0])
        dim = len(center) if isinstance(center, list) else int(desc.pop("dim", 1))
        c = MovingBall(vec(center), scal(desc.pop("radius", 1.0)), dim)
    elif kind == "halfspaces":
        offsets = desc.pop("offsets")
        c = MovingPolytope(desc.pop("normals"), compile_vector(offsets))
    else:
        raise ValueError(f"unknown set kind {kind!r}")
    if desc:
        raise ValueError(f"unknown fields for set {kind!r}: {sorted(desc)}")
    if motion is not None:
        c = Translated(c, compile_vector(motion))
    return c


def set_from_description(desc: dict) -> MovingSet:
    """Build a moving set from ``{"kind": "interval"|"box"|"ball"|"halfspaces", ...}``.

    Optional ``"motion"`` (list of expressions in ``t``) translates the set;
    optional ``"jumps"`` (list of ``{"t": ..., "set": {...}}``) switches to
    another set from that time on.
    """
    first = _static_set(desc)
    jumps = desc.get("jumps") or []
    if not jumps:
        return first
    pieces = [(-math.inf, first)] + [(float(j["t"]), _static_set(j["set"])) for j in jumps]
    return Piecewise(pieces)


def sample_directions(n: int, count: int = 64) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors in R^n (both signs of each axis included)."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # golden-ratio (Kronecker) sequence pushed through the Gaussian quantile
    from scipy.stats import norm as _norm

    alphas = np.array([math.modf(math.sqrt(p))[0] for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)[:n]])
    k = np.arange(1, count + 1)[:, None]
    u = np.mod(0.5 + k * alphas, 1.0)
    v = _norm.ppf(np.clip(u, 1e-6, 1 - 1e-6))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    axes = np.vstack([np.eye(n), -np.eye(n)])
    return np.vstack([axes, v])
