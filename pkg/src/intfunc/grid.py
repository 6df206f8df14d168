"""Time grids, curves, step functions, discrete measures and quadrature.

Everything else in the package computes on these types.  They are immutable
after construction (arrays are copied and flagged read-only).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "StructuralError",
    "TimeGrid",
    "Curve",
    "StepFunction",
    "DiscreteMeasure",
    "ReportKind",
    "Report",
    "ext_sum",
    "quadrature",
    "curve_derivative",
    "cumulative_integral",
    "lp_norm",
    "curve_to_json",
    "curve_from_json",
    "seeded_rng",
    "as_grid",
]


class StructuralError(ValueError):
    """Shape or length mismatch between objects that must agree."""


def _frozen(a: Any, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def ext_sum(terms: Iterable[float]) -> float:
    """Sum extended reals with the convention ``+inf + (-inf) = +inf``.

    Finite terms are added with ``math.fsum`` so the total does not depend on
    the order of the terms.
    """
    finite = []
    pos_inf = neg_inf = False
    for v in terms:
        v = float(v)
        if math.isnan(v):
            raise ValueError("NaN in extended-real sum")
        if v == math.inf:
            pos_inf = True
        elif v == -math.inf:
            neg_inf = True
        else:
            finite.append(v)
    if pos_inf:
        return math.inf
    if neg_inf:
        return -math.inf
    return math.fsum(finite)


@dataclass(frozen=True)
class TimeGrid:
    """Partition ``a = t_0 < t_1 < ... < t_N = b`` of a compact interval."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise StructuralError("a grid needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise StructuralError("grid nodes must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise StructuralError("grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", _frozen(nodes))

    @classmethod
    def uniform(cls, a: float, b: float, n_cells: int) -> "TimeGrid":
        if n_cells < 1:
            raise StructuralError("n_cells must be >= 1")
        return cls(np.linspace(a, b, n_cells + 1))

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_cells(self) -> int:
        return self.nodes.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    def cell_of(self, t: float) -> int:
        """Index ``k`` with ``t_k <= t < t_{k+1}``; the last cell is closed."""
        k = int(np.searchsorted(self.nodes, t, side="right")) - 1
        return min(max(k, 0), self.n_cells - 1)

    def with_nodes(self, extra: Iterable[float]) -> "TimeGrid":
        """Grid refined by inserting ``extra`` nodes (duplicates ignored)."""
        nodes = np.union1d(self.nodes, np.asarray(list(extra), dtype=float))
        nodes = nodes[(nodes >= self.a) & (nodes <= self.b)]
        return TimeGrid(nodes)

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash(self.nodes.tobytes())


def _as_points(values, count: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != count:
        raise StructuralError(f"{what}: expected {count} points, got shape {np.shape(values)}")
    return arr


@dataclass(frozen=True)
class Curve:
    """A curve in R^n given by its values at the grid nodes.

    ``interp`` is ``"linear"`` (continuous, piecewise linear) or
    ``"rc-constant"`` (right continuous, equal to ``values[k]`` on
    ``[t_k, t_{k+1})``).
    """

    grid: TimeGrid
    values: np.ndarray
    interp: str = "linear"

    def __post_init__(self):
        if self.interp not in ("linear", "rc-constant"):
            raise StructuralError(f"unknown interpolation {self.interp!r}")
        vals = _as_points(self.values, self.grid.nodes.size, "Curve values")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, t) -> np.ndarray:
        """Evaluate at scalar or array ``t``; returns shape ``t.shape + (n,)``."""
        t = np.asarray(t, dtype=float)
        nodes = self.grid.nodes
        if self.interp == "linear":
            out = np.stack(
                [np.interp(t, nodes, self.values[:, j]) for j in range(self.dim)], axis=-1
            )
        else:
            idx = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, nodes.size - 1)
            out = self.values[idx]
        return out

    def at_midpoints(self) -> np.ndarray:
        if self.interp == "linear":
            return 0.5 * (self.values[1:] + self.values[:-1])
        return self.values[:-1].copy()


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function, one value in R^n per grid cell."""

    grid: TimeGrid
    cell_values: np.ndarray

    def __post_init__(self):
        vals = _as_points(self.cell_values, self.grid.n_cells, "StepFunction cell values")
        object.__setattr__(self, "cell_values", _frozen(vals))

    @property
    def dim(self) -> int:
        return self.cell_values.shape[1]

    @classmethod
    def from_function(cls, grid: TimeGrid, fun, dim: int | None = None) -> "StepFunction":
        """Sample ``fun`` at the cell midpoints."""
        vals = np.asarray(fun(grid.midpoints), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if dim is not None and vals.shape[1] != dim:
            raise StructuralError("dimension mismatch")
        return cls(grid, vals)

    @classmethod
    def constant(cls, grid: TimeGrid, value) -> "StepFunction":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (grid.n_cells, 1)))

    def node_values(self) -> np.ndarray:
        """Right-continuous values at the nodes; the last node uses the last cell."""
        return np.vstack([self.cell_values, self.cell_values[-1:]])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.grid.nodes, t, side="right") - 1, 0, self.grid.n_cells - 1)
        return self.cell_values[idx]

    def _combine(self, other, op):
        if isinstance(other, StepFunction):
            if other.grid != self.grid:
                raise StructuralError("step functions live on different grids")
            other = other.cell_values
        return StepFunction(self.grid, op(self.cell_values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        return StepFunction(self.grid, self.cell_values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DiscreteMeasure:
    """Density per cell (w.r.t. Lebesgue) plus point masses at grid nodes."""

    grid: TimeGrid
    density: np.ndarray
    atoms: tuple = field(default=())

    def __post_init__(self):
        dens = np.asarray(self.density, dtype=float)
        if dens.ndim == 0:
            dens = np.full(self.grid.n_cells, float(dens))
        if dens.shape != (self.grid.n_cells,):
            raise StructuralError("density must have one entry per cell")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise ValueError("density must be finite and nonnegative")
        atoms = []
        for node, mass in self.atoms:
            node = int(node)
            mass = float(mass)
            if not 0 <= node <= self.grid.n_cells:
                raise StructuralError(f"atom node index {node} outside grid")
            if mass < 0 or not math.isfinite(mass):
                raise ValueError("atom masses must be finite and nonnegative")
            atoms.append((node, mass))
        object.__setattr__(self, "density", _frozen(dens))
        object.__setattr__(self, "atoms", tuple(sorted(atoms)))

    @classmethod
    def lebesgue(cls, grid: TimeGrid, atoms=()) -> "DiscreteMeasure":
        return cls(grid, np.ones(grid.n_cells), tuple(atoms))

    @property
    def cell_masses(self) -> np.ndarray:
        return self.density * self.grid.widths

    @property
    def atom_nodes(self) -> np.ndarray:
        return np.array([n for n, _ in self.atoms], dtype=int)

    @property
    def atom_masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.cell_masses) + math.fsum(self.atom_masses)


def quadrature(g, m: DiscreteMeasure, g_nodes=None) -> float:
    """Integrate per-cell samples ``g`` (taken at cell midpoints) against ``m``.

    ``g_nodes`` (one sample per node) is required when ``m`` has atoms.
    Terms with zero weight are skipped, so ``0 * inf`` counts as zero.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (m.grid.n_cells,):
        raise StructuralError(f"expected {m.grid.n_cells} cell samples, got shape {g.shape}")
    w = m.cell_masses
    terms = list(_weighted(g, w))
    if m.atoms:
        if g_nodes is None:
            raise StructuralError("measure has atoms: node samples are required")
        g_nodes = np.asarray(g_nodes, dtype=float)
        if g_nodes.shape != (m.grid.n_cells + 1,):
            raise StructuralError("node samples must have one entry per node")
        terms += list(_weighted(g_nodes[m.atom_nodes], m.atom_masses))
    return ext_sum(terms)


def _weighted(values: np.ndarray, weights: np.ndarray):
    keep = weights > 0
    v, w = values[keep], weights[keep]
    if np.any(np.isnan(v)):
        raise ValueError("NaN integrand sample")
    inf = np.isinf(v)
    if inf.any():
        yield from v[inf]
    yield from v[~inf] * w[~inf]


def curve_derivative(x: Curve) -> StepFunction:
    if x.interp != "linear":
        raise ValueError("curve_derivative needs a piecewise-linear curve")
    slopes = np.diff(x.values, axis=0) / x.grid.widths[:, None]
    return StepFunction(x.grid, slopes)


def cumulative_integral(start, y: StepFunction) -> Curve:
    """Piecewise-linear curve ``x(t) = start + int_a^t y``."""
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if start.shape != (y.dim,):
        raise StructuralError("start point and step function dimensions differ")
    incr = y.cell_values * y.grid.widths[:, None]
    vals = np.vstack([start, start + np.cumsum(incr, axis=0)])
    return Curve(y.grid, vals, "linear")


def lp_norm(y: StepFunction, p: float, m: DiscreteMeasure) -> float:
    if not (p >= 1):
        raise ValueError("p must be >= 1 (or inf)")
    if m.grid != y.grid:
        raise StructuralError("step function and measure use different grids")
    mags = np.linalg.norm(y.cell_values, axis=1)
    node_mags = np.linalg.norm(y.node_values(), axis=1)
    if math.isinf(p):
        vals = list(mags[m.cell_masses > 0])
        vals += [node_mags[n] for n, w in m.atoms if w > 0]
        return float(max(vals, default=0.0))
    return quadrature(mags**p, m, node_mags**p) ** (1.0 / p)


class ReportKind(str, enum.Enum):
    INTERCHANGE = "interchange"
    CONJUGATE = "conjugate"
    EPS_SUBDIFF = "eps_subdiff"
    ARGMIN = "argmin"
    EXPECTED_SUBGRADIENT = "expected_subgradient"
    EXPECTED_CONJUGATE = "expected_conjugate"
    CLARKE_INCLUSION = "clarke_inclusion"
    CLARKE_UPPER_BOUND = "clarke_upper_bound"
    EULER_LAGRANGE = "euler_lagrange"
    SOLVER = "solver"
    DIFFERENTIAL_MEASURE = "differential_measure"
    INTEGRAL_SOLUTION = "integral_solution"
    EQUIVALENCE = "equivalence"


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, (Curve, StepFunction)):
        return curve_to_json(v)
    return v


@dataclass(frozen=True)
class Report:
    """Outcome of a verification.

    ``passed`` defaults to ``residual <= tolerance``; checkers whose verdict
    follows another convention pass it explicitly.
    """

    kind: ReportKind
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool | None = None
    witnesses: dict = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self):
        if self.passed is None:
            object.__setattr__(self, "passed", bool(self.residual <= self.tolerance))
        else:
            object.__setattr__(self, "passed", bool(self.passed))

    def to_dict(self) -> dict:
        return {
            "kind": ReportKind(self.kind).value,
            "lhs": _jsonable(self.lhs),
            "rhs": _jsonable(self.rhs),
            "residual": _jsonable(self.residual),
            "tolerance": _jsonable(self.tolerance),
            "pass": self.passed,
            "witnesses": _jsonable(self.witnesses),
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def curve_to_json(c: Curve | StepFunction) -> dict:
    if isinstance(c, StepFunction):
        return {
            "a": c.grid.a,
            "b": c.grid.b,
            "nodes": c.grid.nodes.tolist(),
            "values": c.cell_values.tolist(),
            "interp": "step",
        }
    return {
        "a": c.grid.a,
        "b": c.grid.b,
        "nodes": c.grid.nodes.tolist(),
        "values": c.values.tolist(),
        "interp": c.interp,
    }


def curve_from_json(d: dict | str) -> Curve | StepFunction:
    if isinstance(d, str):
        d = json.loads(d)
    grid = TimeGrid(d["nodes"])
    if abs(grid.a - d["a"]) > 0 or abs(grid.b - d["b"]) > 0:
        raise StructuralError("a/b disagree with the node list")
    if d["interp"] == "step":
        return StepFunction(grid, d["values"])
    return Curve(grid, d["values"], d["interp"])


def seeded_rng(seed: int, *ids: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed`` and a tuple of integer ids.

    Independent streams for (seed, ids) make results independent of the
    order in which cells, files or trials are processed.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *(int(i) & 0xFFFFFFFF for i in ids)])
    return np.random.Generator(np.random.Philox(ss))


def as_grid(obj: TimeGrid | Sequence[float]) -> TimeGrid:
    return obj if isinstance(obj, TimeGrid) else TimeGrid(obj)
