"""Gaussian-measure primitives: CDF/quantile, Hermite polynomials, quadrature
rules, tensor grids and the cylindrical projection.

All integrals are taken against the *standard* (probability) Gaussian
measure, so quadrature weights sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import hermite_e
from scipy import special

DEFAULT_NODES = {1: 64, 2: 64, 3: 32}


def std_normal_cdf(t):
    """Standard normal CDF, total on the extended reals."""
    return special.ndtr(t)


def std_normal_pdf(t):
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf`; returns -inf at 0 and +inf at 1."""
    arr = np.asarray(p, dtype=float)
    if np.any(np.isnan(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError(f"probability outside [0, 1]: {p!r}")
    out = special.ndtri(arr)
    return float(out) if out.ndim == 0 else out


def hermite(n: int, x):
    """Probabilists' Hermite polynomial He_n by the three-term recurrence."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for k in range(1, n):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def normalized_hermite_table(N: int, x) -> np.ndarray:
    """Values of h_k = He_k / sqrt(k!) for k = 0..N, shape ``x.shape + (N+1,)``.

    Uses the normalised recurrence, which never forms k! explicitly.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (N + 1,))
    out[..., 0] = 1.0
    if N >= 1:
        out[..., 1] = x
    for k in range(1, N):
        out[..., k + 1] = (x * out[..., k] - np.sqrt(k) * out[..., k - 1]) / np.sqrt(k + 1)
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights integrating against the standard Gaussian."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1D arrays of equal length")
        # far-tail weights of large rules underflow to exactly zero
        if np.any(weights < 0) or not weights.sum() > 0:
            raise ValueError("weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=64)
def gauss_hermite_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Hermite rule for the standard Gaussian, exact to degree 2n-1."""
    if n < 1:
        raise ValueError("need at least one node")
    if n <= 150:
        x, w = hermite_e.hermegauss(n)
    else:
        # numpy's weight normalisation overflows for large n
        x, w = special.roots_hermitenorm(n)
    w = w / w.sum()
    # symmetrise away the last few ulps so reflections map nodes onto nodes
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(x, w)


@dataclass(frozen=True)
class TensorGrid:
    """Product of one-dimensional Gauss-Hermite rules."""

    rules: tuple[QuadratureRule, ...]

    def __post_init__(self):
        if len(self.rules) == 0:
            raise ValueError("a grid needs at least one axis")
        object.__setattr__(self, "rules", tuple(self.rules))

    @property
    def dim(self) -> int:
        return len(self.rules)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(r.size for r in self.rules)

    def axis_nodes(self, axis: int) -> np.ndarray:
        return self.rules[axis].nodes

    @property
    def weights(self) -> np.ndarray:
        w = np.ones(())
        for r in self.rules:
            w = np.multiply.outer(w, r.weights)
        return w

    def open_coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        return list(np.ix_(*(r.nodes for r in self.rules)))

    def points(self) -> np.ndarray:
        """All nodes as an array of shape ``shape + (d,)``."""
        mesh = np.meshgrid(*(r.nodes for r in self.rules), indexing="ij")
        return np.stack(mesh, axis=-1)


def make_grid(dim: int, n: int | Sequence[int] | None = None) -> TensorGrid:
    """Tensor grid with ``n`` Gauss-Hermite nodes per axis (default by dimension)."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    if n is None:
        n = DEFAULT_NODES.get(dim, 16)
    sizes = [int(n)] * dim if np.isscalar(n) else [int(k) for k in n]
    if len(sizes) != dim:
        raise ValueError("one node count per axis expected")
    return TensorGrid(tuple(gauss_hermite_rule(k) for k in sizes))


@dataclass(frozen=True)
class GridFunction:
    """Nodal values of a function on a :class:`TensorGrid`."""

    grid: TensorGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values have shape {vals.shape}, grid is {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: TensorGrid, fn: Callable[..., np.ndarray]) -> "GridFunction":
        """Sample ``fn(x1, ..., xd)`` on the grid (coordinates broadcast)."""
        vals = np.broadcast_to(np.asarray(fn(*grid.open_coords()), dtype=float), grid.shape)
        return cls(grid, vals)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)


def integrate(f: GridFunction) -> float:
    """Quadrature approximation of the Gaussian integral of ``f``."""
    return float(np.sum(f.values * f.grid.weights))


def inner(f: GridFunction, g: GridFunction) -> float:
    return float(np.sum(f.values * g.values * f.grid.weights))


def l2_norm(f: GridFunction) -> float:
    return float(np.sqrt(inner(f, f)))


def cylindrical_projection(f: GridFunction, m: int) -> GridFunction:
    """Average ``f`` over the last ``d - m`` Gaussian coordinates.

    The result depends on the first ``m`` coordinates only but lives on the
    same grid, so it can be compared with ``f`` node by node.
    """
    d = f.dim
    if not 0 <= m <= d:
        raise ValueError(f"need 0 <= m <= {d}, got {m}")
    vals = f.values
    for axis in range(d - 1, m - 1, -1):
        w = f.grid.rules[axis].weights
        vals = np.tensordot(vals, w, axes=([axis], [0]))
        vals = np.expand_dims(vals, axis)
    return GridFunction(f.grid, np.broadcast_to(vals, f.grid.shape))
