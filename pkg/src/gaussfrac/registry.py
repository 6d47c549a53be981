"""Named test functions and seeded corpora.

Names are ``family:argument``:

``mode:k`` or ``mode:k1,k2,...``
    The orthonormal Hermite mode h_k(x_1), or h_alpha for a multi-index.
``indicator:c``
    The half-space indicator chi{x_1 < c}.
``gauss-bump:a``
    exp(-a |x|^2 / 2) with a > 0.
``random:seed``
    A band-limited function with N(0, 1) / (1 + |alpha|)^2 Hermite
    coefficients for 1 <= |alpha| <= degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gaussfrac.gauss_core import GridFunction, TensorGrid, make_grid
from gaussfrac.ou_spectral import HermiteSeries, degree_array, synthesize

FAMILIES = ("mode", "indicator", "gauss-bump", "random")
DEFAULT_DEGREE = 8


@dataclass(frozen=True)
class FunctionSpec:
    family: str
    arg: str

    @property
    def name(self) -> str:
        return f"{self.family}:{self.arg}"

    @property
    def is_indicator(self) -> bool:
        return self.family == "indicator"


def parse_function(name: str) -> FunctionSpec:
    """Validate a registry name; raises ValueError with a usage message."""
    family, sep, arg = str(name).strip().partition(":")
    if family not in FAMILIES or not sep or not arg:
        raise ValueError(f"unknown function {name!r}; expected one of mode:k, indicator:c, gauss-bump:a, random:seed")
    try:
        if family == "mode":
            ks = [int(k) for k in arg.split(",")]
            if any(k < 0 for k in ks):
                raise ValueError
        elif family == "random":
            if int(arg) < 0:
                raise ValueError
        else:
            v = float(arg)
            if not math.isfinite(v) or (family == "gauss-bump" and v <= 0):
                raise ValueError
    except ValueError:
        raise ValueError(f"malformed argument in function {name!r}") from None
    return FunctionSpec(family, arg)


def random_series(dim: int, degree: int, rng: np.random.Generator) -> HermiteSeries:
    deg = degree_array(dim, degree)
    a = rng.standard_normal(deg.shape) / (1.0 + deg) ** 2
    a[(deg == 0) | (deg > degree)] = 0.0
    return HermiteSeries(a, "total")


def make_function(name: str | FunctionSpec, grid: TensorGrid, degree: int = DEFAULT_DEGREE) -> GridFunction:
    """Nodal values of a registry function on ``grid``."""
    spec = parse_function(name) if isinstance(name, str) else name
    dim = grid.dim
    if spec.family == "mode":
        ks = [int(k) for k in spec.arg.split(",")]
        if len(ks) == 1:
            ks = ks + [0] * (dim - 1)
        if len(ks) != dim:
            raise ValueError(f"mode multi-index {spec.arg!r} does not match dimension {dim}")
        a = np.zeros(tuple(k + 1 for k in [max(ks)] * dim))
        a[tuple(ks)] = 1.0
        return synthesize(HermiteSeries(a, "tensor"), grid)
    if spec.family == "indicator":
        x1 = grid.points()[..., 0]
        return GridFunction(grid, (x1 < float(spec.arg)).astype(float))
    if spec.family == "gauss-bump":
        r2 = np.sum(grid.points() ** 2, axis=-1)
        return GridFunction(grid, np.exp(-0.5 * float(spec.arg) * r2))
    rng = np.random.default_rng(int(spec.arg))
    return synthesize(random_series(dim, degree, rng), grid)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    h = rng.standard_normal(dim)
    return h / np.linalg.norm(h)


def corpus(seed: int, count: int, dim: int = 2, n: int = 32, max_degree: int = 10) -> list[tuple[str, GridFunction]]:
    """Seeded mix of band-limited functions and nodal indicators.

    Entries cycle through: band-limited series (degree 2..max_degree),
    half-spaces with random normals, strips, balls, quadrants and
    superlevel sets of band-limited series.
    """
    rng = np.random.default_rng(seed)
    grid = make_grid(dim, n)
    x = grid.points()
    out = []
    kinds = ("band", "halfspace", "band", "strip", "band", "ball", "band", "quadrant", "band", "level")
    for i in range(count):
        kind = kinds[i % len(kinds)]
        if kind == "band":
            deg = int(rng.integers(2, max_degree + 1))
            f = synthesize(random_series(dim, deg, rng), grid)
            label = f"band[deg={deg}]"
        elif kind == "halfspace":
            h, c = _unit(rng, dim), rng.uniform(-1.0, 1.0)
            f = GridFunction(grid, (x @ h < c).astype(float))
            label = "halfspace"
        elif kind == "strip":
            h, a = _unit(rng, dim), rng.uniform(0.3, 1.5)
            f = GridFunction(grid, (np.abs(x @ h - rng.uniform(-0.5, 0.5)) < a).astype(float))
            label = "strip"
        elif kind == "ball":
            ctr, r = rng.uniform(-0.7, 0.7, dim), rng.uniform(0.6, 2.0)
            f = GridFunction(grid, (np.sum((x - ctr) ** 2, axis=-1) < r * r).astype(float))
            label = "ball"
        elif kind == "quadrant":
            h1 = _unit(rng, dim)
            h2 = _unit(rng, dim)
            f = GridFunction(grid, ((x @ h1 < rng.uniform(-0.5, 1.0)) & (x @ h2 < rng.uniform(-0.5, 1.0))).astype(float))
            label = "quadrant"
        else:
            g = synthesize(random_series(dim, int(rng.integers(2, 6)), rng), grid)
            f = GridFunction(grid, (g.values > rng.uniform(-0.2, 0.2)).astype(float))
            label = "level-set"
        out.append((f"{i:03d}:{label}", f))
    return out
