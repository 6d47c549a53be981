"""Hermite transforms, the Ornstein-Uhlenbeck semigroup and fractional powers.

A function on R^d is represented by its coefficients in the orthonormal
Hermite basis h_alpha = prod_j He_{alpha_j}/sqrt(alpha_j!).  These are
eigenfunctions of the Ornstein-Uhlenbeck operator with -Delta h_alpha =
|alpha| h_alpha, so every operator in this module is a diagonal multiplier.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from gaussfrac.gauss_core import (
    GridFunction,
    TensorGrid,
    gauss_hermite_rule,
    make_grid,
    normalized_hermite_table,
)

TRUNCATIONS = ("total", "tensor")


class QuadratureWarning(UserWarning):
    """A numerical quadrature did not reach its accuracy target."""


def check_s(s: float) -> float:
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return s


def trace_constant(s: float) -> float:
    """d_s = 2^(1-2s) Gamma(1-s) / Gamma(s), the positive energy/flux constant."""
    s = check_s(s)
    return 2.0 ** (1.0 - 2.0 * s) * math.gamma(1.0 - s) / math.gamma(s)


def signed_trace_constant(s: float) -> float:
    """2s Gamma(-s) / (4^s Gamma(s)); equals -d_s."""
    s = check_s(s)
    return 2.0 * s * math.gamma(-s) / (4.0**s * math.gamma(s))


@dataclass(frozen=True)
class FracParams:
    s: float

    def __post_init__(self):
        object.__setattr__(self, "s", check_s(self.s))

    @property
    def d_s(self) -> float:
        return trace_constant(self.s)


@lru_cache(maxsize=32)
def degree_array(dim: int, N: int) -> np.ndarray:
    """|alpha| on the (N+1)^dim coefficient block."""
    k = np.arange(N + 1)
    out = np.zeros((N + 1,) * dim, dtype=np.int64)
    for axis in range(dim):
        shape = [1] * dim
        shape[axis] = N + 1
        out = out + k.reshape(shape)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HermiteSeries:
    """Orthonormal Hermite coefficients on an (N+1)^d block.

    With ``truncation="total"`` only multi-indices with |alpha| <= N are
    kept (the rotation-invariant choice); ``"tensor"`` keeps the full block,
    which makes analysis on an (N+1)-node grid exactly invertible.
    """

    coeffs: np.ndarray
    truncation: str = "total"

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float)
        if a.ndim == 0 or len(set(a.shape)) != 1:
            raise ValueError("coefficients must form a cubic block")
        if self.truncation not in TRUNCATIONS:
            raise ValueError(f"unknown truncation {self.truncation!r}")
        if self.truncation == "total":
            a[degree_array(a.ndim, a.shape[0] - 1) > a.shape[0] - 1] = 0.0
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def degrees(self) -> np.ndarray:
        return degree_array(self.dim, self.degree)

    def with_coeffs(self, coeffs) -> "HermiteSeries":
        return HermiteSeries(coeffs, self.truncation)

    @classmethod
    def zeros(cls, dim: int, N: int, truncation: str = "total") -> "HermiteSeries":
        return cls(np.zeros((N + 1,) * dim), truncation)

    @classmethod
    def from_modes(cls, dim: int, N: int, modes: dict, truncation: str = "total") -> "HermiteSeries":
        a = np.zeros((N + 1,) * dim)
        for alpha, value in modes.items():
            alpha = (alpha,) if np.isscalar(alpha) else tuple(alpha)
            if len(alpha) != dim:
                raise ValueError(f"multi-index {alpha} has wrong length")
            a[alpha] = value
        return cls(a, truncation)

    def degree_energies(self) -> np.ndarray:
        """e_n = sum of a_alpha^2 over |alpha| = n."""
        deg = self.degrees.ravel()
        return np.bincount(deg, weights=self.coeffs.ravel() ** 2, minlength=self.dim * self.degree + 1)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs**2)))


@lru_cache(maxsize=64)
def _vandermonde(n: int, N: int) -> np.ndarray:
    v = normalized_hermite_table(N, gauss_hermite_rule(n).nodes)
    v.setflags(write=False)
    return v


def _apply_axes(arr: np.ndarray, mats: Iterable[np.ndarray]) -> np.ndarray:
    for axis, mat in enumerate(mats):
        arr = np.moveaxis(np.tensordot(mat, arr, axes=([1], [axis])), 0, axis)
    return arr


def analyze(f: GridFunction, N: int | None = None, truncation: str = "total") -> HermiteSeries:
    """Forward transform by Gauss-Hermite quadrature: a_alpha = int f h_alpha dgamma."""
    sizes = f.grid.shape
    if N is None:
        N = min(sizes) - 1
    if N < 0 or any(n < N + 1 for n in sizes):
        raise ValueError(f"degree cap {N} needs at least {N + 1} nodes per axis, grid has {sizes}")
    mats = [(_vandermonde(n, N) * rule.weights[:, None]).T for n, rule in zip(sizes, f.grid.rules)]
    return HermiteSeries(_apply_axes(f.values, mats), truncation)


def synthesize(c: HermiteSeries, grid: TensorGrid | None = None) -> GridFunction:
    """Evaluate the series at the nodes of ``grid``."""
    if grid is None:
        grid = make_grid(c.dim, max(c.degree + 1, 2))
    if grid.dim != c.dim:
        raise ValueError("grid and series dimensions differ")
    mats = [_vandermonde(n, c.degree) for n in grid.shape]
    return GridFunction(grid, _apply_axes(c.coeffs, mats))


def evaluate(c: HermiteSeries, points) -> np.ndarray:
    """Evaluate the series at arbitrary points of shape (P, d)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != c.dim:
        raise ValueError("points have the wrong dimension")
    tables = [normalized_hermite_table(c.degree, pts[:, j]) for j in range(c.dim)]
    acc = c.coeffs
    # contract the last axis first so the point index stays leading
    acc = np.einsum("pk,...k->p...", tables[-1], acc)
    for j in range(c.dim - 2, -1, -1):
        acc = np.einsum("pk,pk...->p...", tables[j], acc)
    return acc


def gradient(f: GridFunction, N: int | None = None) -> list[GridFunction]:
    """Spectral gradient using h_k' = sqrt(k) h_{k-1} (He_k' = k He_{k-1})."""
    c = analyze(f, N, truncation="tensor")
    out = []
    for axis in range(c.dim):
        k = np.arange(c.degree + 1)
        shifted = np.zeros_like(c.coeffs)
        src = [slice(None)] * c.dim
        dst = [slice(None)] * c.dim
        src[axis] = slice(1, None)
        dst[axis] = slice(0, -1)
        shape = [1] * c.dim
        shape[axis] = c.degree
        shifted[tuple(dst)] = c.coeffs[tuple(src)] * np.sqrt(k[1:]).reshape(shape)
        out.append(synthesize(HermiteSeries(shifted, "tensor"), f.grid))
    return out


def ou_semigroup(c: HermiteSeries, t: float) -> HermiteSeries:
    """e^{t Delta}: a_alpha -> exp(-|alpha| t) a_alpha."""
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    return c.with_coeffs(c.coeffs * np.exp(-t * c.degrees))


def ou_generator(c: HermiteSeries) -> HermiteSeries:
    """Delta_gamma applied to the series."""
    return c.with_coeffs(-c.degrees * c.coeffs)


def frac_laplacian(c: HermiteSeries, s: float) -> HermiteSeries:
    """(-Delta)^s as the multiplier |alpha|^s (the zero mode is annihilated)."""
    s = check_s(s)
    return c.with_coeffs(c.coeffs * c.degrees.astype(float) ** s)


def mehler_apply(fn: Callable[..., np.ndarray], t: float, points, n: int = 40) -> np.ndarray:
    """e^{t Delta} f at ``points`` via the Mehler formula and Gauss-Hermite quadrature.

    ``fn`` takes d coordinate arrays.  Independent of the spectral route.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts.shape[1]
    grid = make_grid(d, n)
    z = grid.points().reshape(-1, d)
    w = grid.weights.ravel()
    a, b = math.exp(-t), math.sqrt(-math.expm1(-2.0 * t))
    arg = a * pts[:, None, :] + b * z[None, :, :]
    vals = fn(*(arg[..., j] for j in range(d)))
    return np.asarray(vals) @ w


def _log_grid(n_points: int, window: tuple[float, float]):
    tau = np.linspace(window[0], window[1], n_points)
    wts = np.full(n_points, tau[1] - tau[0])
    wts[0] = wts[-1] = 0.5 * (tau[1] - tau[0])
    return tau, wts


def _power_by_time_integral(lam: np.ndarray, s: float, n_points: int, window) -> np.ndarray:
    """(1/Gamma(-s)) int_0^inf (e^{-lam t} - 1) t^{-1-s} dt with t = e^tau.

    Trapezoid in tau plus the exact tails outside the window and
    Euler-Maclaurin endpoint corrections, where the integrand behaves like
    -lam e^{(1-s)tau} (left) and -e^{-s tau} (right).
    """
    tau, wts = _log_grid(n_points, window)
    h = tau[1] - tau[0]
    lo, hi = window
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    for i, lv in np.ndenumerate(lam):
        if lv == 0.0:
            continue
        f = -np.expm1(-lv * np.exp(tau)) * -np.exp(-s * tau)
        total = float(np.dot(wts, f))
        # exact tails
        u = lv * math.exp(lo)
        left = 0.0
        term_fact = 1.0
        for k in range(1, 30):
            term_fact *= -u / k if k > 1 else -u
            add = term_fact / (k - s) * u ** (-s)
            left += add
            if abs(add) < 1e-18 * max(abs(left), 1e-300):
                break
        left *= lv**s
        right = -math.exp(-s * hi) / s
        # Euler-Maclaurin: trapezoid = integral + h^2/12 (f'(b)-f'(a)) - h^4/720 (f'''(b)-f'''(a))
        fa1 = -lv * (1 - s) * math.exp((1 - s) * lo)
        fa3 = -lv * (1 - s) ** 3 * math.exp((1 - s) * lo)
        fb1 = s * math.exp(-s * hi)
        fb3 = s**3 * math.exp(-s * hi)
        total -= h * h / 12.0 * (fb1 - fa1) - h**4 / 720.0 * (fb3 - fa3)
        out[i] = (total + left + right) / math.gamma(-s)
    return out


def fractional_multiplier_integral(lam, s: float, n_points: int = 2000, window=(-30.0, 30.0)):
    """Mode multiplier of (-Delta)^s from the semigroup time integral.

    Returns the value and a self-consistency error estimate (half vs full
    resolution).
    """
    s = check_s(s)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    full = _power_by_time_integral(lam, s, n_points, window)
    half = _power_by_time_integral(lam, s, (n_points + 1) // 2, window)
    err = np.abs(full - half) / np.maximum(np.abs(full), 1e-300)
    return full, err


def frac_laplacian_integral(
    c: HermiteSeries, s: float, n_points: int = 2000, window=(-30.0, 30.0), rtol: float = 1e-6
) -> HermiteSeries:
    """(-Delta)^s via (1/Gamma(-s)) int (e^{t Delta} - Id) dt / t^{1+s}, mode by mode."""
    lam = np.arange(c.dim * c.degree + 1, dtype=float)
    mult, err = fractional_multiplier_integral(lam, s, n_points, window)
    if np.any(err[1:] > rtol):
        warnings.warn(
            f"time quadrature self-check exceeds {rtol:g} (max {err[1:].max():.2e})",
            QuadratureWarning,
            stacklevel=2,
        )
    return c.with_coeffs(c.coeffs * mult[c.degrees])


def dirichlet_form(c: HermiteSeries) -> float:
    """int |grad u|^2 dgamma = sum |alpha| a_alpha^2."""
    return float(np.sum(c.degrees * c.coeffs**2))


def seminorm_spectral(c: HermiteSeries, s: float) -> float:
    """[u]_s = sqrt(d_s * sum |alpha|^s a_alpha^2)."""
    s = check_s(s)
    val = trace_constant(s) * np.sum(c.degrees.astype(float) ** s * c.coeffs**2)
    return float(np.sqrt(max(val, 0.0)))


def seminorm_from_energies(energies: np.ndarray, s: float) -> float:
    """Seminorm from per-degree energies e_n."""
    n = np.arange(len(energies), dtype=float)
    return float(np.sqrt(trace_constant(s) * np.sum(n**s * energies)))


def series_to_csv(c: HermiteSeries, target=None) -> str:
    """One row per stored coefficient: alpha_1..alpha_d, coefficient."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"alpha_{j + 1}" for j in range(c.dim)] + ["coefficient"])
    deg = c.degrees
    for alpha in np.ndindex(c.coeffs.shape):
        if c.truncation == "total" and deg[alpha] > c.degree:
            continue
        writer.writerow(list(alpha) + [repr(float(c.coeffs[alpha]))])
    text = buf.getvalue()
    if target is not None:
        Path(target).write_text(text, encoding="utf-8")
    return text


def series_from_csv(source: str, truncation: str = "total") -> HermiteSeries:
    """Inverse of :func:`series_to_csv`; ``source`` is CSV text or a path."""
    text = source if "\n" in source else Path(source).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    d = len(header) - 1
    idx = np.array([[int(v) for v in r[:d]] for r in body], dtype=int)
    N = int(idx.max()) if len(idx) else 0
    if truncation == "total" and len(idx):
        N = int(idx.sum(axis=1).max())
    a = np.zeros((N + 1,) * d)
    for r, alpha in zip(body, idx):
        a[tuple(alpha)] = float(r[d])
    return HermiteSeries(a, truncation)
