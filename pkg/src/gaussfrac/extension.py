"""The weighted extension problem on R^d x (0, inf).

For u on Gaussian space the seminorm [u]_s^2 is the least value of

    J(v) = int int (|d_y v|^2 + |grad_x v|^2) y^{1-2s} dgamma(x) dy

over fields v with v(., 0) = u.  Mode by mode the minimiser is
a_alpha h_alpha(x) psi_s(sqrt(|alpha|) y).  This module provides that closed
form, the semigroup (subordination) formula, a direct nodal minimiser, the
energies J1 = int |d_y v|^2 and J2 = int |grad_x v|^2, and the weighted
normal trace.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate as sp_integrate

from gaussfrac.gauss_core import GridFunction, TensorGrid, gauss_hermite_rule, make_grid
from gaussfrac.ou_spectral import (
    HermiteSeries,
    QuadratureWarning,
    _apply_axes,
    _log_grid,
    _vandermonde,
    check_s,
)
from gaussfrac.special import bessel_profile, bessel_profile_derivative


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped before meeting its tolerance."""


class ExtrapolationWarning(UserWarning):
    """The boundary-flux extrapolation is unstable."""


@dataclass(frozen=True)
class YGrid:
    """Graded nodes 0 = y_0 < ... < y_M carrying the weight y^(1-2s)."""

    nodes: np.ndarray
    s: float

    def __post_init__(self):
        y = np.array(self.nodes, dtype=float)
        check_s(self.s)
        if y.ndim != 1 or y.size < 3 or y[0] != 0.0 or np.any(np.diff(y) <= 0):
            raise ValueError("y nodes must start at 0 and increase strictly")
        y.setflags(write=False)
        object.__setattr__(self, "nodes", y)

    @classmethod
    def graded(cls, s: float, M: int = 400, y_max: float = 20.0, power: float | None = None) -> "YGrid":
        """y_k = y_max (k/M)^p, by default p = max(2, 1/(2s)).

        Elements are linear in y^{2s}; p >= 2 keeps them fine where the
        high modes live, p >= 1/(2s) keeps z = y^{2s} at least uniform.
        """
        s = check_s(s)
        if power is None:
            power = max(2.0, 1.0 / (2.0 * s))
        k = np.arange(M + 1) / M
        return cls(y_max * k**power, s)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def y_max(self) -> float:
        return float(self.nodes[-1])


def _element_moments(a: float, b: float, w: float) -> tuple[float, float, float]:
    """P1 mass entries (M00, M01, M11) on [a, b] for the weight z^w, w > -1."""
    h = b - a
    if a < 2.0 * h:
        # exact moments of z^w about the origin
        def mom(k):
            return (b ** (w + k + 1) - a ** (w + k + 1)) / (w + k + 1)

        m0, m1, m2 = mom(0), mom(1), mom(2)
        m00 = (b * b * m0 - 2 * b * m1 + m2) / h**2
        m01 = (-a * b * m0 + (a + b) * m1 - m2) / h**2
        m11 = (a * a * m0 - 2 * a * m1 + m2) / h**2
        return m00, m01, m11
    xi, wi = _gl8()
    wt = h * wi * (a + h * xi) ** w
    return float(np.sum(wt * (1 - xi) ** 2)), float(np.sum(wt * (1 - xi) * xi)), float(np.sum(wt * xi * xi))


@lru_cache(maxsize=1)
def _gl8():
    x, w = np.polynomial.legendre.leggauss(8)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class YOperators:
    """Element stiffness and tridiagonal mass for elements linear in z = y^{2s}.

    With z = y^{2s} the weighted integrals become
    int |d_y v|^2 y^{1-2s} dy = 2s int |d_z v|^2 dz and
    int v^2 y^{1-2s} dy = (1/2s) int v^2 z^{(1-2s)/s} dz,
    so the stiffness is unweighted and the leading y^{2s} behaviour of the
    extension is represented exactly.
    """

    k_elem: np.ndarray
    m_diag: np.ndarray
    m_off: np.ndarray

    @property
    def s_diag(self) -> np.ndarray:
        d = np.zeros(self.k_elem.size + 1)
        d[:-1] += self.k_elem
        d[1:] += self.k_elem
        return d

    @property
    def s_off(self) -> np.ndarray:
        return -self.k_elem


_OPERATOR_CACHE: dict = {}


def y_operators(yg: YGrid) -> YOperators:
    key = (yg.s, yg.nodes.tobytes())
    if key in _OPERATOR_CACHE:
        return _OPERATOR_CACHE[key]
    s = yg.s
    z = yg.nodes ** (2.0 * s)
    q = (1.0 - 2.0 * s) / s
    n = z.size
    md, mo = np.zeros(n), np.zeros(n - 1)
    for e in range(n - 1):
        m00, m01, m11 = _element_moments(z[e], z[e + 1], q)
        md[e] += m00
        md[e + 1] += m11
        mo[e] += m01
    ops = YOperators(2.0 * s / np.diff(z), md / (2.0 * s), mo / (2.0 * s))
    if len(_OPERATOR_CACHE) > 16:
        _OPERATOR_CACHE.clear()
    _OPERATOR_CACHE[key] = ops
    return ops


def _tri_apply(diag: np.ndarray, off: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Symmetric tridiagonal matrix applied along the last axis."""
    out = v * diag
    out[..., :-1] += off * v[..., 1:]
    out[..., 1:] += off * v[..., :-1]
    return out


def _stiff_apply(k_elem: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Stiffness in difference form (no cancellation for tiny elements)."""
    flux = k_elem * np.diff(v, axis=-1)
    out = np.zeros_like(v)
    out[..., :-1] -= flux
    out[..., 1:] += flux
    return out


def _stiff_quadratic(k_elem: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sum(k_elem * np.diff(v, axis=-1) ** 2, axis=-1)


def _mass_quadratic(ops: YOperators, v: np.ndarray) -> np.ndarray:
    return np.sum(v * _tri_apply(ops.m_diag, ops.m_off, v), axis=-1)


@dataclass(frozen=True)
class ExtensionField:
    """Nodal values v(x_i, y_k) on ``base`` x ``ygrid``; last axis is y."""

    base: TensorGrid
    ygrid: YGrid
    values: np.ndarray
    info: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.base.shape + (self.ygrid.size,):
            raise ValueError("values do not match base grid x y-grid")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def s(self) -> float:
        return self.ygrid.s

    def trace(self) -> GridFunction:
        return GridFunction(self.base, self.values[..., 0])

    def slice_at(self, k: int) -> GridFunction:
        return GridFunction(self.base, self.values[..., k])

    def to_csv(self, target=None) -> str:
        """CSV rows (node, y, value); node is the multi-index joined by ':'."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["node", "y", "value"])
        y = self.ygrid.nodes
        for idx in np.ndindex(self.base.shape):
            label = ":".join(str(i) for i in idx)
            row = self.values[idx]
            for k in range(y.size):
                writer.writerow([label, repr(float(y[k])), repr(float(row[k]))])
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text, encoding="utf-8")
        return text


# ---------------------------------------------------------------- closed forms


@lru_cache(maxsize=64)
def profile_energy_split(s: float) -> tuple[float, float]:
    """(int psi'^2 r^{1-2s} dr, int psi^2 r^{1-2s} dr); their sum is d_s."""
    s = check_s(s)
    w = 1.0 - 2.0 * s

    def f1(r):
        return bessel_profile_derivative(s, r) ** 2 * r**w

    def f2(r):
        return bessel_profile(s, r) ** 2 * r**w

    out = []
    for fn in (f1, f2):
        # split at 1 so the algebraic endpoint singularity stays isolated
        a, _ = sp_integrate.quad(fn, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
        b, _ = sp_integrate.quad(fn, 1.0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
        out.append(a + b)
    return out[0], out[1]


def mode_energy(lam: float, s: float) -> float:
    """Energy of the optimal extension of a unit mode with eigenvalue lam."""
    i1, i2 = profile_energy_split(s)
    return float(lam) ** s * (i1 + i2) if lam > 0 else 0.0


def spectral_extension_energies(c: HermiteSeries, s: float) -> tuple[float, float]:
    """Exact (J1, J2) of the closed-form extension of ``c``."""
    i1, i2 = profile_energy_split(s)
    lam = c.degrees.astype(float)
    weight = np.sum(lam**s * c.coeffs**2)
    return float(i1 * weight), float(i2 * weight)


def _profile_table(s: float, max_degree: int, y: np.ndarray) -> np.ndarray:
    lam = np.arange(max_degree + 1, dtype=float)
    r = np.sqrt(lam)[:, None] * y[None, :]
    return bessel_profile(s, r)


def extend_spectral(c: HermiteSeries, s: float, yg: YGrid, grid: TensorGrid | None = None) -> ExtensionField:
    """Closed-form extension v = sum a_alpha h_alpha(x) psi_s(sqrt|alpha| y)."""
    s = check_s(s)
    if grid is None:
        grid = make_grid(c.dim, max(c.degree + 1, 2))
    table = _profile_table(s, c.dim * c.degree, yg.nodes)
    coeffs = c.coeffs[..., None] * table[c.degrees]
    mats = [_vandermonde(n, c.degree) for n in grid.shape]
    vals = _apply_axes(coeffs, mats)
    return ExtensionField(grid, yg, vals)


def subordination_factor(lam, s: float, y: float, n_points: int = 2000, window=(-30.0, 30.0)) -> np.ndarray:
    """(1/Gamma(s)) lam^s int_0^inf e^{-lam t} e^{-y^2/4t} t^{s-1} dt, mode by mode.

    The zero mode is not reached by the formula (it annihilates constants)
    and is returned as 1, i.e. constants extend as constants.
    """
    s = check_s(s)
    if y <= 0:
        raise ValueError("height y must be positive")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    tau, wts = _log_grid(n_points, window)
    t = np.exp(tau)
    out = np.ones_like(lam)
    for i, lv in np.ndenumerate(lam):
        if lv == 0.0:
            continue
        expo = -lv * t - y * y / (4.0 * t) + s * tau
        f = np.exp(expo)
        peak = f.max()
        if max(f[0], f[-1]) > 1e-14 * peak:
            warnings.warn("subordination integrand not decayed at the window edge", QuadratureWarning, stacklevel=2)
        out[i] = lv**s * float(np.dot(wts, f)) / math.gamma(s)
    return out


def extend_subordination(c: HermiteSeries, s: float, y: float, **quad) -> HermiteSeries:
    """Coefficients of the extension at height y from the semigroup formula."""
    lam = np.arange(c.dim * c.degree + 1)
    fac = subordination_factor(lam, s, y, **quad)
    return c.with_coeffs(c.coeffs * fac[c.degrees])


# ------------------------------------------------------------------ energies


@lru_cache(maxsize=32)
def _diff_matrix(n: int) -> np.ndarray:
    """Nodal spectral differentiation on the n-point Gauss-Hermite rule."""
    rule = gauss_hermite_rule(n)
    V = _vandermonde(n, n - 1)
    dV = np.zeros_like(V)
    k = np.arange(1, n)
    dV[:, 1:] = V[:, :-1] * np.sqrt(k)
    D = dV @ (V.T * rule.weights)
    D.setflags(write=False)
    return D


def _apply_along(mat: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(mat, arr, axes=([1], [axis])), 0, axis)


def energy_J1(v: ExtensionField) -> float:
    """int |d_y v|^2 y^{1-2s}, exact for the field interpolated linearly in y^{2s}."""
    ops = y_operators(v.ygrid)
    per_node = _stiff_quadratic(ops.k_elem, v.values)
    return float(np.sum(v.base.weights * per_node))


def energy_J2(v: ExtensionField) -> float:
    """int |grad_x v|^2 y^{1-2s}, spectral gradient per y-slice."""
    ops = y_operators(v.ygrid)
    total = 0.0
    w = v.base.weights
    for axis, n in enumerate(v.base.shape):
        g = _apply_along(_diff_matrix(n), v.values, axis)
        total += float(np.sum(w * _mass_quadratic(ops, g)))
    return total


def extension_energy(v: ExtensionField) -> float:
    return energy_J1(v) + energy_J2(v)


# ----------------------------------------------------------------- minimiser


class _NodalOperator:
    """Hessian of J1 + J2 in nodal variables (half of it, to be precise)."""

    def __init__(self, base: TensorGrid, yg: YGrid):
        self.base = base
        self.ops = y_operators(yg)
        self.w = base.weights[..., None]
        self.D = [_diff_matrix(n) for n in base.shape]
        # diagonal of the x-stiffness sum_j D_j^T W D_j
        kdiag = np.zeros(base.shape)
        for axis, (n, rule) in enumerate(zip(base.shape, base.rules)):
            Kj = self.D[axis].T @ (rule.weights[:, None] * self.D[axis])
            shape = [1] * base.dim
            shape[axis] = n
            kdiag = kdiag + np.diag(Kj).reshape(shape) * base.weights / rule.weights.reshape(shape)
        self.kdiag = kdiag[..., None]

    def apply(self, v: np.ndarray) -> np.ndarray:
        ops = self.ops
        out = self.w * _stiff_apply(ops.k_elem, v)
        for axis, D in enumerate(self.D):
            g = _apply_along(D, v, axis)
            g = self.w * _tri_apply(ops.m_diag, ops.m_off, g)
            out += _apply_along(D.T, g, axis)
        return out

    def line_preconditioner(self):
        """Exact inverse of W (x) S + diag(K) (x) M on the unknown nodes k >= 1."""
        ops = self.ops
        a = self.w * ops.s_diag[1:] + self.kdiag * ops.m_diag[1:]
        b = self.w * ops.s_off[1:] + self.kdiag * ops.m_off[1:]
        n = a.shape[-1]
        # Thomas factorisation, vectorised over x nodes
        cp = np.zeros_like(b)
        den = np.zeros_like(a)
        den[..., 0] = a[..., 0]
        for k in range(n - 1):
            cp[..., k] = b[..., k] / den[..., k]
            den[..., k + 1] = a[..., k + 1] - b[..., k] * cp[..., k]

        def solve(r: np.ndarray) -> np.ndarray:
            z = np.empty_like(r)
            z[..., 0] = r[..., 0] / den[..., 0]
            for k in range(1, n):
                z[..., k] = (r[..., k] - b[..., k - 1] * z[..., k - 1]) / den[..., k]
            for k in range(n - 2, -1, -1):
                z[..., k] -= cp[..., k] * z[..., k + 1]
            return z

        return solve


def minimize_extension(
    boundary: GridFunction,
    s: float,
    yg: YGrid | None = None,
    tol: float = 1e-10,
    maxiter: int = 5000,
    initial: ExtensionField | None = None,
) -> ExtensionField:
    """Minimise J1 + J2 over nodal fields with trace ``boundary``.

    Preconditioned conjugate gradients in nodal space; the preconditioner
    is exact in y and diagonal in x.  Stops when the relative energy
    decrement falls below ``tol`` on two consecutive steps.  Convergence
    data are returned in ``field.info``.
    """
    s = check_s(s)
    if yg is None:
        yg = YGrid.graded(s)
    op = _NodalOperator(boundary.grid, yg)
    u = np.asarray(boundary.values, dtype=float)
    full = np.zeros(boundary.grid.shape + (yg.size,))
    full[..., 0] = u
    if initial is not None:
        full[..., 1:] = initial.values[..., 1:]
    else:
        full[..., 1:] = u[..., None] * np.exp(-yg.nodes[1:])

    def energy(f):
        return float(np.sum(f * op.apply(f)))

    precond = op.line_preconditioner()
    r = -op.apply(full)[..., 1:]
    z = precond(r)
    p = z.copy()
    rz = float(np.sum(r * z))
    e_old = energy(full)
    rnorm0 = math.sqrt(float(np.sum(r * r))) or 1.0
    small_steps = 0
    converged = rz == 0.0
    it = 0
    history = [e_old]
    while not converged and it < maxiter:
        it += 1
        pf = np.zeros_like(full)
        pf[..., 1:] = p
        Ap = op.apply(pf)[..., 1:]
        pAp = float(np.sum(p * Ap))
        if pAp <= 0:
            break
        alpha = rz / pAp
        full[..., 1:] += alpha * p
        r -= alpha * Ap
        # energy decrement of an exact line search is alpha * rz
        e_new = e_old - alpha * rz
        history.append(e_new)
        if alpha * rz <= tol * max(abs(e_new), 1e-300):
            small_steps += 1
        else:
            small_steps = 0
        e_old = e_new
        if small_steps >= 2 or math.sqrt(float(np.sum(r * r))) <= 1e-14 * rnorm0:
            converged = True
            break
        z = precond(r)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    residual = math.sqrt(float(np.sum(r * r))) / rnorm0
    if not converged:
        warnings.warn(
            f"extension minimiser stopped after {it} iterations, relative residual {residual:.2e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    info = {"iterations": it, "converged": converged, "residual": residual, "energy": energy(full)}
    return ExtensionField(boundary.grid, yg, full, info=info)


# ---------------------------------------------------------------- trace flux


def _flux_fit(v: np.ndarray, y: np.ndarray, s: float, n_fit: int) -> np.ndarray:
    """Coefficient of y^{2s} in a least-squares fit of v(y) - v(0) near 0."""
    yy = y[1 : n_fit + 1]
    powers = [2 * s, 2.0, 2 * s + 2, 4.0, 2 * s + 4][: max(2, min(5, n_fit - 3))]
    basis = np.stack([yy**p for p in powers], axis=1)
    scale = np.max(np.abs(basis), axis=0)
    rhs = (v[..., 1 : n_fit + 1] - v[..., :1]).reshape(-1, n_fit).T
    coef, *_ = np.linalg.lstsq(basis / scale, rhs, rcond=None)
    return (coef[0] / scale[0]).reshape(v.shape[:-1])


def trace_flux(v: ExtensionField, s: float | None = None, n_fit: int = 8, rtol: float = 1e-2) -> GridFunction:
    """-lim y^{1-2s} d_y v as y -> 0, from the expansion v = u + A y^{2s} + ...

    The flux is -2s A.  A second fit on fewer nodes serves as a stability
    check; disagreement beyond ``rtol`` raises an ExtrapolationWarning.
    """
    s = v.s if s is None else check_s(s)
    y = v.ygrid.nodes
    if y.size < n_fit + 1:
        raise ValueError("y-grid too short for the flux fit")
    a_full = _flux_fit(v.values, y, s, n_fit)
    a_short = _flux_fit(v.values, y, s, n_fit - 2)
    scale = max(float(np.sqrt(np.sum(v.base.weights * a_full**2))), 1e-300)
    gap = float(np.sqrt(np.sum(v.base.weights * (a_full - a_short) ** 2))) / scale
    if gap > rtol:
        warnings.warn(f"flux extrapolation unstable (relative change {gap:.2e})", ExtrapolationWarning, stacklevel=2)
    return GridFunction(v.base, -2.0 * s * a_full)
