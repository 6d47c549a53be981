"""Test sets in R^d: halfspaces, strips, balls, quadrants, perturbed halfspaces
and raw grid indicators.

Besides the Gaussian mass and the classical Gaussian perimeter, the
analytic families expose the decorrelation function

    G(t) = gamma x gamma { X in E, Y notin E },  Y = e^{-t} X + sqrt(1 - e^{-2t}) Z,

i.e. ||chi_E||^2 - <chi_E, T_t chi_E>, which drives the semigroup route
for the fractional perimeter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special, stats

from gaussfrac.gauss_core import GridFunction, TensorGrid, gauss_hermite_rule, integrate as grid_integrate

MASS_TOL = 1e-8


def _unit(h, dim: int | None = None) -> np.ndarray:
    v = np.array(h, dtype=float).ravel()
    if dim is not None and v.size != dim:
        raise ValueError(f"expected a vector of length {dim}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError("normal vectors must have unit length")
    v.setflags(write=False)
    return v


def _perp(h: np.ndarray) -> np.ndarray:
    if h.size != 2:
        raise NotImplementedError("sections are planar")
    return np.array([-h[1], h[0]])


def _axis(dim: int, j: int) -> np.ndarray:
    e = np.zeros(dim)
    e[j] = 1.0
    return e


def _rho_sigma(t: float) -> tuple[float, float]:
    return math.exp(-t), math.sqrt(-math.expm1(-2.0 * t))


def bivariate_upper(a, b, rho: float):
    """P(X < a, Y > b) for standard normals with correlation rho in (-1, 1).

    Owen's T representation; accurate when rho -> 1 (small times) because
    it never forms the difference of two bivariate CDFs.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sig = math.sqrt((1.0 - rho) * (1.0 + rho))
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = special.owens_t(a, (b - rho * a) / (a * sig))
        tb = special.owens_t(b, (a - rho * b) / (b * sig))
    # a or b equal to zero: the limits of T(h, x/h) are +-1/4
    ta = np.where(a == 0.0, np.where(b - rho * a > 0, 0.25, -0.25), ta)
    tb = np.where(b == 0.0, np.where(a - rho * b > 0, 0.25, -0.25), tb)
    beta = np.where((a * b < 0) | ((a * b == 0) & (a + b < 0)), 0.5, 0.0)
    out = 0.5 * special.ndtr(a) - 0.5 * special.ndtr(b) + ta + tb + beta
    return np.where((a == 0.0) & (b == 0.0), 0.25 - math.asin(rho) / (2.0 * math.pi), out)


@dataclass(frozen=True)
class SetSpec:
    """Base class; subclasses define mass, indicator and (optionally) G(t)."""

    dim: int

    free: str = field(default="", init=False, repr=False)
    name: str = field(default="set", init=False, repr=False)

    def gaussian_mass(self) -> float:
        raise NotImplementedError

    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def indicator(self, grid: TensorGrid) -> GridFunction:
        if grid.dim != self.dim:
            raise ValueError("grid and set dimensions differ")
        return GridFunction(grid, self.contains(grid.points()).astype(float))

    def gaussian_perimeter(self) -> float:
        """Classical Gaussian perimeter (Minkowski content)."""
        raise NotImplementedError

    def decorrelation(self, t: float) -> float:
        """G(t); raises NotImplementedError when no closed form is wired in."""
        raise NotImplementedError

    def sections(self):
        """Planar section data (e, f, intervals, breaks) for d = 2.

        In the orthonormal frame (e, f) the set is {<e,x> in I(<f,x>)},
        where ``intervals(v)`` returns arrays (lo, hi) of shape (k, v.size)
        and ``breaks`` lists the values of <f,x> where I is not smooth.
        """
        raise NotImplementedError

    @property
    def has_decorrelation(self) -> bool:
        return False

    @property
    def parameter(self) -> float:
        return float(getattr(self, self.free))

    def with_parameter(self, value: float) -> "SetSpec":
        return replace(self, **{self.free: float(value)})

    def describe(self) -> dict:
        out = {"family": self.name, "dim": self.dim}
        for k, v in self.__dict__.items():
            if k in ("dim", "free", "name"):
                continue
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


@dataclass(frozen=True)
class Halfspace(SetSpec):
    """{x : <h, x> < c}."""

    h: np.ndarray = None
    c: float = 0.0
    free: str = field(default="c", init=False, repr=False)
    name: str = field(default="halfspace", init=False, repr=False)

    def __post_init__(self):
        h = _axis(self.dim, 0) if self.h is None else self.h
        object.__setattr__(self, "h", _unit(h, self.dim))

    def gaussian_mass(self) -> float:
        return float(special.ndtr(self.c))

    def contains(self, points):
        return points @ self.h < self.c

    def gaussian_perimeter(self) -> float:
        return float(stats.norm.pdf(self.c))

    @property
    def has_decorrelation(self) -> bool:
        return True

    def decorrelation(self, t: float) -> float:
        return float(2.0 * special.owens_t(self.c, math.sqrt(-math.expm1(-t) / (1.0 + math.exp(-t)))))


    def sections(self):
        def intervals(v):
            return np.full((1, v.size), -np.inf), np.full((1, v.size), self.c)

        return self.h, _perp(self.h), intervals, ()

@dataclass(frozen=True)
class Strip(SetSpec):
    """{x : |<h, x>| < a}."""

    h: np.ndarray = None
    a: float = 1.0
    free: str = field(default="a", init=False, repr=False)
    name: str = field(default="strip", init=False, repr=False)

    def __post_init__(self):
        h = _axis(self.dim, 0) if self.h is None else self.h
        object.__setattr__(self, "h", _unit(h, self.dim))
        if self.a < 0:
            raise ValueError("strip half-width must be nonnegative")

    def gaussian_mass(self) -> float:
        return float(2.0 * special.ndtr(self.a) - 1.0)

    def contains(self, points):
        return np.abs(points @ self.h) < self.a

    def gaussian_perimeter(self) -> float:
        return float(2.0 * stats.norm.pdf(self.a))

    @property
    def has_decorrelation(self) -> bool:
        return True

    def decorrelation(self, t: float) -> float:
        rho, _ = _rho_sigma(t)
        a = self.a
        # P(|X| < a, |Y| > a) = 2 [P(X < a, Y > a) - P(X < -a, Y > a)]
        return float(2.0 * (bivariate_upper(a, a, rho) - bivariate_upper(-a, a, rho)))


    def sections(self):
        def intervals(v):
            return np.full((1, v.size), -self.a), np.full((1, v.size), self.a)

        return self.h, _perp(self.h), intervals, ()

@dataclass(frozen=True)
class Ball(SetSpec):
    """{x : |x - center| < r}; the decorrelation is wired for centred balls in d = 2."""

    r: float = 1.0
    center: np.ndarray = None
    free: str = field(default="r", init=False, repr=False)
    name: str = field(default="ball", init=False, repr=False)

    def __post_init__(self):
        c = np.zeros(self.dim) if self.center is None else np.array(self.center, dtype=float).ravel()
        if c.size != self.dim:
            raise ValueError("center has the wrong dimension")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if self.r <= 0:
            raise ValueError("radius must be positive")

    @property
    def centered(self) -> bool:
        return not np.any(self.center)

    def gaussian_mass(self) -> float:
        nc = float(self.center @ self.center)
        if nc == 0.0:
            if self.dim == 2:
                return float(-math.expm1(-0.5 * self.r**2))
            return float(special.gammainc(0.5 * self.dim, 0.5 * self.r**2))
        return float(stats.ncx2.cdf(self.r**2, self.dim, nc))

    def contains(self, points):
        return np.sum((points - self.center) ** 2, axis=-1) < self.r**2

    def gaussian_perimeter(self) -> float:
        if not self.centered:
            raise NotImplementedError("perimeter wired for centred balls only")
        d, r = self.dim, self.r
        area = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2) * r ** (d - 1)
        return float(area * math.exp(-0.5 * r * r) / (2.0 * math.pi) ** (d / 2))

    @property
    def has_decorrelation(self) -> bool:
        return self.centered and self.dim == 2

    def decorrelation(self, t: float) -> float:
        if not self.has_decorrelation:
            raise NotImplementedError("decorrelation wired for centred balls in d = 2")
        rho, sig = _rho_sigma(t)
        r = self.r
        # radial law of |X| has density q e^{-q^2/2}; given |X| = q,
        # P(|Y| > r) is the Marcum function Q_1(rho q / sig, r / sig)
        width = min(r, 12.0 * sig)
        x, w = _gl(24)
        total = 0.0
        for lo, hi in ((0.0, r - width), (r - width, r)):
            if hi <= lo:
                continue
            q = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            tail = marcum_q1(rho * q / sig, r / sig)
            total += 0.5 * (hi - lo) * np.sum(w * q * np.exp(-0.5 * q * q) * tail)
        return float(total)


    def sections(self):
        if self.dim != 2:
            raise NotImplementedError("sections are planar")
        e, f = _axis(2, 0), _axis(2, 1)
        c1, c2 = self.center

        def intervals(v):
            w = np.sqrt(np.maximum(self.r**2 - (v - c2) ** 2, 0.0))
            return (c1 - w)[None], (c1 + w)[None]

        return e, f, intervals, (c2 - self.r, c2 + self.r)

@dataclass(frozen=True)
class Quadrant(SetSpec):
    """{x : <h1, x> < c1, <h2, x> < c2} with orthonormal h1, h2.

    The free parameter shifts both thresholds: (c1, c2) = (c + delta1, c + delta2).
    """

    h1: np.ndarray = None
    h2: np.ndarray = None
    c: float = 0.0
    delta1: float = 0.0
    delta2: float = 0.0
    free: str = field(default="c", init=False, repr=False)
    name: str = field(default="quadrant", init=False, repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("a quadrant needs d >= 2")
        h1 = _unit(_axis(self.dim, 0) if self.h1 is None else self.h1, self.dim)
        h2 = _unit(_axis(self.dim, 1) if self.h2 is None else self.h2, self.dim)
        if abs(h1 @ h2) > 1e-12:
            raise ValueError("quadrant normals must be orthogonal")
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2", h2)

    @property
    def thresholds(self) -> tuple[float, float]:
        return self.c + self.delta1, self.c + self.delta2

    def gaussian_mass(self) -> float:
        c1, c2 = self.thresholds
        return float(special.ndtr(c1) * special.ndtr(c2))

    def contains(self, points):
        c1, c2 = self.thresholds
        return (points @ self.h1 < c1) & (points @ self.h2 < c2)

    def gaussian_perimeter(self) -> float:
        c1, c2 = self.thresholds
        return float(stats.norm.pdf(c1) * special.ndtr(c2) + stats.norm.pdf(c2) * special.ndtr(c1))

    @property
    def has_decorrelation(self) -> bool:
        return True

    def decorrelation(self, t: float) -> float:
        rho, _ = _rho_sigma(t)
        c1, c2 = self.thresholds
        p1, p2 = special.ndtr(c1), special.ndtr(c2)
        d1, d2 = bivariate_upper(c1, c1, rho), bivariate_upper(c2, c2, rho)
        return float(p1 * d2 + p2 * d1 - d1 * d2)


    def sections(self):
        if self.dim != 2:
            raise NotImplementedError("sections are planar")
        c1, c2 = self.thresholds

        def intervals(v):
            hi = np.where(v < c2, c1, -np.inf)
            return np.full((1, v.size), -np.inf), hi[None]

        return self.h1, self.h2, intervals, (c2,)

@dataclass(frozen=True)
class PerturbedHalfspace(SetSpec):
    """{x : <h, x> < c + eps sin(k <g, x>)} with orthonormal h, g (d >= 2)."""

    c: float = 0.0
    eps: float = 0.1
    k: float = 2.0
    h: np.ndarray = None
    g: np.ndarray = None
    free: str = field(default="c", init=False, repr=False)
    name: str = field(default="perturbed_halfspace", init=False, repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("a perturbed halfspace needs d >= 2")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        h = _unit(_axis(self.dim, 0) if self.h is None else self.h, self.dim)
        g = _unit(_axis(self.dim, 1) if self.g is None else self.g, self.dim)
        if abs(h @ g) > 1e-12:
            raise ValueError("h and g must be orthogonal")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    def _edge(self, x2):
        return self.c + self.eps * np.sin(self.k * x2)

    def gaussian_mass(self) -> float:
        x, w = _gh(200)
        return float(np.sum(w * special.ndtr(self._edge(x))))

    def contains(self, points):
        return points @ self.h < self._edge(points @ self.g)

    def gaussian_perimeter(self) -> float:
        ek = self.eps * self.k

        def f(t):
            return stats.norm.pdf(self._edge(t)) * stats.norm.pdf(t) * math.sqrt(1.0 + (ek * math.cos(self.k * t)) ** 2)

        return float(integrate.quad(f, -np.inf, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)[0])

    @property
    def has_decorrelation(self) -> bool:
        return True

    def decorrelation(self, t: float) -> float:
        rho, sig = _rho_sigma(t)
        x, w = _gh(48)
        X2, Z2 = np.meshgrid(x, x, indexing="ij")
        Y2 = rho * X2 + sig * Z2
        vals = bivariate_upper(self._edge(X2), self._edge(Y2), rho)
        return float(np.sum(np.outer(w, w) * vals))


    def sections(self):
        if self.dim != 2:
            raise NotImplementedError("sections are planar")

        def intervals(v):
            return np.full((1, v.size), -np.inf), self._edge(v)[None]

        return self.h, self.g, intervals, ()

@dataclass(frozen=True)
class RawIndicator(SetSpec):
    """A set given only through its nodal indicator on a grid."""

    values: GridFunction = None
    name: str = field(default="raw", init=False, repr=False)

    def __post_init__(self):
        if self.values is None:
            raise ValueError("a raw indicator needs grid values")
        v = np.asarray(self.values.values)
        if not np.all((v == 0.0) | (v == 1.0)):
            raise ValueError("raw indicator values must be 0 or 1")
        if self.values.dim != self.dim:
            raise ValueError("grid and set dimensions differ")

    def gaussian_mass(self) -> float:
        return grid_integrate(self.values)

    def indicator(self, grid: TensorGrid) -> GridFunction:
        if grid is not None and grid.shape != self.values.grid.shape:
            raise ValueError("raw indicators live on their own grid")
        return self.values

    def contains(self, points):
        raise NotImplementedError("raw indicators are only known at grid nodes")

    @property
    def parameter(self) -> float:
        raise NotImplementedError("raw indicators have no free parameter")

    def with_parameter(self, value: float) -> "SetSpec":
        raise NotImplementedError("raw indicators have no free parameter")

    def describe(self) -> dict:
        return {"family": self.name, "dim": self.dim, "grid": list(self.values.grid.shape)}


def marcum_q1(a, b, order: int = 96, span: float = 40.0):
    """Marcum Q_1(a, b) = int_b^inf x exp(-(x^2 + a^2)/2) I_0(a x) dx.

    Written with the scaled Bessel function the integrand is
    x exp(-(x - a)^2 / 2) i0e(a x), a bump of unit width at x ~ a, which is
    integrated by Gauss-Legendre over [max(b, a - span), a + span].
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    lo = np.maximum(b, a - span)
    hi = np.maximum(a + span, lo)
    x, w = _gl(order)
    pts = 0.5 * (hi - lo)[:, None] * x + 0.5 * (hi + lo)[:, None]
    f = pts * np.exp(-0.5 * (pts - a[:, None]) ** 2) * special.i0e(a[:, None] * pts)
    return 0.5 * (hi - lo) * (f @ w)


@lru_cache(maxsize=8)
def _gh(n: int):
    r = gauss_hermite_rule(n)
    return np.asarray(r.nodes), np.asarray(r.weights)


@lru_cache(maxsize=8)
def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


def gaussian_mass(E: SetSpec) -> float:
    return E.gaussian_mass()


def calibrate_mass(E: SetSpec, m: float, bracket: tuple[float, float] | None = None, tol: float = MASS_TOL) -> SetSpec:
    """Root-find the free parameter of ``E`` so that its Gaussian mass is m."""
    if not 0.0 < m < 1.0:
        raise ValueError("target mass must lie in (0, 1)")
    if isinstance(E, RawIndicator):
        raise ValueError("raw indicators cannot be calibrated")
    if isinstance(E, Halfspace):
        out = E.with_parameter(special.ndtri(m))
    elif isinstance(E, Strip):
        out = E.with_parameter(special.ndtri(0.5 * (1.0 + m)))
    elif isinstance(E, Ball) and E.centered and E.dim == 2:
        out = E.with_parameter(math.sqrt(-2.0 * math.log1p(-m)))
    else:
        lo, hi = bracket or ((1e-6, 12.0) if isinstance(E, Ball) else (-12.0, 12.0))

        def gap(p):
            return E.with_parameter(p).gaussian_mass() - m

        glo, ghi = gap(lo), gap(hi)
        if glo * ghi > 0:
            raise ValueError(f"mass {m} is not bracketed by the {E.name} parameter range {lo, hi}")
        p = optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        out = E.with_parameter(p)
    err = abs(out.gaussian_mass() - m)
    if err > tol:
        raise ValueError(f"calibration missed the mass by {err:.3g}")
    return out
