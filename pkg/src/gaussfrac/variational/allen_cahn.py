"""Nonlocal Allen-Cahn problem on Gaussian space:

    minimise [w]_s + int F(w) dgamma   subject to   int w dgamma = m

over Hermite series of total degree <= N.  The mass constraint fixes the
constant coefficient a_0 = m, so projected gradients are gradients in the
remaining coefficients.  Each random start runs L-BFGS (or
Barzilai-Borwein steps with a nonmonotone Armijo safeguard) and is
finished by exact-Hessian Newton steps.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from gaussfrac.gauss_core import GridFunction, gauss_hermite_rule, make_grid, normalized_hermite_table
from gaussfrac.ou_spectral import HermiteSeries, check_s, degree_array, synthesize, trace_constant


class ConvergenceWarning(UserWarning):
    """The optimiser stopped before reaching its residual target."""


@dataclass(frozen=True)
class Potential:
    """Pointwise potential F with derivative dF."""

    name: str
    F: Callable[[np.ndarray], np.ndarray]
    dF: Callable[[np.ndarray], np.ndarray]
    degree: int  # polynomial degree (quadrature exactness), 0 if not polynomial
    d2F: Callable[[np.ndarray], np.ndarray] | None = None


def _double_well(a: float) -> Potential:
    return Potential(
        "double-well" if a == 1.0 else f"double-well:{a:g}",
        lambda w: a * (1.0 - w * w) ** 2,
        lambda w: -4.0 * a * w * (1.0 - w * w),
        4,
        lambda w: a * (12.0 * w * w - 4.0),
    )


def parse_potential(spec: str | Potential) -> Potential:
    """Registry: "zero", "square", "double-well" or "double-well:<scale>"."""
    if isinstance(spec, Potential):
        return spec
    name, _, arg = str(spec).strip().partition(":")
    if name == "zero" and not arg:
        return Potential("zero", np.zeros_like, np.zeros_like, 0, np.zeros_like)
    if name == "square" and not arg:
        return Potential("square", lambda w: w * w, lambda w: 2.0 * w, 2, lambda w: np.full_like(w, 2.0))
    if name == "double-well":
        try:
            a = float(arg) if arg else 1.0
        except ValueError:
            raise ValueError(f"malformed potential {spec!r}") from None
        if not a > 0 or not math.isfinite(a):
            raise ValueError(f"double-well scale must be positive, got {arg!r}")
        return _double_well(a)
    raise ValueError(f"unknown potential {spec!r}; expected zero, square, double-well[:a]")


@dataclass
class AllenCahnResult:
    """Minimiser and diagnostics.  ``restart_energies`` lists every start."""

    series: HermiteSeries
    energy: float
    seminorm: float
    potential_energy: float
    residual: float
    converged: bool
    iterations: int
    restart_energies: list[float] = field(default_factory=list)
    direction: np.ndarray | None = None
    one_dim_residual: float = 0.0

    def values(self, grid=None) -> GridFunction:
        return synthesize(self.series, grid or make_grid(self.series.dim, max(2 * self.series.degree + 1, 2)))

    def profile_csv(self, n: int | None = None, target=None) -> str:
        """(node, value) of the minimiser on a one-dimensional rule."""
        if self.series.dim != 1:
            raise ValueError("profile CSV is for one-dimensional results")
        rule = gauss_hermite_rule(n or max(2 * self.series.degree + 1, 2))
        vals = normalized_hermite_table(self.series.degree, rule.nodes) @ self.series.coeffs
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["node", "value"])
        for x, v in zip(rule.nodes, vals):
            writer.writerow([repr(float(x)), repr(float(v))])
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text, encoding="utf-8")
        return text


class _Problem:
    """Energy, gradient and Hessian in the free coefficients (all but a_0)."""

    def __init__(self, pot: Potential, m: float, s: float, dim: int, N: int, nq: int | None):
        self.pot, self.m, self.s, self.dim, self.N = pot, m, s, dim, N
        need = (pot.degree * N) // 2 + 1 if pot.degree else 2 * N + 1
        self.nq = max(nq or 0, need, 2 * N + 1)
        deg = degree_array(dim, N)
        self.mask = deg <= N
        self.mask_free = self.mask.copy()
        self.mask_free[(0,) * dim] = False
        self.lam = deg[self.mask_free].astype(float)
        self.mult = trace_constant(s) * self.lam**s
        self.rule = gauss_hermite_rule(self.nq)
        self.table = normalized_hermite_table(N, self.rule.nodes)  # (nq, N+1)
        self.w = np.asarray(self.rule.weights)
        W = np.ones(())
        for _ in range(dim):
            W = np.multiply.outer(W, self.w)
        self._W = W
        self._B = None

    @property
    def size(self) -> int:
        return int(self.mask_free.sum())

    def full(self, x: np.ndarray) -> np.ndarray:
        a = np.zeros((self.N + 1,) * self.dim)
        a[(0,) * self.dim] = self.m
        a[self.mask_free] = x
        return a

    def _synth(self, a: np.ndarray) -> np.ndarray:
        out = a
        for axis in range(self.dim):
            out = np.moveaxis(np.tensordot(self.table, out, axes=([1], [axis])), 0, axis)
        return out

    def _adjoint(self, g: np.ndarray) -> np.ndarray:
        out = g
        for axis in range(self.dim):
            out = np.moveaxis(np.tensordot(self.table.T, out, axes=([1], [axis])), 0, axis)
        return out

    def evaluate(self, x: np.ndarray, grad: bool = True):
        sq = float(np.sum(self.mult * x * x))
        semi = math.sqrt(sq)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = self._synth(self.full(x))
            pot = float(np.sum(self._W * self.pot.F(vals)))
            if not grad:
                return semi + pot, semi, pot, None
            g_pot = self._adjoint(self._W * self.pot.dF(vals))[self.mask_free]
        g_semi = self.mult * x / semi if semi > 0 else np.zeros_like(x)
        return semi + pot, semi, pot, g_semi + g_pot

    def residual(self, x: np.ndarray) -> float:
        """First-order optimality residual; at x = 0 the distance from
        -grad(potential) to the seminorm subdifferential."""
        f, semi, _, g = self.evaluate(x)
        if semi > 0:
            return float(np.linalg.norm(g))
        dual = math.sqrt(float(np.sum(g * g / self.mult)))
        return max(dual - 1.0, 0.0) * float(np.sqrt(self.mult.max()))

    def hessian(self, x: np.ndarray) -> np.ndarray | None:
        """Exact Hessian, or None when the synthesis matrix would be too large."""
        if self._B is None:
            if self.nq**self.dim * self.size > 2e7:
                return None
            B = self.table
            for _ in range(self.dim - 1):
                B = np.kron(B, self.table)
            self._B = B[:, self.mask_free.ravel()]
        vals = self._B @ x + self.m
        curv = self._W.ravel() * self.pot.d2F(vals)
        H = self._B.T @ (curv[:, None] * self._B)
        semi = math.sqrt(float(np.sum(self.mult * x * x)))
        if semi > 0:
            Mx = self.mult * x
            H += np.diag(self.mult / semi) - np.outer(Mx, Mx) / semi**3
        return H


def _bb_minimise(prob: _Problem, x0: np.ndarray, tol: float, maxiter: int, memory: int = 10):
    """Projected-gradient descent with Barzilai-Borwein steps and a
    nonmonotone Armijo safeguard."""
    x = x0.copy()
    f, _, _, g = prob.evaluate(x)
    hist = [f]
    step = 1.0 / max(1.0, float(np.linalg.norm(g)))
    it = 0
    for it in range(1, maxiter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return x, f, it - 1
        fref = max(hist[-memory:])
        t = step
        while True:
            xn = x - t * g
            fn, _, _, gn = prob.evaluate(xn)
            if math.isfinite(fn) and np.all(np.isfinite(gn)) and fn <= fref - 1e-4 * t * gnorm * gnorm:
                break
            t *= 0.5
            if t < 1e-16 * max(1.0, step):
                return x, f, it
        sx, sg = xn - x, gn - g
        sy = float(sx @ sg)
        prev = t
        step = float(sx @ sx) / sy if sy > 0 else 10.0 * t
        # BB steps can jump far out along the quartic; cap growth per iteration
        step = min(max(step, 1e-10), 10.0 * prev, 1e10)
        x, f, g = xn, fn, gn
        hist.append(f)
    return x, f, it


def _lbfgs_minimise(prob: _Problem, x0: np.ndarray, tol: float, maxiter: int):
    def fg(x):
        f, _, _, g = prob.evaluate(x)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            return 1e300, np.zeros_like(x)
        return f, g

    res = optimize.minimize(fg, x0, jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "gtol": tol, "ftol": 1e-16, "maxcor": 30})
    return res.x, float(res.fun), int(res.nit)


def _newton_polish(prob: _Problem, x: np.ndarray, tol: float, steps: int = 20):
    """Damped Newton steps with the exact Hessian; only accepted while the
    energy does not increase beyond rounding."""
    f, semi, _, g = prob.evaluate(x)
    if semi == 0:
        return x, f
    for _ in range(steps):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            break
        H = prob.hessian(x)
        if H is None:
            break
        ev = np.linalg.eigvalsh(H)
        shift = max(0.0, 1e-10 - ev[0]) if ev[0] <= 0 else 0.0
        p = -np.linalg.solve(H + shift * np.eye(H.shape[0]), g)
        t = 1.0
        while t > 1e-6:
            xn = x + t * p
            fn, sn, _, gn = prob.evaluate(xn)
            if math.isfinite(fn) and sn > 0 and fn <= f + 1e-13 * max(1.0, abs(f)) and np.linalg.norm(gn) < gnorm:
                break
            t *= 0.5
        else:
            break
        x, f, g = xn, fn, gn
    return x, f


def _sign_profile(N: int) -> np.ndarray:
    """Hermite coefficients b_1..b_N of sign(t)."""
    b = np.zeros(N + 1)
    for n in range(1, N + 1, 2):
        k = (n - 1) // 2
        # h_{2k}(0) = (-1)^k sqrt((2k)!) / (2^k k!)
        h0 = (-1) ** k * math.exp(0.5 * gammaln(2 * k + 1) - gammaln(k + 1) - k * math.log(2.0))
        b[n] = 2.0 * h0 / math.sqrt(2.0 * math.pi * n)
    return b[1:]


def _lift(prob: _Problem, b: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Free coefficients of t -> sum_n b_n h_n(t) composed with <h, x>."""
    idx = np.argwhere(prob.mask_free)
    n = idx.sum(axis=1)
    logc = 0.5 * (gammaln(n + 1) - np.sum(gammaln(idx + 1), axis=1))
    hp = np.prod(np.where(idx == 0, 1.0, np.power(h[None, :], idx)), axis=1)
    return b[n - 1] * np.exp(logc) * hp


def _initial_point(prob: _Problem, rng: np.random.Generator, init: str, scale: float) -> np.ndarray:
    noise = 0.01 * scale * rng.standard_normal(prob.size) / (1.0 + prob.lam) ** 2
    if init == "random":
        return scale * rng.standard_normal(prob.size) / (1.0 + prob.lam) ** 2
    base = _sign_profile(prob.N) * np.exp(-0.3 * np.arange(1, prob.N + 1))
    amp = scale * rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
    if prob.dim == 1:
        return amp * base + noise
    h = rng.standard_normal(prob.dim)
    h /= np.linalg.norm(h)
    x = _lift(prob, amp * base, h)
    if init == "mixed":
        # genuinely d-dimensional seed: average of profiles along two directions
        h2 = rng.standard_normal(prob.dim)
        h2 -= (h2 @ h) * h
        h2 /= np.linalg.norm(h2)
        x = 0.5 * (x + _lift(prob, amp * base, h2))
    elif init != "profile":
        raise ValueError(f"unknown init {init!r}; expected profile, mixed, random")
    return x + noise


def _solve(F, m, s, dim, N, restarts, seed, tol, maxiter, nq, init_scale, init, method) -> AllenCahnResult:
    s = check_s(s)
    pot = parse_potential(F)
    if N < 1:
        raise ValueError("degree cap N must be at least 1")
    if method not in ("lbfgs", "bb"):
        raise ValueError(f"unknown method {method!r}; expected lbfgs or bb")
    prob = _Problem(pot, float(m), s, dim, N, nq)
    rng = np.random.default_rng(seed)
    best = None
    energies = []
    for _ in range(max(1, restarts)):
        x0 = _initial_point(prob, rng, init, init_scale)
        if method == "bb":
            x, f, its = _bb_minimise(prob, x0, tol, maxiter)
        else:
            x, f, its = _lbfgs_minimise(prob, x0, tol, maxiter)
        x, f = _newton_polish(prob, x, tol)
        energies.append(f)
        if best is None or f < best[1]:
            best = (x, f, its)
    x, f, its = best
    # the seminorm has a kink at constants, so w = m is compared explicitly
    zero = np.zeros_like(x)
    if prob.evaluate(zero, grad=False)[0] <= f:
        x = zero
    res = prob.residual(x)
    ok = res <= max(tol, 1e-6)
    if not ok:
        warnings.warn(f"Allen-Cahn optimiser stopped at residual {res:.2e}", ConvergenceWarning, stacklevel=3)
    total, semi, pot_e, _ = prob.evaluate(x, grad=False)
    series = HermiteSeries(prob.full(x), "total")
    return AllenCahnResult(series, total, semi, pot_e, res, ok, its, energies)


def allen_cahn_1d(F="double-well", m: float = 0.0, s: float = 0.25, N: int = 16, restarts: int = 10, seed: int = 0,
                  tol: float = 1e-8, maxiter: int = 20000, nq: int | None = None, init_scale: float = 1.0,
                  init: str = "profile", method: str = "lbfgs") -> AllenCahnResult:
    """Minimise [w]_s + int F(w) dgamma_1 with int w = m over degree <= N.

    Each restart starts from a randomly scaled, randomly signed and
    perturbed sigmoid profile (``init="random"`` uses small random
    coefficients instead), runs L-BFGS (or Barzilai-Borwein steps with
    ``method="bb"``) and finishes with exact-Hessian Newton steps.
    """
    return _solve(F, m, s, 1, N, restarts, seed, tol, maxiter, nq, init_scale, init, method)


def allen_cahn_nd(F="double-well", m: float = 0.0, s: float = 0.25, d: int = 2, N: int = 16, restarts: int = 10,
                  seed: int = 0, tol: float = 1e-8, maxiter: int = 20000, nq: int | None = None,
                  init_scale: float = 1.0, init: str = "profile", method: str = "lbfgs") -> AllenCahnResult:
    """d-dimensional problem over total degree <= N, plus the best-fit
    direction and one-dimensionality residual of the minimiser.

    ``init="profile"`` seeds each restart with a one-dimensional profile
    along a random direction; ``init="mixed"`` averages profiles along two
    orthogonal directions (a genuinely d-dimensional seed)."""
    from gaussfrac.variational.onedim import one_dim_residual

    if d not in (2, 3):
        raise ValueError("allen_cahn_nd supports d = 2 or 3")
    out = _solve(F, m, s, d, N, restarts, seed, tol, maxiter, nq, init_scale, init, method)
    h, r = one_dim_residual(out.values(make_grid(d, N + 1)))
    out.direction, out.one_dim_residual = h.vector, r
    return out
