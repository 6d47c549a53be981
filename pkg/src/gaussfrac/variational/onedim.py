"""One-dimensionality diagnostic: best direction h and the distance of u
from functions of <h, x>.

For a unit vector h the conditional expectation of h_alpha(x) given
<h, x> = t is sqrt(n! / alpha!) h^alpha h_n(t) with n = |alpha|, so the
best profile has coefficients b_n(h) = sum_{|alpha| = n} sqrt(n!/alpha!)
h^alpha a_alpha and the residual follows from Pythagoras.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from gaussfrac.ehrhard import DirectionSpec
from gaussfrac.gauss_core import GridFunction
from gaussfrac.ou_spectral import HermiteSeries, analyze


def _multinomial_sqrt(alpha: np.ndarray) -> np.ndarray:
    n = alpha.sum(axis=-1)
    return np.exp(0.5 * (gammaln(n + 1) - np.sum(gammaln(alpha + 1), axis=-1)))


def profile_coefficients(c: HermiteSeries, h) -> np.ndarray:
    """b_n, n = 0..dim*degree: Hermite coefficients of E[u | <h, x>]."""
    h = np.asarray(h, dtype=float)
    idx = np.indices(c.coeffs.shape).reshape(c.dim, -1).T
    a = c.coeffs.ravel()
    keep = a != 0.0
    idx, a = idx[keep], a[keep]
    # h^alpha with 0^0 = 1; a positive power of a zero component kills the term
    zero = np.any((idx > 0) & (h == 0.0), axis=1)
    logh = np.log(np.where(h == 0.0, 1.0, np.abs(h)))
    pw = (idx * logh).sum(axis=1)
    sign = np.prod(np.where((idx % 2 == 1) & (h < 0), -1.0, 1.0), axis=1)
    terms = np.where(zero, 0.0, sign * np.exp(pw + np.log(_multinomial_sqrt(idx))) * a)
    n = idx.sum(axis=1)
    return np.bincount(n, weights=terms, minlength=c.dim * c.degree + 1)


def _captured(c: HermiteSeries, h) -> float:
    b = profile_coefficients(c, h)
    return float(np.sum(b[1:] ** 2))


def _angles_to_vector(th: np.ndarray) -> np.ndarray:
    if th.size == 1:
        return np.array([math.cos(th[0]), math.sin(th[0])])
    a, b = th
    return np.array([math.sin(a) * math.cos(b), math.sin(a) * math.sin(b), math.cos(a)])


def _vector_to_angles(h: np.ndarray) -> np.ndarray:
    if h.size == 2:
        return np.array([math.atan2(h[1], h[0])])
    return np.array([math.acos(np.clip(h[2], -1, 1)), math.atan2(h[1], h[0])])


def one_dim_residual(u: GridFunction, net: int = 32) -> tuple[DirectionSpec, float]:
    """Best direction h and ||u - E[u | <h,x>]|| / ||u - mean u||.

    Scans a direction net, then refines the best candidate by a local
    optimiser over the angles.  Constant u gives residual 0 and h = e_1.
    """
    if u.dim < 2:
        raise ValueError("one_dim_residual needs d >= 2")
    if u.dim > 3:
        raise ValueError("direction search is implemented for d <= 3")
    c = analyze(u, truncation="tensor")
    total = float(np.sum(c.coeffs**2)) - float(c.coeffs.flat[0] ** 2)
    if total <= 1e-28 * max(1.0, float(np.sum(c.coeffs**2))):
        return DirectionSpec.axis(u.dim, 0), 0.0
    if u.dim == 2:
        cands = [np.array([math.cos(t), math.sin(t)]) for t in np.pi * np.arange(net) / net]
    else:
        # Fibonacci points on the upper half sphere (h and -h are equivalent)
        k = np.arange(4 * net) + 0.5
        z = k / (4 * net)
        phi = np.pi * (1.0 + 5.0**0.5) * k
        r = np.sqrt(1.0 - z * z)
        cands = list(np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1))
    cands += [np.eye(u.dim)[j] for j in range(u.dim)]
    scores = [_captured(c, h) for h in cands]
    best = cands[int(np.argmax(scores))]
    res = optimize.minimize(
        lambda th: -_captured(c, _angles_to_vector(th)),
        _vector_to_angles(best),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-16 * total, "maxiter": 2000},
    )
    h = _angles_to_vector(res.x)
    cap = _captured(c, h)
    if cap < max(scores):
        h, cap = best, max(scores)
    h = h / np.linalg.norm(h)
    resid = math.sqrt(max(total - cap, 0.0) / total)
    return DirectionSpec(h), resid
