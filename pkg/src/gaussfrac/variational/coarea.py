"""Coarea functional V_s(u) = int P_s({u > t}) dt for nodal functions."""

from __future__ import annotations

import numpy as np
from scipy.integrate import trapezoid

from gaussfrac.gauss_core import GridFunction
from gaussfrac.ou_spectral import _vandermonde, check_s, degree_array, trace_constant

_BATCH = 256


def _indicator_seminorms(u: GridFunction, levels: np.ndarray, s: float) -> np.ndarray:
    """P_s({u > c}) for every c in ``levels`` (nodal indicators, tensor transform)."""
    shape = u.grid.shape
    mats = []
    for rule in u.grid.rules:
        n = rule.nodes.size
        mats.append(_vandermonde(n, n - 1).T * np.asarray(rule.weights)[None, :])
    deg = degree_array(u.dim, shape[0] - 1) if len(set(shape)) == 1 else None
    if deg is None:
        grids = np.meshgrid(*[np.arange(n) for n in shape], indexing="ij")
        deg = sum(grids)
    mult = trace_constant(s) * deg.astype(float) ** s
    out = np.empty(levels.size)
    vals = np.asarray(u.values)
    for start in range(0, levels.size, _BATCH):
        lv = levels[start : start + _BATCH]
        ind = (vals[None, ...] > lv.reshape((-1,) + (1,) * u.dim)).astype(float)
        a = ind
        for axis, mat in enumerate(mats):
            a = np.moveaxis(np.tensordot(mat, a, axes=([1], [axis + 1])), 0, axis + 1)
        out[start : start + lv.size] = np.sqrt(np.sum(mult * a * a, axis=tuple(range(1, u.dim + 1))))
    return out


def coarea_Vs(u: GridFunction, s: float, levels=None) -> float:
    """V_s(u) for a nodal function.

    With ``levels=None`` the level integral is exact for the nodal model:
    {u > t} only changes at the distinct nodal values v_0 < ... < v_K, so
    V_s = sum_k (v_{k+1} - v_k) P_s({u > v_k}).  An integer or an array
    of levels selects the trapezoid rule on a uniform (or given) grid
    spanning [min u, max u] instead.
    """
    s = check_s(s)
    vals = np.asarray(u.values, dtype=float)
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        return 0.0
    if levels is None:
        v = np.unique(vals)
        per = _indicator_seminorms(u, v[:-1], s)
        return float(np.sum(np.diff(v) * per))
    t = np.linspace(lo, hi, int(levels)) if np.isscalar(levels) else np.sort(np.asarray(levels, dtype=float))
    if t.size < 2:
        raise ValueError("need at least two levels")
    per = _indicator_seminorms(u, t, s)
    return float(trapezoid(per, t))
