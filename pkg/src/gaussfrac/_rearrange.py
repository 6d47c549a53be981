"""Compiled kernels for Gaussian rearrangement of interpolated lines.

A line of nodal values is read as a continuous interpolant p on
[x_0, x_{n-1}], extended by constants outside.  Inside the cells where
polynomial interpolation on Gauss-Hermite nodes is well conditioned the
interpolant is the global polynomial (barycentric form); in the far tails,
where its Lebesgue function explodes, it is piecewise linear.

p is split into monotone pieces, the Gaussian mass of {p > c} is a sum of
normal-CDF differences at level crossings, and the decreasing
rearrangement at tau is the level c with mass(c) = Phi(tau).  Masses near
0 and 1 are always formed from the small side so that tail targets keep
full relative precision.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_SQRT1_2 = 1.0 / math.sqrt(2.0)
LEBESGUE_LIMIT = 1e3


def barycentric_weights(x: np.ndarray) -> np.ndarray:
    """Weights 1/prod(x_j - x_k) computed in log space and rescaled."""
    n = x.size
    logs = np.empty(n)
    signs = np.empty(n)
    for j in range(n):
        diff = x[j] - np.delete(x, j)
        logs[j] = -np.sum(np.log(np.abs(diff)))
        signs[j] = (-1.0) ** np.count_nonzero(diff < 0)
    return signs * np.exp(logs - logs.max())


def polynomial_cells(x: np.ndarray, bw: np.ndarray, limit: float = LEBESGUE_LIMIT, probes: int = 9) -> np.ndarray:
    """Cells whose Lebesgue function stays below ``limit``."""
    ok = np.zeros(x.size - 1, dtype=np.bool_)
    for i in range(x.size - 1):
        ts = np.linspace(x[i], x[i + 1], probes)[1:-1]
        q = bw[None, :] / (ts[:, None] - x[None, :])
        leb = np.sum(np.abs(q), axis=1) / np.abs(np.sum(q, axis=1))
        ok[i] = leb.max() < limit
    return ok


@njit(cache=True)
def _phi(t):
    return 0.5 * math.erfc(-t * _SQRT1_2)


@njit(cache=True)
def _gmass(a, b):
    """Gaussian mass of (a, b), accurate in both tails."""
    if a >= 0.0:
        return _phi(-a) - _phi(-b)
    return _phi(b) - _phi(a)


@njit(cache=True)
def _interp(t, x, f, bw, poly):
    n = x.size
    if t <= x[0]:
        return f[0]
    if t >= x[n - 1]:
        return f[n - 1]
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if x[mid] <= t:
            lo = mid
        else:
            hi = mid
    if t == x[lo]:
        return f[lo]
    if not poly[lo]:
        r = (t - x[lo]) / (x[hi] - x[lo])
        return (1.0 - r) * f[lo] + r * f[hi]
    num = 0.0
    den = 0.0
    for j in range(n):
        q = bw[j] / (t - x[j])
        num += q * f[j]
        den += q
    return num / den


@njit(cache=True)
def _golden(lo, hi, x, f, bw, poly, sign):
    """Maximise sign * p on [lo, hi]."""
    g = 0.5 * (math.sqrt(5.0) - 1.0)
    a, b = lo, hi
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc = sign * _interp(c, x, f, bw, poly)
    fd = sign * _interp(d, x, f, bw, poly)
    for _ in range(100):
        if b - a < 1e-13 * (1.0 + abs(a)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = sign * _interp(c, x, f, bw, poly)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = sign * _interp(d, x, f, bw, poly)
    t = 0.5 * (a + b)
    return t, _interp(t, x, f, bw, poly)


@njit(cache=True)
def build_pieces(x, f, bw, poly, nsub):
    """Samples (ts, ps) and offsets of the monotone pieces of the interpolant.

    Piece k is ts[off[k]:off[k+1]+1]; local extrema between samples are
    refined by golden-section search and moved onto the breakpoint sample.
    """
    n = x.size
    m = (n - 1) * nsub + 1
    ts = np.empty(m)
    ps = np.empty(m)
    for i in range(n - 1):
        ts[i * nsub] = x[i]
        ps[i * nsub] = f[i]
        for k in range(1, nsub):
            t = x[i] + (x[i + 1] - x[i]) * k / nsub
            ts[i * nsub + k] = t
            if poly[i]:
                ps[i * nsub + k] = _interp(t, x, f, bw, poly)
            else:
                r = k / nsub
                ps[i * nsub + k] = (1.0 - r) * f[i] + r * f[i + 1]
    ts[m - 1] = x[n - 1]
    ps[m - 1] = f[n - 1]
    off = np.empty(m + 1, dtype=np.int64)
    npiece = 0
    off[0] = 0
    direction = 0
    for i in range(1, m):
        step = ps[i] - ps[i - 1]
        sgn = 1 if step > 0 else (-1 if step < 0 else 0)
        if sgn == 0:
            continue
        if direction == 0:
            direction = sgn
        elif sgn != direction:
            # sample i-1 is a discrete extremum; refine it inside (ts[i-2], ts[i])
            # (linear cells have their extrema on nodes already)
            cell = min((i - 1) // nsub, n - 2)
            left = cell - 1 if (i - 1) % nsub == 0 and cell > 0 else cell
            if poly[cell] or poly[left]:
                t, v = _golden(ts[i - 2], ts[i], x, f, bw, poly, float(direction))
                if direction * (v - ps[i - 1]) > 0:
                    ts[i - 1] = t
                    ps[i - 1] = v
            npiece += 1
            off[npiece] = i - 1
            direction = sgn
    npiece += 1
    off[npiece] = m - 1
    return ts, ps, off[: npiece + 1]


@njit(cache=True)
def _crossing(c, ts, ps, a, b, x, f, bw, poly):
    """Abscissa in [ts[a], ts[b]] where the monotone piece crosses level c."""
    inc = ps[b] > ps[a]
    lo, hi = a, b
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if (ps[mid] > c) == inc:
            hi = mid
        else:
            lo = mid
    tl, th = ts[lo], ts[hi]
    pl, ph = ps[lo] - c, ps[hi] - c
    if pl == 0.0:
        return tl
    if ph == 0.0:
        return th
    side = 0
    width = th - tl
    for it in range(160):
        if th - tl <= 1e-14 * (1.0 + abs(tl)):
            break
        t = tl - pl * (th - tl) / (ph - pl)
        if it % 3 == 2:
            if th - tl > 0.5 * width:
                t = 0.5 * (tl + th)
            width = th - tl
        if not (tl < t < th):
            t = 0.5 * (tl + th)
        pt = _interp(t, x, f, bw, poly) - c
        if pt == 0.0:
            return t
        if (pt > 0) == (ph > 0):
            th, ph = t, pt
            if side == -1:
                pl *= 0.5
            side = -1
        else:
            tl, pl = t, pt
            if side == 1:
                ph *= 0.5
            side = 1
    return tl - pl * (th - tl) / (ph - pl) if ph != pl else 0.5 * (tl + th)


@njit(cache=True)
def mass_above(c, ts, ps, off, x, f, bw, poly):
    """Gaussian mass of {p > c} (constant extension beyond the end nodes)."""
    total = 0.0
    last = ps.size - 1
    if ps[0] > c:
        total += _phi(ts[0])
    if ps[last] > c:
        total += _phi(-ts[last])
    for k in range(off.size - 1):
        a, b = off[k], off[k + 1]
        pa, pb = ps[a], ps[b]
        if c >= max(pa, pb):
            continue
        if c < min(pa, pb):
            total += _gmass(ts[a], ts[b])
            continue
        r = _crossing(c, ts, ps, a, b, x, f, bw, poly)
        if pb > pa:
            total += _gmass(r, ts[b])
        else:
            total += _gmass(ts[a], r)
    return total


@njit(cache=True)
def _line_mass(c, upper, ts, ps, nps, off, x, f, nf, bw, poly):
    """mass{p > c} if ``upper`` else mass{p < c} (via -p > -c)."""
    if upper:
        return mass_above(c, ts, ps, off, x, f, bw, poly)
    return mass_above(-c, ts, nps, off, x, nf, bw, poly)


@njit(cache=True)
def _solve_level(q, upper, lo, hi, L, ts_all, ps_all, nps_all, offs, noff, line_w, x, lines, nlines, bw, poly):
    """Level c with (weighted) mass{p > c} = q (upper) or mass{p < c} = q.

    Bracketed Illinois iteration on the monotone distribution function.
    """

    def g(c):
        m = 0.0
        for l in range(L):
            m += line_w[l] * _line_mass(
                c, upper, ts_all[l], ps_all[l], nps_all[l], offs[l, : noff[l]], x, lines[l], nlines[l], bw, poly
            )
        return m - q

    # g is decreasing in c for the upper mass, increasing for the lower one
    sgn = 1.0 if upper else -1.0
    gl = sgn * g(lo)
    gh = sgn * g(hi)
    if gl <= 0.0:
        return lo
    if gh > 0.0:
        return hi
    side = 0
    width = hi - lo
    for it in range(400):
        if hi - lo <= 1e-15 * (abs(lo) + abs(hi)) + 1e-300:
            break
        c = lo - gl * (hi - lo) / (gh - gl)
        # near-step distribution functions stall regula falsi: bisect unless
        # the bracket halved over the last three steps
        if it % 3 == 2:
            if hi - lo > 0.5 * width:
                c = 0.5 * (lo + hi)
            width = hi - lo
        if not (lo < c < hi):
            c = 0.5 * (lo + hi)
        gc = sgn * g(c)
        if gc > 0.0:
            lo, gl = c, gc
            if side == 1:
                gh *= 0.5
            side = 1
        else:
            hi, gh = c, gc
            if side == -1:
                gl *= 0.5
            side = -1
        if gc == 0.0:
            return c
    return 0.5 * (lo + hi)


@njit(cache=True)
def global_rearrangement(x, lines, line_w, bw, poly, targets, nsub):
    """S at ``targets`` for the weighted family of lines.

    For one line with unit weight this is the line's own rearrangement.
    """
    L = lines.shape[0]
    m = (x.size - 1) * nsub + 1
    ts_all = np.empty((L, m))
    ps_all = np.empty((L, m))
    nps_all = np.empty((L, m))
    nlines = -lines
    offs = np.zeros((L, m + 1), dtype=np.int64)
    noff = np.zeros(L, dtype=np.int64)
    cmin = np.inf
    cmax = -np.inf
    for l in range(L):
        ts, ps, off = build_pieces(x, lines[l], bw, poly, nsub)
        ts_all[l] = ts
        ps_all[l] = ps
        nps_all[l] = -ps
        noff[l] = off.size
        offs[l, : off.size] = off
        cmin = min(cmin, ps.min())
        cmax = max(cmax, ps.max())
    out = np.empty(targets.size)
    for j in range(targets.size):
        tau = targets[j]
        # S is nonincreasing, so the previous level bounds the next one
        hi = out[j - 1] if j > 0 and tau >= targets[j - 1] else cmax
        if tau <= 0.0:
            c = _solve_level(_phi(tau), True, cmin, hi, L, ts_all, ps_all, nps_all, offs, noff, line_w, x, lines, nlines, bw, poly)
        else:
            c = _solve_level(_phi(-tau), False, cmin, hi, L, ts_all, ps_all, nps_all, offs, noff, line_w, x, lines, nlines, bw, poly)
        out[j] = c
    return out


@njit(cache=True)
def rearrange_lines(x, lines, bw, poly, nsub):
    """Row-wise rearrangement of a (L, n) array of lines onto the same nodes.

    Monotone lines are returned unchanged (nonincreasing) or reflected
    (nondecreasing; the node set is symmetric).
    """
    n = x.size
    out = np.empty_like(lines)
    one = np.ones(1)
    for l in range(lines.shape[0]):
        f = lines[l]
        dec = True
        inc = True
        for i in range(n - 1):
            if f[i + 1] > f[i]:
                dec = False
            if f[i + 1] < f[i]:
                inc = False
        if dec:
            out[l] = f
        elif inc:
            out[l] = f[::-1]
        else:
            out[l] = global_rearrangement(x, lines[l : l + 1], one, bw, poly, x, nsub)
    return out
