import math

import numpy as np
import pytest
from scipy.special import ndtr, ndtri

from gaussfrac.ehrhard import (
    DirectionSpec,
    FlowDiagnostics,
    FlowRecord,
    Profile1D,
    decreasing_rearrangement,
    direction_net,
    l2_norm,
    rearrange_interval,
    rotate_grid,
    symmetrization_flow,
    symmetrize_direction,
)
from gaussfrac.gauss_core import GridFunction, gauss_hermite_rule, make_grid, std_normal_cdf
from gaussfrac.ou_spectral import HermiteSeries, analyze, seminorm_spectral, synthesize


def _band(seed, dim=2, N=6, n=24):
    rng = np.random.default_rng(seed)
    deg = np.add.outer(np.arange(N + 1), np.arange(N + 1))
    a = rng.standard_normal((N + 1,) * dim) / (1.0 + deg) ** 2
    return synthesize(HermiteSeries(a), make_grid(dim, n))


def _level_masses(f, levels):
    return np.array([np.sum(f.grid.weights * (f.values > c)) for c in levels])


def test_direction_spec():
    assert DirectionSpec.axis(3, 1, -1).as_axis() == (1, -1)
    assert DirectionSpec.from_angle(0.3).as_axis() is None
    with pytest.raises(ValueError):
        DirectionSpec(np.array([1.0, 1.0]))
    net = direction_net(2, 8)
    assert len(net) == 8 and all(abs(np.linalg.norm(h.vector) - 1) < 1e-15 for h in net)
    assert len(direction_net(3)) == 6


def test_rearrange_interval_examples():
    assert rearrange_interval(0.5) == 0.0
    a = 0.8
    assert rearrange_interval(1.0 - std_normal_cdf(a)) == pytest.approx(-a, abs=1e-12)
    assert rearrange_interval(0.8413447) == pytest.approx(1.0, abs=1e-5)
    assert rearrange_interval(0.0) == -math.inf and rearrange_interval(1.0) == math.inf


@pytest.mark.parametrize("kind", ["smooth", "discrete"])
def test_monotone_lines_unchanged(kind):
    g = make_grid(2, 16)
    f = GridFunction.from_callable(g, lambda a, b: -np.tanh(a) + 0.3 * b**2)
    assert np.allclose(symmetrize_direction(f, [1.0, 0.0], kind).values, f.values, atol=1e-13)


def test_indicator_reflected():
    g = make_grid(2, 20)
    a = 0.4
    up = GridFunction.from_callable(g, lambda x, y: (x > a).astype(float) + 0 * y)
    down = GridFunction.from_callable(g, lambda x, y: (x < -a).astype(float) + 0 * y)
    assert np.array_equal(symmetrize_direction(up, [1.0, 0.0], "auto").values, down.values)


@pytest.mark.parametrize("n", [20, 40])
def test_square_rearranged_exactly(n):
    g = make_grid(1, n)
    x = g.points()[..., 0]
    u = GridFunction(g, x**2)
    v = symmetrize_direction(u, [1.0]).values
    # gamma(x^2 > S(t)) = Phi(t)  =>  S(t) = Phi^{-1}(Phi(t)/2)^2
    exact = ndtri(ndtr(x) / 2) ** 2
    inner = np.abs(x) < 4
    assert np.max(np.abs(v - exact)[inner]) < 1e-10
    assert np.all(np.diff(v) <= 1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_discrete_rule_equimeasurable(seed):
    f = _band(seed)
    levels = np.quantile(f.values, np.linspace(0.05, 0.95, 25))
    for axis in ([1.0, 0.0], [0.0, -1.0]):
        g = symmetrize_direction(f, axis, "discrete")
        # line-wise the discrete rule can only shift a node mass across Phi(x_j)
        assert np.max(np.abs(_level_masses(g, levels) - _level_masses(f, levels))) < 0.05
        assert l2_norm(g) == pytest.approx(l2_norm(f), rel=0.05)


@pytest.mark.parametrize("seed", range(4))
def test_smooth_rule_contracts_seminorm(seed):
    f = _band(seed)
    for axis in ([1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]):
        g = symmetrize_direction(f, axis, "smooth")
        assert seminorm_spectral(analyze(g, truncation="tensor"), 0.3) <= (
            seminorm_spectral(analyze(f, truncation="tensor"), 0.3) + 1e-6
        )
        assert l2_norm(g) == pytest.approx(l2_norm(f), rel=1e-3)


def test_symmetrize_rejects_bad_direction():
    f = _band(0)
    with pytest.raises(ValueError):
        symmetrize_direction(f, [1.0, 1.0])
    with pytest.raises(ValueError):
        symmetrize_direction(f, [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        symmetrize_direction(f, [1.0, 0.0], kind="bogus")


def test_decreasing_rearrangement_examples():
    g = make_grid(2, 16)
    f = GridFunction.from_callable(g, lambda a, b: -a + 0 * b)
    S = decreasing_rearrangement(f)
    assert np.allclose(S.values, -S.rule.nodes, atol=1e-12)
    c = decreasing_rearrangement(GridFunction(g, np.full(g.shape, 1.5)))
    assert np.allclose(c.values, 1.5)


def test_decreasing_rearrangement_chi_square():
    g = make_grid(2, 32)
    f = GridFunction.from_callable(g, lambda a, b: a * a + b * b)
    S = decreasing_rearrangement(f, 64)
    tau = S.rule.nodes
    inner = np.abs(tau) < 4
    # closed form gamma(|x|^2 > q) = exp(-q/2), up to quadrature of the kinked line masses
    assert np.max(np.abs(std_normal_cdf(tau) - np.exp(-S.values / 2))[inner]) < 0.05
    # exact against the same quadrature of the exact line masses
    b, w = g.rules[1].nodes, g.rules[1].weights
    for q, t in zip(S.values[inner], tau[inner]):
        line = np.where(b * b < q, 2 * std_normal_cdf(-np.sqrt(np.maximum(q - b * b, 0.0))), 1.0)
        assert abs(w @ line - std_normal_cdf(t)) < 1e-9


def test_profile_validation():
    rule = gauss_hermite_rule(4)
    with pytest.raises(ValueError):
        Profile1D(rule, np.array([0.0, 1.0, 2.0, 3.0]))
    p = Profile1D(rule, -rule.nodes)
    assert p.seminorm(0.5) == pytest.approx(1.0, rel=1e-12)


def test_rotate_grid_examples():
    g = make_grid(2, 24)
    f = GridFunction.from_callable(g, lambda a, b: a + 0 * b)
    assert rotate_grid(f, np.eye(2)) is f
    Q = np.array([[0.0, -1.0], [1.0, 0.0]])
    pts = g.points()
    inner = np.all(np.abs(pts) < 3, axis=-1)
    assert np.max(np.abs(rotate_grid(f, Q).values - pts[..., 1])[inner]) < 1e-6
    radial = GridFunction.from_callable(g, lambda a, b: np.exp(-(a * a + b * b) / 4))
    th = 0.7
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    assert np.max(np.abs(rotate_grid(radial, R, "spectral").values - radial.values)[inner]) < 1e-4
    with pytest.raises(ValueError):
        rotate_grid(f, np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_flow_fixed_point_one_dimensional():
    g = make_grid(2, 16)
    f = GridFunction.from_callable(g, lambda a, b: -np.arctan(a) + 0 * b)
    out, diag = symmetrization_flow(f, [DirectionSpec.axis(2, 0), DirectionSpec.axis(2, 1)], iters=4)
    assert np.allclose(out.values, f.values, atol=1e-12)
    assert not diag.violations(1e-10)


def test_flow_tilted_halfspace():
    # {x . h < c} is already a half-line on every axis line: the flow keeps it
    g = make_grid(2, 32)
    h = np.array([math.cos(0.6), math.sin(0.6)])
    f = GridFunction(g, (g.points() @ h < 0.3).astype(float))
    axes = [DirectionSpec.axis(2, 0), DirectionSpec.axis(2, 1)]
    out, diag = symmetrization_flow(f, axes, iters=6, kind="auto")
    assert np.sqrt(np.sum(g.weights * (out.values - f.values) ** 2)) < 1e-3
    assert np.ptp(diag.seminorms()) < 1e-12


def test_flow_random_band_limited():
    f = _band(11, n=20)
    axes = [DirectionSpec.axis(2, j, sg) for sg in (1, -1) for j in range(2)]
    out, diag = symmetrization_flow(f, axes, iters=40, s=0.25)
    assert len(diag.records) == 41
    sem = diag.seminorms()
    # the first sweep is a genuine contraction; later axis steps only re-sort
    # the interpolation error of the smooth rule
    assert sem[1] <= sem[0] + 1e-8 and sem[2] <= sem[1] + 1e-8
    assert not diag.violations()
    assert sem[-1] < sem[0]
    l2 = np.array([r.l2 for r in diag.records])
    assert np.max(np.abs(l2 - l2[0])) / l2[0] < 2e-3
    text = diag.to_csv()
    assert text.splitlines()[0] == "step,direction,l2_norm,seminorm,residual_1d"
    assert len(text.splitlines()) == 42


def test_flow_diagnostics_violations():
    d = FlowDiagnostics(0.25)
    for i, v in enumerate([1.0, 0.9, 0.95, 0.95]):
        d.records.append(FlowRecord(i, 0, 1.0, v, 0.0))
    assert d.violations(1e-8) == [2]
    assert d.violations(0.1) == []
