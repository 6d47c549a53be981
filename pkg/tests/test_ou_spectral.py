import math

import numpy as np
import pytest

from gaussfrac.gauss_core import GridFunction, hermite, integrate, make_grid
from gaussfrac.ou_spectral import (
    FracParams,
    HermiteSeries,
    analyze,
    dirichlet_form,
    evaluate,
    frac_laplacian,
    frac_laplacian_integral,
    fractional_multiplier_integral,
    gradient,
    mehler_apply,
    ou_generator,
    ou_semigroup,
    seminorm_spectral,
    series_from_csv,
    series_to_csv,
    signed_trace_constant,
    synthesize,
    trace_constant,
)


def _random_series(dim, N, seed, truncation="total"):
    rng = np.random.default_rng(seed)
    return HermiteSeries(rng.standard_normal((N + 1,) * dim), truncation)


def test_trace_constant_values():
    assert trace_constant(0.5) == pytest.approx(1.0, abs=1e-15)
    assert trace_constant(0.3) == pytest.approx(2**0.4 * math.gamma(0.7) / math.gamma(0.3), rel=1e-14)
    assert trace_constant(0.3) == pytest.approx(0.5726, abs=1e-4)
    for s in (0.1, 0.3, 0.5, 0.9):
        assert signed_trace_constant(s) == pytest.approx(-trace_constant(s), rel=1e-13)
    assert FracParams(0.5).d_s == pytest.approx(1.0)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.2])
def test_rejects_bad_s(s):
    with pytest.raises(ValueError):
        FracParams(s)
    with pytest.raises(ValueError):
        frac_laplacian(HermiteSeries.zeros(1, 3), s)


def test_analyze_examples():
    g = make_grid(2, 10)
    x1 = GridFunction.from_callable(g, lambda a, b: a + 0 * b)
    c = analyze(x1, 6)
    expected = np.zeros_like(c.coeffs)
    expected[1, 0] = 1.0
    assert np.max(np.abs(c.coeffs - expected)) < 1e-13
    one = analyze(GridFunction(g, np.ones(g.shape)), 6)
    assert one.coeffs[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert np.sum(np.abs(one.coeffs)) == pytest.approx(1.0, abs=1e-13)
    with pytest.raises(ValueError):
        analyze(x1, 10)


def test_analyze_halfline_indicator_closed_form():
    # a_n = -He_{n-1}(0) g(0) / sqrt(n!) for the continuum indicator; an even
    # node count resolves it to quadrature accuracy at low degree
    g = make_grid(1, 400)
    f = GridFunction.from_callable(g, lambda x: (x < 0).astype(float))
    c = analyze(f, 12)
    g0 = 1.0 / math.sqrt(2 * math.pi)
    assert c.coeffs[0] == pytest.approx(0.5, abs=1e-12)
    for n in range(1, 13):
        exact = -hermite(n - 1, 0.0) * g0 / math.sqrt(math.factorial(n))
        assert c.coeffs[n] == pytest.approx(exact, abs=2e-2 / math.sqrt(n))


@pytest.mark.parametrize("dim,truncation", [(1, "total"), (2, "total"), (2, "tensor"), (3, "total")])
def test_analyze_synthesize_roundtrip(dim, truncation):
    c = _random_series(dim, 6, dim, truncation)
    back = analyze(synthesize(c, make_grid(dim, 9)), 6, truncation)
    assert np.max(np.abs(back.coeffs - c.coeffs)) < 1e-11


def test_parseval_and_evaluate():
    c = _random_series(2, 7, 1)
    f = synthesize(c, make_grid(2, 12))
    assert integrate(GridFunction(f.grid, f.values**2)) == pytest.approx(c.l2_norm() ** 2, rel=1e-12)
    pts = f.grid.points().reshape(-1, 2)[::7]
    assert np.allclose(evaluate(c, pts), f.values.reshape(-1)[::7], atol=1e-11)


def test_eigenrelation_by_finite_differences():
    # -Delta_gamma h = |alpha| h with Delta_gamma = Laplacian - x . grad
    c = HermiteSeries.from_modes(2, 5, {(2, 1): 1.0})
    x = np.array([[0.3, -0.7], [1.1, 0.4], [-0.5, 1.6]])
    eps = 1e-4
    lap = np.zeros(len(x))
    drift = np.zeros(len(x))
    f0 = evaluate(c, x)
    for j in range(2):
        e = np.zeros(2)
        e[j] = eps
        fp, fm = evaluate(c, x + e), evaluate(c, x - e)
        lap += (fp - 2 * f0 + fm) / eps**2
        drift += x[:, j] * (fp - fm) / (2 * eps)
    assert np.allclose(-(lap - drift), 3.0 * f0, atol=1e-5)
    assert np.allclose(ou_generator(c).coeffs, -c.degrees * c.coeffs)


def test_semigroup_examples_and_law():
    c = _random_series(2, 6, 2)
    assert np.array_equal(ou_semigroup(c, 0.0).coeffs, c.coeffs)
    const = HermiteSeries.from_modes(2, 4, {(0, 0): 3.0})
    assert np.array_equal(ou_semigroup(const, 2.5).coeffs, const.coeffs)
    mode = HermiteSeries.from_modes(2, 4, {(1, 1): 1.0})
    assert ou_semigroup(mode, 0.5).coeffs[1, 1] == pytest.approx(math.exp(-1.0), rel=1e-15)
    composed = ou_semigroup(ou_semigroup(c, 0.3), 0.45).coeffs
    assert np.allclose(composed, ou_semigroup(c, 0.75).coeffs, rtol=1e-14, atol=0)
    assert ou_semigroup(c, 1.7).coeffs.flat[0] == c.coeffs.flat[0]
    with pytest.raises(ValueError):
        ou_semigroup(c, -0.1)


def test_semigroup_matches_mehler():
    c = _random_series(2, 5, 3)
    t = 0.4

    def fn(a, b):
        pts = np.stack([a.ravel(), b.ravel()], axis=1)
        return evaluate(c, pts).reshape(a.shape)

    pts = np.random.default_rng(0).uniform(-2, 2, (20, 2))
    got = mehler_apply(fn, t, pts, n=20)
    assert np.max(np.abs(got - evaluate(ou_semigroup(c, t), pts))) < 1e-6
    # the single mode example via Mehler: factor e^{-1}
    h2 = lambda a, b: (a * a - 1) / math.sqrt(2) + 0 * b
    x = np.array([[0.8, 0.0]])
    assert mehler_apply(h2, 0.5, x)[0] / h2(0.8, 0.0) == pytest.approx(math.exp(-1.0), rel=1e-10)


def test_frac_laplacian_examples():
    const = HermiteSeries.from_modes(1, 4, {0: 2.0})
    assert np.all(frac_laplacian(const, 0.4).coeffs == 0.0)
    m2 = HermiteSeries.from_modes(2, 3, {(1, 1): 1.0})
    assert frac_laplacian(m2, 0.5).coeffs[1, 1] == pytest.approx(math.sqrt(2.0), rel=1e-15)
    m3 = HermiteSeries.from_modes(1, 3, {3: 1.0})
    assert frac_laplacian(m3, 0.999999).coeffs[3] == pytest.approx(3.0, rel=1e-5)


@pytest.mark.parametrize("lam,s,expected", [(0.0, 0.5, 0.0), (1.0, 0.5, 1.0), (4.0, 0.3, 4**0.3)])
def test_multiplier_integral_examples(lam, s, expected):
    val, err = fractional_multiplier_integral([lam], s)
    assert abs(val[0] - expected) <= 1e-6 * max(1.0, expected)


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_multiplier_vs_integral(s):
    c = _random_series(2, 8, 4)
    a = frac_laplacian(c, s).coeffs
    b = frac_laplacian_integral(c, s).coeffs
    assert np.allclose(a, b, rtol=1e-6, atol=0)


def test_seminorm_examples():
    assert seminorm_spectral(HermiteSeries.from_modes(1, 3, {0: 5.0}), 0.3) == 0.0
    assert seminorm_spectral(HermiteSeries.from_modes(2, 3, {(1, 0): 1.0}), 0.5) == pytest.approx(1.0, rel=1e-15)
    val = seminorm_spectral(HermiteSeries.from_modes(2, 3, {(1, 1): 1.0}), 0.3)
    assert val == pytest.approx(math.sqrt(trace_constant(0.3) * 2**0.3), rel=1e-14)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_duality(s):
    u, w = _random_series(2, 6, 5), _random_series(2, 6, 6)
    lhs = trace_constant(s) * np.sum(u.degrees**s * u.coeffs * w.coeffs)
    grid = make_grid(2, 10)
    lu, wf = synthesize(frac_laplacian(u, s), grid), synthesize(w, grid)
    rhs = trace_constant(s) * integrate(GridFunction(grid, lu.values * wf.values))
    assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(lhs))


def test_dirichlet_form_matches_gradient():
    c = _random_series(2, 6, 7)
    f = synthesize(c, make_grid(2, 12))
    grads = gradient(f, 8)
    energy = sum(integrate(GridFunction(f.grid, g.values**2)) for g in grads)
    assert energy == pytest.approx(dirichlet_form(c), rel=1e-10)


@pytest.mark.parametrize("truncation", ["total", "tensor"])
def test_csv_roundtrip(truncation, tmp_path):
    c = _random_series(2, 4, 8, truncation)
    text = series_to_csv(c, tmp_path / "c.csv")
    assert text.splitlines()[0] == "alpha_1,alpha_2,coefficient"
    back = series_from_csv(str(tmp_path / "c.csv"), truncation)
    n = c.degree + 1
    assert np.array_equal(back.coeffs[:n, :n], c.coeffs)
    assert series_from_csv(text, truncation).l2_norm() == c.l2_norm()
