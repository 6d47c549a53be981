import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from gaussfrac.gauss_core import (
    GridFunction,
    cylindrical_projection,
    gauss_hermite_rule,
    hermite,
    integrate,
    l2_norm,
    make_grid,
    normalized_hermite_table,
    std_normal_cdf,
    std_normal_quantile,
)


def _density(t):
    return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


def test_cdf_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(math.inf) == 1.0
    assert std_normal_cdf(-math.inf) == 0.0
    oracle, _ = sp_integrate.quad(_density, -math.inf, 1.6448536)
    assert abs(std_normal_cdf(1.6448536) - oracle) < 1e-12
    assert abs(std_normal_cdf(1.6448536) - 0.95) < 1e-7


@pytest.mark.parametrize("t", [-8.0, -2.5, -0.3, 0.7, 3.0, 9.0])
def test_cdf_symmetry_and_monotonicity(t):
    assert abs(std_normal_cdf(-t) - (1.0 - std_normal_cdf(t))) < 1e-15
    assert std_normal_cdf(t + 1e-3) >= std_normal_cdf(t)
    assert std_normal_cdf(-abs(t) + 1e-3) > std_normal_cdf(-abs(t))


def test_quantile_values():
    assert std_normal_quantile(0.5) == 0.0
    assert std_normal_quantile(1.0) == math.inf
    assert std_normal_quantile(0.0) == -math.inf
    assert abs(std_normal_quantile(0.975) - 1.959964) < 1e-5


@pytest.mark.parametrize("p", [1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9, 1 - 1e-9, 1 - 1e-12])
def test_quantile_inverts_cdf(p):
    assert abs(std_normal_cdf(std_normal_quantile(p)) - p) < 1e-10


@pytest.mark.parametrize("p", [-0.1, 1.5, math.nan])
def test_quantile_rejects_bad_input(p):
    with pytest.raises(ValueError):
        std_normal_quantile(p)


@pytest.mark.parametrize("n,x,expected", [(0, 0.7, 1.0), (1, 0.7, 0.7), (2, 2.0, 3.0), (6, 0.0, -15.0), (3, 1.5, 1.5**3 - 4.5)])
def test_hermite_values(n, x, expected):
    assert abs(hermite(n, x) - expected) < 1e-12


def test_hermite_orthogonality():
    rule = gauss_hermite_rule(64)
    table = normalized_hermite_table(30, rule.nodes)
    gram = table.T @ (rule.weights[:, None] * table)
    assert np.max(np.abs(gram - np.eye(31))) < 1e-9


def test_rule_small_cases():
    r1 = gauss_hermite_rule(1)
    assert np.allclose(r1.nodes, [0.0]) and np.allclose(r1.weights, [1.0])
    r2 = gauss_hermite_rule(2)
    assert np.allclose(r2.nodes, [-1.0, 1.0], atol=1e-14)
    assert np.allclose(r2.weights, [0.5, 0.5], atol=1e-14)
    with pytest.raises(ValueError):
        gauss_hermite_rule(0)


@pytest.mark.parametrize("n", range(1, 41))
def test_rule_exactness(n):
    rule = gauss_hermite_rule(n)
    assert abs(rule.weights.sum() - 1.0) < 1e-12
    for k in range(2 * n):
        exact = 0.0 if k % 2 else float(np.prod(np.arange(k - 1, 0, -2, dtype=float))) if k else 1.0
        terms = rule.weights * rule.nodes**k
        # relative to the size of the summands (odd moments cancel to zero)
        assert abs(terms.sum() - exact) <= 1e-12 * max(1.0, np.abs(terms).sum()), (n, k)


def test_grid_and_integrate():
    g = make_grid(2, 8)
    assert abs(g.weights.sum() - 1.0) < 1e-10
    assert abs(integrate(GridFunction(g, np.full(g.shape, 2.5))) - 2.5) < 1e-12
    f = GridFunction.from_callable(g, lambda x1, x2: x1**2 + 0 * x2)
    assert abs(integrate(f) - 1.0) < 1e-12
    fine = make_grid(1, 400)  # even: no node at the jump
    half = GridFunction.from_callable(fine, lambda x: (x < 0).astype(float))
    assert abs(integrate(half) - std_normal_cdf(0.0)) < 5e-3


def test_grid_function_shape_check():
    g = make_grid(2, 4)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros((4, 5)))


def test_cylindrical_projection_examples():
    g = make_grid(3, 6)
    rng = np.random.default_rng(0)
    f = GridFunction(g, rng.standard_normal(g.shape))
    assert np.array_equal(cylindrical_projection(f, 3).values, f.values)
    p0 = cylindrical_projection(f, 0)
    assert np.allclose(p0.values, integrate(f))
    g2 = make_grid(2, 6)
    prod = GridFunction.from_callable(g2, lambda x1, x2: x1 * x2)
    assert np.max(np.abs(cylindrical_projection(prod, 1).values)) < 1e-14
    with pytest.raises(ValueError):
        cylindrical_projection(f, 4)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_cylindrical_projection_properties(m):
    g = make_grid(3, 7)
    f = GridFunction(g, np.random.default_rng(m).standard_normal(g.shape))
    p = cylindrical_projection(f, m)
    assert np.allclose(cylindrical_projection(p, m).values, p.values)
    assert abs(integrate(p) - integrate(f)) < 1e-12
    assert l2_norm(p) <= l2_norm(f) + 1e-12
    # depends on the first m coordinates only
    for axis in range(m, 3):
        assert np.allclose(p.values, np.take(p.values, [0], axis=axis))
