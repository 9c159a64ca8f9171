import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite_e, legendre

from lanczos_sdr.quadrature import (
    MeasureSpec,
    NodeBudgetError,
    QuadratureRule,
    clenshaw_curtis_rule,
    clenshaw_curtis_tensor_rule,
    gauss_rule,
    gauss_tensor_rule,
    monte_carlo_rule,
    nested_indices,
    reference_jacobi,
    tensor_rule,
    tensor_size,
)

UNIFORM = MeasureSpec.uniform([(-1.0, 1.0)])
GAUSS = MeasureSpec.gaussian(1)


def uniform_moment(p, lo=-1.0, hi=1.0):
    return (hi ** (p + 1) - lo ** (p + 1)) / ((p + 1) * (hi - lo))


def gaussian_moment(p):
    return 0.0 if p % 2 else float(math.prod(range(p - 1, 0, -2)))


@pytest.mark.parametrize("k", range(1, 21))
def test_gauss_legendre_matches_numpy(k):
    rule = gauss_rule(UNIFORM, k)
    x, w = legendre.leggauss(k)
    np.testing.assert_allclose(rule.points, x, atol=1e-14)
    np.testing.assert_allclose(rule.weights, w / 2, rtol=1e-12)


@pytest.mark.parametrize("k", range(1, 21))
def test_gauss_hermite_matches_numpy(k):
    rule = gauss_rule(GAUSS, k)
    x, w = hermite_e.hermegauss(k)
    np.testing.assert_allclose(rule.points, x, atol=1e-12 * max(1.0, np.abs(x).max()))
    np.testing.assert_allclose(rule.weights, w / math.sqrt(2 * math.pi), rtol=1e-10, atol=1e-300)


@pytest.mark.parametrize("measure", [UNIFORM, GAUSS, MeasureSpec.uniform([(2.0, 5.0)])])
def test_gauss_rule_structure(measure):
    rule = gauss_rule(measure, 7)
    assert np.all(np.diff(rule.points) > 0)
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - 1.0) <= 1e-12
    center = 0.0 if measure.kind == "gaussian_standard" else sum(measure.bounds[0]) / 2
    np.testing.assert_allclose(rule.points - center, -(rule.points[::-1] - center), atol=1e-14 * (1 + abs(center)))


def test_gauss_on_shifted_interval_moments():
    lo, hi = 2.0, 5.0
    rule = gauss_rule(MeasureSpec.uniform([(lo, hi)]), 6)
    for p in range(12):
        exact = uniform_moment(p, lo, hi)
        assert abs(rule.integrate(rule.points**p) - exact) <= 1e-12 * exact


def test_reference_jacobi_closed_forms():
    J = reference_jacobi(UNIFORM, 4)
    np.testing.assert_allclose(J.beta, [1 / math.sqrt(3), 2 / math.sqrt(15), 3 / math.sqrt(35)])
    np.testing.assert_allclose(reference_jacobi(GAUSS, 4).beta, [1, math.sqrt(2), math.sqrt(3)])
    with pytest.raises(ValueError):
        reference_jacobi(MeasureSpec.gaussian(2), 3)


def test_measure_validation():
    with pytest.raises(ValueError, match="beta"):
        MeasureSpec("beta", 1)
    with pytest.raises(ValueError):
        MeasureSpec.uniform([(1.0, 1.0)])
    with pytest.raises(ValueError):
        MeasureSpec("gaussian_standard", 1, ((0.0, 1.0),))
    spec = MeasureSpec.uniform([(0.0, 1.0), (2.0, 3.0)])
    assert MeasureSpec.from_dict(spec.to_dict()) == spec
    assert spec.marginal(1).bounds == ((2.0, 3.0),)


def test_rule_validation():
    with pytest.raises(ValueError, match="sum"):
        QuadratureRule([0.0, 1.0], [0.5, 0.6], "gauss")
    with pytest.raises(ValueError, match="nonnegative"):
        QuadratureRule([0.0, 1.0], [1.5, -0.5], "gauss")
    with pytest.raises(ValueError, match="increasing"):
        QuadratureRule([1.0, 0.0], [0.5, 0.5], "gauss")
    with pytest.raises(ValueError):
        QuadratureRule([0.0], [1.0], "simpson")
    rule = gauss_rule(UNIFORM, 3)
    with pytest.raises(ValueError):
        rule.nodes[0, 0] = 3.0


def test_clenshaw_curtis_level_one_weights():
    rule = clenshaw_curtis_rule(1)
    np.testing.assert_allclose(rule.points, [-1.0, 0.0, 1.0], atol=0)
    np.testing.assert_allclose(rule.weights, [1 / 6, 2 / 3, 1 / 6], rtol=1e-15)


def test_clenshaw_curtis_level_zero_is_midpoint():
    rule = clenshaw_curtis_rule(0)
    assert rule.size == 1 and rule.points[0] == 0.0 and rule.weights[0] == 1.0
    with pytest.raises(ValueError):
        clenshaw_curtis_rule(-1)


@pytest.mark.parametrize("level", range(1, 8))
def test_clenshaw_curtis_exactness_and_symmetry(level):
    rule = clenshaw_curtis_rule(level)
    n = 2**level
    assert rule.size == n + 1
    np.testing.assert_array_equal(rule.points, -rule.points[::-1])
    np.testing.assert_allclose(rule.weights, rule.weights[::-1], rtol=1e-13)
    assert np.all(rule.weights > 0)
    for p in range(n + 2):
        assert abs(rule.integrate(rule.points**p) - uniform_moment(p)) <= 1e-13


@pytest.mark.parametrize("level", range(1, 8))
def test_clenshaw_curtis_nesting_is_exact(level):
    coarse, fine = clenshaw_curtis_rule(level - 1), clenshaw_curtis_rule(level)
    idx = nested_indices(coarse, fine)
    np.testing.assert_array_equal(fine.points[idx], coarse.points)


def test_nested_indices_rejects_non_nested():
    with pytest.raises(ValueError, match="not a node"):
        nested_indices(gauss_rule(UNIFORM, 3), gauss_rule(UNIFORM, 5))


def test_tensor_ordering_and_weights():
    a, b = gauss_rule(UNIFORM, 2), gauss_rule(GAUSS, 3)
    rule = tensor_rule([a, b])
    assert rule.size == 6 and rule.kind == "tensor"
    # last dimension varies fastest
    np.testing.assert_array_equal(rule.nodes[:3, 0], [a.points[0]] * 3)
    np.testing.assert_array_equal(rule.nodes[:3, 1], b.points)
    np.testing.assert_allclose(rule.weights, np.outer(a.weights, b.weights).ravel())


def test_tensor_of_21_points_in_5_dims():
    rule = gauss_tensor_rule(MeasureSpec.gaussian(5), 21)
    assert rule.size == 21**5 == 4_084_101
    assert abs(rule.weights.sum() - 1.0) <= 1e-12
    # second moments of the standard Gaussian
    np.testing.assert_allclose(rule.integrate(rule.nodes**2), np.ones(5), rtol=1e-11)


def test_tensor_size_and_budget():
    rules = [gauss_rule(UNIFORM, 17)] * 6
    assert tensor_size(rules) == 17**6 == 24_137_569
    with pytest.raises(NodeBudgetError) as info:
        tensor_rule(rules, budget=1_000_000)
    assert info.value.requested == 24_137_569


def test_budget_env_override(monkeypatch):
    monkeypatch.setenv("LANCZOS_SDR_NODE_BUDGET", "100")
    with pytest.raises(NodeBudgetError, match="125"):
        clenshaw_curtis_tensor_rule(2, 3)


def test_tensor_integrates_products_exactly():
    rule = gauss_tensor_rule(MeasureSpec.uniform([(-1, 1), (0, 2), (-3, 1)]), 4)
    x = rule.nodes
    value = rule.integrate(x[:, 0] ** 2 * x[:, 1] ** 3 * x[:, 2] ** 7)
    exact = uniform_moment(2) * uniform_moment(3, 0, 2) * uniform_moment(7, -3, 1)
    assert abs(value - exact) <= 1e-12 * abs(exact)


def test_monte_carlo_rule_is_seeded():
    m = MeasureSpec.uniform([(0.0, 2.0), (-1.0, 1.0)])
    a, b = monte_carlo_rule(m, 500, 7), monte_carlo_rule(m, 500, 7)
    np.testing.assert_array_equal(a.nodes, b.nodes)
    assert not np.array_equal(a.nodes, monte_carlo_rule(m, 500, 8).nodes)
    assert np.all(a.weights == 1 / 500)
    assert a.nodes[:, 0].min() >= 0 and a.nodes[:, 0].max() <= 2


def test_json_round_trip_is_bit_exact():
    rule = gauss_tensor_rule(MeasureSpec.gaussian(2), 5)
    back = QuadratureRule.from_json(rule.to_json())
    np.testing.assert_array_equal(back.nodes, rule.nodes)
    np.testing.assert_array_equal(back.weights, rule.weights)
    assert json.loads(rule.to_json())["dim"] == 2


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 12), measure=st.sampled_from([UNIFORM, GAUSS]))
def test_degree_of_exactness_property(k, measure):
    rule = gauss_rule(measure, k)
    moment = uniform_moment if measure is UNIFORM else gaussian_moment
    for p in range(2 * k):
        exact = moment(p)
        got = rule.integrate(rule.points**p)
        # odd moments vanish; measure their cancellation error against E|x|^p
        scale = max(abs(exact), rule.integrate(np.abs(rule.points) ** p))
        assert abs(got - exact) <= 1e-12 * scale
    # degree 2k is even, so its exact moment is positive and the rule falls short
    assert rule.integrate(rule.points ** (2 * k)) < moment(2 * k)


def test_small_rules_in_closed_form():
    r = gauss_rule(UNIFORM, 1)
    assert r.points.tolist() == [0.0] and r.weights.tolist() == [1.0]
    r = gauss_rule(UNIFORM, 2)
    np.testing.assert_allclose(r.points, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(r.weights, [0.5, 0.5], atol=1e-15)
    r = gauss_rule(GAUSS, 3)
    np.testing.assert_allclose(r.points, [-math.sqrt(3), 0.0, math.sqrt(3)], atol=1e-14)
    np.testing.assert_allclose(r.weights, [1 / 6, 2 / 3, 1 / 6], atol=1e-15)
    single = tensor_rule([gauss_rule(UNIFORM, 1)] * 3)
    assert single.size == 1 and single.weights[0] == 1.0
