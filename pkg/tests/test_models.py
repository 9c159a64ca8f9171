import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lanczos_sdr.models import (
    OTL_INPUTS,
    DomainError,
    ModelEvaluationError,
    StandardizationMap,
    build_model,
    default_ex2_direction,
    model_constant,
    model_ex1,
    model_ex2,
    model_ex3_otl,
    model_linear,
    otl_voltage,
    standardize_uniform,
)
from lanczos_sdr.quadrature import MeasureSpec, gauss_tensor_rule


def otl_single_fraction(Rb1, Rb2, Rf, Rc1, Rc2, beta):
    # written as one fraction over (beta (Rc2 + 9) + Rf) Rc1
    g = beta * (Rc2 + 9)
    num = ((12 * Rb2 / (Rb1 + Rb2) + 0.74) * g + 11.35 * Rf) * Rc1 + 0.74 * Rf * g
    return num / ((g + Rf) * Rc1)


def test_otl_voltage_matches_single_fraction_form():
    rng = np.random.default_rng(0)
    lo = np.array([r[1] for r in OTL_INPUTS])
    hi = np.array([r[2] for r in OTL_INPUTS])
    x = rng.uniform(lo, hi, size=(1000, 6))
    np.testing.assert_allclose(otl_voltage(*x.T), otl_single_fraction(*x.T), rtol=1e-13)


def test_otl_at_box_center():
    model = model_ex3_otl()
    center = np.array([(r[1] + r[2]) / 2 for r in OTL_INPUTS])
    assert model(np.zeros(6)) == pytest.approx(otl_single_fraction(*center), rel=1e-14)


def test_otl_corners_are_in_domain_and_outside_raises():
    model = model_ex3_otl()
    s = math.sqrt(3)
    corners = np.array([[s, -s, s, -s, s, -s], [-s] * 6, [s] * 6])
    assert np.all(np.isfinite(model(corners)))
    with pytest.raises(DomainError) as info:
        model(np.array([0, 0, 0, 2.0, 0, 0]))
    assert info.value.dimension == 3 and "Rc1" in str(info.value)
    with pytest.raises(ModelEvaluationError) as info:
        model.evaluate_nodes(np.vstack([np.zeros((3, 6)), [[0, 0, 0, 0, 0, -2.0]]]))
    assert info.value.index == 3


def test_otl_standardized_moments():
    model = model_ex3_otl()
    rule = gauss_tensor_rule(model.measure, 2)
    np.testing.assert_allclose(rule.integrate(rule.nodes), 0, atol=1e-15)
    np.testing.assert_allclose(rule.integrate(rule.nodes[:, :, None] * rule.nodes[:, None, :]), np.eye(6), atol=1e-14)
    assert model.standardized and model.standardization.dim == 6


@settings(max_examples=50, deadline=None)
@given(data=st.data(), m=st.integers(1, 6))
def test_standardization_round_trip(data, m):
    lo = data.draw(arrays(float, m, elements=st.floats(-1e3, 1e3)))
    width = data.draw(arrays(float, m, elements=st.floats(1e-2, 1e3)))
    smap = standardize_uniform(np.stack([lo, lo + width], axis=1))
    x = lo + width * data.draw(arrays(float, m, elements=st.floats(0, 1)))
    z = smap.to_standard(x)
    # the subtraction loses digits in proportion to |lo| / width
    slack = 1e-14 * (1 + (np.abs(lo) + width) / width)
    assert np.all(np.abs(z) <= math.sqrt(3) + slack)
    np.testing.assert_allclose(smap.to_physical(z), x, rtol=1e-12, atol=1e-12 * (np.abs(lo).max() + width.max()))


def test_standardization_endpoints_and_errors():
    smap = standardize_uniform([(50.0, 150.0)])
    np.testing.assert_allclose(smap.to_standard([50.0, 100.0, 150.0]), [-math.sqrt(3), 0, math.sqrt(3)])
    with pytest.raises(ValueError, match="degenerate"):
        standardize_uniform([(1.0, 1.0)])
    with pytest.raises(ValueError):
        StandardizationMap([0.0], [0.0])


def test_ex1_quadratic_form():
    g = [1.0, -2.0, 0.5]
    H = np.array([[1.0, 0.2, 0.0], [0.2, -1.0, 0.3], [0.0, 0.3, 2.0]])
    model = model_ex1(g, H)
    x = np.array([0.3, -0.4, 0.9])
    assert model(x) == pytest.approx(x @ g + x @ H @ x, rel=1e-15)
    assert not model.standardized and model.measure.bounds == ((-1.0, 1.0),) * 3
    with pytest.raises(ValueError, match="symmetric"):
        model_ex1(g, np.triu(np.ones((3, 3))))


def test_ex1_default_is_seeded():
    a, b = model_ex1(), model_ex1()
    assert a.params == b.params
    assert model_ex1(seed=1).params != a.params


def test_ex2_ridge_formula():
    a = np.array([1.0, 2.0, -1.0, 0.5, 0.0])
    model = model_ex2(a)
    x = np.array([[0.1, 0.2, 0.3, 0.4, 0.5], [1.0, -1.0, 2.0, 0.0, 3.0]])
    t = x @ a
    np.testing.assert_allclose(model(x), t * np.cos(t / (2 * np.pi)), rtol=1e-15)
    assert model.measure.kind == "gaussian_standard" and model.dim == 5
    with pytest.raises(ValueError):
        model_ex2(np.zeros(3))


def test_ex2_default_direction_is_recorded():
    model = model_ex2()
    np.testing.assert_array_equal(model.params["a"], default_ex2_direction(0))
    assert build_model("ex2", {"a": model.params["a"]}).params == model.params


def test_build_model_registry():
    assert build_model("otl").dim == 6
    assert build_model("ex1", {"seed": 3}).params == model_ex1(seed=3).params
    linear = build_model("linear", {"a": [1.0], "measure": {"kind": "uniform_box", "dim": 1, "bounds": [[-1, 1]]}})
    assert not linear.standardized
    const = build_model("constant", {"value": 2.0, "dim": 3})
    assert const.standardized and const(np.zeros(3)) == 2.0
    with pytest.raises(ValueError, match="unknown model"):
        build_model("ex9")


def test_linear_and_constant_models():
    m = MeasureSpec.uniform([(-math.sqrt(3), math.sqrt(3))] * 2)
    lin = model_linear([2.0, -1.0], m)
    assert lin.standardized
    np.testing.assert_allclose(lin(np.array([[1.0, 1.0], [0.0, 2.0]])), [1.0, -2.0])
    with pytest.raises(ValueError):
        model_linear([1.0], m)
    assert model_constant(1.0, m)(np.ones((4, 2))).tolist() == [1.0] * 4


def test_evaluate_nodes_shape_checks():
    model = model_ex2()
    with pytest.raises(ValueError):
        model.evaluate_nodes(np.zeros((3, 4)))
    bad = model_linear([1.0])
    object.__setattr__(bad, "func", lambda x: np.zeros(x.shape[0] + 1))
    with pytest.raises(ModelEvaluationError, match="returned"):
        bad.evaluate_nodes(np.zeros((3, 1)))
