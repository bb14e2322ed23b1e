"""Expression parser: grammar, precedence, adapters, error reporting."""

import numpy as np
import pytest

from tecsim.errors import ExpressionParseError
from tecsim.expressions import (
    boundary_data_function,
    coefficient_function,
    scalar_state_function,
    spatial_function,
)


def ev(text, **names):
    f = spatial_function(text)
    x = np.asarray(names.get("x", 0.0), dtype=float)
    y = np.asarray(names.get("y", 0.0), dtype=float)
    return f(x, y)


def test_arithmetic_precedence():
    assert ev("2+3*4") == 14.0
    assert ev("(2+3)*4") == 20.0
    assert ev("2-3-4") == -5.0
    assert ev("12/4/3") == 1.0
    assert ev("2*3^2") == 18.0


def test_power_right_associative():
    assert ev("2^3^2") == 512.0


def test_unary_minus_and_constants():
    assert ev("-3+5") == 2.0
    assert ev("--2") == 2.0
    np.testing.assert_allclose(ev("cos(pi)"), -1.0, rtol=1e-15)
    np.testing.assert_allclose(ev("2*pi"), 2.0 * np.pi, rtol=1e-15)
    assert ev("-x^2", x=2.0) == -4.0


def test_function_calls():
    np.testing.assert_allclose(ev("abs(-3.5)"), 3.5)
    np.testing.assert_allclose(ev("exp(1)"), np.e, rtol=1e-15)
    np.testing.assert_allclose(ev("sin(pi/2)"), 1.0, rtol=1e-15)
    np.testing.assert_allclose(ev("min(2,3)"), 2.0)
    np.testing.assert_allclose(ev("max(2,3)"), 3.0)


def test_spatial_function_vectorized():
    f = spatial_function("x*y + 1")
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([5.0, 5.0, 5.0])
    np.testing.assert_allclose(f(x, y), [1.0, 6.0, 11.0])


def test_boundary_data_function_time_slice():
    g = boundary_data_function("exp(-t)*cos(pi*x)")
    x = np.array([0.0, 0.5, 1.0])
    y = np.zeros(3)
    np.testing.assert_allclose(
        g(x, y, 0.5), np.exp(-0.5) * np.cos(np.pi * x), rtol=1e-14
    )


def test_coefficient_function_state_names():
    a = coefficient_function("e1 + 2*e2", 2)
    x = np.zeros(3)
    e = [np.array([1.0, 2.0, 3.0]), np.array([10.0, 10.0, 10.0])]
    np.testing.assert_allclose(a(x, x, e), [21.0, 22.0, 23.0])


def test_coefficient_function_e_is_temperature_alias():
    # `e` names the last state component
    a = coefficient_function("abs(e)^3", 3)
    x = np.zeros(2)
    e = [x, x, np.array([-2.0, 2.0])]
    np.testing.assert_allclose(a(x, x, e), [8.0, 8.0])
    b = coefficient_function("e - e3", 3)
    np.testing.assert_allclose(b(x, x, e), [0.0, 0.0])


def test_scalar_state_function_single_slot():
    f = scalar_state_function("e^2 + x")
    np.testing.assert_allclose(f(1.0, 0.0, 3.0), 10.0)


def test_parse_error_carries_position():
    with pytest.raises(ExpressionParseError) as exc:
        spatial_function("x + * y")
    assert "position" in str(exc.value)
    with pytest.raises(ExpressionParseError):
        spatial_function("cos(")
    with pytest.raises(ExpressionParseError):
        spatial_function("")


def test_unknown_name_and_function_messages():
    with pytest.raises(ExpressionParseError) as exc:
        spatial_function("x + q")
    assert "q" in str(exc.value)
    with pytest.raises(ExpressionParseError) as exc:
        spatial_function("sinh(x)")
    assert "available: abs, exp, cos, sin, min, max" in str(exc.value)
    with pytest.raises(ExpressionParseError):
        # e-names outside their arity
        coefficient_function("e3", 2)


def test_division_and_whitespace_robustness():
    assert ev("  1 +\t2 ") == 3.0
    f = spatial_function("x / (1 + y^2)")
    np.testing.assert_allclose(f(np.array([2.0]), np.array([1.0])), [1.0])
