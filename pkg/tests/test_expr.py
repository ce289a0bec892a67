import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from micromorph.expr import (
    ONE,
    X,
    ZERO,
    ExpressionSyntaxError,
    ExprArray,
    add,
    const,
    cos,
    exp,
    mul,
    parse,
    power,
    sin,
    sym_einsum,
)

from conftest import random_poly

seeds = st.integers(0, 2**32 - 1)
x1, x2, x3 = X


def test_interning_gives_identity():
    assert add(x1, x2) is add(x1, x2)
    assert mul(2.0, x1) is parse("2*x1")
    assert parse("x1 + x1") is mul(2.0, x1)
    assert parse("x1*x1") is power(x1, 2)


def test_constant_folding():
    assert add(1.0, 2.0) is const(3.0)
    assert mul(0.0, x1) is ZERO
    assert mul(1.0, x1) is x1
    assert add(x1, mul(-1.0, x1)) is ZERO
    assert power(x1, 0) is ONE


def test_derivatives():
    assert x1.diff(0) is ONE and x1.diff(1) is ZERO
    e = parse("x1^2*x2 + sin(x3)")
    assert e.diff(0) is parse("2*x1*x2")
    assert e.diff(2) is parse("cos(x3)")
    assert parse("exp(2*x1)").diff(0) is parse("2*exp(2*x1)")
    assert parse("cos(x2)").diff(1) is parse("-sin(x2)")
    assert parse("1/x1").diff(0) is parse("-x1^(-2)")


def test_derivative_cache():
    e = parse("x1^3*x2")
    assert e.diff(0) is e.diff(0)


def test_evaluate_vectorized():
    pts = np.array([[0.5, -1.0, 2.0], [1.0, 2.0, 0.0]])
    e = parse("x1^2*x2 - 3*sin(x3) + exp(x1)/2 + pi")
    want = pts[:, 0] ** 2 * pts[:, 1] - 3 * np.sin(pts[:, 2]) + np.exp(pts[:, 0]) / 2 + math.pi
    assert np.allclose(e(pts), want, rtol=1e-15)


@pytest.mark.parametrize("text", [
    "x1 + 2*x2^3 - x3", "sin(x1*x2) + cos(x3)^2", "-0.5*(x1 + x2)", "exp(-x1)/(1 + x2^2)",
    "(x1 - x2)^3", "-3*x1*x2", "x1^(-2)", "2.5e-07*x3",
])
def test_print_parse_round_trip(text):
    e = parse(text)
    assert parse(str(e)) is e


@given(seeds)
def test_round_trip_random_polynomials(seed):
    e = random_poly(np.random.default_rng(seed), degree=4, terms=6)
    assert parse(str(e)) is e


@pytest.mark.parametrize("text,column", [
    ("x1 + y", 6), ("x1 +* 2", 5), ("  x4", 3), ("tan(x1)", 1), ("x1^x2", 4), ("", 1), ("x1 ^ 0.5", 6),
])
def test_parse_errors_report_column(text, column):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse(text)
    assert info.value.position == column


def test_parse_rejects_non_strings():
    with pytest.raises(ExpressionSyntaxError):
        parse(3)


def test_division_by_zero_constant():
    with pytest.raises(ExpressionSyntaxError):
        parse("x1/0")


def test_expr_array_grad_and_evaluate():
    u = ExprArray(["x1", "x1*x2", "0"], (3,))
    g = u.grad()
    assert g.shape == (3, 3)
    assert g[1, 0] is x2 and g[1, 1] is x1 and g[0, 0] is ONE
    pts = np.array([[1.0, 2.0, 3.0]])
    assert np.allclose(g.evaluate(pts)[0], [[1, 0, 0], [2, 1, 0], [0, 0, 0]])


def test_expr_array_constant_flags():
    c = ExprArray.constant(np.eye(3))
    assert c.is_constant and not c.is_zero
    assert ExprArray.zeros((3, 3)).is_zero
    assert np.array_equal(c.constant_value(), np.eye(3))
    with pytest.raises(ValueError):
        ExprArray(["x1", "0", "0"], (3,)).constant_value()


def test_expr_array_shape_mismatch():
    with pytest.raises(ValueError):
        ExprArray(["x1", "x2"], (3,))


def test_expr_array_divergence():
    T = ExprArray([["x1", "x2", "x3"], ["x1*x2", "0", "x3^2"], ["0", "0", "0"]], (3, 3))
    d = T.divergence()
    assert d[0] is const(3.0) and d[1] is parse("x2 + 2*x3") and d[2] is ZERO


def test_to_strings_nested():
    phi = ExprArray([["x1", "0", "0"], ["0", "x2", "0"], ["0", "0", "-x3"]], (3, 3))
    assert phi.to_strings() == [["x1", "0", "0"], ["0", "x2", "0"], ["0", "0", "-x3"]]


def test_sym_einsum_matches_numeric(rng):
    A = rng.normal(size=(3, 3, 3, 3))
    g = ExprArray([[random_poly(rng) for _ in range(3)] for _ in range(3)], (3, 3))
    t = sym_einsum("ijkl,kl->ij", A, g)
    pts = rng.uniform(-1, 1, size=(5, 3))
    assert np.allclose(t.evaluate(pts), np.einsum("ijkl,nkl->nij", A, g.evaluate(pts)), rtol=1e-13, atol=1e-13)


def test_sym_einsum_skips_zero_coefficients():
    t = sym_einsum("ij,j->i", np.eye(3), ExprArray(["x1", "x2", "x3"], (3,)))
    assert [str(e) for e in t.entries] == ["x1", "x2", "x3"]


def test_functions_build_nodes():
    assert str(sin(x1)) == "sin(x1)" and str(cos(x2)) == "cos(x2)" and str(exp(x3)) == "exp(x3)"
    assert sin(ZERO) is ZERO and cos(ZERO) is ONE
