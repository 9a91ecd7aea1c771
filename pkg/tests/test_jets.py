import numpy as np
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from tdcshell.jets import Jet, cross, dot, linear_combination, matmul, stack, trace

R, S = sympy.symbols("r s")


def sympy_derivatives(expr, r0, s0, order):
    out = np.zeros((order + 1, order + 1))
    for a in range(order + 1):
        for b in range(order + 1 - a):
            out[a, b] = float(sympy.diff(expr, R, a, S, b).subs({R: r0, S: s0}))
    return out


def variables(r0, s0, order):
    return Jet.variable(np.array([r0]), order, 0), Jet.variable(np.array([s0]), order, 1)


def test_composite_expression_against_sympy():
    r0, s0, order = 0.3, -0.7, 4
    r, s = variables(r0, s0, order)
    jet = (r * s).sin() + r**3 / (s * s + 1.0) + (r + 2.0).sqrt() * s.cos()
    expr = sympy.sin(R * S) + R**3 / (S**2 + 1) + sympy.sqrt(R + 2) * sympy.cos(S)
    np.testing.assert_allclose(jet.derivatives()[0], sympy_derivatives(expr, r0, s0, order), rtol=1e-12, atol=1e-12)


def test_power_and_reciprocal_against_sympy():
    r0, s0, order = 0.8, 0.4, 4
    r, s = variables(r0, s0, order)
    jet = (r * r + s + 1.0).power(-1.5) - 1.0 / (r - s + 3.0)
    expr = (R**2 + S + 1) ** sympy.Rational(-3, 2) - 1 / (R - S + 3)
    np.testing.assert_allclose(jet.derivatives()[0], sympy_derivatives(expr, r0, s0, order), rtol=1e-12, atol=1e-12)


def test_partial_derivative_shifts():
    r, s = variables(0.5, 0.2, 4)
    f = r**3 * s**2
    np.testing.assert_allclose(f.dr().value, 3 * 0.25 * 0.04)
    np.testing.assert_allclose(f.ds().dr().value, 6 * 0.25 * 0.2)
    assert f.dr().order == 3


def test_truncate_and_constant():
    c = Jet.constant(np.array([2.0, 3.0]), 3)
    assert c.order == 3 and c.shape == (2,)
    np.testing.assert_array_equal(c.dr().value, [0.0, 0.0])
    r, _ = variables(1.0, 0.0, 4)
    assert (r * r).truncate(1).order == 1


def test_vector_helpers():
    r, s = variables(0.1, 0.2, 2)
    a = stack([r, s, r * s], axis=-1)
    b = stack([s, r * 0.0 + 1.0, r], axis=-1)
    c = cross(a, b)
    np.testing.assert_allclose(dot(c, a).derivatives(), 0.0, atol=1e-15)
    M = stack([a, b, c], axis=-2)
    np.testing.assert_allclose(trace(matmul(M, M)).value, np.trace(M.value[0] @ M.value[0]), rtol=1e-14)


def test_linear_combination_matches_sum():
    rng = np.random.default_rng(0)
    basis = Jet(rng.normal(size=(2, 4, 3, 3)))
    coeffs = rng.normal(size=(2, 4, 3))
    lc = linear_combination(basis, coeffs)
    direct = sum(basis[:, i].expand(-1) * coeffs[:, i] for i in range(4))
    np.testing.assert_allclose(lc.c, direct.c, rtol=1e-13, atol=1e-14)


def test_numpy_operand_defers_to_jet():
    r, _ = variables(0.5, 0.0, 1)
    out = np.ones(1) + r
    assert isinstance(out, Jet)
    np.testing.assert_allclose(out.derivatives()[0], [[1.5, 0.0], [1.0, 0.0]])


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_product_rule(r0, s0):
    r, s = variables(r0, s0, 3)
    f = r.sin() * s + r * r
    g = (s * r).cos()
    lhs = (f * g).dr()
    rhs = f.dr() * g.truncate(2) + f.truncate(2) * g.dr()
    np.testing.assert_allclose(lhs.c, rhs.c, atol=1e-13)
