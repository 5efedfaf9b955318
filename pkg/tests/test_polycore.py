import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convexinner.polycore import (Polynomial, dot, eval_gradient, eval_hessian, monomials_upto,
                                  n_monomials, poly_arith, poly_diff, poly_eval, poly_hessian)

x1, x2 = Polynomial.variables(2)
one = Polynomial.constant(2, 1.0)


def egg_poly():
    return x1 ** 4 + x2 ** 4 + x1 ** 2 + x2


def test_eval_examples():
    assert poly_eval(x1 * x2 - 1.0, [1.0, 1.0]) == 0.0
    # (sqrt2/2)(1, 1) lies inside the hyperbola region, not on its boundary
    assert poly_eval(x1 * x2 - 1.0, [math.sqrt(2) / 2] * 2) == pytest.approx(-0.5, abs=1e-15)
    assert poly_eval(Polynomial.zero(2), [3, -7]) == 0.0
    assert poly_eval(egg_poly(), [0.1, -0.5]) == pytest.approx(0.0001 + 0.0625 + 0.01 - 0.5)


def test_diff_examples():
    y1, y2, y3 = Polynomial.variables(3)
    assert poly_diff(y1 * y1 - y2 * y2 - y3, 0) == 2.0 * y1
    assert poly_diff(Polynomial.constant(2, 5.0), 1).is_zero()
    assert poly_diff(egg_poly(), 0) == 4.0 * x1 ** 3 + 2.0 * x1


def test_hessian_examples():
    y1, y2, y3 = Polynomial.variables(3)
    H = poly_hessian(y1 * y1 - y2 * y2 - y3)
    vals = np.array([[h.eval([0.3, 0.1, 2]) for h in row] for row in H])
    assert np.array_equal(vals, np.diag([2.0, -2.0, 0.0]))
    assert all(h.is_zero() for row in poly_hessian(x1 + 3.0 * x2 - 2.0) for h in row)
    assert np.array_equal(eval_hessian(x1 * x2 - 1.0, [5, -1]), [[0, 1], [1, 0]])


def test_arith_examples():
    assert poly_arith("mul", x1, x2) == x1 * x2
    ys = Polynomial.variables(4)[2:]
    assert dot(ys, ys) == Polynomial(4, {(0, 0, 2, 0): 1, (0, 0, 0, 2): 1})
    p3 = poly_arith("add", poly_arith("scale", x1 + x2, -1.0), -2.0)
    assert p3 == Polynomial.affine([-1.0, -1.0], -2.0)
    with pytest.raises(ValueError):
        poly_arith("pow", x1, x2)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        x1 + Polynomial.variable(3, 0)
    with pytest.raises(ValueError):
        Polynomial(2, {(1,): 1.0})


def test_json_roundtrip():
    p = egg_poly() - 0.25 * x1 * x2
    assert Polynomial.from_json(p.to_json()) == p


def test_monomial_counts():
    for n in range(1, 4):
        for d in range(5):
            assert len(monomials_upto(n, d)) == n_monomials(n, d) == math.comb(n + d, d)


# --- property tests -----------------------------------------------------------

def polys(n=2, max_deg=4):
    exps = st.tuples(*[st.integers(0, max_deg)] * n).filter(lambda e: sum(e) <= max_deg)
    coefs = st.floats(-3, 3, allow_nan=False).filter(lambda c: abs(c) > 1e-3)
    return st.dictionaries(exps, coefs, max_size=8).map(lambda t: Polynomial(n, t))


points = st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)).map(np.array)


@settings(max_examples=200, deadline=None)
@given(polys(), points)
def test_gradient_hessian_vs_central_differences(p, x):
    # 9a: derivative correctness
    h = 1e-5
    fd_g = np.array([(p.eval(x + h * e) - p.eval(x - h * e)) / (2 * h) for e in np.eye(2)])
    g = eval_gradient(p, x)
    assert np.allclose(g, fd_g, rtol=1e-6, atol=1e-6 * (1 + np.abs(g).max()))
    fd_H = np.array([(eval_gradient(p, x + h * e) - eval_gradient(p, x - h * e)) / (2 * h)
                     for e in np.eye(2)])
    H = eval_hessian(p, x)
    assert np.allclose(H, fd_H, rtol=1e-6, atol=1e-6 * (1 + np.abs(H).max()))


@settings(max_examples=100, deadline=None)
@given(polys(max_deg=3), polys(max_deg=3), points)
def test_ring_operations_match_evaluation(p, q, x):
    px, qx = p.eval(x), q.eval(x)
    tol = 1e-9 * (1 + abs(px)) * (1 + abs(qx))
    assert (p + q).eval(x) == pytest.approx(px + qx, abs=tol)
    assert (p - q).eval(x) == pytest.approx(px - qx, abs=tol)
    assert (p * q).eval(x) == pytest.approx(px * qx, abs=tol)
    assert (p * q).degree <= p.degree + q.degree


@settings(max_examples=100, deadline=None)
@given(polys(), points)
def test_eval_many_matches_eval(p, x):
    pts = np.vstack([x, -x, 0.5 * x])
    assert np.allclose(p.eval_many(pts), [p.eval(z) for z in pts], atol=1e-12)
