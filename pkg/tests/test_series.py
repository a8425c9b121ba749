import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holoslow.errors import DegenerateLinearPart, TooFewCoefficients
from holoslow.series import (
    Series1,
    Series2,
    implicit_series_solve,
    radius_estimate,
    s1_compose,
    s1_mul,
    s1_reciprocal,
    s1_scale,
    s2_eval_on_curve,
    series2_from_expr,
)


def S(c, order=None, var="z"):
    return Series1(c, var, order)


def test_product_truncates():
    p = s1_mul(S([1, 1], 3), S([1, -1], 3))
    np.testing.assert_allclose(p.coeffs, [1, 0, -1, 0])


def test_exp_times_exp_minus():
    k = np.arange(7)
    e = S(1 / np.array([math.factorial(i) for i in k]))
    em = S((-1.0) ** k / np.array([math.factorial(i) for i in k]))
    r = s1_mul(e, em)
    assert abs(r[0] - 1) < 1e-15
    assert np.max(np.abs(r.coeffs[1:])) < 1e-15


def test_scale():
    np.testing.assert_allclose(s1_scale(S([0, 1]), 2j).coeffs, [0, 2j])


def test_order_is_min_of_operands():
    assert (S([1, 2, 3]) + S([1, 2])).order == 1
    assert (S([1, 2, 3]) * S([1, 2])).order == 1


@pytest.mark.parametrize(
    "outer, inner, expected",
    [
        ([0, 0, 1, 0, 0], [0, 1, 1, 0, 0], [0, 0, 1, 2, 1]),
        ([0, 1, 0], [0, 3, -1j], [0, 3, -1j]),
        ([1, 1, 1], [0, 2, 0], [1, 2, 4]),
    ],
)
def test_compose(outer, inner, expected):
    np.testing.assert_allclose(s1_compose(S(outer), S(inner)).coeffs, expected)


def test_compose_needs_zero_constant_term():
    with pytest.raises(Exception):
        s1_compose(S([1, 1]), S([1, 1]))


@pytest.mark.parametrize(
    "a, expected",
    [
        ([1, 1, 0, 0, 0], [1, -1, 1, -1, 1]),
        ([2, 0, 0], [0.5, 0, 0]),
        ([1, 1, 1, 0], [1, -1, 0, 1]),
    ],
)
def test_reciprocal(a, expected):
    np.testing.assert_allclose(s1_reciprocal(S(a)).coeffs, expected, atol=1e-15)


@pytest.mark.parametrize(
    "terms, curve, expected",
    [
        ({(1, 1): 1}, [0, 1, 0], [0, 0, 1]),
        ({(0, 2): 1}, [0, 1, 1, 0, 0], [0, 0, 1, 2, 1]),
        ({(2, 0): 1, (1, 1): 1, (0, 2): 1}, [0, -1, 0, 0], [0, 0, 1, 0]),
    ],
)
def test_eval_on_curve(terms, curve, expected):
    F = Series2.from_dict(terms, len(curve) - 1)
    np.testing.assert_allclose(s2_eval_on_curve(F, S(curve)).coeffs, expected, atol=1e-15)


def test_implicit_solve_examples():
    L = implicit_series_solve(Series2.from_dict({(1, 0): 1, (0, 2): 1}, 6), 1.0, 6)
    np.testing.assert_allclose(L.coeffs, [0, 0, -1, 0, 0, 0, 0], atol=1e-15)
    L = implicit_series_solve(Series2.from_dict({(1, 0): 1}, 4), 1.0, 4)
    assert np.all(L.coeffs == 0)
    L = implicit_series_solve(Series2.from_dict({(1, 0): 1, (1, 1): 1, (0, 2): 1}, 4), 1.0, 4)
    np.testing.assert_allclose(L.coeffs, [0, 0, -1, 1, -1], atol=1e-14)


def test_implicit_solve_needs_alpha():
    with pytest.raises(DegenerateLinearPart):
        implicit_series_solve(Series2.from_dict({(0, 2): 1}, 4), 0.0, 4)


def test_series2_from_expr():
    s = series2_from_expr("z + z*w + w^2/(1 - w)", 5)
    assert s[1, 0] == 1 and s[1, 1] == 1
    for k in range(2, 6):
        assert s[0, k] == pytest.approx(1)


def test_json_round_trip():
    a = S([1, 2j, -3])
    assert Series1.from_json(a.to_json()).coeffs.tolist() == a.coeffs.tolist()
    F = Series2.from_dict({(2, 0): 1j, (0, 3): -2}, 4)
    assert Series2.from_json(F.to_json()).terms() == F.terms()


# convergence verdicts


def test_geometric_radius():
    v = radius_estimate(S(2.0 ** np.arange(25)))
    assert v.verdict == "convergent"
    assert v.radius == pytest.approx(0.5, rel=0.05)


def test_factorial_series_diverges():
    eps = 0.1
    c = [0.0] + [-(eps**k) * math.factorial(k) for k in range(24)]
    v = radius_estimate(S(c, var="w"))
    assert v.verdict == "divergent" and v.radius == 0


def test_entire_series_flagged():
    v = radius_estimate(S([1 / math.factorial(k) for k in range(25)]))
    assert v.verdict == "convergent"
    assert v.radius >= 10 and v.entire


@pytest.mark.parametrize("r", [0.25, 1.0, 4.0])
def test_geometric_radius_recovered(r):
    v = radius_estimate(S(r ** -np.arange(25.0)))
    assert v.radius == pytest.approx(r, rel=0.05)


def test_sparse_support_is_reindexed():
    # support on 1, 3, 5, ... with factorial growth between steps
    c = np.zeros(30)
    for j in range(15):
        c[2 * j + 1] = (0.2**j) * math.factorial(j)
    assert radius_estimate(S(c)).verdict == "divergent"
    g = np.zeros(30)
    g[::3] = 8.0 ** np.arange(10)  # sum (8 z^3)^j, radius 1/2
    v = radius_estimate(S(g))
    assert v.verdict == "convergent" and v.radius == pytest.approx(0.5, rel=0.05)


def test_too_few_coefficients():
    with pytest.raises(TooFewCoefficients):
        radius_estimate(S([1, 1, 1]))


coeff = st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(coeff, min_size=2, max_size=12), coeff)
def test_reciprocal_property(tail, c0):
    if abs(c0) < 0.1:
        c0 = 1.0
    a = S([c0] + tail)
    r = a * a.reciprocal()
    scale = 1 + np.max(np.abs(a.coeffs))
    # the coefficients of 1/a grow like |c0|^-k; measure against that scale
    growth = (scale / abs(c0)) ** a.order
    assert abs(r[0] - 1) < 1e-12 * growth
    assert np.max(np.abs(r.coeffs[1:])) < 1e-12 * scale * growth


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), coeff, max_size=6),
       st.complex_numbers(min_magnitude=0.5, max_magnitude=2, allow_nan=False, allow_infinity=False))
def test_implicit_solve_residual(terms, alpha):
    terms = {k: v for k, v in terms.items() if sum(k) >= 2}
    terms[(1, 0)] = alpha
    N = 8
    theta = Series2.from_dict(terms, N)
    L = implicit_series_solve(theta, alpha, N)
    res = theta.compose(L, Series1.variable(N, "w"))
    scale = max(1.0, L.max_abs()) ** 3
    assert np.max(np.abs(res.coeffs[1:])) < 1e-12 * scale
