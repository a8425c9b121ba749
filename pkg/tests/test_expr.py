import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holoslow import expr as ex
from holoslow.errors import EvalPole, ExprSyntaxError, UnknownIdentifier


def test_parse_sum():
    assert ex.parse_expr("z + w") == ex.Add(ex.Var("z"), ex.Var("w"))


def test_parse_imaginary_times_z():
    e = ex.parse_expr("i*z + w^2")
    assert e == ex.Add(ex.Mul(ex.Lit.of(1j), ex.Var("z")), ex.Pow(ex.Var("w"), 2))


def test_parse_negative_power_and_complex_literal():
    e = ex.parse_expr("1/w^2 - (3-2i)*z")
    assert e == ex.Sub(ex.Pow(ex.Var("w"), -2), ex.Mul(ex.Lit.of(3 - 2j), ex.Var("z")))
    assert ex.parse_expr(ex.to_string(e)) == e


@pytest.mark.parametrize(
    "text, z, w, expected",
    [
        ("z+w", 1, 2j, 1 + 2j),
        ("w^2", 0, 1 + 1j, 2j),
        ("2^3^2", 0, 0, 64),  # left-associative
        ("-w^2", 0, 3, -9),
        ("8/2/2", 0, 0, 2),
        ("1.5e1 - 2.5i", 0, 0, 15 - 2.5j),
        ("3i*z", 2, 0, 6j),
    ],
)
def test_eval(text, z, w, expected):
    assert ex.eval_expr(ex.parse_expr(text), z, w) == pytest.approx(expected)


def test_eval_pole():
    with pytest.raises(EvalPole):
        ex.eval_expr(ex.parse_expr("1/w"), 0, 0)
    with pytest.raises(EvalPole):
        ex.eval_expr(ex.parse_expr("w^-3"), 0, 0)


@pytest.mark.parametrize("text, pos", [("z +", 3), ("(z", 2), ("z ** w", 5), ("w^z", 2)])
def test_syntax_errors_carry_positions(text, pos):
    with pytest.raises(ExprSyntaxError) as err:
        ex.parse_expr(text)
    assert err.value.position == pos
    assert err.value.expected


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as err:
        ex.parse_expr("z + exp(w)")
    assert err.value.name == "exp"


def test_diff_linear():
    a, b = 2 - 1j, 0.5j
    e = ex.parse_expr("(2-1i)*z + 0.5i*w")
    assert ex.eval_expr(ex.diff_expr(e, "z"), 0.3, 0.7) == pytest.approx(a)
    assert ex.eval_expr(ex.diff_expr(e, "w"), 0.3, 0.7) == pytest.approx(b)


def test_diff_square():
    d = ex.diff_expr(ex.parse_expr("w^2"), "w")
    assert ex.eval_expr(d, 0, 1.5 - 2j) == pytest.approx(2 * (1.5 - 2j))


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_diff_negative_power_matches_finite_difference(n):
    e = ex.parse_expr(f"1/w^{n}")
    d = ex.diff_expr(e, "w")
    rng = np.random.default_rng(n)
    for w in rng.uniform(0.5, 1.5, 5) * np.exp(1j * rng.uniform(0, 2 * np.pi, 5)):
        exact = -n * w ** (-n - 1)
        assert abs(ex.eval_expr(d, 0, w) - exact) / abs(exact) < 1e-6


def test_compile_matches_eval_on_arrays():
    e = ex.parse_expr("(z - 2*w)^3/(4 + w^2) + i")
    f = ex.compile_expr(e)
    zs = np.linspace(-1, 1, 7) + 0.3j
    ws = np.linspace(0, 1, 7) - 0.2j
    got = f(zs, ws)
    for z, w, g in zip(zs, ws, got):
        assert g == pytest.approx(ex.eval_expr(e, z, w))


def test_print_is_fixed_point_on_corpus():
    corpus = ["z + w", "i*z + w^2", "1/(2*w)", "(1+i)*z + 2*w^2", "w^-2 - (3-2i)*z", "-(z - w)^3", "z/(1 + w^2)"]
    for text in corpus:
        once = ex.to_string(ex.parse_expr(text))
        assert ex.to_string(ex.parse_expr(once)) == once


# random expressions: polynomials plus divisions by denominators bounded away from 0 on the unit bidisc
_leaf = st.one_of(
    st.sampled_from([ex.Var("z"), ex.Var("w")]),
    st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False).map(ex.Lit.of),
)


def _extend(children):
    safe_den = st.sampled_from(["3 + w^2", "4 - z*w", "(2+i) + z"]).map(ex.parse_expr)
    return st.one_of(
        st.builds(ex.Add, children, children),
        st.builds(ex.Sub, children, children),
        st.builds(ex.Mul, children, children),
        st.builds(ex.Neg, children),
        st.builds(ex.Pow, children, st.integers(0, 3)),
        st.builds(ex.Div, children, safe_den),
    )


exprs = st.recursive(_leaf, _extend, max_leaves=8)
points = st.tuples(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(-0.7, 0.7)).map(
    lambda t: (complex(t[0], t[1]), complex(t[2], t[3]))
)


@settings(max_examples=100, deadline=None)
@given(exprs, points, st.sampled_from(["z", "w"]))
def test_derivative_matches_central_difference(e, pt, var):
    z, w = pt
    h = 1e-5
    if var == "z":
        fd = (ex.eval_expr(e, z + h, w) - ex.eval_expr(e, z - h, w)) / (2 * h)
    else:
        fd = (ex.eval_expr(e, z, w + h) - ex.eval_expr(e, z, w - h)) / (2 * h)
    d = ex.eval_expr(ex.diff_expr(e, var), z, w)
    assert abs(d - fd) / (1 + abs(d)) < 1e-6


@settings(max_examples=60, deadline=None)
@given(exprs, points)
def test_cauchy_riemann(e, pt):
    z, w = pt
    h = 1e-5

    def f(x, y):
        return ex.eval_expr(e, complex(x, y), w)

    x, y = z.real, z.imag
    fx = (f(x + h, y) - f(x - h, y)) / (2 * h)
    fy = (f(x, y + h) - f(x, y - h)) / (2 * h)
    scale = 1 + abs(fx)
    assert abs(fx.real - fy.imag) / scale < 1e-6
    assert abs(fx.imag + fy.real) / scale < 1e-6


@settings(max_examples=100, deadline=None)
@given(exprs, points)
def test_print_parse_round_trip_preserves_value(e, pt):
    z, w = pt
    again = ex.parse_expr(ex.to_string(e))
    v1, v2 = ex.eval_expr(e, z, w), ex.eval_expr(again, z, w)
    assert cmath.isclose(v1, v2, rel_tol=1e-12, abs_tol=1e-12)
