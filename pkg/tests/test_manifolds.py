import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holoslow import expr as ex
from holoslow.errors import FactorizationMismatch, FamilyParamError, PrimitiveMismatch, RecurrenceBreakdown
from holoslow.manifolds import (
    coupled_implicit,
    coupled_invariance_defect,
    coupled_manifold,
    exact_linear_slope,
    formal_graph_series,
    graph_series,
    separable_from_system,
    separable_manifold,
    uncoupled_power_graph,
)
from holoslow.primitives import primitive_catalog, primitive_from_expr
from holoslow.systems import CoupledSpec, build_system


def coupled(alpha, beta, G="w^2", g="1/(2*w)"):
    return CoupledSpec(alpha, beta, primitive_from_expr(G), ex.parse_expr(g))


# separable family


def test_separable_squares():
    F = primitive_catalog("power", n=2, var="z")
    G = primitive_catalog("power", n=2)
    m = separable_manifold("1/z^2", "w^2", F, G, 0.1, f="z^2", g="w^2")
    w = np.array([0.3 + 0.4j, -0.7j, 0.9])
    np.testing.assert_allclose(m.H(0.1 * w, w), 0, atol=1e-14)
    np.testing.assert_allclose(m.H(0.2, 0.5), -1 / 0.5 + 0.1 / 0.2)


def test_separable_with_log():
    F = primitive_catalog("power", n=2, var="z")
    G = primitive_catalog("linear", eta=2.0)
    m = separable_manifold("1/z^2", "2*w", F, G, 0.1, f="z^2", g="2*w")
    w = 0.5 + 0.5j
    z = -2 * 0.1 / np.log(w)  # ln(w)/2 + eps/z = 0
    assert abs(m.H(z, w)) < 1e-14
    assert m.domain["excluded_ray"] == pytest.approx(math.pi)


def test_separable_wrong_primitive():
    F = primitive_catalog("power", n=2, var="z")
    G = primitive_catalog("power", n=3)
    with pytest.raises(PrimitiveMismatch):
        separable_manifold("1/z^2", "w^2", F, G, 0.1)


def test_separable_wrong_factorisation():
    F = primitive_catalog("power", n=2, var="z")
    G = primitive_catalog("power", n=2)
    with pytest.raises(FactorizationMismatch):
        separable_manifold("1/z^2", "w^2", F, G, 0.1, f="z^2", g="w^2 + z")


def test_separable_from_system_and_power_graph():
    s = build_system({"family": "uncoupled", "f": "z^2", "g": "w^2"})
    m = separable_from_system(s, 0.05)
    gm = uncoupled_power_graph(2, s.separable[1], 0.05)
    ws = 0.8 * np.exp(1j * np.linspace(0, 6, 9))
    np.testing.assert_allclose(gm(ws), 0.05 * ws, atol=1e-15)
    assert max(abs(m.H(z, w)) for z, w in zip(gm(ws), ws)) < 1e-13
    assert m.rank_check(list(zip(gm(ws), ws))) > 0


# coupled family


def test_coupled_example():
    m = coupled_manifold(coupled(1j, 1), 0.1)
    assert m(1.0) == pytest.approx(0.1 + 1j)
    assert m(0.5 - 0.5j) == pytest.approx(1j * (0.5 - 0.5j) ** 2 + 0.1)


def test_coupled_at_zero_eps_is_critical_manifold():
    c = coupled(2 - 1j, 0.5)
    w = 0.3 + 0.7j
    assert coupled_manifold(c, 0.0)(w) == pytest.approx(-c.beta * c.G(w) / c.alpha)


def test_coupled_linear_primitive():
    c = coupled(1, 1, G="w", g="1")
    m = coupled_manifold(c, 0.2)
    ws = np.linspace(-1, 1, 10) + 0.3j
    np.testing.assert_allclose(m(ws), -ws - 0.2)
    assert np.max(coupled_invariance_defect(c, 0.2, ws)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(min_magnitude=0.2, max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(min_magnitude=0.2, max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.floats(0.01, 1.0))
def test_coupled_invariance_and_offset(alpha, beta, eps):
    c = coupled(alpha, beta)
    ws = c.G.sample(np.random.default_rng(0), 50, 1.0)
    scale = 1 + abs(beta / alpha**2) * (abs(alpha) + 1) / eps
    assert np.max(coupled_invariance_defect(c, eps, ws)) < 1e-12 * scale
    d = np.abs(coupled_manifold(c, eps)(ws) - coupled_manifold(c, 0.0)(ws))
    np.testing.assert_allclose(d, abs(beta / alpha**2) * eps, rtol=1e-14, atol=1e-14 * (1 + abs(beta / alpha)))


def test_coupled_implicit_gradient_nonzero():
    imp = coupled_implicit(coupled(1j, 1), 0.1)
    ws = 0.5 * np.exp(1j * np.linspace(0, 6, 20))
    assert imp.rank_check([(imp.solve_z(w), w) for w in ws]) >= 1.0


# formal graph series


def test_linear_wn_factorial_coefficients():
    m = formal_graph_series("linear-wn", {"alpha": 1, "beta": 1, "n": 2}, 0.1, 12)
    for k in range(11):
        exact = -(0.1**k) * math.factorial(k)
        assert abs(m.series[k + 1] - exact) <= 1e-12 * abs(exact)
    assert m.verdict.verdict == "divergent"
    assert m.asymptotic_only
    assert not m.discrepancy["detected"]


def test_linear_wn_beta_power_discrepancy():
    m = formal_graph_series("linear-wn", {"alpha": 1, "beta": 2, "n": 2}, 0.1, 12)
    assert m.discrepancy["detected"]
    # degree matching is linear in beta
    base = formal_graph_series("linear-wn", {"alpha": 1, "beta": 1, "n": 2}, 0.1, 12)
    np.testing.assert_allclose(m.series.coeffs, 2 * base.series.coeffs)


def test_linear_rational_sign_discrepancy():
    m = formal_graph_series("linear-rational", {"alpha": 1, "beta": 1, "n": 2, "gamma": 1}, 0.3, 16)
    assert m.discrepancy["detected"]
    assert m.verdict.verdict == "divergent"


def test_linear_pole_coefficients():
    al, be, eps = 1.5 - 0.5j, 0.7 + 0.1j, 0.2
    m = formal_graph_series("linear-pole", {"alpha": al, "beta": be, "n": 1}, eps, 16)
    assert m.series[3] == pytest.approx(be / (3 * eps))
    assert m.series[5] == pytest.approx(al * be / (15 * eps**2))
    assert m.verdict.verdict == "convergent" and m.verdict.entire
    assert not m.discrepancy["detected"]
    # evaluator and stored series agree at the default order
    full = formal_graph_series("linear-pole", {"alpha": al, "beta": be, "n": 1}, eps)
    assert full.consistency_check() < 1e-8


def test_linear_linear_slope():
    m = formal_graph_series("linear-linear", {"a": 1, "b": 1, "c": 0, "d": 1j}, 0.1, 8)
    lam = m.series[1]
    assert lam == pytest.approx(-1 / (1 - 0.1j), abs=1e-15)
    # z = lam w is invariant: eps * d/dt(z) = a z + b w with w' = d w
    w = 0.3 + 0.2j
    assert abs(0.1 * lam * (1j * w) - (lam * w + w)) < 1e-12


def test_linear_linear_coupled_slope_note():
    m = formal_graph_series("linear-linear", {"a": 2, "b": 1, "c": 0.5, "d": -1}, 0.1, 4)
    lam = exact_linear_slope(2, 1, 0.5, -1, 0.1)
    assert abs(0.1 * 0.5 * lam**2 + (0.1 * -1 - 2) * lam - 1) < 1e-14
    assert m.notes


def test_linear_linear_breakdown():
    with pytest.raises(RecurrenceBreakdown):
        formal_graph_series("linear-linear", {"a": 0.1, "b": 1, "c": 0, "d": 1}, 0.1, 4)


@pytest.mark.parametrize("bad", [{"alpha": 1, "beta": 1, "n": 1}, {"alpha": 1, "beta": 0, "n": 2}, {"alpha": 1, "n": 2}])
def test_family_param_errors(bad):
    with pytest.raises(FamilyParamError):
        formal_graph_series("linear-wn", bad, 0.1)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("eps", [0.03, 0.07, 0.13, 0.3])
def test_divergent_families(n, eps):
    for fam, extra in (("linear-wn", {}), ("linear-rational", {"gamma": 1})):
        m = formal_graph_series(fam, {"alpha": 1, "beta": 1, "n": n, **extra}, eps, 24)
        assert m.verdict.verdict == "divergent", (fam, n, eps)


def test_rational_series_terminates_when_eps_gamma_m_hits_alpha():
    # 1/eps is an integer here: a coefficient multiplier vanishes and the series is a polynomial
    m = formal_graph_series("linear-rational", {"alpha": 1, "beta": 1, "n": 2, "gamma": 1}, 0.05, 24)
    assert m.verdict.verdict == "convergent"


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_pole_family_converges(n):
    m = formal_graph_series("linear-pole", {"alpha": 1, "beta": 1, "n": n}, 0.1, 24)
    assert m.verdict.verdict == "convergent"
    assert not m.discrepancy["detected"]


def test_general_graph_series_reproduces_factorial_growth():
    s = build_system({"family": "general", "f": "z + w", "g": "w^2"})
    m = graph_series(s, 0.1, 16)
    for k in range(15):
        assert m.series[k + 1] == pytest.approx(-(0.1**k) * math.factorial(k), rel=1e-12)
    assert m.verdict.verdict == "divergent"
    assert m.notes


def test_general_graph_series_polynomial_case():
    s = build_system({"family": "general", "f": "z + w", "g": "w"})
    m = graph_series(s, 0.1, 8)
    assert m.series[1] == pytest.approx(-1 / (1 - 0.1))
    assert m.verdict.verdict == "convergent"
