import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_sf2, unit_disc
from holoslow.briot_bouquet import (
    BBProblem,
    bb_residual,
    bb_solve,
    fenichel_series,
    original_residual,
    reduced_vector_field,
    slow_dynamics_on_manifold,
)
from holoslow.dynamics import classify_linear_type
from holoslow.errors import DegenerateAlpha, FamilyInvariantViolated, Resonance, SeriesOverflowWarning
from holoslow.series import Series2
from holoslow.systems import SF2Spec

VARS = ("z", "phi")


def test_linear_problem():
    d = bb_solve(BBProblem(-0.9, 0.05, Series2.zeros(6, VARS)), 6)
    assert d[1] == pytest.approx(0.05 / 1.9)
    assert np.all(d.coeffs[2:] == 0)


def test_resonance_detected():
    with pytest.raises(Resonance) as err:
        bb_solve(BBProblem(2.0, 1.0, Series2.zeros(4, VARS)), 4)
    assert err.value.k == 2


def test_quadratic_problem():
    Q = Series2.from_dict({(0, 2): 1.0}, 3, VARS)
    d = bb_solve(BBProblem(-1.0, 1.0, Q), 3)
    np.testing.assert_allclose(d.coeffs[1:], [1 / 2, 1 / 12, 1 / 48])


def test_problem_rejects_linear_q():
    with pytest.raises(FamilyInvariantViolated):
        BBProblem(-1.0, 1.0, Series2.from_dict({(1, 0): 1.0}, 3, VARS))


def test_overflow_truncates_with_warning():
    # lam close to (but not within tolerance of) 1 inflates d_1 past the overflow threshold
    with pytest.warns(SeriesOverflowWarning):
        d = bb_solve(BBProblem(1 - 1e-8, 1e300, Series2.zeros(4, VARS)), 4)
    assert d.order == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bb_residual_property(seed):
    rng = np.random.default_rng(seed)
    lam = complex(unit_disc(rng)) * 3 - 1.5
    if min(abs(lam - k) for k in range(1, 13)) < 0.05:
        lam += 0.3j
    N = 12
    terms = {(s, l): complex(unit_disc(rng)) for s in range(5) for l in range(5) if 2 <= s + l <= 4}
    p = BBProblem(lam, complex(unit_disc(rng)), Series2.from_dict(terms, N, VARS))
    d = bb_solve(p, N)
    scale = max(1.0, d.max_abs()) ** 4
    assert np.max(np.abs(bb_residual(p, d)[1:])) < 1e-10 * scale


# the SF2 pipeline


def test_no_remainders_gives_zero_graph():
    s = SF2Spec.from_coeffs(1.3, -0.5j, {}, {})
    m = fenichel_series(s, 0.1, 12)
    assert np.all(m.h.coeffs == 0)


def test_toy_system():
    s = SF2Spec.from_coeffs(1, 1j, {}, {(2, 0): 1})
    m = fenichel_series(s, 0.1, 12)
    assert m.lam == pytest.approx(0.1j - 1)
    assert m.mu == pytest.approx(0.1)
    assert m.h[2] == pytest.approx(0.1 / (2 - 0.1j), abs=1e-15)
    assert m.h[0] == 0 and m.h[1] == 0
    assert m.ok


def test_graph_over_slow_variable_for_linear_system():
    a, b, d, eps = 1.5 - 0.5j, 0.7 + 0.2j, -0.4 + 1j, 0.1
    s = SF2Spec.from_coeffs(a, d, {}, {}, gamma=b)
    m = fenichel_series(s, eps, 16)
    assert m.direction == "z-of-w"
    assert abs(m.h[1] - (-b / (a - eps * d))) < 1e-12
    assert np.max(np.abs(m.h.coeffs[2:])) < 1e-12


def test_degenerate_alpha():
    s = SF2Spec.from_coeffs(0, 1, {}, {(2, 0): 1})
    with pytest.raises(DegenerateAlpha):
        fenichel_series(s, 0.1, 6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.05, 0.1]))
def test_original_residual_small(seed, eps):
    s = random_sf2(np.random.default_rng(seed))
    m = fenichel_series(s, eps, 16)
    assert m.relative_residual < 1e-10
    assert m.h[0] == 0 and m.h[1] == 0


def test_residual_detects_wrong_graph():
    s = SF2Spec.from_coeffs(1, 1j, {}, {(2, 0): 1})
    m = fenichel_series(s, 0.1, 8)
    bad = m.h + m.h.shift(1) * 1e-3
    assert np.max(np.abs(original_residual(s, 0.1, bad.truncate(8), "w-of-z"))) > 1e-6


def test_reduced_field_examples():
    s = SF2Spec.from_coeffs(1, 2j, {}, {})
    np.testing.assert_allclose(reduced_vector_field(s, 6).coeffs, [0, 2j, 0, 0, 0, 0, 0])
    s = SF2Spec.from_coeffs(1, 0.5, {(0, 2): 1}, {})
    np.testing.assert_allclose(reduced_vector_field(s, 6).coeffs, [0, 0.5, 0, 0, 0, 0, 0])
    s = SF2Spec.from_coeffs(1, 1, {}, {(1, 1): 1})
    np.testing.assert_allclose(reduced_vector_field(s, 6).coeffs, [0, 1, 0, 0, 0, 0, 0])


def test_reduced_field_slope_is_beta():
    s = random_sf2(np.random.default_rng(11))
    assert reduced_vector_field(s, 10)[1] == s.beta


def test_slow_dynamics_examples():
    s = SF2Spec.from_coeffs(1, 1j, {}, {(2, 0): 1})
    g = slow_dynamics_on_manifold(s, 0.1, 6)
    np.testing.assert_allclose(g.coeffs, [0, 10, 0, 0, 0, 0, 0], atol=1e-12)
    s = SF2Spec.from_coeffs(1, 1j, {(2, 0): 1}, {})
    g = slow_dynamics_on_manifold(s, 0.1, 6)
    assert g[1] == pytest.approx(10) and g[2] == pytest.approx(10)


@pytest.mark.parametrize("alpha, beta", [(1j, 2j), (-2.0, -0.5), (1 + 1j, -2 + 0.5j)])
def test_slow_dynamics_keeps_type_under_h(alpha, beta):
    s = SF2Spec.from_coeffs(alpha, beta, {(2, 0): 0.3}, {(0, 2): 0.2, (1, 1): -0.1})
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        g = slow_dynamics_on_manifold(s, 0.05, 8)
    assert g[1] == pytest.approx(alpha / 0.05, rel=1e-15)
    assert classify_linear_type(g[1]) == classify_linear_type(beta)
