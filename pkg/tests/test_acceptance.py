"""Acceptance criteria at their stated tolerances; run with ``pytest -s`` to see the PASS/FAIL lines."""

import math

import numpy as np
import pytest

from conftest import random_sf2
from holoslow import expr as ex
from holoslow.briot_bouquet import fenichel_series
from holoslow.dynamics import classify_linear_type, integrate_full, integrate_reduced
from holoslow.manifolds import coupled_implicit, formal_graph_series
from holoslow.primitives import primitive_from_expr
from holoslow.systems import CoupledSpec, SF2Spec, build_system
from holoslow.verify import (
    attraction_report,
    coupled_pair,
    hausdorff_scaling,
    linear_stability_table,
    persistence_report,
    uncoupled_pair,
)

EPS_GRID = [0.2, 0.1, 0.05, 0.025]


def check(n, name, ok, detail=""):
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {n:2d}: {name} {detail}".rstrip())
    assert ok, f"criterion {n} failed: {detail}"


def test_01_factorial_coefficients():
    eps, N = 0.1, 22
    m = formal_graph_series("linear-wn", {"alpha": 1, "beta": 1, "n": 2}, eps, N)
    worst = 0.0
    for k in range(19):
        exact = -(eps**k) * math.factorial(k)
        worst = max(worst, abs(m.series[k + 1] - exact) / abs(exact))
    ok = worst < 1e-12 and m.verdict.verdict == "divergent"
    check(1, "factorial coefficients and divergence", ok, f"max rel err {worst:.2e}, verdict {m.verdict.verdict}")


def test_02_random_sf2_residuals():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        s = random_sf2(rng, degree=4)
        for eps in (0.05, 0.1):
            worst = max(worst, fenichel_series(s, eps, 16).relative_residual)
    check(2, "SF2 invariance residual through degree 16", worst < 1e-10, f"max scaled residual {worst:.2e}")


def test_03_linear_slope():
    rng = np.random.default_rng(3)
    worst_slope = worst_high = 0.0
    eps = 0.1
    for _ in range(20):
        a, b, d = (complex(*rng.uniform(-2, 2, 2)) for _ in range(3))
        if abs(a) < 0.5:
            a += 1.0
        m = fenichel_series(SF2Spec.from_coeffs(a, d, {}, {}, gamma=b), eps, 16)
        worst_slope = max(worst_slope, abs(m.h[1] - (-b / (a - eps * d))))
        worst_high = max(worst_high, float(np.max(np.abs(m.h.coeffs[2:]))))
    ok = worst_slope < 1e-12 and worst_high < 1e-12
    check(3, "linear system slope", ok, f"slope err {worst_slope:.2e}, higher coeffs {worst_high:.2e}")


def test_04_example_level_set():
    s = build_system({"family": "SF3", "f": "i*z + w^2", "g": "1/(2*w)", "G": "w^2"})
    eps = 0.1
    tr = integrate_full(s, eps, (eps + 1j, 1.0), (0, 2), t_eval=np.linspace(0, 2, 201))
    H = coupled_implicit(s.coupled, eps)
    worst = max(abs(H(z, w)) for z, w in zip(tr.z, tr.w))
    check(4, "level set conserved on [0, 2]", worst < 1e-8, f"max |H| {worst:.2e}")


def test_05_attraction():
    s = build_system({"family": "SF3", "f": "i*z + w^2", "g": "1/(2*w)", "G": "w^2"})
    reps = {eps: attraction_report(s, eps, span=0.1) for eps in (0.1, 0.05, 0.02)}
    dev = max(r.max_rel_deviation for r in reps.values())
    ratios = [reps[0.05].measured_decay / reps[0.1].measured_decay]
    ok = dev < 0.02 and all(abs(q - 2) < 0.1 for q in ratios)
    check(5, "attraction rate", ok, f"max deviation {dev:.2e}, decay ratio {ratios[0]:.4f}")


def test_06_hausdorff_scaling():
    worst_slope = worst_const = 0.0
    for alpha, beta in ((1j, 1), (1 + 1j, 2), (2 - 1j, 0.5j)):
        c = CoupledSpec(alpha, beta, primitive_from_expr("w^2"), ex.parse_expr("1/(2*w)"))
        r = hausdorff_scaling(coupled_pair(c), EPS_GRID)
        worst_slope = max(worst_slope, abs(r.slope - 1))
        worst_const = max(worst_const, abs(r.constant / abs(beta / alpha**2) - 1))
    s = build_system({"family": "uncoupled", "f": "z^2", "g": "w^2"})
    sep = hausdorff_scaling(uncoupled_pair(2, s.separable[1]), EPS_GRID)
    ok = worst_slope < 0.05 and worst_const < 0.01 and abs(sep.slope - 1) < 0.05
    check(6, "Hausdorff distance is linear in eps", ok,
          f"coupled slope err {worst_slope:.2e}, constant err {worst_const:.2e}, separable slope {sep.slope:.4f}")


def test_07_persistence_matrix():
    pairs = {"center": (1j, -2j), "focus": (1 + 1j, -2 + 3j), "node": (1.0, -0.5)}
    bad = []
    for kind, (alpha, beta) in pairs.items():
        r = persistence_report(SF2Spec.from_coeffs(alpha, beta, {(2, 0): 0.3}, {(0, 2): 0.2}), [0.1, 0.05])
        if not (r.hypothesis_h and r.persistence and r.reduced.kind == kind):
            bad.append(kind)
    lead = 0.0
    for n in (1, 2, 3):
        s = build_system({"family": "SF4", "params": {"alpha": 1, "beta": 1, "normal_form": {"kind": "pole", "n": n}}})
        r = persistence_report(s, [0.1, 0.05])
        if not (r.persistence and r.reduced.label == f"pole-of-order {n}"):
            bad.append(f"pole {n}")
        for e, p in zip([0.1, 0.05], r.perturbed):
            lead = max(lead, abs(p.witness["leading_coefficient"] - e))
    check(7, "type persistence", not bad and lead < 1e-10, f"failures {bad}, pole leading coeff err {lead:.2e}")


def test_08_global_verdicts():
    cases = [(1, 1, "global repelling point"), (-1, -1, "global attracting point"), (1, -1, "saddle point")]
    got = [linear_stability_table(complex(a), complex(s))[1] for a, s, _ in cases]
    check(8, "global linear verdicts", got == [v for *_, v in cases], f"{got}")


def test_09_modulus_and_timescales():
    tr = integrate_reduced("i*w", 0.7 + 0.2j, 20.0, t_eval=np.linspace(0, 20, 401))
    drift = float(np.max(np.abs(np.abs(tr.w) - abs(0.7 + 0.2j))))
    s = build_system({"family": "general", "f": "-(1+i)*z + w", "g": "i*w"})
    te = np.linspace(0, 1, 11)
    a = integrate_full(s, 0.05, (0.3, 1.0), (0, 1), t_eval=te, fast_threshold=0.0)
    b = integrate_full(s, 0.05, (0.3, 1.0), (0, 1), t_eval=te, fast_threshold=1.0)
    gap = float(max(np.max(np.abs(a.z - b.z)), np.max(np.abs(a.w - b.w))))
    check(9, "modulus conservation and slow/fast agreement", drift < 1e-9 and gap < 1e-8,
          f"|w| drift {drift:.2e}, slow/fast gap {gap:.2e}")


@pytest.mark.parametrize("beta", [1, 2])
def test_10_discrepancy_flag(beta):
    m = formal_graph_series("linear-wn", {"alpha": 1, "beta": beta, "n": 2}, 0.1, 16)
    check(10, f"discrepancy flag for beta={beta}", m.discrepancy["detected"] == (beta != 1),
          f"detected={m.discrepancy['detected']}")


def test_types_used_in_matrix_are_distinct():
    assert {classify_linear_type(x) for x in (1j, 1 + 1j, 1.0)} == {"center", "focus", "node"}
