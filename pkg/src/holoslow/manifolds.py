"""Invariant manifolds of the explicit families: closed forms, level sets and formal series.

Graphs are ``z = h(w)`` (``"z-of-w"``) unless stated otherwise. For the
linear fast field ``eps z' = alpha z + beta w`` with ``w' = g(w)`` a graph is
invariant exactly when ``alpha h + beta w = eps h'(w) g(w)``; matching this
degree by degree is the authoritative way coefficients are produced here.
Printed product formulas are evaluated alongside and compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as ex
from .errors import (
    EvalPole,
    FactorizationMismatch,
    FamilyParamError,
    RecurrenceBreakdown,
    TooFewCoefficients,
)
from .primitives import (
    Primitive,
    check_reciprocal,
    primitive_catalog,
    primitive_from_expr,
)
from .series import ConvergenceVerdict, Series1, radius_estimate, series2_from_expr
from .systems import CoupledSpec, SystemSpec, parse_complex

__all__ = [
    "GraphManifold",
    "ImplicitManifold",
    "Primitive",
    "coupled_implicit",
    "coupled_invariance_defect",
    "coupled_manifold",
    "exact_linear_slope",
    "formal_graph_series",
    "graph_series",
    "primitive_catalog",
    "primitive_from_expr",
    "separable_from_system",
    "separable_manifold",
    "uncoupled_power_graph",
]

FORMAL_FAMILIES = ("linear-wn", "linear-rational", "linear-linear", "linear-pole")
PRODUCT_RTOL = 1e-10
PRODUCT_KMAX = 10
FACTOR_RTOL = 1e-8


@dataclass
class ImplicitManifold:
    """Level set ``H(z, w) = 0`` with its gradient ``(dH/dz, dH/dw)``."""

    H: Callable
    grad: Callable
    eps: float
    domain: dict = field(default_factory=dict)
    kind: str = "implicit"
    solve_z: Callable | None = None  # w -> z on the level set, when available

    def __call__(self, z, w):
        return self.H(z, w)

    def rank_check(self, points) -> float:
        """Smallest gradient norm over ``points`` of the level set; must be nonzero."""
        norms = [math.hypot(*(abs(complex(c)) for c in self.grad(z, w))) for z, w in points]
        return float(min(norms))

    def to_json(self) -> dict:
        return {"kind": self.kind, "eps": self.eps, "domain": dict(self.domain)}


@dataclass
class GraphManifold:
    """A graph ``z = h(w)`` or ``w = h(z)`` from a closed form or a recurrence."""

    direction: str
    fn: Callable | None
    eps: float
    provenance: str
    series: Series1 | None = None
    verdict: ConvergenceVerdict | None = None
    family: str = ""
    params: dict = field(default_factory=dict)
    closed_form: dict = field(default_factory=dict)  # index -> product-formula value
    discrepancy: dict = field(default_factory=dict)
    asymptotic_only: bool = False
    domain: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __call__(self, x):
        if self.fn is None:
            raise ValueError("this manifold has no evaluator")
        return self.fn(x)

    def coefficients(self) -> dict:
        if self.series is None:
            return {}
        return {k: complex(c) for k, c in enumerate(self.series.coeffs) if c != 0}

    def consistency_check(self, n: int = 10) -> float:
        """Max gap between evaluator and series on ``n`` points within half the radius."""
        if self.fn is None or self.series is None:
            return 0.0
        r = 0.5 if self.verdict is None or not math.isfinite(self.verdict.radius) else 0.5 * self.verdict.radius
        r = min(r, 0.5)
        pts = r * np.exp(2j * np.pi * np.arange(n) / n) * np.linspace(0.3, 1.0, n)
        return float(max(abs(complex(self.fn(p)) - self.series(p)) for p in pts))

    def to_json(self) -> dict:
        d = {
            "direction": self.direction,
            "eps": self.eps,
            "provenance": self.provenance,
            "family": self.family,
            "params": self.params,
            "asymptotic_only": self.asymptotic_only,
            "notes": list(self.notes),
        }
        if self.series is not None:
            d["coefficients"] = [[k, c] for k, c in sorted(self.coefficients().items())]
        if self.closed_form:
            d["closed_form"] = [[k, c] for k, c in sorted(self.closed_form.items())]
        if self.discrepancy:
            d["discrepancy"] = self.discrepancy
        if self.verdict is not None:
            d["verdict"] = self.verdict.to_json()
        if self.domain:
            d["domain"] = self.domain
        return d


# ---------------------------------------------------------------------------
# separable family


def separable_manifold(eta, kappa, F: Primitive, G: Primitive, eps: float, *, f=None, g=None,
                       seed: int = 0, radius: float = 1.0) -> ImplicitManifold:
    """Level set ``H = G(w) - eps F(z)`` for ``g/f = eta(z) kappa(w)``.

    ``F' = eta`` and ``G' = 1/kappa`` are checked at 20 domain points
    (:class:`PrimitiveMismatch`); when ``f`` and ``g`` are given, the
    factorisation is checked too (:class:`FactorizationMismatch`).
    """
    eta, kappa = ex.as_expr(eta), ex.as_expr(kappa)
    eta_c, kappa_c = ex.compile_expr(eta), ex.compile_expr(kappa)
    eta_fn = lambda z: eta_c(z, 0.0)  # noqa: E731
    kappa_fn = lambda w: kappa_c(0.0, w)  # noqa: E731
    rng = np.random.default_rng(seed)
    zs = F.sample(rng, 20, radius)
    ws = G.sample(rng, 20, radius)
    check_reciprocal(F, lambda z: 1.0 / np.asarray(eta_fn(z)), zs, "F")
    check_reciprocal(G, kappa_fn, ws, "G")
    if f is not None and g is not None:
        fc, gc = ex.compile_expr(ex.as_expr(f)), ex.compile_expr(ex.as_expr(g))
        try:
            lhs = np.asarray(gc(zs, ws), dtype=complex) / np.asarray(fc(zs, ws), dtype=complex)
        except EvalPole as err:
            raise FactorizationMismatch(f"f vanishes at a sample point: {err}") from err
        rhs = np.asarray(eta_fn(zs)) * np.asarray(kappa_fn(ws))
        rel = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
        if rel.max() > FACTOR_RTOL:
            i = int(np.argmax(rel))
            raise FactorizationMismatch(f"g/f != eta*kappa at (z, w)=({zs[i]}, {ws[i]}): rel err {rel[i]:.3g}")
    eps = float(eps)

    def H(z, w):
        return G(w) - eps * F(z)

    def grad(z, w):
        return (-eps * eta_fn(z), 1.0 / kappa_fn(w))

    dom = {"excluded_ray": G.branch_ray if G.branch_ray is not None else F.branch_ray,
           "excludes_origin": bool(F.excludes_origin or G.excludes_origin), "radius": radius}
    return ImplicitManifold(H, grad, eps, dom, "separable")


def separable_from_system(sys: SystemSpec, eps: float, seed: int = 0) -> ImplicitManifold:
    """Separable level set of an uncoupled system: ``eta = 1/f(z)``, ``kappa = g(w)``."""
    if sys.separable is None:
        raise FamilyParamError("system has no separable primitives")
    F, G = sys.separable
    eta = ex.mk_div(ex.ONE, sys.f)
    return separable_manifold(eta, sys.g, F, G, eps, f=sys.f, g=sys.g, seed=seed, radius=sys.window_radius)


def uncoupled_power_graph(n: int, G: Primitive, eps: float) -> GraphManifold:
    """``z = (eps/((1-n) G(w)))^(1/(n-1))`` on ``G(w) = eps F(z)`` with ``f = z^n``.

    Uses the principal root; for ``f = z^2``, ``g = w^2`` this is ``z = eps w``.
    """
    if n < 2:
        raise FamilyParamError("the power graph needs n >= 2")
    eps = float(eps)

    def h(w):
        w = np.asarray(w, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            base = eps / ((1 - n) * np.asarray(G(w), dtype=complex))
            out = base ** (1.0 / (n - 1)) if n > 2 else base
        out = np.where(np.isfinite(out), out, 0.0)  # G has a pole where the graph meets z = 0
        return complex(out) if out.ndim == 0 else out

    return GraphManifold("z-of-w", h, eps, "closed-form", family="uncoupled",
                         params={"n": n, "G": G.to_json()})


# ---------------------------------------------------------------------------
# coupled family


def coupled_manifold(c: CoupledSpec, eps: float) -> GraphManifold:
    """``z = h(w) = -(beta/alpha^2)(alpha G(w) + eps)``."""
    eps = float(eps)
    k = c.beta / c.alpha**2
    al = c.alpha
    G = c.G

    def h(w):
        return -k * (al * G(w) + eps)

    dom = {"excluded_ray": G.branch_ray, "excludes_origin": G.excludes_origin}
    return GraphManifold("z-of-w", h, eps, "closed-form", family="SF3-coupled",
                         params={"alpha": c.alpha, "beta": c.beta}, domain=dom)


def coupled_implicit(c: CoupledSpec, eps: float) -> ImplicitManifold:
    """``H = z + (beta/alpha^2)(alpha G(w) + eps)`` with gradient ``(1, beta G'(w)/alpha)``."""
    eps = float(eps)
    k = c.beta / c.alpha**2
    al = c.alpha
    G = c.G

    def H(z, w):
        return z + k * (al * G(w) + eps)

    def grad(z, w):
        return (1.0 + 0j, c.beta * G.deriv(w) / al)

    m = coupled_manifold(c, eps)
    dom = {"excluded_ray": G.branch_ray, "excludes_origin": G.excludes_origin}
    return ImplicitManifold(H, grad, eps, dom, "coupled", solve_z=m.fn)


def coupled_invariance_defect(c: CoupledSpec, eps: float, ws) -> np.ndarray:
    """``dH/dz * z' + dH/dw * w'`` at the graph points over ``ws``; zero up to rounding."""
    ws = np.asarray(ws, dtype=complex)
    imp = coupled_implicit(c, eps)
    zs = imp.solve_z(ws)
    zdot = (c.alpha * zs + c.beta * c.G(ws)) / eps
    wdot = c.g_fn()(ws)
    hz, hw = imp.grad(zs, ws)
    return np.abs(hz * zdot + hw * wdot)


# ---------------------------------------------------------------------------
# formal series of the linear fast-field families


def _params(family: str, params: dict) -> dict:
    p = dict(params)
    out: dict = {}
    need = {"linear-linear": "abcd"}.get(family)
    if need is not None:
        for k in need:
            if k not in p:
                raise FamilyParamError(f"{family} needs parameter {k!r}")
            out[k] = parse_complex(p[k], k)
        if out["a"] == 0:
            raise FamilyParamError("linear-linear needs a != 0")
        return out
    for k in ("alpha", "beta", "n"):
        if k not in p:
            raise FamilyParamError(f"{family} needs parameter {k!r}")
    out["alpha"] = parse_complex(p["alpha"], "alpha")
    out["beta"] = parse_complex(p["beta"], "beta")
    n = p["n"]
    lo = 1 if family == "linear-pole" else 2
    if isinstance(n, bool) or not float(n).is_integer() or int(n) < lo:
        raise FamilyParamError(f"{family} needs integer n >= {lo}, got {n!r}")
    out["n"] = int(n)
    if family == "linear-rational":
        out["gamma"] = parse_complex(p.get("gamma", 1.0), "gamma")
        if out["gamma"] == 0:
            raise FamilyParamError("linear-rational needs gamma != 0")
    if out["beta"] == 0:
        raise FamilyParamError(f"{family} needs beta != 0")
    return out


def _recurrence(family: str, p: dict, eps: float, M: int, renormalize: bool = False) -> np.ndarray:
    """Coefficients ``a_0..a_M``.

    With ``renormalize`` the whole array is rescaled whenever a coefficient
    passes 1e200. Beyond the inhomogeneous start the recurrences are linear
    and homogeneous, so ratios between coefficients survive the rescaling;
    only the tail is meaningful afterwards.
    """
    a = np.zeros(M + 1, dtype=complex)
    if family == "linear-pole":
        al, be, n = p["alpha"], p["beta"], p["n"]
        # eps (d+1) a_{d+1} = alpha a_{d-n} + beta [d = n+1]
        for i in range(1, M + 1):
            prev = a[i - n - 1] if i - n - 1 >= 0 else 0j
            a[i] = (al * prev + (be if i == n + 2 else 0)) / (eps * i)
            if renormalize and abs(a[i]) > 1e200:
                a /= abs(a[i])
        return a
    al, be, n = p["alpha"], p["beta"], p["n"]
    if abs(al) < 1e-300:
        raise RecurrenceBreakdown("alpha vanishes; the recurrence divides by alpha")
    gam = p.get("gamma")
    for j in range(1, M + 1):
        m = j - n + 1
        prev = a[m] if m >= 1 else 0j
        if family == "linear-wn":
            # alpha a_j + beta [j = 1] = eps (j-n+1) a_{j-n+1}
            a[j] = (eps * m * prev - (be if j == 1 else 0)) / al
        else:
            # (alpha h + beta w)(1 + w^(n-1)) = eps gamma w^n h'
            src = be * ((j == 1) + (j == n))
            a[j] = ((eps * gam * m - al) * prev - src) / al
        if renormalize and j > n and abs(a[j]) > 1e200:
            a /= abs(a[j])
    return a


def _product_formula(family: str, p: dict, eps: float, M: int) -> dict:
    """Coefficients as printed in closed product form, for support index ``k <= 10``."""
    out: dict = {}
    if family == "linear-pole":
        al, be, n = p["alpha"], p["beta"], p["n"]
        for k in range(1, PRODUCT_KMAX + 1):
            i = k * n + k + 1
            if i > M:
                break
            prod = math.prod(j * n + j + 1 for j in range(1, k + 1))
            out[i] = al ** (k - 1) * be / (eps**k * prod)
        return out
    al, be, n = p["alpha"], p["beta"], p["n"]
    out[1] = -be / al
    for k in range(1, PRODUCT_KMAX + 1):
        i = k * n - (k - 1)
        if i > M:
            break
        if family == "linear-wn":
            prod = math.prod((j - 1) * n - (j - 2) for j in range(2, k + 1))
            out[i] = -(be**k) * eps**k * prod / al ** (k + 1)
        else:
            gam = p["gamma"]
            prod = np.prod([al - ((j - 1) * n - (j - 2)) * gam * eps for j in range(2, k + 1)])
            out[i] = -be * gam * eps * complex(prod) / al ** (k + 1)
    return out


def _compare(rec: np.ndarray, closed: dict) -> dict:
    diffs = {}
    for i, v in closed.items():
        r = complex(rec[i])
        scale = max(abs(r), abs(v), 1e-300)
        diffs[i] = abs(r - v) / scale
    bad = sorted(i for i, d in diffs.items() if d > PRODUCT_RTOL)
    return {
        "detected": bool(bad),
        "indices": bad,
        "max_rel_diff": max(diffs.values(), default=0.0),
        "compared": sorted(diffs),
    }


def _support_step(family: str, n: int) -> int:
    return n + 1 if family == "linear-pole" else n - 1


def formal_graph_series(family: str, params: dict, eps: float, N: int = 24, window: int = 8) -> GraphManifold:
    """Graph ``z = h(w)`` of the linear fast-field families by degree matching.

    ``linear-wn``: ``g = w^n``; ``linear-rational``: ``g = gamma w^n/(1+w^(n-1))``;
    ``linear-pole``: ``g = 1/w^n``; ``linear-linear``: ``eps z' = a z + b w``,
    ``w' = c z + d w`` with reduced field ``sigma w``, ``sigma = (ad - bc)/a``.

    The convergence verdict is taken from an internally extended series so
    that the ratio window always sees enough nonzero coefficients.
    """
    if family not in FORMAL_FAMILIES:
        raise FamilyParamError(f"unknown family {family!r}; expected one of {FORMAL_FAMILIES}")
    eps = float(eps)
    if not eps > 0:
        raise FamilyParamError("eps must be positive")
    p = _params(family, params)
    if family == "linear-linear":
        return _linear_linear(p, eps, N)

    step = _support_step(family, p["n"])
    M = max(N, step * (PRODUCT_KMAX + 1) + 2)
    rec = _recurrence(family, p, eps, M)
    if not np.all(np.isfinite(rec)):
        raise RecurrenceBreakdown("recurrence overflowed; lower N")
    closed = _product_formula(family, p, eps, M)
    disc = _compare(rec, closed)
    verdict = _tail_verdict(family, p, eps, step, window)
    series = Series1(rec[: N + 1], "w")
    asym = verdict.verdict != "convergent"
    fn = Series1(rec, "w") if not asym else series
    notes = []
    if disc["detected"]:
        notes.append("printed product formula disagrees with degree matching at indices "
                     f"{disc['indices']}; the recurrence is used")
    if asym:
        notes.append("formal series only: partial sums are asymptotic approximations, not a holomorphic graph")
    return GraphManifold("z-of-w", fn, eps, "recurrence", series, verdict, family, p,
                         {k: v for k, v in closed.items() if k <= N}, disc, asym, notes=notes)


def _tail_verdict(family: str, p: dict, eps: float, step: int, window: int) -> ConvergenceVerdict:
    """Ratio verdict on a series long enough to be past the start-up transient.

    For the rational family the per-step ratio ``|eps gamma m - alpha|/|alpha|``
    first shrinks and only grows once ``eps |gamma| m`` exceeds ``|alpha|``,
    so the series is extended well beyond that point.
    """
    terms = 2 * window + 2
    if family == "linear-rational":
        terms += int(math.ceil(4 * abs(p["alpha"]) / (eps * abs(p["gamma"]) * step)))
    terms = min(terms, 20000)
    M = step * terms + 2
    rec = _recurrence(family, p, eps, M, renormalize=True)
    if int(np.count_nonzero(rec[M // 2:])) < window:
        return ConvergenceVerdict("convergent", math.inf, method="terminating", window=window, entire=True)
    return radius_estimate(Series1(rec, "w"), window)


def _linear_linear(p: dict, eps: float, N: int) -> GraphManifold:
    a, b, c, d = p["a"], p["b"], p["c"], p["d"]
    sigma = (a * d - b * c) / a
    for j in range(1, N + 1):
        if abs(a - eps * sigma * j) < 1e-12 * max(1.0, abs(a)):
            raise RecurrenceBreakdown(f"a - eps*sigma*{j} vanishes; graph coefficient {j} is undetermined")
    lam1 = -b / (a - eps * sigma)
    coeffs = np.zeros(N + 1, dtype=complex)
    coeffs[1] = lam1
    series = Series1(coeffs, "w")
    notes = []
    exact = exact_linear_slope(a, b, c, d, eps)
    if c != 0:
        notes.append(f"with c != 0 the exactly invariant line has slope {exact} "
                     "(the graph here uses the reduced field sigma*w)")
    verdict = ConvergenceVerdict("convergent", math.inf, method="closed-form", entire=True)
    return GraphManifold("z-of-w", lambda w: lam1 * w, eps, "recurrence", series, verdict, "linear-linear",
                         {**p, "sigma": sigma, "lambda1": lam1, "exact_slope": exact},
                         {1: lam1}, {"detected": False, "indices": [], "max_rel_diff": 0.0, "compared": [1]},
                         notes=notes)


def exact_linear_slope(a, b, c, d, eps: float) -> complex:
    """Slope of the invariant line ``z = lam w`` that tends to ``-b/a`` as ``eps -> 0``.

    Solves ``eps c lam^2 + (eps d - a) lam - b = 0``.
    """
    if c == 0:
        return -b / (a - eps * d)
    roots = np.roots([eps * c, eps * d - a, -b])
    return complex(roots[np.argmin(np.abs(roots + b / a))])


# ---------------------------------------------------------------------------
# general family


def graph_series(sys: SystemSpec, eps: float, N: int = 24, window: int = 8) -> GraphManifold:
    """Formal graph ``z = h(w)``, ``h(0) = 0``, of ``f(h, w) = eps h' g(h, w)`` by degree matching.

    Needs ``f(0,0) = g(0,0) = 0`` and ``df/dz(0,0) != 0``. The degree-``j``
    coefficient of the defect is affine in ``h_j`` for ``j >= 2`` and
    quadratic at ``j = 1`` (the root continuing ``-f_w/f_z`` is chosen).
    """
    eps = float(eps)
    try:
        fs = series2_from_expr(sys.f, N + 1)
        gs = series2_from_expr(sys.g, N + 1)
    except EvalPole as err:
        raise RecurrenceBreakdown(f"f and g must be holomorphic at the origin: {err}") from err
    if abs(fs[0, 0]) > 1e-14 or abs(gs[0, 0]) > 1e-14:
        raise RecurrenceBreakdown("graph series through the origin needs f(0,0) = g(0,0) = 0")
    if abs(fs[1, 0]) < 1e-12:
        raise RecurrenceBreakdown("df/dz vanishes at the origin")
    coeffs = np.zeros(N + 2, dtype=complex)
    w = Series1.variable(N + 1, "w")

    def defect(j: int, value: complex) -> complex:
        c = coeffs.copy()
        c[j] = value
        h = Series1(c, "w")
        r = fs.compose(h, w) - eps * h.deriv() * gs.compose(h, w).truncate(N)
        return r[j]

    r0, r1, rm = defect(1, 0), defect(1, 1), defect(1, -1)
    qa = (r1 + rm) / 2 - r0
    qb = (r1 - rm) / 2
    guess = -fs[0, 1] / fs[1, 0]
    if abs(qa) < 1e-300:
        if abs(qb) < 1e-14:
            raise RecurrenceBreakdown("degree-1 defect does not depend on the slope")
        coeffs[1] = -r0 / qb
    else:
        roots = np.roots([qa, qb, r0])
        coeffs[1] = roots[np.argmin(np.abs(roots - guess))]
    for j in range(2, N + 1):
        c0 = defect(j, 0)
        slope = defect(j, 1) - c0
        if abs(slope) < 1e-12:
            raise RecurrenceBreakdown(f"coefficient {j} is undetermined (its multiplier vanishes)")
        coeffs[j] = -c0 / slope
        if not np.isfinite(coeffs[j]):
            raise RecurrenceBreakdown(f"coefficient {j} overflowed")
    series = Series1(coeffs[: N + 1], "w")
    m = min(window, max(4, N // 2))
    try:
        verdict = radius_estimate(series, m)
    except TooFewCoefficients:  # polynomial graph
        verdict = ConvergenceVerdict("convergent", math.inf, method="terminating", window=m, entire=True)
    asym = verdict.verdict != "convergent"
    notes = ["formal series only: no holomorphic graph manifold"] if verdict.verdict == "divergent" else []
    return GraphManifold("z-of-w", series, eps, "recurrence", series, verdict, sys.family,
                         {}, asymptotic_only=asym, notes=notes)
