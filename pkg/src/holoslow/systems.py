"""Slow-fast system data model.

A system is ``eps z' = f(z, w)``, ``w' = g(z, w)`` with holomorphic (here:
meromorphic expression) right-hand sides. Family tags select extra structure:

``general``          any ``f``, ``g``
``SF2-series``       ``eps z' = alpha z + gamma w + f~``, ``w' = beta w + g~`` with ``f~, g~ = O_2``
``SF3-coupled``      ``eps z' = alpha z + beta G(w)``, ``w' = g(w)`` with ``G' = 1/g``
``SF4-linear-fast``  ``eps z' = alpha z + beta w``, ``w' = g(w)`` with ``g`` a normal form
``uncoupled``        ``eps z' = f(z)``, ``w' = g(w)``
``linear-linear``    ``eps z' = a z + b w``, ``w' = c z + d w``

``gamma`` in the SF2 form is an extension: it is zero for the classical
family and lets linear systems with a slow-variable term in ``f`` be handled
by the graph pipeline over ``w``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as ex
from .errors import (
    DegenerateRoot,
    EvalPole,
    FamilyInvariantViolated,
    FamilyParamError,
    NewtonDivergence,
    SchemaError,
    ValidationError,
)
from .primitives import Primitive, primitive_catalog, primitive_from_json
from .series import DEFAULT_ORDER, Series2, series2_from_expr

FAMILIES = ("general", "SF2-series", "SF3-coupled", "SF4-linear-fast", "uncoupled", "linear-linear")
FAMILY_ALIASES = {
    "SF1": "general",
    "SF2": "SF2-series",
    "SF3": "SF3-coupled",
    "SF4": "SF4-linear-fast",
    "coupled": "SF3-coupled",
    "separable": "uncoupled",
}
NORMAL_FORM_KINDS = ("constant-1", "linear", "power", "pole", "rational")
INVARIANT_TOL = 1e-8
ROOT_TOL = 1e-10
DEGENERATE_TOL = 1e-10


def parse_complex(v, what: str = "value") -> complex:
    """A complex number from JSON: a number, ``[re, im]`` or an expression string like ``"1-2i"``."""
    if isinstance(v, bool):
        raise SchemaError(f"{what}: expected a number, got {v!r}")
    if isinstance(v, (int, float, complex)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        try:
            e = ex.parse_expr(v)
        except ValidationError as err:
            raise SchemaError(f"{what}: {err}") from err
        if isinstance(e, ex.Lit):
            return e.value
    raise SchemaError(f"{what}: expected a number, [re, im] or a literal string, got {v!r}")


# ---------------------------------------------------------------------------
# family data


@dataclass(frozen=True)
class NormalFormKind:
    """One of the normal forms ``1``, ``eta w``, ``w^n``, ``1/w^n``, ``gamma w^n/(1+w^(n-1))``."""

    kind: str
    n: int | None = None
    eta: complex | None = None
    gamma: complex | None = None

    def __post_init__(self):
        if self.kind not in NORMAL_FORM_KINDS:
            raise FamilyParamError(f"unknown normal-form kind {self.kind!r}; expected one of {NORMAL_FORM_KINDS}")
        if self.kind in ("power", "rational", "pole"):
            lo = 1 if self.kind == "pole" else 2
            if self.n is None or isinstance(self.n, bool) or int(self.n) != self.n or self.n < lo:
                raise FamilyParamError(f"{self.kind} normal form needs integer n >= {lo}, got {self.n!r}")
            object.__setattr__(self, "n", int(self.n))
        if self.kind == "linear":
            eta = complex(1.0 if self.eta is None else self.eta)
            if eta == 0:
                raise FamilyParamError("linear normal form needs eta != 0")
            object.__setattr__(self, "eta", eta)
        if self.kind == "rational":
            gam = complex(1.0 if self.gamma is None else self.gamma)
            if gam == 0:
                raise FamilyParamError("rational normal form needs gamma != 0")
            object.__setattr__(self, "gamma", gam)

    def g_expr(self) -> ex.Expr:
        w = ex.W
        if self.kind == "constant-1":
            return ex.ONE
        if self.kind == "linear":
            return ex.mk_mul(ex.Lit.of(self.eta), w)
        if self.kind == "power":
            return ex.Pow(w, self.n)
        if self.kind == "pole":
            return ex.Pow(w, -self.n)
        num = ex.mk_mul(ex.Lit.of(self.gamma), ex.Pow(w, self.n))
        return ex.Div(num, ex.mk_add(ex.ONE, ex.mk_pow(w, self.n - 1)))

    def primitive(self, ray: float = math.pi) -> Primitive:
        return primitive_catalog(self.kind, n=self.n, eta=self.eta, gamma=self.gamma, ray=ray)

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.n is not None:
            d["n"] = self.n
        if self.eta is not None:
            d["eta"] = self.eta
        if self.gamma is not None:
            d["gamma"] = self.gamma
        return d

    @classmethod
    def from_json(cls, d) -> "NormalFormKind":
        if not isinstance(d, dict) or "kind" not in d:
            raise SchemaError("normal_form must be an object with a 'kind'")
        eta = parse_complex(d["eta"], "normal_form.eta") if "eta" in d else None
        gam = parse_complex(d["gamma"], "normal_form.gamma") if "gamma" in d else None
        return cls(d["kind"], d.get("n"), eta, gam)


@dataclass(frozen=True)
class SF2Spec:
    """``eps z' = alpha z + gamma w + f~(z, w)``, ``w' = beta w + g~(z, w)``.

    ``f~`` holds the coefficients ``a_{s,l}`` and ``g~`` the ``b_{s,l}``; both
    must vanish for ``s + l <= 1``.
    """

    alpha: complex
    beta: complex
    f_tilde: Series2
    g_tilde: Series2
    gamma: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        object.__setattr__(self, "gamma", complex(self.gamma))
        for name, s in (("f~", self.f_tilde), ("g~", self.g_tilde)):
            for key in ((0, 0), (1, 0), (0, 1)):
                if s[key] != 0:
                    raise FamilyInvariantViolated(
                        f"{name} coefficient {key} = {s[key]} must vanish (nonlinear part is O_2)"
                    )

    @classmethod
    def from_coeffs(cls, alpha, beta, a: dict, b: dict, order: int | None = None, gamma=0j) -> "SF2Spec":
        deg = max([s + l for s, l in list(a) + list(b)] + [2])
        n = deg if order is None else order
        return cls(alpha, beta, Series2.from_dict(a, n), Series2.from_dict(b, n), gamma)

    @property
    def a(self) -> dict:
        return self.f_tilde.terms()

    @property
    def b(self) -> dict:
        return self.g_tilde.terms()

    def coefficient_scale(self) -> float:
        vals = [abs(self.alpha), abs(self.beta), abs(self.gamma)]
        vals += [abs(c) for c in self.a.values()] + [abs(c) for c in self.b.values()]
        return max([1.0] + vals)

    def f_expr(self) -> ex.Expr:
        lin = ex.mk_add(ex.mk_mul(ex.Lit.of(self.alpha), ex.Z), ex.mk_mul(ex.Lit.of(self.gamma), ex.W))
        return ex.mk_add(lin, series2_to_expr(self.f_tilde))

    def g_expr(self) -> ex.Expr:
        return ex.mk_add(ex.mk_mul(ex.Lit.of(self.beta), ex.W), series2_to_expr(self.g_tilde))

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "a": _terms_json(self.a),
            "b": _terms_json(self.b),
        }


def _terms_json(t: dict) -> list:
    return [[s, l, c] for (s, l), c in sorted(t.items())]


def series2_to_expr(s: Series2) -> ex.Expr:
    """Polynomial expression ``sum c[s,l] z^s w^l`` of a bivariate series."""
    out: ex.Expr = ex.ZERO
    for (i, j), c in sorted(s.terms().items()):
        mono = ex.mk_mul(ex.mk_pow(ex.Z, i), ex.mk_pow(ex.W, j))
        out = ex.mk_add(out, ex.mk_mul(ex.Lit.of(c), mono))
    return out


@dataclass(frozen=True)
class CoupledSpec:
    """``eps z' = alpha z + beta G(w)``, ``w' = g(w)`` with ``G' = 1/g``."""

    alpha: complex
    beta: complex
    G: Primitive
    g: ex.Expr

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        if self.alpha == 0 or self.beta == 0:
            raise FamilyInvariantViolated("coupled family needs alpha != 0 and beta != 0")

    def g_fn(self) -> Callable:
        f = ex.compile_expr(self.g)
        return lambda w: f(0.0, w)

    def check_primitive(self, rng: np.random.Generator, radius: float = 1.0, n: int = 20) -> float:
        """Max of ``|G'(w) g(w) - 1|`` at ``n`` domain samples; raises if above 1e-8."""
        pts = self.G.sample(rng, n, radius)
        try:
            defect = np.abs(self.G.deriv(pts) * self.g_fn()(pts) - 1.0)
        except EvalPole as err:
            raise FamilyInvariantViolated(f"g has a pole at a sample point: {err}") from err
        if defect.max() >= INVARIANT_TOL:
            i = int(np.argmax(defect))
            raise FamilyInvariantViolated(f"G'(w) g(w) != 1 at w={pts[i]}: defect {defect[i]:.3g}")
        return float(defect.max())

    def f_expr(self) -> ex.Expr | None:
        if self.G.expr is None:
            return None
        return ex.mk_add(ex.mk_mul(ex.Lit.of(self.alpha), ex.Z), ex.mk_mul(ex.Lit.of(self.beta), self.G.expr))

    def f_fn(self) -> Callable:
        a, b, G = self.alpha, self.beta, self.G
        return lambda z, w: a * z + b * G(w)

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "G": self.G.to_json(), "g": ex.to_string(self.g)}


@dataclass(frozen=True)
class SystemSpec:
    """A slow-fast system with its family tag and family data."""

    f: ex.Expr
    g: ex.Expr
    family: str = "general"
    eps: tuple = (0.1,)
    params: dict = field(default_factory=dict)
    window_radius: float = 1.0
    excluded_ray_angle: float | None = None
    sf2: SF2Spec | None = None
    coupled: CoupledSpec | None = None
    normal_form: NormalFormKind | None = None
    separable: tuple | None = None  # (F, G) primitives for the uncoupled family
    f_callable: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SchemaError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        eps = tuple(float(e) for e in self.eps)
        for e in eps:
            if not (0 < e <= 1) or not math.isfinite(e):
                raise SchemaError(f"eps values must lie in (0, 1], got {e}")
        object.__setattr__(self, "eps", eps)

    @property
    def f_fn(self) -> Callable:
        if self.f_callable is not None:
            return self.f_callable
        return ex.compile_expr(self.f)

    @property
    def g_fn(self) -> Callable:
        return ex.compile_expr(self.g)

    def dfdz(self) -> ex.Expr:
        return ex.diff_expr(self.f, "z")

    @property
    def linear(self) -> dict:
        """``a, b, c, d`` of the linear-linear family."""
        return {k: parse_complex(self.params[k], k) for k in "abcd"}

    def graph_family(self) -> str | None:
        """Formal-series family name for the SF4 and linear-linear cases."""
        if self.family == "linear-linear":
            return "linear-linear"
        if self.family == "SF4-linear-fast" and self.normal_form is not None:
            return {"power": "linear-wn", "rational": "linear-rational", "pole": "linear-pole",
                    "linear": "linear-linear"}.get(self.normal_form.kind)
        return None

    def graph_params(self) -> dict:
        """Parameters for :func:`holoslow.manifolds.formal_graph_series`."""
        fam = self.graph_family()
        if fam is None:
            raise FamilyParamError(f"family {self.family!r} has no formal graph series")
        if self.family == "linear-linear":
            return self.linear
        alpha = parse_complex(self.params["alpha"], "alpha")
        beta = parse_complex(self.params["beta"], "beta")
        nf = self.normal_form
        if fam == "linear-linear":
            return {"a": alpha, "b": beta, "c": 0j, "d": nf.eta}
        out = {"alpha": alpha, "beta": beta, "n": nf.n}
        if fam == "linear-rational":
            out["gamma"] = nf.gamma
        return out

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "f": ex.to_string(self.f),
            "g": ex.to_string(self.g),
            "eps": list(self.eps),
            "domain": {"window_radius": self.window_radius, "excluded_ray_angle": self.excluded_ray_angle},
        }


# ---------------------------------------------------------------------------
# construction from JSON


def _load(spec) -> dict:
    if isinstance(spec, (str, bytes)):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as err:
            raise SchemaError(f"malformed JSON: {err}") from err
    if not isinstance(spec, dict):
        raise SchemaError("system spec must be a JSON object")
    return spec


def _expr_field(d: dict, key: str, required: bool = True):
    if key not in d:
        if required:
            raise SchemaError(f"missing field {key!r}")
        return None
    v = d[key]
    if not isinstance(v, str):
        raise SchemaError(f"field {key!r} must be an expression string")
    try:
        return ex.parse_expr(v)
    except ValidationError as err:
        raise SchemaError(f"field {key!r}: {err}") from err


def _eps_field(d: dict) -> tuple:
    v = d.get("eps", [0.1])
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise SchemaError("eps must be a nonempty list of numbers")
    return tuple(float(x) for x in v)


def build_system(spec, *, seed: int = 0, order: int = DEFAULT_ORDER) -> SystemSpec:
    """Parse and validate a JSON system spec (a dict or JSON text).

    Raises :class:`SchemaError` for structural problems and
    :class:`FamilyInvariantViolated` when family structure does not hold.
    """
    d = _load(spec)
    fam = d.get("family")
    if not isinstance(fam, str):
        raise SchemaError("missing or non-string field 'family'")
    fam = FAMILY_ALIASES.get(fam, fam)
    if fam not in FAMILIES:
        raise SchemaError(f"unknown family {d['family']!r}")
    params = d.get("params", {}) or {}
    if not isinstance(params, dict):
        raise SchemaError("params must be an object")
    for key in ("G", "F"):
        if key in d and key not in params:
            params = {**params, key: d[key]}
    dom = d.get("domain", {}) or {}
    if not isinstance(dom, dict):
        raise SchemaError("domain must be an object")
    radius = float(dom.get("window_radius", 1.0))
    if not radius > 0:
        raise SchemaError("domain.window_radius must be positive")
    ray = dom.get("excluded_ray_angle")
    ray = None if ray is None else float(ray)
    common = dict(family=fam, eps=_eps_field(d), params=params, window_radius=radius, excluded_ray_angle=ray)
    rng = np.random.default_rng(seed)

    if fam == "general":
        return SystemSpec(_expr_field(d, "f"), _expr_field(d, "g"), **common)
    if fam == "SF2-series":
        return _build_sf2(d, params, common, order)
    if fam == "SF3-coupled":
        return _build_coupled(d, params, common, rng)
    if fam == "SF4-linear-fast":
        return _build_sf4(d, params, common)
    if fam == "linear-linear":
        return _build_linear(d, params, common)
    return _build_uncoupled(d, params, common, rng)


def _build_sf2(d, params, common, order) -> SystemSpec:
    if "alpha" in params:
        alpha = parse_complex(params["alpha"], "alpha")
        beta = parse_complex(params.get("beta", 0), "beta")
        gamma = parse_complex(params.get("gamma", 0), "gamma")
        a = _coeff_table(params.get("a", []), "a")
        b = _coeff_table(params.get("b", []), "b")
        sf2 = SF2Spec.from_coeffs(alpha, beta, a, b, gamma=gamma)
        return SystemSpec(sf2.f_expr(), sf2.g_expr(), sf2=sf2, **common)
    f, g = _expr_field(d, "f"), _expr_field(d, "g")
    sf2 = sf2_from_exprs(f, g, order)
    return SystemSpec(f, g, sf2=sf2, **common)


def _coeff_table(rows, what: str) -> dict:
    """``[[s, l, coeff], ...]`` or ``{"s,l": coeff}`` into a dict keyed by ``(s, l)``."""
    out: dict = {}
    items = rows.items() if isinstance(rows, dict) else rows
    for item in items:
        if isinstance(rows, dict):
            key, c = item
            try:
                s, l = (int(x) for x in str(key).split(","))
            except ValueError as err:
                raise SchemaError(f"{what}: bad index {key!r}") from err
        else:
            if not isinstance(item, list) or len(item) != 3:
                raise SchemaError(f"{what}: rows must be [s, l, coeff]")
            s, l, c = int(item[0]), int(item[1]), item[2]
        if s < 0 or l < 0:
            raise SchemaError(f"{what}: negative index ({s}, {l})")
        out[(s, l)] = out.get((s, l), 0j) + parse_complex(c, f"{what}[{s},{l}]")
    return out


def sf2_from_exprs(f: ex.Expr, g: ex.Expr, order: int = DEFAULT_ORDER) -> SF2Spec:
    """Split ``f`` and ``g`` into linear parts and ``O_2`` remainders around the origin."""
    try:
        fs = series2_from_expr(f, order)
        gs = series2_from_expr(g, order)
    except EvalPole as err:
        raise FamilyInvariantViolated(f"f and g must be holomorphic at the origin: {err}") from err
    if abs(fs[0, 0]) > 0 or abs(gs[0, 0]) > 0:
        raise FamilyInvariantViolated("the origin must be an equilibrium: f(0,0) = g(0,0) = 0")
    if gs[1, 0] != 0:
        raise FamilyInvariantViolated(f"g has a linear z term {gs[1, 0]}; the SF2 form needs w' = beta w + O_2")
    alpha, gamma, beta = fs[1, 0], fs[0, 1], gs[0, 1]
    ft = fs.coeffs.copy()
    gt = gs.coeffs.copy()
    ft[1, 0] = ft[0, 1] = 0
    gt[0, 1] = 0
    return SF2Spec(alpha, beta, Series2(ft, order=order), Series2(gt, order=order), gamma)


def _sample_w(prim: Primitive | None, rng, n: int, radius: float) -> np.ndarray:
    if prim is not None:
        return prim.sample(rng, n, radius)
    return radius * rng.uniform(0.2, 1.0, n) * np.exp(1j * rng.uniform(0, 2 * math.pi, n))


def _build_coupled(d, params, common, rng) -> SystemSpec:
    f, g = _expr_field(d, "f"), _expr_field(d, "g")
    if "G" not in params:
        raise SchemaError("SF3 spec needs a primitive 'G' (expression string or catalog object)")
    ray = common["excluded_ray_angle"]
    try:
        G = primitive_from_json(params["G"], "w", ray)
    except ValidationError as err:
        raise SchemaError(f"G: {err}") from err
    ff = ex.compile_expr(f)
    dfz = ex.compile_expr(ex.diff_expr(f, "z"))
    pts = _sample_w(G, rng, 20, common["window_radius"])
    zs = rng.normal(size=20) + 1j * rng.normal(size=20)
    try:
        alphas = np.asarray(dfz(zs, pts), dtype=complex) * np.ones(20)
        Gv = np.asarray(G(pts), dtype=complex)
        betas = np.asarray(ff(0.0, pts), dtype=complex) / Gv
    except EvalPole as err:
        raise FamilyInvariantViolated(f"f could not be evaluated on the domain: {err}") from err
    alpha = complex(np.median(alphas.real), np.median(alphas.imag))
    beta = complex(np.median(betas.real), np.median(betas.imag))
    if "alpha" in params:
        alpha = parse_complex(params["alpha"], "alpha")
    if "beta" in params:
        beta = parse_complex(params["beta"], "beta")
    resid = np.abs(np.asarray(ff(zs, pts)) - (alpha * zs + beta * Gv))
    if resid.max() > INVARIANT_TOL * (1 + np.abs(alpha * zs).max() + np.abs(beta * Gv).max()):
        raise FamilyInvariantViolated("f is not of the form alpha*z + beta*G(w)")
    c = CoupledSpec(alpha, beta, G, g)
    c.check_primitive(rng, common["window_radius"])
    return SystemSpec(f, g, coupled=c, **common)


def _build_sf4(d, params, common) -> SystemSpec:
    for key in ("alpha", "beta", "normal_form"):
        if key not in params:
            raise SchemaError(f"SF4 spec needs params.{key}")
    alpha = parse_complex(params["alpha"], "alpha")
    beta = parse_complex(params["beta"], "beta")
    nf = NormalFormKind.from_json(params["normal_form"])
    f = ex.mk_add(ex.mk_mul(ex.Lit.of(alpha), ex.Z), ex.mk_mul(ex.Lit.of(beta), ex.W))
    g = nf.g_expr()
    _check_declared(d, f, g)
    return SystemSpec(f, g, normal_form=nf, **common)


def _build_linear(d, params, common) -> SystemSpec:
    for key in "abcd":
        if key not in params:
            raise SchemaError(f"linear-linear spec needs params.{key}")
    a, b, c, dd = (parse_complex(params[k], k) for k in "abcd")
    if a == 0:
        raise FamilyParamError("linear-linear family needs a != 0")
    f = ex.mk_add(ex.mk_mul(ex.Lit.of(a), ex.Z), ex.mk_mul(ex.Lit.of(b), ex.W))
    g = ex.mk_add(ex.mk_mul(ex.Lit.of(c), ex.Z), ex.mk_mul(ex.Lit.of(dd), ex.W))
    _check_declared(d, f, g)
    return SystemSpec(f, g, **common)


def _check_declared(d, f, g):
    """If the spec also spells out f and g, they must agree with the family data."""
    rng = np.random.default_rng(1)
    z = rng.normal(size=8) + 1j * rng.normal(size=8)
    w = rng.uniform(0.3, 1.0, 8) * np.exp(1j * rng.uniform(-3, 3, 8))
    for key, built in (("f", f), ("g", g)):
        declared = _expr_field(d, key, required=False)
        if declared is None:
            continue
        a = np.asarray(ex.eval_expr(declared, z, w), dtype=complex)
        b = np.asarray(ex.eval_expr(built, z, w), dtype=complex)
        if np.max(np.abs(a - b)) > INVARIANT_TOL * (1 + np.max(np.abs(b))):
            raise FamilyInvariantViolated(f"declared {key} does not match the family parameters")


def _build_uncoupled(d, params, common, rng) -> SystemSpec:
    f, g = _expr_field(d, "f"), _expr_field(d, "g")
    if "w" in ex.free_vars(f) or "z" in ex.free_vars(g):
        raise FamilyInvariantViolated("uncoupled family needs f = f(z) and g = g(w)")
    ray = common["excluded_ray_angle"]
    try:
        F = primitive_from_json(params["F"], "z", ray) if "F" in params else monomial_primitive(f, "z", ray)
        G = primitive_from_json(params["G"], "w", ray) if "G" in params else monomial_primitive(g, "w", ray)
    except ValidationError as err:
        raise SchemaError(f"primitive: {err}") from err
    return SystemSpec(f, g, separable=(F, G), **common)


def monomial_primitive(e: ex.Expr, var: str, ray: float | None = None) -> Primitive:
    """Primitive of ``1/e`` when ``e = c * var^n``; raises :class:`FamilyParamError` otherwise."""
    f = ex.compile_expr(e)
    ev = (lambda x: f(x, 0.0)) if var == "z" else (lambda x: f(0.0, x))
    x1, x2 = 0.7 + 0.2j, 1.3 - 0.4j
    try:
        v1, v2 = complex(ev(x1)), complex(ev(x2))
    except EvalPole as err:
        raise FamilyParamError(f"cannot identify a monomial in {ex.to_string(e)}") from err
    if v1 == 0 or v2 == 0:
        raise FamilyParamError(f"{ex.to_string(e)} vanishes identically")
    n_est = (np.log(v2 / v1)).real / np.log(abs(x2) / abs(x1))
    n = int(round(n_est))
    c = v1 / x1**n
    for x in (0.4 + 0.9j, -0.8 + 0.1j, 1.1j):
        if abs(complex(ev(x)) - c * x**n) > 1e-10 * (1 + abs(c * x**n)):
            raise FamilyParamError(f"{ex.to_string(e)} is not a monomial; supply the primitive explicitly")
    r = math.pi if ray is None else ray
    if n == 0:
        base = primitive_catalog("constant-1", var=var)
    elif n == 1:
        base = primitive_catalog("linear", eta=1.0, ray=r, var=var)
    elif n >= 2:
        base = primitive_catalog("power", n=n, var=var)
    else:
        base = primitive_catalog("pole", n=-n, var=var)
    return Primitive(base.kind, {**base.params, "c": c}, lambda x: base(x) / c, lambda x: base.deriv(x) / c,
                     var, base.branch_ray, base.excludes_origin)


# ---------------------------------------------------------------------------
# critical manifold


@dataclass
class CriticalManifoldSample:
    """Points of ``C_0 = {f = 0}`` with their hyperbolicity margins ``Re df/dz``."""

    points: list
    direction: str  # "z-of-w" or "w-of-z"
    margins: list  # Re(df/dz) per point
    root_counts: list = field(default_factory=list)

    @property
    def margin(self) -> float:
        return float(min(abs(m) for m in self.margins)) if self.margins else float("nan")

    @property
    def hyperbolic(self) -> bool:
        return self.margin > DEGENERATE_TOL

    @property
    def multiple_roots(self) -> bool:
        return any(c > 1 for c in self.root_counts)

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "points": [[z, w] for z, w in self.points],
            "margins": list(self.margins),
            "margin": self.margin,
            "hyperbolic": self.hyperbolic,
            "root_counts": list(self.root_counts),
        }


def _newton(fn, dfn, x0: complex, maxiter: int = 100):
    x = complex(x0)
    for _ in range(maxiter):
        try:
            fx = complex(fn(x))
            d = complex(dfn(x))
        except EvalPole:
            return None
        if abs(fx) < 1e-14 * (1 + abs(x)):
            return x
        if d == 0:
            return None
        step = fx / d
        x -= step
        if not np.isfinite(x) or abs(x) > 1e12:
            return None
        if abs(step) < 1e-15 * (1 + abs(x)):
            break
    try:
        return x if abs(complex(fn(x))) < ROOT_TOL else None
    except EvalPole:
        return None


def default_seeds() -> list:
    return [0j] + [complex(np.exp(2j * math.pi * k / 8)) for k in range(8)]


def critical_manifold_solve(sys: SystemSpec, samples, seeds=None, direction: str = "z-of-w") -> CriticalManifoldSample:
    """Newton-solve ``f(z, w) = 0`` at each sample of the free variable.

    ``direction="z-of-w"`` treats the samples as ``w`` values and solves for
    ``z``; ``"w-of-z"`` does the reverse. The first seed that converges wins;
    the number of distinct roots reached from all seeds is recorded.
    """
    if direction not in ("z-of-w", "w-of-z"):
        raise ValueError(f"direction must be 'z-of-w' or 'w-of-z', got {direction!r}")
    f = sys.f_fn
    fz = ex.compile_expr(ex.diff_expr(sys.f, "z"))
    solve_var = "z" if direction == "z-of-w" else "w"
    fs = fz if solve_var == "z" else ex.compile_expr(ex.diff_expr(sys.f, "w"))
    seeds = default_seeds() if seeds is None else [complex(s) for s in seeds]
    pts, margins, counts = [], [], []
    for s in samples:
        s = complex(s)
        if solve_var == "z":
            fn, dfn = (lambda x: f(x, s)), (lambda x: fs(x, s))
        else:
            fn, dfn = (lambda x: f(s, x)), (lambda x: fs(s, x))
        roots = []
        for x0 in seeds:
            r = _newton(fn, dfn, x0)
            if r is None:
                continue
            if abs(complex(dfn(r))) < DEGENERATE_TOL:
                raise DegenerateRoot(s, complex(dfn(r)))
            if not any(abs(r - q) < 1e-8 * (1 + abs(q)) for q in roots):
                roots.append(r)
        if not roots:
            raise NewtonDivergence(s)
        x = roots[0]
        z, w = (x, s) if solve_var == "z" else (s, x)
        pts.append((z, w))
        margins.append(float(complex(fz(z, w)).real))
        counts.append(len(roots))
    return CriticalManifoldSample(pts, direction, margins, counts)


# ---------------------------------------------------------------------------
# real form


def real_embedding(sys: SystemSpec, eps: float) -> Callable:
    """Evaluator of ``(Re f/eps, Im f/eps, Re g, Im g)`` at ``(x1, y1, x2, y2)``.

    Accepts a length-4 vector or a ``(4, n)`` array.
    """
    f, g = sys.f_fn, sys.g_fn
    eps = float(eps)

    def field_(x):
        x = np.asarray(x, dtype=float)
        z = x[0] + 1j * x[1]
        w = x[2] + 1j * x[3]
        fv = np.asarray(f(z, w), dtype=complex) / eps
        gv = np.asarray(g(z, w), dtype=complex) * np.ones_like(fv)
        return np.array([fv.real, fv.imag, gv.real, gv.imag])

    return field_
