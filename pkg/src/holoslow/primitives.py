"""Closed-form primitives ``G`` with ``G' = 1/g`` for the normal-form fields.

Primitives that involve a logarithm are single valued only after a ray from
the origin is removed; the ray angle is configurable and defaults to ``pi``
(principal branch).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as ex
from .errors import FamilyParamError, PrimitiveMismatch

PRIMITIVE_RTOL = 1e-8
RAY_CLEARANCE = 0.1  # radians kept away from a branch ray when sampling


def log_branch(w, ray: float = math.pi):
    """Logarithm with its cut along ``arg w = ray``; arguments lie in ``(ray - 2pi, ray]``."""
    w = np.asarray(w, dtype=complex)
    shift = np.exp(-1j * (ray - math.pi))
    out = np.log(w * shift) + 1j * (ray - math.pi)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Primitive:
    """A primitive ``G`` of ``1/g`` together with its derivative and domain."""

    kind: str
    params: dict
    fn: Callable
    dfn: Callable
    var: str = "w"
    branch_ray: float | None = None
    excludes_origin: bool = False
    expr: ex.Expr | None = field(default=None, compare=False)

    def __call__(self, x):
        return self.fn(x)

    def deriv(self, x):
        return self.dfn(x)

    def in_domain(self, x, clearance: float = 1e-9) -> bool:
        x = complex(x)
        if self.excludes_origin and abs(x) < clearance:
            return False
        if self.branch_ray is not None:
            if abs(x) < clearance:
                return False
            d = (np.angle(x) - self.branch_ray + math.pi) % (2 * math.pi) - math.pi
            if abs(d) < clearance:
                return False
        return True

    def sample(self, rng: np.random.Generator, n: int, radius: float = 1.0) -> np.ndarray:
        """``n`` points in the disc of ``radius`` that stay clear of poles and branch rays."""
        r = radius * rng.uniform(0.2, 1.0, n)
        if self.branch_ray is not None:
            th = self.branch_ray + rng.uniform(RAY_CLEARANCE, 2 * math.pi - RAY_CLEARANCE, n)
        else:
            th = rng.uniform(0, 2 * math.pi, n)
        return r * np.exp(1j * th)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "var": self.var}
        d.update({k: v for k, v in self.params.items()})
        if self.branch_ray is not None:
            d["branch_ray"] = self.branch_ray
        if self.expr is not None:
            d["expr"] = ex.to_string(self.expr)
        return d


def _positive_int(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not float(value).is_integer() or int(value) < minimum:
        raise FamilyParamError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def primitive_catalog(kind: str, *, n: int | None = None, eta=None, gamma=None,
                      ray: float = math.pi, var: str = "w") -> Primitive:
    """Closed-form primitive of ``1/g`` for a normal-form kind.

    ``constant-1``: ``w``; ``linear``: ``ln(w)/eta``; ``power``:
    ``w^(1-n)/(1-n)``; ``pole``: ``w^(n+1)/(n+1)``; ``rational``:
    ``(w^(1-n)/(1-n) + ln w)/gamma``.
    """
    if kind == "constant-1":
        return Primitive(kind, {}, lambda x: np.asarray(x, dtype=complex) + 0, lambda x: np.ones_like(np.asarray(x, dtype=complex)), var)
    if kind == "linear":
        eta = complex(eta if eta is not None else 1.0)
        if eta == 0:
            raise FamilyParamError("linear normal form needs eta != 0")
        return Primitive(
            kind, {"eta": eta},
            lambda x: log_branch(x, ray) / eta,
            lambda x: 1.0 / (eta * np.asarray(x, dtype=complex)),
            var, branch_ray=ray, excludes_origin=True,
        )
    if kind == "power":
        m = _positive_int(n, "n", 2)
        return Primitive(
            kind, {"n": m},
            lambda x: np.asarray(x, dtype=complex) ** (1 - m) / (1 - m),
            lambda x: np.asarray(x, dtype=complex) ** (-m),
            var, excludes_origin=True,
        )
    if kind == "pole":
        m = _positive_int(n, "n", 1)
        return Primitive(
            kind, {"n": m},
            lambda x: np.asarray(x, dtype=complex) ** (m + 1) / (m + 1),
            lambda x: np.asarray(x, dtype=complex) ** m,
            var,
        )
    if kind == "rational":
        m = _positive_int(n, "n", 2)
        gam = complex(gamma if gamma is not None else 1.0)
        if gam == 0:
            raise FamilyParamError("rational normal form needs gamma != 0")

        def fn(x):
            x = np.asarray(x, dtype=complex)
            return (x ** (1 - m) / (1 - m) + log_branch(x, ray)) / gam

        def dfn(x):
            x = np.asarray(x, dtype=complex)
            return (x ** (-m) + 1.0 / x) / gam

        return Primitive(kind, {"n": m, "gamma": gam}, fn, dfn, var, branch_ray=ray, excludes_origin=True)
    raise FamilyParamError(f"unknown normal-form kind {kind!r}")


def primitive_from_expr(e, var: str = "w") -> Primitive:
    """Primitive given as an expression in one variable; derivative is symbolic."""
    e = ex.as_expr(e)
    other = "z" if var == "w" else "w"
    if other in ex.free_vars(e):
        raise FamilyParamError(f"primitive must depend on {var!r} only: {ex.to_string(e)}")
    f = ex.compile_expr(e)
    df = ex.compile_expr(ex.diff_expr(e, var))
    if var == "w":
        fn, dfn = (lambda x: f(0.0, x)), (lambda x: df(0.0, x))
    else:
        fn, dfn = (lambda x: f(x, 0.0)), (lambda x: df(x, 0.0))
    return Primitive("expr", {}, fn, dfn, var, expr=e, excludes_origin=_has_negative_power(e))


def _has_negative_power(e) -> bool:
    if isinstance(e, ex.Pow):
        return e.exp < 0 or _has_negative_power(e.base)
    if isinstance(e, ex.Div):
        return True
    if isinstance(e, ex.Neg):
        return _has_negative_power(e.arg)
    if isinstance(e, (ex.Add, ex.Sub, ex.Mul)):
        return _has_negative_power(e.left) or _has_negative_power(e.right)
    return False


def primitive_from_json(obj, var: str = "w", ray: float | None = None) -> Primitive:
    """A primitive from a JSON value: an expression string or a catalog dict."""
    if isinstance(obj, str):
        return primitive_from_expr(obj, var)
    if isinstance(obj, dict):
        kind = obj.get("kind")
        r = obj.get("branch_ray", ray if ray is not None else math.pi)
        return primitive_catalog(kind, n=obj.get("n"), eta=_cplx(obj.get("eta")),
                                 gamma=_cplx(obj.get("gamma")), ray=r, var=var)
    raise FamilyParamError(f"cannot interpret primitive {obj!r}")


def _cplx(v):
    if v is None:
        return None
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    if isinstance(v, str):
        lit = ex.parse_expr(v)
        if not isinstance(lit, ex.Lit):
            raise FamilyParamError(f"expected a number, got {v!r}")
        return lit.value
    return complex(v)


def stencil_derivative(fn: Callable, x, h: float | None = None):
    """Five-point central difference along the real direction (valid for holomorphic fn)."""
    x = np.asarray(x, dtype=complex)
    if h is None:
        h = 1e-3 * np.maximum(np.abs(x), 1e-2)
    return (-fn(x + 2 * h) + 8 * fn(x + h) - 8 * fn(x - h) + fn(x - 2 * h)) / (12 * h)


def check_reciprocal(prim: Primitive, g: Callable, points, what: str = "G") -> float:
    """Verify ``prim' * g == 1`` at ``points``; raises :class:`PrimitiveMismatch`.

    ``g`` is the field the primitive inverts (a function of one variable).
    Both the stored derivative and a finite-difference derivative are checked.
    """
    pts = np.asarray(points, dtype=complex)
    gv = np.asarray(g(pts), dtype=complex)
    err = np.abs(prim.deriv(pts) * gv - 1.0)
    fd = np.abs(stencil_derivative(prim.fn, pts) * gv - 1.0)
    # the stencil carries O(h^4) truncation error, hence its looser bound
    if err.max() > PRIMITIVE_RTOL or fd.max() > 1e-6:
        i = int(np.argmax(np.maximum(err, fd)))
        raise PrimitiveMismatch(f"{what}' * g != 1 at {pts[i]}: defect {max(err[i], fd[i]):.3g}")
    return float(err.max())
