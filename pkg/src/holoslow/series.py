"""Truncated complex power series in one and two variables.

``Series1`` holds ``c_0 .. c_N`` of a univariate series; arithmetic between
two series keeps the smaller truncation order. ``Series2`` holds ``c[s, l]``
for ``s + l <= N``. Bivariate series enter the constructions here as
polynomial data (the nonlinear parts of vector fields), so when one is
substituted along a curve, coefficients beyond its stored order are taken as
zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import (
    DegenerateLinearPart,
    EvalPole,
    NonzeroConstantTerm,
    TooFewCoefficients,
    VariableMismatch,
    ZeroConstantTerm,
)

DEFAULT_ORDER = 24


class Series1:
    """Truncated power series ``sum_{k<=N} c_k x^k`` in the variable ``var``."""

    __slots__ = ("coeffs", "var")

    def __init__(self, coeffs, var: str = "z", order: int | None = None):
        c = np.array(coeffs, dtype=complex).ravel()
        if order is not None:
            if len(c) < order + 1:
                c = np.concatenate([c, np.zeros(order + 1 - len(c), dtype=complex)])
            c = c[: order + 1]
        if len(c) == 0:
            c = np.zeros(1, dtype=complex)
        if not np.all(np.isfinite(c)):
            raise ValueError("series coefficients must be finite")
        c.setflags(write=False)
        self.coeffs = c
        self.var = var

    # construction helpers
    @classmethod
    def constant(cls, c, order: int, var: str = "z") -> "Series1":
        return cls([c], var, order)

    @classmethod
    def variable(cls, order: int, var: str = "z", center: complex = 0.0) -> "Series1":
        return cls([center, 1.0], var, order)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int) -> complex:
        if 0 <= k <= self.order:
            return complex(self.coeffs[k])
        raise IndexError(k)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __repr__(self) -> str:
        return f"Series1({np.round(self.coeffs, 12).tolist()}, var={self.var!r})"

    def _check(self, other: "Series1"):
        if other.var != self.var:
            raise VariableMismatch(f"cannot combine series in {self.var!r} and {other.var!r}")

    def truncate(self, order: int) -> "Series1":
        return Series1(self.coeffs, self.var, order)

    def __add__(self, other):
        if isinstance(other, Series1):
            self._check(other)
            n = min(self.order, other.order)
            return Series1(self.coeffs[: n + 1] + other.coeffs[: n + 1], self.var)
        c = self.coeffs.copy()
        c[0] += complex(other)
        return Series1(c, self.var)

    __radd__ = __add__

    def __neg__(self):
        return Series1(-self.coeffs, self.var)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Series1):
            self._check(other)
            n = min(self.order, other.order)
            return Series1(np.convolve(self.coeffs[: n + 1], other.coeffs[: n + 1])[: n + 1], self.var)
        return Series1(self.coeffs * complex(other), self.var)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Series1):
            return self * other.reciprocal()
        return Series1(self.coeffs / complex(other), self.var)

    def __pow__(self, n: int):
        if n < 0:
            return self.reciprocal() ** (-n)
        out = Series1.constant(1.0, self.order, self.var)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __call__(self, x):
        """Horner evaluation of the truncated polynomial."""
        acc = np.zeros_like(np.asarray(x, dtype=complex))
        for c in self.coeffs[::-1]:
            acc = acc * x + c
        return complex(acc) if np.ndim(acc) == 0 else acc

    def deriv(self) -> "Series1":
        if self.order == 0:
            return Series1([0.0], self.var)
        k = np.arange(1, self.order + 1)
        return Series1(self.coeffs[1:] * k, self.var)

    def shift(self, k: int) -> "Series1":
        """Multiply by ``var**k`` (k >= 0); the order grows by ``k``."""
        return Series1(np.concatenate([np.zeros(k, dtype=complex), self.coeffs]), self.var)

    def compose(self, inner: "Series1") -> "Series1":
        return s1_compose(self, inner)

    def reciprocal(self) -> "Series1":
        return s1_reciprocal(self)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def to_json(self) -> dict:
        return {
            "var": self.var,
            "order": self.order,
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Series1":
        c = [complex(re, im) for re, im in d["coeffs"]]
        return cls(c, d.get("var", "z"), d.get("order"))


def s1_add(a: Series1, b) -> Series1:
    return a + b


def s1_mul(a: Series1, b) -> Series1:
    return a * b


def s1_scale(a: Series1, alpha: complex) -> Series1:
    return a * complex(alpha)


def s1_compose(outer: Series1, inner: Series1) -> Series1:
    """``outer(inner(x))`` truncated at ``min(outer.order, inner.order)``.

    ``inner`` must vanish at the origin.
    """
    if inner[0] != 0:
        raise NonzeroConstantTerm(f"inner series has constant term {inner[0]}")
    n = min(outer.order, inner.order)
    inner = inner.truncate(n)
    acc = Series1.constant(outer.coeffs[min(outer.order, n)], n, inner.var)
    for c in outer.coeffs[: min(outer.order, n)][::-1]:
        acc = acc * inner + c
    return acc


def s1_reciprocal(a: Series1) -> Series1:
    """``1/a`` to the order of ``a``; requires ``a[0] != 0``."""
    c0 = a[0]
    if c0 == 0:
        raise ZeroConstantTerm("series with zero constant term has no reciprocal")
    n = a.order
    b = np.zeros(n + 1, dtype=complex)
    b[0] = 1.0 / c0
    ac = a.coeffs
    for k in range(1, n + 1):
        b[k] = -np.dot(ac[1 : k + 1], b[k - 1 :: -1][:k]) / c0
    return Series1(b, a.var)


# ---------------------------------------------------------------------------


class Series2:
    """Bivariate truncated series ``sum_{s+l<=N} c[s, l] x^s y^l``.

    ``vars`` names the two slots, e.g. ``("z", "w")`` or ``("z", "phi")``.
    """

    __slots__ = ("coeffs", "vars")

    def __init__(self, coeffs, vars: tuple[str, str] = ("z", "w"), order: int | None = None):
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 2:
            raise ValueError("Series2 needs a 2-D coefficient array")
        n = max(c.shape) - 1 if order is None else order
        out = np.zeros((n + 1, n + 1), dtype=complex)
        m0, m1 = min(c.shape[0], n + 1), min(c.shape[1], n + 1)
        out[:m0, :m1] = c[:m0, :m1]
        out[_mask(n)] = 0
        if not np.all(np.isfinite(out)):
            raise ValueError("series coefficients must be finite")
        self.coeffs = out
        self.vars = tuple(vars)

    @classmethod
    def zeros(cls, order: int, vars=("z", "w")) -> "Series2":
        return cls(np.zeros((order + 1, order + 1)), vars, order)

    @classmethod
    def from_dict(cls, terms: dict, order: int, vars=("z", "w")) -> "Series2":
        """``terms`` maps ``(s, l)`` to a coefficient; entries above ``order`` are dropped."""
        c = np.zeros((order + 1, order + 1), dtype=complex)
        for (s, l), v in terms.items():
            if s < 0 or l < 0:
                raise ValueError(f"negative index ({s}, {l})")
            if s + l <= order:
                c[s, l] += complex(v)
        return cls(c, vars, order)

    @classmethod
    def constant(cls, c, order: int, vars=("z", "w")) -> "Series2":
        return cls.from_dict({(0, 0): c}, order, vars)

    @classmethod
    def variable(cls, slot: int, order: int, vars=("z", "w"), center: complex = 0.0) -> "Series2":
        key = (1, 0) if slot == 0 else (0, 1)
        return cls.from_dict({(0, 0): center, key: 1.0}, order, vars)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    def __getitem__(self, key) -> complex:
        s, l = key
        if s + l <= self.order and s >= 0 and l >= 0:
            return complex(self.coeffs[s, l])
        return 0j

    def terms(self) -> dict:
        s_idx, l_idx = np.nonzero(self.coeffs)
        return {(int(s), int(l)): complex(self.coeffs[s, l]) for s, l in zip(s_idx, l_idx)}

    def degree(self) -> int:
        t = self.terms()
        return max((s + l for s, l in t), default=0)

    def with_order(self, order: int) -> "Series2":
        return Series2(self.coeffs, self.vars, order)

    def __repr__(self) -> str:
        return f"Series2({self.terms()}, vars={self.vars}, order={self.order})"

    def _align(self, other: "Series2"):
        if other.vars != self.vars:
            raise VariableMismatch(f"cannot combine series in {self.vars} and {other.vars}")
        n = min(self.order, other.order)
        return self.coeffs[: n + 1, : n + 1], other.coeffs[: n + 1, : n + 1], n

    def __add__(self, other):
        if isinstance(other, Series2):
            a, b, n = self._align(other)
            return Series2(a + b, self.vars, n)
        c = self.coeffs.copy()
        c[0, 0] += complex(other)
        return Series2(c, self.vars)

    __radd__ = __add__

    def __neg__(self):
        return Series2(-self.coeffs, self.vars)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Series2):
            return Series2(self.coeffs * complex(other), self.vars)
        a, b, n = self._align(other)
        out = np.zeros((n + 1, n + 1), dtype=complex)
        for s, l in zip(*np.nonzero(a)):
            d = n - s - l
            out[s : s + d + 1, l : l + d + 1] += a[s, l] * b[: d + 1, : d + 1]
        return Series2(out, self.vars, n)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            return self.reciprocal() ** (-n)
        out = Series2.constant(1.0, self.order, self.vars)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __truediv__(self, other):
        if isinstance(other, Series2):
            return self * other.reciprocal()
        return Series2(self.coeffs / complex(other), self.vars)

    def reciprocal(self) -> "Series2":
        c0 = self[0, 0]
        if c0 == 0:
            raise ZeroConstantTerm("bivariate series with zero constant term has no reciprocal")
        r = self / c0 - 1.0  # zero constant term
        out = Series2.constant(1.0, self.order, self.vars)
        term = Series2.constant(1.0, self.order, self.vars)
        for _ in range(self.order):
            term = term * (-r)
            out = out + term
        return out / c0

    def linear_part(self) -> tuple[complex, complex]:
        return self[1, 0], self[0, 1]

    def __call__(self, x, y):
        s_idx, l_idx = np.nonzero(self.coeffs)
        acc = 0j
        for s, l in zip(s_idx, l_idx):
            acc = acc + self.coeffs[s, l] * x**s * y**l
        return acc

    def compose(self, x: Series1, y: Series1) -> Series1:
        """Univariate series of ``t -> F(x(t), y(t))``, treating ``F`` as a polynomial."""
        if x.var != y.var:
            raise VariableMismatch("curve components must share a variable")
        n = min(x.order, y.order)
        x, y = x.truncate(n), y.truncate(n)
        terms = self.terms()
        smax = max((s for s, _ in terms), default=0)
        lmax = max((l for _, l in terms), default=0)
        xp = [Series1.constant(1.0, n, x.var)]
        for _ in range(smax):
            xp.append(xp[-1] * x)
        yp = [Series1.constant(1.0, n, y.var)]
        for _ in range(lmax):
            yp.append(yp[-1] * y)
        acc = Series1.constant(0.0, n, x.var)
        for (s, l), c in terms.items():
            acc = acc + (xp[s] * yp[l]) * c
        return acc

    def to_json(self) -> dict:
        return {
            "vars": list(self.vars),
            "order": self.order,
            "terms": [[s, l, c.real, c.imag] for (s, l), c in sorted(self.terms().items())],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Series2":
        terms = {(int(s), int(l)): complex(re, im) for s, l, re, im in d["terms"]}
        return cls.from_dict(terms, int(d["order"]), tuple(d.get("vars", ("z", "w"))))


def _mask(n: int) -> np.ndarray:
    i = np.arange(n + 1)
    return (i[:, None] + i[None, :]) > n


def s2_eval_on_curve(F: Series2, curve: Series1) -> Series1:
    """``z -> F(z, curve(z))`` as a univariate series in the curve's variable."""
    t = Series1.variable(curve.order, curve.var)
    return F.compose(t, curve)


def implicit_series_solve(theta: Series2, alpha: complex, N: int) -> Series1:
    """Solve ``theta(L(w), w) = 0`` for ``L`` with ``L(0) = 0``.

    ``theta(z, w) = alpha*z + ...`` with ``theta(0, 0) = 0``. Coefficients are
    matched degree by degree: the ``w^j`` coefficient of ``theta(L, w)`` is
    ``alpha*l_j`` plus terms in ``l_1..l_{j-1}`` only.
    """
    alpha = complex(alpha)
    if abs(alpha) < 1e-12:
        raise DegenerateLinearPart(f"alpha={alpha} vanishes; implicit solve impossible")
    if abs(theta[0, 0]) > 0:
        raise NonzeroConstantTerm(f"theta(0,0)={theta[0, 0]} must vanish")
    var = theta.vars[1]
    coeffs = np.zeros(N + 1, dtype=complex)
    w = Series1.variable(N, var)
    for j in range(1, N + 1):
        L = Series1(coeffs, var)
        r = theta.compose(L, w)[j]
        coeffs[j] = -r / alpha
    return Series1(coeffs, var)


# ---------------------------------------------------------------------------
# Taylor expansion of expressions


def series2_from_expr(e, order: int, center=(0.0, 0.0), vars=("z", "w")) -> Series2:
    """Taylor coefficients of an expression around ``center`` via Series2 arithmetic.

    Raises :class:`EvalPole` if a denominator vanishes at the center.
    """
    e = ex.as_expr(e)

    def go(n):
        if isinstance(n, ex.Lit):
            return Series2.constant(n.value, order, vars)
        if isinstance(n, ex.Var):
            slot = 0 if n.name == "z" else 1
            return Series2.variable(slot, order, vars, center[slot])
        if isinstance(n, ex.Neg):
            return -go(n.arg)
        if isinstance(n, ex.Pow):
            b = go(n.base)
            if n.exp < 0 and abs(b[0, 0]) < ex.POLE_TOL:
                raise EvalPole(n, "pole at the expansion center")
            return b**n.exp
        a, b = go(n.left), go(n.right)
        if isinstance(n, ex.Add):
            return a + b
        if isinstance(n, ex.Sub):
            return a - b
        if isinstance(n, ex.Mul):
            return a * b
        if abs(b[0, 0]) < ex.POLE_TOL:
            raise EvalPole(n, "pole at the expansion center")
        return a * b.reciprocal()

    return go(e)


def series1_from_expr(e, order: int, var: str = "w", center: complex = 0.0, other: complex = 0.0) -> Series1:
    """Taylor series of ``e`` in ``var`` around ``center`` with the other variable fixed."""
    e = ex.as_expr(e)
    t = Series1.variable(order, var, center)

    def go(n):
        if isinstance(n, ex.Lit):
            return Series1.constant(n.value, order, var)
        if isinstance(n, ex.Var):
            return t if n.name == var else Series1.constant(other, order, var)
        if isinstance(n, ex.Neg):
            return -go(n.arg)
        if isinstance(n, ex.Pow):
            b = go(n.base)
            if n.exp < 0 and abs(b[0]) < ex.POLE_TOL:
                raise EvalPole(n, "pole at the expansion center")
            return b**n.exp
        a, b = go(n.left), go(n.right)
        if isinstance(n, ex.Add):
            return a + b
        if isinstance(n, ex.Sub):
            return a - b
        if isinstance(n, ex.Mul):
            return a * b
        if abs(b[0]) < ex.POLE_TOL:
            raise EvalPole(n, "pole at the expansion center")
        return a * b.reciprocal()

    return go(e)


# ---------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceVerdict:
    verdict: str  # convergent | divergent | inconclusive
    radius: float
    method: str = "ratio"
    window: int = 0
    entire: bool = False
    growth_exponent: float = float("nan")
    ratios: list = field(default_factory=list)
    indices: list = field(default_factory=list)

    def __post_init__(self):
        if self.verdict == "divergent" and self.radius != 0:
            raise ValueError("divergent verdict must carry radius 0")
        if self.verdict == "convergent" and not self.radius > 0:
            raise ValueError("convergent verdict must carry a positive radius")

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "radius": self.radius,
            "method": self.method,
            "window": self.window,
            "entire": self.entire,
            "growth_exponent": self.growth_exponent,
            "ratios": list(self.ratios),
            "indices": list(self.indices),
        }


GROWTH_EXPONENT_TOL = 0.25
RATIO_GROWTH_FACTOR = 10.0


def radius_estimate(a: Series1, window: int = 8) -> ConvergenceVerdict:
    """Ratio-test verdict on the last ``window`` nonzero coefficients.

    Sparse support is handled by re-indexing onto the nonzero coefficients and
    taking per-unit-degree ratios ``rho_j = |c_{k_{j+1}}/c_{k_j}|^(1/(k_{j+1}-k_j))``.
    With ``s`` the slope of the log per-step ratio ``log|c_{k_{j+1}}/c_{k_j}|``
    against ``log k_j``:

    * ratios strictly increasing and (last/first > 10 or s > 0.25): divergent;
    * ratios strictly decreasing with s < -0.25: convergent, entire;
    * |s| <= 0.25: convergent, radius from extrapolating ``rho`` to ``1/k -> 0``;
    * anything else: inconclusive.
    """
    m = int(window)
    if m < 4 or a.order < 2 * m:
        raise TooFewCoefficients(f"need window >= 4 and order >= 2*window (order={a.order}, window={m})")
    nz = np.flatnonzero(a.coeffs != 0)
    if len(nz) < m:
        raise TooFewCoefficients(f"only {len(nz)} nonzero coefficients, window needs {m}")
    idx = nz[-m:]
    mags = np.abs(a.coeffs[idx])
    steps = np.diff(idx).astype(float)
    log_step = np.log(mags[1:]) - np.log(mags[:-1])
    log_rho = log_step / steps
    rho = np.exp(log_rho)
    k_mid = idx[:-1].astype(float)
    # growth exponent of the per-step ratios: ~1 for factorial growth, ~0 for
    # geometric, ~-1 for entire functions, independent of the support spacing
    slope = float(np.polyfit(np.log(k_mid), log_step, 1)[0]) if np.all(k_mid > 0) else 0.0
    d = np.diff(rho)
    increasing = bool(np.all(d > 0))
    decreasing = bool(np.all(d < 0))
    base = dict(window=m, growth_exponent=slope, ratios=rho.tolist(), indices=idx.tolist())

    if increasing and (rho[-1] > RATIO_GROWTH_FACTOR * rho[0] or slope > GROWTH_EXPONENT_TOL):
        return ConvergenceVerdict("divergent", 0.0, **base)
    if decreasing and slope < -GROWTH_EXPONENT_TOL:
        return ConvergenceVerdict("convergent", math.inf, entire=True, **base)
    if abs(slope) <= GROWTH_EXPONENT_TOL:
        # Domb-Sykes style extrapolation of rho against 1/k
        rho_inf = float(np.polyfit(1.0 / k_mid, rho, 1)[1]) if len(rho) > 1 else float(rho[-1])
        if not rho_inf > 0:
            rho_inf = float(np.max(rho))
        return ConvergenceVerdict("convergent", 1.0 / rho_inf, **base)
    return ConvergenceVerdict("inconclusive", float("nan"), **base)
