"""Integration of slow-fast systems and local classification of 1-D holomorphic fields.

The integrator is the Dormand-Prince 5(4) embedded pair with FSAL, a
Hairer-style RMS error norm and the usual ``0.9 err^(-1/5)`` step control.
Systems are integrated on their real embedding ``(Re z, Im z, Re w, Im w)``.
A complex ``time_direction`` ``e^(i theta)`` integrates along the ray
``tau = s e^(i theta)`` of complex time, parametrised by the real ``s``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as ex
from .errors import (
    EvalPole,
    MaxSteps,
    StepUnderflow,
    UnclassifiableAtTolerance,
    ValidationError,
)
from .series import Series1, s1_reciprocal
from .systems import SystemSpec, real_embedding

FAST_TIME_THRESHOLD = 1e-2
MAX_STEPS = 10**7
CLASSIFY_TOL = 1e-9
MAX_ORDER = 12

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B_HAT = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_HAT


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    min_step: float = math.inf
    evaluations: int = 0


def dopri5(fun: Callable, t0: float, y0, t_end: float, *, rtol: float = 1e-10, atol: float = 1e-12,
           t_eval=None, h0: float | None = None, max_steps: int = MAX_STEPS,
           stop: Callable | None = None):
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t_end > t0``.

    Returns ``(ts, ys, stats, reason)``. Without ``t_eval`` every accepted step
    is recorded; otherwise steps are shortened to land on the requested times.
    ``stop(t, y)`` may return a string to end the run early after an accepted
    step. A stage that is not finite or hits a pole counts as a rejected step.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    span = t_end - t0
    if not span > 0:
        raise ValidationError("integration span must be positive")
    stats = StepStats()
    k1 = np.asarray(fun(t, y), dtype=float)
    stats.evaluations += 1
    if not np.all(np.isfinite(k1)):
        raise EvalPole(None, "vector field is not finite at the initial condition")
    targets = None if t_eval is None else np.asarray(sorted(set(float(x) for x in t_eval)), dtype=float)
    ts, ys = [t], [y.copy()]
    ti = 0
    if targets is not None:
        while ti < len(targets) and targets[ti] <= t:
            ti += 1
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h = min(h, span)
    else:
        h = h0
    h_floor = 1e-14 * max(abs(t0), abs(t_end), span)
    last_pole = None
    while t < t_end:
        if stats.accepted + stats.rejected >= max_steps:
            raise MaxSteps(f"step budget {max_steps} exhausted at t={t}")
        hit_target = False
        h_prev = h
        h = min(h, t_end - t)
        if targets is not None and ti < len(targets) and t + h >= targets[ti]:
            h = targets[ti] - t
            hit_target = True
        if hit_target and h <= h_floor:
            # target coincides with the current time up to rounding
            ts.append(targets[ti])
            ys.append(y.copy())
            ti += 1
            h = max(h_prev, h_floor * 10)
            continue
        if h < h_floor:
            if last_pole is not None:
                raise last_pole
            raise StepUnderflow(f"step size {h:.3g} below {h_floor:.3g} at t={t}")
        k = [k1]
        ok = True
        try:
            for s in range(1, 7):
                ys_ = y + h * sum(a * k[j] for j, a in enumerate(_A[s]) if a != 0)
                k.append(np.asarray(fun(t + _C[s] * h, ys_), dtype=float))
            stats.evaluations += 6
        except EvalPole as err:
            ok = False
            last_pole = err
        if ok:
            y_new = y + h * sum(b * kk for b, kk in zip(_B, k) if b != 0)
            err_vec = h * sum(e * kk for e, kk in zip(_E, k) if e != 0)
            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(err_vec))):
                ok = False
        if not ok:
            stats.rejected += 1
            h *= 0.2
            continue
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t_next = targets[ti] if hit_target else t + h
            t, y, k1 = t_next, y_new, k[6]
            stats.accepted += 1
            stats.min_step = min(stats.min_step, h)
            last_pole = None
            if targets is None:
                ts.append(t)
                ys.append(y.copy())
            elif hit_target:
                ts.append(t)
                ys.append(y.copy())
                ti += 1
            if stop is not None:
                reason = stop(t, y)
                if reason:
                    return np.array(ts), np.array(ys), stats, str(reason)
            fac = 10.0 if err == 0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
            if hit_target:
                fac = max(fac, 1.0)
            h *= fac
        else:
            stats.rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
    return np.array(ts), np.array(ys), stats, "completed"


@dataclass
class Trajectory:
    """Samples ``(tau_i, z_i, w_i)`` with integration metadata.

    ``tau`` is slow time (or the real parameter ``s`` along a complex-time ray);
    for layer flows it is fast time. ``z`` is ``None`` for reduced flows.
    """

    tau: np.ndarray
    z: np.ndarray | None
    w: np.ndarray | None
    timescale: str
    eps: float | None
    accepted: int
    rejected: int
    min_step: float
    termination: str = "completed"
    time_direction: complex = 1.0 + 0j
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        if len(self.tau) > 1 and not np.all(np.diff(self.tau) > 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.tau)

    @property
    def complex_time(self) -> np.ndarray:
        return self.tau * self.time_direction

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["tau", "re_z", "im_z", "re_w", "im_w"])
        n = len(self.tau)
        z = self.z if self.z is not None else np.full(n, np.nan)
        w = self.w if self.w is not None else np.full(n, np.nan)
        for t, zi, wi in zip(self.tau, z, w):
            wr.writerow(["%.17g" % v for v in (t, zi.real, zi.imag, wi.real, wi.imag)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "timescale": self.timescale,
            "eps": self.eps,
            "time_direction": self.time_direction,
            "termination": self.termination,
            "steps": {"accepted": self.accepted, "rejected": self.rejected, "min_step": self.min_step},
            "tolerances": {"rtol": self.rtol, "atol": self.atol},
            "tau": self.tau.tolist(),
            "z": None if self.z is None else [complex(v) for v in self.z],
            "w": None if self.w is None else [complex(v) for v in self.w],
        }


def _span(span) -> tuple[float, float]:
    if isinstance(span, (int, float)):
        span = (0.0, float(span))
    t0, t1 = (float(x) for x in span)
    if not t1 > t0:
        raise ValidationError(f"empty trajectory: span [{t0}, {t1}] has no length")
    return t0, t1


def _rotate(v: np.ndarray, c: complex) -> np.ndarray:
    """Multiply each (re, im) pair of ``v`` by the complex number ``c``."""
    if c == 1:
        return v
    out = np.empty_like(v)
    out[0::2] = c.real * v[0::2] - c.imag * v[1::2]
    out[1::2] = c.imag * v[0::2] + c.real * v[1::2]
    return out


def integrate_full(sys: SystemSpec, eps: float, ic, span, *, rtol: float = 1e-10, atol: float = 1e-12,
                   t_eval=None, fast_threshold: float = FAST_TIME_THRESHOLD, max_steps: int = MAX_STEPS,
                   time_direction: complex = 1.0, stop: Callable | None = None) -> Trajectory:
    """Integrate ``eps z' = f``, ``w' = g`` from ``ic = (z0, w0)`` over slow time ``span``.

    For ``eps < fast_threshold`` the fast-time form ``z' = f``, ``w' = eps g``
    is integrated and the samples are mapped back to slow time. ``stop(tau, z, w)``
    may end the run early by returning a reason string.
    """
    eps = float(eps)
    if not eps > 0:
        raise ValidationError("eps must be positive")
    t0, t1 = _span(span)
    z0, w0 = complex(ic[0]), complex(ic[1])
    f, g = sys.f_fn, sys.g_fn
    f(z0, w0), g(z0, w0)  # raises EvalPole at a singular initial condition
    direction = complex(time_direction)
    if abs(abs(direction) - 1) > 1e-12:
        raise ValidationError("time_direction must have modulus 1")
    base = real_embedding(sys, eps)
    fast = eps < fast_threshold
    s = eps if fast else 1.0

    def rhs(_t, y):
        return _rotate(base(y), direction) * s

    y0 = np.array([z0.real, z0.imag, w0.real, w0.imag])
    te = None if t_eval is None else np.asarray(t_eval, dtype=float) / s
    stop_fn = None
    if stop is not None:
        stop_fn = lambda t, y: stop(t * s, complex(y[0], y[1]), complex(y[2], y[3]))  # noqa: E731
    ts, ys, st, reason = dopri5(rhs, t0 / s, y0, t1 / s, rtol=rtol, atol=atol, t_eval=te,
                                max_steps=max_steps, stop=stop_fn)
    return Trajectory(ts * s, ys[:, 0] + 1j * ys[:, 1], ys[:, 2] + 1j * ys[:, 3],
                      "fast" if fast else "slow", eps, st.accepted, st.rejected, st.min_step * s,
                      reason, direction, rtol, atol)


def _field_1d(G) -> Callable:
    if isinstance(G, Series1):
        return G
    if isinstance(G, (str,)) or isinstance(G, (ex.Lit, ex.Var, ex.Neg, ex.Add, ex.Sub, ex.Mul, ex.Div, ex.Pow)):
        fn = ex.compile_expr(ex.as_expr(G))
        return lambda w: fn(0.0, w)
    return G


def integrate_reduced(G, w0, span, *, rtol: float = 1e-10, atol: float = 1e-12, t_eval=None,
                      max_steps: int = MAX_STEPS, time_direction: complex = 1.0) -> Trajectory:
    """Integrate the one-dimensional field ``w' = G(w)``; ``G`` is a Series1, Expr or callable."""
    t0, t1 = _span(span)
    fn = _field_1d(G)
    w0 = complex(w0)
    fn(w0)
    direction = complex(time_direction)

    def rhs(_t, y):
        v = complex(fn(complex(y[0], y[1]))) * direction
        return np.array([v.real, v.imag])

    ts, ys, st, reason = dopri5(rhs, t0, [w0.real, w0.imag], t1, rtol=rtol, atol=atol, t_eval=t_eval,
                                max_steps=max_steps)
    return Trajectory(ts, None, ys[:, 0] + 1j * ys[:, 1], "slow", None, st.accepted, st.rejected,
                      st.min_step, reason, direction, rtol, atol)


def layer_flow(sys: SystemSpec, w_frozen, z0, span, *, rtol: float = 1e-10, atol: float = 1e-12,
               t_eval=None, max_steps: int = MAX_STEPS) -> Trajectory:
    """Fast flow ``z' = f(z, w)`` with ``w`` frozen; times are fast times."""
    t0, t1 = _span(span)
    wf = complex(w_frozen)
    f = sys.f_fn
    z0 = complex(z0)
    f(z0, wf)

    def rhs(_t, y):
        v = complex(f(complex(y[0], y[1]), wf))
        return np.array([v.real, v.imag])

    ts, ys, st, reason = dopri5(rhs, t0, [z0.real, z0.imag], t1, rtol=rtol, atol=atol, t_eval=t_eval,
                                max_steps=max_steps)
    return Trajectory(ts, ys[:, 0] + 1j * ys[:, 1], np.full(len(ts), wf), "fast", None,
                      st.accepted, st.rejected, st.min_step, reason, 1.0 + 0j, rtol, atol)


# ---------------------------------------------------------------------------
# classification


@dataclass
class ClassificationResult:
    """Local type of a one-dimensional holomorphic field at a point."""

    kind: str  # center | focus | node | zero | pole | regular
    point: complex = 0j
    stability: str | None = None  # attracting | repelling for foci and nodes
    order: int | None = None  # for zeros of order >= 2 and poles
    witness: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = self.witness.get("lambda")
        if self.kind in ("center", "focus", "node") and lam is None:
            raise ValueError("simple-zero classification needs its derivative as witness")

    @property
    def label(self) -> str:
        if self.kind in ("focus", "node"):
            return f"{self.kind}({self.stability})"
        if self.kind == "zero":
            return f"zero-of-order {self.order}"
        if self.kind == "pole":
            return f"pole-of-order {self.order}"
        if self.kind == "regular":
            return "regular-point"
        return self.kind

    def same_type(self, other: "ClassificationResult") -> bool:
        return self.kind == other.kind and self.order == other.order

    def to_json(self) -> dict:
        return {"kind": self.kind, "label": self.label, "point": self.point, "stability": self.stability,
                "order": self.order, "witness": dict(self.witness)}


def classify_linear_type(lam: complex, tol: float = CLASSIFY_TOL) -> str:
    """``center`` (pure imaginary), ``node`` (real) or ``focus`` (both parts nonzero)."""
    lam = complex(lam)
    if abs(lam.real) <= tol and abs(lam.imag) <= tol:
        raise UnclassifiableAtTolerance(f"lambda={lam}: both parts below {tol}")
    scale = abs(lam)
    if abs(lam.real) <= tol * scale:
        return "center"
    if abs(lam.imag) <= tol * scale:
        return "node"
    return "focus"


def _simple_zero(lam: complex, point: complex, tol: float) -> ClassificationResult:
    kind = classify_linear_type(lam, tol)
    stab = None
    if kind != "center":
        stab = "attracting" if lam.real < 0 else "repelling"
    return ClassificationResult(kind, point, stab, 1, {"lambda": lam})


class _Laurent:
    """``x^val * (c_0 + c_1 x + ...)`` with ``c_0 != 0``, or zero (``val is None``)."""

    K = 24

    def __init__(self, val, c, scale: float = 1.0):
        c = np.asarray(c, dtype=complex)
        if val is None or len(c) == 0:
            self.val, self.c = None, np.zeros(self.K, dtype=complex)
            return
        thresh = 1e-13 * max(scale, 1e-300)
        nz = np.flatnonzero(np.abs(c) > thresh)
        if len(nz) == 0:
            self.val, self.c = None, np.zeros(self.K, dtype=complex)
            return
        i = int(nz[0])
        c = c[i:]
        out = np.zeros(self.K, dtype=complex)
        out[: min(self.K, len(c))] = c[: self.K]
        self.val, self.c = val + i, out

    @property
    def is_zero(self) -> bool:
        return self.val is None

    def __add__(self, o: "_Laurent") -> "_Laurent":
        if self.is_zero:
            return o
        if o.is_zero:
            return self
        a, b = (self, o) if self.val <= o.val else (o, self)
        d = b.val - a.val
        c = a.c.copy()
        if d < self.K:
            c[d:] += b.c[: self.K - d]
        scale = max(abs(a.c[0]), abs(b.c[0]) if d == 0 else 0.0)
        return _Laurent(a.val, c, scale)

    def __neg__(self):
        return self if self.is_zero else _Laurent(self.val, -self.c, abs(self.c[0]))

    def __sub__(self, o):
        return self + (-o)

    def __mul__(self, o: "_Laurent") -> "_Laurent":
        if self.is_zero or o.is_zero:
            return _Laurent(None, [])
        c = np.convolve(self.c, o.c)[: self.K]
        return _Laurent(self.val + o.val, c, abs(c[0]))

    def reciprocal(self) -> "_Laurent":
        if self.is_zero:
            raise EvalPole(None, "reciprocal of an identically zero expression")
        r = s1_reciprocal(Series1(self.c))
        return _Laurent(-self.val, r.coeffs, abs(r[0]))

    def __pow__(self, n: int) -> "_Laurent":
        if n < 0:
            return self.reciprocal() ** (-n)
        out = _Laurent(0, [1.0])
        for _ in range(n):
            out = out * self
        return out


def laurent_expand(e, w0: complex = 0j, z: complex = 0j) -> tuple[int | None, np.ndarray]:
    """Leading index and coefficients of the Laurent expansion of ``e(w)`` at ``w0``.

    Returns ``(None, zeros)`` when the expression vanishes identically to the
    working truncation.
    """
    e = ex.as_expr(e)
    w0, z = complex(w0), complex(z)

    def go(n) -> _Laurent:
        if isinstance(n, ex.Lit):
            return _Laurent(0, [n.value], abs(n.value))
        if isinstance(n, ex.Var):
            if n.name == "z":
                return _Laurent(0, [z], abs(z))
            return _Laurent(0, [w0, 1.0], abs(w0)) if w0 != 0 else _Laurent(1, [1.0])
        if isinstance(n, ex.Neg):
            return -go(n.arg)
        if isinstance(n, ex.Pow):
            return go(n.base) ** n.exp
        a, b = go(n.left), go(n.right)
        if isinstance(n, ex.Add):
            return a + b
        if isinstance(n, ex.Sub):
            return a - b
        if isinstance(n, ex.Mul):
            return a * b
        return a * b.reciprocal()

    L = go(e)
    return L.val, L.c


def classify_point(fld, w0: complex = 0j, tol: float = CLASSIFY_TOL, max_order: int = MAX_ORDER) -> ClassificationResult:
    """Classify ``w' = fld(w)`` at ``w0``.

    ``fld`` is an expression in ``w`` (poles allowed) or a Series1 already
    centred at ``w0``. Simple zeros become center, focus or node by the
    derivative; higher zeros and poles are reported with their order and
    leading coefficient.
    """
    w0 = complex(w0)
    if isinstance(fld, Series1):
        c = fld.coeffs
        scale = max(1.0, float(np.max(np.abs(c))))
        nz = np.flatnonzero(np.abs(c) > 1e-15 * scale)
        if len(nz) == 0:
            raise UnclassifiableAtTolerance("field vanishes identically to working precision")
        val, lead = int(nz[0]), complex(c[nz[0]])
        circle = None
    else:
        e = ex.as_expr(fld)
        val, cs = laurent_expand(e, w0)
        if val is None:
            raise UnclassifiableAtTolerance("field vanishes identically to working precision")
        lead = complex(cs[0])
        circle = _circle_check(e, w0, val) if val < 0 else None
    if abs(val) > max_order:
        raise UnclassifiableAtTolerance(f"order {abs(val)} exceeds the maximum {max_order}")
    wit = {"leading_index": val, "leading_coefficient": lead}
    if val < 0:
        if circle is not None:
            wit["circle_check"] = circle
        return ClassificationResult("pole", w0, None, -val, wit)
    if val == 0:
        return ClassificationResult("regular", w0, None, None, {**wit, "value": lead})
    if val == 1:
        res = _simple_zero(lead, w0, tol)
        res.witness.update(wit)
        return res
    return ClassificationResult("zero", w0, None, val, wit)


def _circle_check(e, w0: complex, val: int) -> list:
    """``max |(w - w0)^(-val) e(w)|`` on circles of radius 1e-2, 1e-3, 1e-4."""
    fn = ex.compile_expr(e)
    th = np.exp(2j * np.pi * np.arange(16) / 16)
    out = []
    for r in (1e-2, 1e-3, 1e-4):
        pts = w0 + r * th
        v = np.asarray(fn(0.0, pts), dtype=complex) * (r * th) ** (-val)
        out.append(float(np.max(np.abs(v))))
    return out
