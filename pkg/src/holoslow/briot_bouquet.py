"""Briot-Bouquet equations and the invariant-manifold series built on them.

A Briot-Bouquet problem is ``z phi' = lam*phi + mu*z + Q(z, phi)`` with
``Q = O_2``. When ``lam`` is not a positive integer it has a unique
holomorphic solution with ``phi(0) = 0``, whose coefficients follow from

    d_k = [z^k](mu*z + Q(z, phi_{<k})) / (k - lam).

For an SF2 system the graph ``w = h(z) = z*phi(z)`` of an invariant manifold
through the origin satisfies such an equation with ``lam = eps*beta/alpha - 1``
and ``mu = eps*b20/alpha``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateAlpha,
    DegenerateLinearPart,
    FamilyInvariantViolated,
    RecurrenceBreakdown,
    Resonance,
    SeriesOverflowWarning,
)
from .series import Series1, Series2, implicit_series_solve, s2_eval_on_curve
from .systems import SF2Spec

RESONANCE_TOL = 1e-9
OVERFLOW = 1e300
ALPHA_TOL = 1e-12


@dataclass(frozen=True)
class BBProblem:
    lam: complex
    mu: complex
    Q: Series2
    source: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "mu", complex(self.mu))
        for key in ((0, 0), (1, 0), (0, 1)):
            if self.Q[key] != 0:
                raise FamilyInvariantViolated(f"Q coefficient {key} = {self.Q[key]} must vanish")


def bb_solve(p: BBProblem, N: int) -> Series1:
    """Coefficients ``d_1..d_N`` of the holomorphic solution (``d_0 = 0``).

    Raises :class:`Resonance` at the first ``k`` with ``|lam - k| < 1e-9``.
    If some ``|d_k|`` exceeds 1e300 a :class:`SeriesOverflowWarning` is issued
    and the series is returned truncated at order ``k - 1``.
    """
    var = p.Q.vars[0]
    d = np.zeros(N + 1, dtype=complex)
    Q = p.Q
    for k in range(1, N + 1):
        if abs(p.lam - k) < RESONANCE_TOL:
            raise Resonance(k, p.lam)
        phi = Series1(d[:k], var, order=k)
        z = Series1.variable(k, var)
        rhs = (Q.compose(z, phi)[k] if Q.order >= 2 else 0j) + (p.mu if k == 1 else 0j)
        dk = rhs / (k - p.lam)
        if not np.isfinite(dk) or abs(dk) > OVERFLOW:
            warnings.warn(f"coefficient d_{k} overflowed; series truncated at order {k - 1}",
                          SeriesOverflowWarning, stacklevel=2)
            return Series1(d[:k], var)
        d[k] = dk
    return Series1(d, var)


def bb_residual(p: BBProblem, phi: Series1) -> np.ndarray:
    """Coefficients (degrees ``0..N``) of ``z phi' - lam phi - mu z - Q(z, phi)``."""
    n = phi.order
    z = Series1.variable(n, phi.var)
    zdphi = phi.deriv().shift(1)
    r = zdphi - p.lam * phi - p.mu * z - p.Q.compose(z, phi)
    return np.asarray(r.coeffs)


@dataclass
class ManifoldSeries:
    """A graph ``w = h(z)`` (``"w-of-z"``) or ``z = h(w)`` (``"z-of-w"``) as a series."""

    direction: str
    h: Series1
    eps: float
    residual: float  # max defect of the original invariance equation
    scale: float
    provenance: str = "bb-pipeline"
    transformed_residual: float = 0.0
    lam: complex | None = None
    mu: complex | None = None
    truncated: bool = False

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale

    @property
    def ok(self) -> bool:
        return self.relative_residual < 1e-10

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "eps": self.eps,
            "provenance": self.provenance,
            "lambda": self.lam,
            "mu": self.mu,
            "residual": self.residual,
            "scale": self.scale,
            "transformed_residual": self.transformed_residual,
            "truncated": self.truncated,
            "h": self.h.to_json(),
        }


def _check_alpha(s: SF2Spec):
    if abs(s.alpha) < ALPHA_TOL:
        raise DegenerateAlpha(f"alpha={s.alpha} vanishes")


def fenichel_problem(s: SF2Spec, eps: float, N: int) -> BBProblem:
    """The Briot-Bouquet problem for ``phi = h(z)/z`` of the graph ``w = h(z)``.

    With ``p = (gamma*h + f~(z, h))/(alpha z)`` and ``q = g~(z, h)/(alpha z)``
    as series in ``(z, phi)``, ``z phi' = -phi + eps(beta phi/alpha + q)/(1 + p)``.
    """
    _check_alpha(s)
    eps = float(eps)
    al = s.alpha
    pc = {(0, 1): s.gamma / al}
    qc = {}
    for (i, j), c in s.a.items():
        pc[(i + j - 1, j)] = pc.get((i + j - 1, j), 0) + c / al
    for (i, j), c in s.b.items():
        qc[(i + j - 1, j)] = qc.get((i + j - 1, j), 0) + c / al
    vars_ = ("z", "phi")
    p = Series2.from_dict(pc, N, vars_)
    q = Series2.from_dict(qc, N, vars_)
    phi = Series2.variable(1, N, vars_)
    F = -phi + eps * (phi * (s.beta / al) + q) * (1.0 + p).reciprocal()
    lam, mu = F[0, 1], F[1, 0]
    c = F.coeffs.copy()
    c[0, 0] = c[1, 0] = c[0, 1] = 0
    src = {"direction": "w-of-z", "eps": eps, "alpha": s.alpha, "beta": s.beta}
    return BBProblem(lam, mu, Series2(c, vars_, N), src)


def slow_graph_problem(s: SF2Spec, eps: float, N: int) -> tuple[BBProblem, complex]:
    """The Briot-Bouquet problem for the graph ``z = h(w) = w (psi0 + phi(w))``.

    ``psi0 = -gamma/(alpha - eps*beta)`` is the slope at the origin and
    ``w phi' = (alpha Psi + gamma + Pf)/(eps (beta + Pg)) - Psi`` with
    ``Psi = psi0 + phi``, ``Pf = f~(w Psi, w)/w`` and ``Pg = g~(w Psi, w)/w``.
    """
    _check_alpha(s)
    eps = float(eps)
    if abs(s.beta) < ALPHA_TOL:
        raise DegenerateLinearPart("the graph over w needs beta != 0")
    den = s.alpha - eps * s.beta
    if abs(den) < RESONANCE_TOL:
        raise RecurrenceBreakdown(f"alpha - eps*beta = {den} vanishes; no graph slope at the origin")
    psi0 = -s.gamma / den
    vars_ = ("w", "phi")
    W = Series2.variable(0, N, vars_)
    Psi = Series2.variable(1, N, vars_) + psi0
    Pf = Series2.zeros(N, vars_)
    Pg = Series2.zeros(N, vars_)
    for tgt, terms in ((0, s.a), (1, s.b)):
        for (i, j), c in terms.items():
            t = (W ** (i + j - 1)) * (Psi**i) * c
            if tgt == 0:
                Pf = Pf + t
            else:
                Pg = Pg + t
    F = (Psi * s.alpha + s.gamma + Pf) * ((Pg + s.beta) * eps).reciprocal() - Psi
    lam, mu = F[0, 1], F[1, 0]
    c = F.coeffs.copy()
    c[0, 0] = c[1, 0] = c[0, 1] = 0
    src = {"direction": "z-of-w", "eps": eps, "alpha": s.alpha, "beta": s.beta, "psi0": psi0}
    return BBProblem(lam, mu, Series2(c, vars_, N), src), psi0


def fenichel_series(s: SF2Spec, eps: float, N: int = 24, direction: str = "auto") -> ManifoldSeries:
    """Invariant graph through the origin of an SF2 system as a series of order ``N + 1``.

    ``direction="w-of-z"`` builds ``w = z*Lambda(z)`` (tangent to the fast
    axis); ``"z-of-w"`` builds ``z = h(w)`` over the slow variable. ``"auto"``
    picks ``w-of-z`` unless ``gamma != 0``.
    """
    if direction == "auto":
        direction = "w-of-z" if s.gamma == 0 else "z-of-w"
    if direction == "w-of-z":
        prob = fenichel_problem(s, eps, N)
        phi = bb_solve(prob, N)
        h = phi.shift(1)
        res = original_residual(s, eps, h, "w-of-z")
    elif direction == "z-of-w":
        prob, psi0 = slow_graph_problem(s, eps, N)
        phi = bb_solve(prob, N)
        h = (phi + psi0).shift(1)
        res = original_residual(s, eps, h, "z-of-w")
    else:
        raise ValueError(f"unknown direction {direction!r}")
    truncated = phi.order < N
    scale = max(1.0, h.max_abs()) * s.coefficient_scale()
    tres = float(np.max(np.abs(bb_residual(prob, phi)[1:]))) if phi.order >= 1 else 0.0
    return ManifoldSeries(direction, h, float(eps), float(np.max(np.abs(res[1:]))), scale,
                          "bb-pipeline", tres, prob.lam, prob.mu, truncated)


def original_residual(s: SF2Spec, eps: float, h: Series1, direction: str) -> np.ndarray:
    """Coefficients of the invariance defect for the graph ``h``, degrees ``0..order(h)``.

    ``w-of-z``: ``(alpha z + gamma h + f~(z,h)) h' - eps (beta h + g~(z,h))``.
    ``z-of-w``: ``eps (beta w + g~(h,w)) h' - (alpha h + gamma w + f~(h,w))``.
    """
    n = h.order
    hp = Series1(h.coeffs, h.var, order=n + 1)  # lets h' reach degree n
    x = Series1.variable(n + 1, h.var)
    dh = hp.deriv()
    if direction == "w-of-z":
        ft = s2_eval_on_curve(s.f_tilde, hp)
        gt = s2_eval_on_curve(s.g_tilde, hp)
        r = (x * s.alpha + hp * s.gamma + ft) * dh - eps * (hp * s.beta + gt)
    else:
        ft = s.f_tilde.compose(hp, x)
        gt = s.g_tilde.compose(hp, x)
        r = eps * (x * s.beta + gt) * dh - (hp * s.alpha + x * s.gamma + ft)
    return np.asarray(r.coeffs[: n + 1])


def critical_graph_series(s: SF2Spec, N: int) -> Series1:
    """``z = L(w)`` on the critical manifold ``alpha z + gamma w + f~(z, w) = 0``."""
    _check_alpha(s)
    theta = s.f_tilde.with_order(max(N, s.f_tilde.order)) + Series2.from_dict({(1, 0): s.alpha, (0, 1): s.gamma}, max(N, s.f_tilde.order))
    try:
        return implicit_series_solve(theta, s.alpha, N)
    except DegenerateLinearPart as err:
        raise DegenerateAlpha(str(err)) from err


def reduced_vector_field(s: SF2Spec, N: int = 24) -> Series1:
    """``G(w) = beta w + g~(L(w), w)``, the slow flow on the critical manifold."""
    L = critical_graph_series(s, N)
    w = Series1.variable(N, "w")
    return w * s.beta + s.g_tilde.compose(L, w)


def slow_dynamics_on_manifold(s: SF2Spec, eps: float, N: int = 24, manifold: ManifoldSeries | None = None) -> Series1:
    """``Gamma(z) = (alpha z + gamma h(z) + f~(z, h(z)))/eps`` along ``w = h(z)``."""
    m = manifold if manifold is not None else fenichel_series(s, eps, N, "w-of-z")
    if m.direction != "w-of-z":
        raise ValueError("slow dynamics in z needs the graph w = h(z)")
    h = m.h.truncate(N)
    z = Series1.variable(N, h.var)
    return (z * s.alpha + h * s.gamma + s2_eval_on_curve(s.f_tilde, h)) / float(eps)
