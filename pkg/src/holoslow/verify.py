"""Executable checks: invariance residuals, Hausdorff scaling, attraction,
normal hyperbolicity and persistence of singularities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as ex
from .briot_bouquet import reduced_vector_field, slow_dynamics_on_manifold
from .dynamics import (
    ClassificationResult,
    Trajectory,
    _simple_zero,
    classify_linear_type,
    classify_point,
    integrate_full,
)
from .errors import (
    AlphaNotPureImaginary,
    DomainExit,
    EvalPole,
    FamilyInvariantViolated,
    NumericalError,
    RegionExit,
    UnsupportedFamily,
    ValidationError,
    WindowMismatch,
)
from .manifolds import (
    GraphManifold,
    ImplicitManifold,
    coupled_manifold,
    exact_linear_slope,
    formal_graph_series,
    uncoupled_power_graph,
)
from .systems import (
    CoupledSpec,
    CriticalManifoldSample,
    SF2Spec,
    SystemSpec,
    critical_manifold_solve,
    sf2_from_exprs,
)

STATEMENT_PROOF_NOTE = (
    "the on-manifold dynamics is taken as w' = g(w), as derived in the proof; "
    "the theorem statement writes z' = g(z, w)"
)


# ---------------------------------------------------------------------------
# invariance


def _in_domain(M, w: complex) -> bool:
    dom = getattr(M, "domain", {}) or {}
    if dom.get("excludes_origin") and abs(w) < 1e-12:
        return False
    ray = dom.get("excluded_ray")
    if ray is not None and abs(w) > 0:
        d = (np.angle(w) - ray + math.pi) % (2 * math.pi) - math.pi
        if abs(d) < 1e-9:
            return False
    return True


def invariance_residual(M: ImplicitManifold | GraphManifold, traj: Trajectory, normalize: bool = True) -> float:
    """Largest defect of the trajectory samples with respect to ``M``.

    Level sets: ``|H(z, w)|``, divided by ``max(1, |grad H| * max(|z|, |w|))``
    when ``normalize``. Graphs: ``|z - h(w)|`` (or ``|w - h(z)|``).
    Raises :class:`DomainExit` at the first sample outside the domain of ``M``.
    """
    if traj.z is None or traj.w is None:
        raise ValidationError("invariance needs a trajectory with both z and w")
    radius = None
    if isinstance(M, GraphManifold) and M.verdict is not None and math.isfinite(M.verdict.radius):
        radius = M.verdict.radius
    worst = 0.0
    for i, (z, w) in enumerate(zip(traj.z, traj.w)):
        z, w = complex(z), complex(w)
        free = w if not (isinstance(M, GraphManifold) and M.direction == "w-of-z") else z
        if not _in_domain(M, free) or (radius is not None and abs(free) >= radius):
            raise DomainExit(i)
        try:
            if isinstance(M, ImplicitManifold):
                r = abs(complex(M.H(z, w)))
                if normalize:
                    gz, gw = (abs(complex(c)) for c in M.grad(z, w))
                    r /= max(1.0, math.hypot(gz, gw) * max(abs(z), abs(w)))
            elif M.direction == "z-of-w":
                r = abs(z - complex(M(w)))
            else:
                r = abs(w - complex(M(z)))
        except EvalPole as err:
            raise DomainExit(i, f"manifold evaluation hit a pole: {err}") from err
        if not math.isfinite(r):
            raise DomainExit(i, "manifold evaluation is not finite")
        worst = max(worst, r)
    return worst


# ---------------------------------------------------------------------------
# Hausdorff scaling


@dataclass
class ScalingReport:
    eps: list
    distances: list
    slope: float
    constant: float
    r2: float
    window_radius: float
    n_points: int
    spans_decade: bool

    def to_json(self) -> dict:
        return {
            "eps": list(self.eps),
            "distances": list(self.distances),
            "slope": self.slope,
            "constant": self.constant,
            "r2": self.r2,
            "window_radius": self.window_radius,
            "n_points": self.n_points,
            "spans_decade": self.spans_decade,
        }

    def to_csv(self) -> str:
        lines = ["eps,distance"]
        lines += ["%.17g,%.17g" % (e, d) for e, d in zip(self.eps, self.distances)]
        return "\n".join(lines) + "\n"


def window_grid(radius: float = 1.0, n_radii: int = 16, n_angles: int = 32, include_origin: bool = True) -> np.ndarray:
    """Polar grid over ``|w| <= radius``; the origin is added once when allowed."""
    r = np.linspace(radius / n_radii, radius, n_radii)
    th = 2 * np.pi * np.arange(n_angles) / n_angles + (0 if include_origin else np.pi / n_angles)
    pts = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    return np.concatenate([[0j], pts]) if include_origin else pts


def hausdorff_distance(P: np.ndarray, Q: np.ndarray) -> float:
    """Symmetric Hausdorff distance between point clouds in C^2 (rows ``(z, w)``)."""
    d = np.sqrt(
        np.abs(P[:, None, 0] - Q[None, :, 0]) ** 2 + np.abs(P[:, None, 1] - Q[None, :, 1]) ** 2
    )
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _graph_points(h: Callable, ws: np.ndarray) -> np.ndarray:
    try:
        zs = np.asarray(h(ws), dtype=complex) * np.ones_like(ws)
    except EvalPole as err:
        raise WindowMismatch(f"manifold cannot be sampled on the window: {err}") from err
    if not np.all(np.isfinite(zs)):
        raise WindowMismatch("manifold is not finite on the sampling window")
    return np.column_stack([zs, ws])


def hausdorff_scaling(pair: Callable, eps_grid, radius: float = 1.0, *, include_origin: bool = True,
                      n_radii: int = 16, n_angles: int = 32) -> ScalingReport:
    """Fit ``log d_H(C_0, C_eps)`` against ``log eps``.

    ``pair(eps)`` returns the two graphs ``(h_0, h_eps)`` as functions of ``w``;
    both are sampled on the same polar grid over ``|w| <= radius``.
    """
    eps = [float(e) for e in eps_grid]
    if len(eps) < 4:
        raise ValidationError("Hausdorff scaling needs at least 4 eps values")
    if any(not e > 0 for e in eps):
        raise ValidationError("eps values must be positive")
    ws = window_grid(radius, n_radii, n_angles, include_origin)
    dists = []
    for e in eps:
        h0, he = pair(e)
        dists.append(hausdorff_distance(_graph_points(he, ws), _graph_points(h0, ws)))
    x, y = np.log(eps), np.log(dists)
    slope, icpt = np.polyfit(x, y, 1)
    fit = slope * x + icpt
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingReport(eps, dists, float(slope), float(math.exp(icpt)), r2, radius, len(ws),
                         max(eps) / min(eps) >= 10)


def coupled_pair(c: CoupledSpec) -> Callable:
    """``eps -> (h_0, h_eps)`` for the coupled family."""
    return lambda e: (coupled_manifold(c, 0.0).fn, coupled_manifold(c, e).fn)


def uncoupled_pair(n: int, G) -> Callable:
    """``eps -> (0, h_eps)`` for ``f = z^n``: the critical manifold is ``z = 0``."""
    return lambda e: ((lambda w: np.zeros_like(np.asarray(w, dtype=complex))), uncoupled_power_graph(n, G, e).fn)


# ---------------------------------------------------------------------------
# attraction


@dataclass
class AttractionReport:
    eps: float
    alpha2: float
    theta: float
    eta: float
    tau: list
    abs_v: list
    measured: list  # log|v| - log|v0|
    predicted: list  # -alpha2 Im(G(w) - G(w0))/eps
    in_region: list
    transient: list
    max_rel_deviation: float
    measured_decay: float
    predicted_decay: float
    termination: str
    degenerate: bool = False
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "alpha2": self.alpha2,
            "theta": self.theta,
            "eta": self.eta,
            "max_rel_deviation": self.max_rel_deviation,
            "measured_decay": self.measured_decay,
            "predicted_decay": self.predicted_decay,
            "termination": self.termination,
            "degenerate": self.degenerate,
            "notes": list(self.notes),
            "samples": {
                "tau": list(self.tau),
                "abs_v": list(self.abs_v),
                "measured": list(self.measured),
                "predicted": list(self.predicted),
                "in_region": list(self.in_region),
                "transient": list(self.transient),
            },
        }

    def to_csv(self) -> str:
        rows = ["s,abs_v,measured,predicted,in_region,transient"]
        for r in zip(self.tau, self.abs_v, self.measured, self.predicted, self.in_region, self.transient):
            rows.append("%.17g,%.17g,%.17g,%.17g,%d,%d" % (r[0], r[1], r[2], r[3], r[4], r[5]))
        return "\n".join(rows) + "\n"


def attraction_report(sys: SystemSpec | CoupledSpec, eps: float, ic=None, span: float = 0.1, eta: float | None = None,
                      *, theta: float | None = None, n_samples: int = 101, rtol: float = 1e-10,
                      atol: float = 1e-12) -> AttractionReport:
    """Decay of ``v = z - h_eps(w)`` for a coupled system with pure-imaginary ``alpha``.

    Along real time ``|v|`` is constant (``v' = (alpha/eps) v``), so the run
    follows the complex-time ray ``tau = s e^(i theta)``, ``theta = pi/2 sign(alpha2)``
    by default. There ``G(w) - G(w0) = tau``, and the prediction is
    ``log|v| - log|v0| = -alpha2 Im(G(w) - G(w0))/eps``. Region ``R`` is
    ``alpha2 Im(G(w) - G(w0)) >= eta``; samples before entering it are
    transient and the run is cut at the first exit.
    """
    c = sys.coupled if isinstance(sys, SystemSpec) else sys
    if c is None:
        raise ValidationError("attraction needs a coupled (SF3) system")
    system = sys if isinstance(sys, SystemSpec) else _coupled_system(c)
    alpha = c.alpha
    if abs(alpha.real) > 1e-12 * max(1.0, abs(alpha)):
        raise AlphaNotPureImaginary(f"alpha={alpha} has nonzero real part")
    a2 = alpha.imag
    eps = float(eps)
    if not span > 0:
        raise ValidationError("span must be positive")
    th = (math.pi / 2) * math.copysign(1.0, a2) if theta is None else float(theta)
    direction = complex(math.cos(th), math.sin(th))
    h = coupled_manifold(c, eps)
    if ic is None:
        w0 = complex(np.exp(1j * np.pi / 4))
        ic = (complex(h(w0)) + 1.0, w0)
    z0, w0 = complex(ic[0]), complex(ic[1])
    G0 = complex(c.G(w0))
    v0 = z0 - complex(h(w0))
    if eta is None:
        eta = 0.5 * a2 * (direction * span).imag
    state = {"entered": False}

    def stop(_s, z, w):
        inside = a2 * (complex(c.G(w)) - G0).imag >= eta
        if inside:
            state["entered"] = True
        elif state["entered"]:
            return "region-exit"
        return None

    ts = np.linspace(0.0, span, n_samples)
    traj = integrate_full(system, eps, (z0, w0), (0.0, span), rtol=rtol, atol=atol, t_eval=ts,
                          time_direction=direction, stop=stop)
    Gv = np.asarray([complex(c.G(w)) for w in traj.w])
    v = traj.z - np.asarray([complex(h(w)) for w in traj.w])
    region_val = a2 * (Gv - G0).imag
    inside = region_val >= eta
    if not inside.any():
        raise RegionExit(f"trajectory never entered the region alpha2*Im(G - G0) >= {eta}")
    first = int(np.argmax(inside))
    keep = np.ones(len(v), dtype=bool)
    if traj.termination == "region-exit":
        keep[-1] = False  # the sample that left R
    transient = ~inside & (np.arange(len(v)) < first)
    predicted = -a2 * (Gv - G0).imag / eps
    degenerate = abs(v0) == 0
    notes = []
    if degenerate:
        measured = np.zeros(len(v))
        dev = float("nan")
        notes.append(f"initial point lies on the manifold; max |v| = {float(np.max(np.abs(v))):.3g}")
    else:
        with np.errstate(divide="ignore"):
            measured = np.log(np.abs(v)) - math.log(abs(v0))
        sel = inside & keep & (np.abs(predicted) > 0)
        dev = float(np.max(np.abs(measured[sel] - predicted[sel]) / np.abs(predicted[sel]))) if sel.any() else float("nan")
    last = int(np.flatnonzero(keep)[-1])
    return AttractionReport(
        eps, a2, th, float(eta), traj.tau[keep].tolist(), np.abs(v)[keep].tolist(), measured[keep].tolist(),
        predicted[keep].tolist(), inside[keep].tolist(), transient[keep].tolist(), dev,
        float(-measured[last]), float(-predicted[last]), traj.termination, degenerate, notes,
    )


def _coupled_system(c: CoupledSpec) -> SystemSpec:
    f = c.f_expr()
    if f is None:
        return SystemSpec(ex.ZERO, c.g, family="SF3-coupled", coupled=c, f_callable=c.f_fn())
    return SystemSpec(f, c.g, family="SF3-coupled", coupled=c)


# ---------------------------------------------------------------------------
# normal hyperbolicity


@dataclass
class HyperbolicityReport:
    margin: float
    signs: str  # "+", "-", "mixed" or "0"
    margins: list
    hyperbolic: bool

    def to_json(self) -> dict:
        return {"margin": self.margin, "signs": self.signs, "margins": list(self.margins),
                "hyperbolic": self.hyperbolic}


def normal_hyperbolicity_check(sys: SystemSpec, samples=None, tol: float = 1e-10) -> HyperbolicityReport:
    """Min of ``|Re df/dz|`` over samples of ``C_0`` and the sign pattern.

    ``samples`` is a :class:`CriticalManifoldSample` or a list of ``w`` values
    (default: 8 points on the circle of radius ``window_radius/2``).
    """
    if samples is None:
        samples = 0.5 * sys.window_radius * np.exp(2j * np.pi * np.arange(8) / 8)
    if not isinstance(samples, CriticalManifoldSample):
        samples = critical_manifold_solve(sys, samples)
    m = np.asarray(samples.margins, dtype=float)
    margin = float(np.min(np.abs(m)))
    if margin <= tol:
        signs = "0"
    elif np.all(m > 0):
        signs = "+"
    elif np.all(m < 0):
        signs = "-"
    else:
        signs = "mixed"
    return HyperbolicityReport(margin, signs, m.tolist(), margin > tol and signs != "mixed")


# ---------------------------------------------------------------------------
# persistence


@dataclass
class PersistenceReport:
    family: str
    reduced: ClassificationResult
    perturbed: list  # one ClassificationResult per eps
    eps: list
    hypothesis_h: bool | None
    persistence: bool | None
    counts: dict | None = None
    verdict: str | None = None
    notes: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "eps": list(self.eps),
            "reduced": self.reduced.to_json(),
            "perturbed": [p.to_json() for p in self.perturbed],
            "hypothesis_h": self.hypothesis_h,
            "persistence": self.persistence,
            "counts": self.counts,
            "verdict": self.verdict,
            "notes": list(self.notes),
            "diagnostics": self.diagnostics,
        }


def _sign_counts(x: float) -> tuple[int, int] | None:
    if x > 0:
        return (2, 0)
    if x < 0:
        return (0, 2)
    return None


def linear_stability_table(a: complex, sigma: complex, tol: float = 1e-12) -> tuple[dict | None, str | None]:
    """Unstable/stable counts of the slow (``sigma``) and fast (``a``) directions and the global verdict."""
    rs = sigma.real if abs(sigma.real) > tol * max(1.0, abs(sigma)) else 0.0
    ra = a.real if abs(a.real) > tol * max(1.0, abs(a)) else 0.0
    j, k = _sign_counts(rs), _sign_counts(ra)
    if j is None or k is None:
        return ({"j_u": j[0] if j else None, "j_s": j[1] if j else None,
                 "k_u": k[0] if k else None, "k_s": k[1] if k else None}, None)
    counts = {"j_u": j[0], "j_s": j[1], "k_u": k[0], "k_s": k[1]}
    if rs > 0 and ra > 0:
        verdict = "global repelling point"
    elif rs < 0 and ra < 0:
        verdict = "global attracting point"
    else:
        verdict = "saddle point"
    return counts, verdict


def pole_family_field(alpha: complex, beta: complex, n: int, eps: float, N: int = 24) -> ex.Expr:
    """On-manifold field ``F_eps = (alpha h + beta w)/h'`` of the pole family, as an expression.

    ``h`` is the graph series truncated at ``N``; this is the field expressed
    in fast time, whose Laurent expansion at 0 starts with ``eps/w^n``.
    """
    m = formal_graph_series("linear-pole", {"alpha": alpha, "beta": beta, "n": n}, eps, N)
    hc = np.asarray(m.series.coeffs)
    num = alpha * hc.copy()
    num[1] += beta
    den = hc[1:] * np.arange(1, len(hc))
    return ex.mk_div(ex.polynomial(num, "w"), ex.polynomial(den, "w"))


def persistence_report(obj, eps_grid=None, *, point: complex = 0j, N: int = 24) -> PersistenceReport:
    """Compare the reduced singularity with the perturbed one for each eps.

    Supported: SF2 (Briot-Bouquet pipeline), linear-linear (and SF4 with a
    linear normal form), linear-pole, uncoupled and coupled families.
    """
    if isinstance(obj, SF2Spec):
        return _persistence_sf2(obj, list(eps_grid or [0.1]), N, "SF2-series")
    sys: SystemSpec = obj
    eps = list(eps_grid) if eps_grid is not None else list(sys.eps)
    fam = sys.graph_family()
    if sys.family == "SF2-series":
        return _persistence_sf2(sys.sf2, eps, N, sys.family)
    if fam == "linear-linear":
        return _persistence_linear(sys.graph_params(), eps, sys.family)
    if fam == "linear-pole":
        p = sys.graph_params()
        return _persistence_pole(p["alpha"], p["beta"], p["n"], eps, N)
    if sys.family in ("uncoupled", "SF3-coupled"):
        return _persistence_on_graph(sys, eps, complex(sys.params.get("point", point)))
    if sys.family == "general":
        try:
            sf2 = sf2_from_exprs(sys.f, sys.g, N)
        except (FamilyInvariantViolated, EvalPole) as err:
            raise UnsupportedFamily(f"general system is not of SF2 form at the origin: {err}") from err
        if sf2.gamma != 0:
            raise UnsupportedFamily("f has a linear w term; no diagonal SF2 form at the origin")
        return _persistence_sf2(sf2, eps, N, sys.family)
    raise UnsupportedFamily(f"no persistence analysis for family {sys.family!r} ({fam or 'no graph family'}); "
                            "its formal graph series diverges")


def _persistence_sf2(s: SF2Spec, eps: list, N: int, family: str) -> PersistenceReport:
    G = reduced_vector_field(s, N)
    reduced = classify_point(G)
    perturbed = [_simple_zero(s.alpha / e, 0j, 1e-9) for e in eps]
    h = classify_linear_type(s.alpha) == classify_linear_type(s.beta)
    persist = all(reduced.same_type(p) for p in perturbed) if h else None
    diag: dict = {"alpha": s.alpha, "beta": s.beta, "reduced_field": G.coeffs[:4].tolist()}
    for e in eps:
        try:
            gam = slow_dynamics_on_manifold(s, e, min(N, 8))
            diag[f"gamma_eps={e!r}"] = gam.coeffs[:4].tolist()
        except NumericalError as err:
            diag[f"gamma_eps={e!r}"] = f"{type(err).__name__}: {err}"
    notes = [] if h else ["hypothesis (H) fails: alpha and beta are of different type; no persistence claim"]
    return PersistenceReport(family, reduced, perturbed, eps, h, persist, notes=notes, diagnostics=diag)


def _persistence_linear(p: dict, eps: list, family: str) -> PersistenceReport:
    a, b, c, d = p["a"], p["b"], p["c"], p["d"]
    sigma = (a * d - b * c) / a
    field_ = ex.mk_mul(ex.Lit.of(sigma), ex.W)
    reduced = classify_point(field_)
    perturbed = [classify_point(field_) for _ in eps]
    counts, verdict = linear_stability_table(a, sigma)
    h = classify_linear_type(a) == classify_linear_type(sigma)
    diag = {"sigma": sigma}
    for e in eps:
        lam = exact_linear_slope(a, b, c, d, e)
        diag[f"slope_eps={e!r}"] = -b / (a - e * sigma)
        diag[f"exact_slow_eigenvalue_eps={e!r}"] = d + c * lam
    notes = []
    if counts is not None and verdict is None:
        notes.append("a direction has zero real part; the dimension table does not apply")
    persist = all(reduced.same_type(q) for q in perturbed)
    if persist:
        notes.append(f"{reduced.kind} persists")
    return PersistenceReport("linear-linear", reduced, perturbed, eps, h, persist, counts, verdict, notes, diag)


def _persistence_pole(alpha, beta, n: int, eps: list, N: int) -> PersistenceReport:
    reduced = classify_point(ex.Pow(ex.W, -n))
    perturbed = [classify_point(pole_family_field(alpha, beta, n, e, N)) for e in eps]
    persist = all(reduced.same_type(q) for q in perturbed)
    diag = {f"leading_coefficient_eps={e!r}": q.witness["leading_coefficient"] for e, q in zip(eps, perturbed)}
    notes = ["perturbed field is (alpha h + beta w)/h' in fast time; its leading coefficient is eps"]
    return PersistenceReport("linear-pole", reduced, perturbed, eps, None, persist, notes=notes, diagnostics=diag)


def _persistence_on_graph(sys: SystemSpec, eps: list, point: complex) -> PersistenceReport:
    reduced = classify_point(sys.g, point)
    perturbed = [classify_point(sys.g, point) for _ in eps]
    notes = [STATEMENT_PROOF_NOTE] if sys.family == "uncoupled" else [
        "on the invariant graph the slow variable obeys w' = g(w) for every eps"]
    return PersistenceReport(sys.family, reduced, perturbed, eps, None, True, notes=notes)
