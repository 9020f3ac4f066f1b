"""Geodesic-curvature integrand, Gauss density, quadrature, and limits.

The boundary integrand along a circle of radius r is

    eta_r(t) = [(f_r.f_t)(f_tt.f_t) - (f_t.f_t)(f_r.f_tt)]
               / (|f_r ^ f_t| (f_t.f_t)),

whose numerator equals <f_r ^ f_t, f_t ^ f_tt> and is accumulated here as
a sum of pairwise 2x2 determinants, which avoids the cancellation the
dot-product form suffers at small radii. For r -> 0 the integrand
concentrates Lorentzian mass of -pi at each angle t = k pi/(n-1) for the
top pole order n, so the circle integrals use panel meshes graded
geometrically into those angles before adaptive refinement takes over.
Limits are taken on a geometric radius ladder with Aitken acceleration
and are always compared against, never replaced by, the predicted
quantized value -2 pi (max pole order - 1).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .ends import (
    BlowupData,
    EndCase,
    EndDefinition,
    blowup_data,
    end_type,
    first_imaginary_index,
)
from .errors import (
    DegenerateAtPoint,
    DomainError,
    QuadratureNoConvergence,
    WrongCase,
)
from .immersion import EndEvaluator, PolarPoint
from .normalize import case2_normal_form, is_case3_normal

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Pointwise quantities
# ---------------------------------------------------------------------------


def _pair_dot(x, y, u, v):
    """<x ^ y, u ^ v> as a sum of pairwise determinants."""
    d = x.shape[0]
    out = np.zeros(np.broadcast_shapes(x.shape[1:], u.shape[1:]))
    for k in range(d):
        for j in range(k + 1, d):
            out = out + (x[k] * y[j] - x[j] * y[k]) * (u[k] * v[j] - u[j] * v[k])
    return out


def _wedge_sq(x, y):
    return _pair_dot(x, y, x, y)


def _eta_values(fr, ft, ftt):
    num = _pair_dot(fr, ft, ft, ftt)
    den = np.sqrt(np.maximum(_wedge_sq(fr, ft), 0.0)) * np.sum(ft * ft, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def eta_profile(end: EndDefinition, r: float, t) -> np.ndarray:
    """Vectorized eta_r over an angle array. Non-finite samples (exact
    rank drops) are retried a hair away before giving up."""
    ev = EndEvaluator(end)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    vals = _eta_values(*ev.curvature_terms(float(r), t))
    bad = ~np.isfinite(vals)
    if np.any(bad):
        vals[bad] = _eta_values(*ev.curvature_terms(float(r), t[bad] + 1e-13))
        if np.any(~np.isfinite(vals)):
            i = int(np.argmax(~np.isfinite(vals)))
            raise DegenerateAtPoint(float(r), float(t[i]), "eta undefined")
    return vals


def eta(end: EndDefinition, p: PolarPoint) -> float:
    """Geodesic curvature integrand at one point."""
    return float(eta_profile(end, p.r, [p.t])[0])


def eta_upper_bound(end: EndDefinition, r: float, t) -> np.ndarray:
    """|f_t ^ f_tt| / |f_t|^2, the envelope the integrand never exceeds."""
    ev = EndEvaluator(end)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    _, ft, ftt = ev.curvature_terms(float(r), t)
    return np.sqrt(np.maximum(_wedge_sq(ft, ftt), 0.0)) / np.sum(ft * ft, axis=0)


def rotate90(x, y, u) -> np.ndarray:
    """Oriented 90-degree rotation of u inside span{x, y}."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    wedge = math.sqrt(max(float(_wedge_sq(x[:, None], y[:, None])[0]), 0.0))
    scale = float(np.linalg.norm(x) * np.linalg.norm(y))
    if wedge <= 1e-12 * scale or wedge == 0.0:
        raise DegenerateAtPoint(math.nan, math.nan, "rotation plane is degenerate")
    return (-np.dot(u, y) * x + np.dot(u, x) * y) / wedge


def gauss_density(end: EndDefinition, p: PolarPoint):
    """(K, dA) at one point from the normal-projected second derivatives."""
    k, da = gauss_density_profile(end, np.asarray([p.r]), np.asarray([p.t]))
    return float(k[0]), float(da[0])


def gauss_density_profile(end: EndDefinition, r, t):
    """Vectorized (K, dA) over broadcast polar arrays."""
    ev = EndEvaluator(end)
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    _, fr, ft, frr, frt, ftt = ev.jet(r, t)
    E = np.sum(fr * fr, axis=0)
    G = np.sum(ft * ft, axis=0)
    W2 = _wedge_sq(fr, ft)
    if np.any(W2 <= 0):
        i = int(np.argmax(W2 <= 0))
        raise DegenerateAtPoint(float(np.ravel(r)[min(i, r.size - 1)]),
                                float(np.ravel(t)[min(i, t.size - 1)]),
                                "first fundamental form is singular")
    e1 = fr / np.sqrt(E)
    w = ft - np.sum(ft * e1, axis=0) * e1
    e2 = w / np.linalg.norm(w, axis=0)

    def project_normal(v):
        return v - np.sum(v * e1, axis=0) * e1 - np.sum(v * e2, axis=0) * e2

    prr = project_normal(frr)
    prt = project_normal(frt)
    ptt = project_normal(ftt)
    K = (np.sum(prr * ptt, axis=0) - np.sum(prt * prt, axis=0)) / W2
    return K, np.sqrt(W2)


# ---------------------------------------------------------------------------
# Quadrature machinery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureConfig:
    base_panels: int = 16
    singularity_refinement_depth: int = 60
    abs_tol: float = 1e-7
    max_panels: int = 40000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")


def singular_angles(top_order: int) -> tuple:
    """Angles k pi/(n-1) in [0, 2 pi) where the integrand blows up."""
    if top_order < 2:
        return ()
    n = top_order - 1
    return tuple(k * math.pi / n for k in range(2 * n))


_GL_CACHE: dict = {}


def _gl(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _panel_values(fvec, a, b, n=15):
    x, w = _gl(n)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    vals = fvec(nodes.ravel()).reshape(nodes.shape)
    return (vals @ w) * half


def adaptive_panel_integral(
    fvec: Callable[[np.ndarray], np.ndarray],
    edges: Sequence[float],
    abs_tol: float,
    max_panels: int = 40000,
    min_width: float = 5e-15,
) -> float:
    """Adaptive bisection over an initial panel mesh, batch evaluated.

    Per-panel error is |one GL15 sweep - two half sweeps|; a panel is
    split while its error exceeds its width's proportional share of half
    the tolerance. Panel sums are accumulated in position order, so the
    result is deterministic for a fixed mesh regardless of evaluation
    batching.
    """
    edges = np.asarray(edges, dtype=float)
    total_width = float(edges[-1] - edges[0])
    panels = []  # [a, b, value, err]
    pend_a = list(edges[:-1])
    pend_b = list(edges[1:])
    while pend_a:
        if len(panels) + len(pend_a) > max_panels:
            achieved = sum(p[3] for p in panels) + math.inf
            raise QuadratureNoConvergence(achieved, abs_tol)
        A = np.asarray(pend_a)
        B = np.asarray(pend_b)
        M = 0.5 * (A + B)
        sweep = _panel_values(
            fvec,
            np.concatenate([A, A, M]),
            np.concatenate([B, M, B]),
        )
        P = len(A)
        value = sweep[P : 2 * P] + sweep[2 * P :]
        err = np.abs(sweep[:P] - value)
        panels.extend(
            [float(A[i]), float(B[i]), float(value[i]), float(err[i])]
            for i in range(P)
        )
        total_err = sum(p[3] for p in panels)
        if total_err <= abs_tol:
            break
        budget = 0.5 * abs_tol / total_width
        keep, pend_a, pend_b = [], [], []
        for a, b, v, e in panels:
            if e > budget * (b - a) and (b - a) > min_width:
                m = 0.5 * (a + b)
                pend_a.extend([a, m])
                pend_b.extend([m, b])
            else:
                keep.append([a, b, v, e])
        panels = keep
        if not pend_a and total_err > abs_tol:
            raise QuadratureNoConvergence(total_err, abs_tol)
    panels.sort(key=lambda p: p[0])
    return math.fsum(p[2] for p in panels)


def _rect_values(f2, rects, n=8):
    x, w = _gl(n)
    ra, rb, ta, tb = (np.asarray(v) for v in zip(*rects))
    rm, rh = 0.5 * (ra + rb), 0.5 * (rb - ra)
    tm, th = 0.5 * (ta + tb), 0.5 * (tb - ta)
    rn = rm[:, None, None] + rh[:, None, None] * x[None, :, None]
    tn = tm[:, None, None] + th[:, None, None] * x[None, None, :]
    R = np.broadcast_to(rn, (len(ra), n, n))
    T = np.broadcast_to(tn, (len(ra), n, n))
    vals = f2(R.ravel(), T.ravel()).reshape(len(ra), n, n)
    return ((vals @ w) @ w) * rh * th


def adaptive_rect_integral(f2, r0, r1, t0, t1, abs_tol, max_rects=20000,
                           initial=(6, 24), min_width=1e-10) -> float:
    """Tensor-panel adaptive quadrature on [r0, r1] x [t0, t1]."""
    total_area = (r1 - r0) * (t1 - t0)
    nr, nt = initial
    redges = np.linspace(r0, r1, nr + 1)
    tedges = np.linspace(t0, t1, nt + 1)
    pending = [
        (redges[i], redges[i + 1], tedges[j], tedges[j + 1])
        for i in range(nr)
        for j in range(nt)
    ]
    done = []  # (rect, value, err)
    while pending:
        if len(done) + len(pending) > max_rects:
            raise QuadratureNoConvergence(math.inf, abs_tol)
        whole = _rect_values(f2, pending)
        children = []
        for ra, rb, ta, tb in pending:
            rm, tm = 0.5 * (ra + rb), 0.5 * (ta + tb)
            children.extend(
                [
                    (ra, rm, ta, tm),
                    (ra, rm, tm, tb),
                    (rm, rb, ta, tm),
                    (rm, rb, tm, tb),
                ]
            )
        child_vals = _rect_values(f2, children)
        done_new = []
        for i, rect in enumerate(pending):
            val = float(np.sum(child_vals[4 * i : 4 * i + 4]))
            err = abs(float(whole[i]) - val)
            done_new.append((rect, val, err))
        done.extend(done_new)
        total_err = sum(e for _, _, e in done)
        if total_err <= abs_tol:
            break
        budget = 0.5 * abs_tol / total_area
        keep, pending = [], []
        for rect, val, err in done:
            ra, rb, ta, tb = rect
            area = (rb - ra) * (tb - ta)
            if err > budget * area and (rb - ra) > min_width and (tb - ta) > min_width:
                rm, tm = 0.5 * (ra + rb), 0.5 * (ta + tb)
                pending.extend(
                    [
                        (ra, rm, ta, tm),
                        (ra, rm, tm, tb),
                        (rm, rb, ta, tm),
                        (rm, rb, tm, tb),
                    ]
                )
            else:
                keep.append((rect, val, err))
        done = keep
        if not pending and total_err > abs_tol:
            raise QuadratureNoConvergence(total_err, abs_tol)
    done.sort(key=lambda item: (item[0][0], item[0][2]))
    return math.fsum(v for _, v, _ in done)


def graded_circle_edges(angles: Sequence[float], min_width: float,
                        base_panels: int, depth: int) -> np.ndarray:
    """Panel edges over one period, geometrically graded into each angle.

    The window starts at the first singular angle (the integrand is
    periodic, so any full period works) and each inter-angle segment gets
    edges at doubling offsets from both of its singular endpoints.
    """
    if not angles:
        return np.linspace(0.0, TWO_PI, max(base_panels, 4) + 1)
    pts = sorted(a % TWO_PI for a in angles)
    edges = []
    for i, s0 in enumerate(pts):
        s1 = pts[i + 1] if i + 1 < len(pts) else pts[0] + TWO_PI
        gap = s1 - s0
        w = min(max(min_width, 1e-14), gap / 8)
        seg = {s0, s0 + gap / 2}
        o = w
        levels = 0
        while o < gap / 2 and levels < depth:
            seg.add(s0 + o)
            seg.add(s1 - o)
            o *= 2.0
            levels += 1
        edges.extend(sorted(seg))
    edges.append(pts[0] + TWO_PI)
    return np.asarray(edges)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HARMONIC_ENDS_THREADS", "1")))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    n = _threads()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Circle integrals and the puncture limit
# ---------------------------------------------------------------------------


def total_geodesic_curvature(
    end: EndDefinition,
    r: float,
    cfg: Optional[QuadratureConfig] = None,
    width_exponent: Optional[float] = None,
) -> float:
    """I(r) = integral of eta_r over one period, singularity aware.

    The mesh is pre-refined to width about r^n around each singular angle
    (n from the blow-up exponent when supplied, else the top pole order);
    adaptive bisection then drives the error estimate below abs_tol.
    """
    cfg = cfg or QuadratureConfig()
    ev = EndEvaluator(end)
    n_top = end.top_order
    angles = singular_angles(n_top)
    n_eff = width_exponent if width_exponent is not None else max(n_top, 1)
    w_min = max(float(r) ** n_eff / 4.0, 1e-13)
    edges = graded_circle_edges(angles, w_min, cfg.base_panels,
                                cfg.singularity_refinement_depth)

    def fvec(ts):
        vals = _eta_values(*ev.curvature_terms(float(r), ts))
        bad = ~np.isfinite(vals)
        if np.any(bad):
            vals[bad] = _eta_values(*ev.curvature_terms(float(r), ts[bad] + 1e-13))
        return vals

    return adaptive_panel_integral(fvec, edges, cfg.abs_tol, cfg.max_panels)


def aitken_extrapolate(values: Sequence[float]):
    """Iterated Aitken delta-squared; returns (limit, stability estimate).

    The level whose final entries agree best is trusted; the estimate is
    that level's last in-level difference (0 for constant input).
    """
    level = [float(v) for v in values]
    best_val = level[-1]
    best_gap = abs(level[-1] - level[-2]) if len(level) > 1 else 0.0
    while len(level) >= 3:
        nxt = []
        for i in range(len(level) - 2):
            d1 = level[i + 1] - level[i]
            d2 = level[i + 2] - level[i + 1]
            den = d2 - d1
            if abs(den) < 1e-14 * (abs(d1) + abs(d2) + 1e-300):
                nxt.append(level[i + 2])
            else:
                nxt.append(level[i + 2] - d2 * d2 / den)
        level = nxt
        gap = abs(level[-1] - level[-2]) if len(level) > 1 else 0.0
        if gap <= best_gap:
            best_gap = gap
            best_val = level[-1]
    return best_val, best_gap


@dataclass(frozen=True)
class CurvatureReport:
    radii: tuple
    totals: tuple
    extrapolated: float
    predicted: float
    converged: bool
    achieved: float
    case: str
    pole_orders: tuple

    def to_json_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "totals": list(self.totals),
            "extrapolated": self.extrapolated,
            "predicted": self.predicted,
            "converged": self.converged,
            "achieved": self.achieved,
            "case": self.case,
            "pole_orders": list(self.pole_orders),
        }


def puncture_curvature(
    end: EndDefinition,
    cfg: Optional[QuadratureConfig] = None,
    r0: float = 0.1,
    ratio: float = 0.5,
    count: int = 11,
    curvature_tol: float = 1e-2,
) -> CurvatureReport:
    """Radius-ladder limit of I(r) against -2 pi (max pole order - 1).

    The extrapolated value is reported as computed; disagreement with the
    prediction shows up as converged = False, never as a substitution.
    """
    if not (0 < r0 < 1 and 0 < ratio < 1 and count >= 2):
        raise DomainError("ladder needs r0, ratio in (0,1) and count >= 2")
    cfg = cfg or QuadratureConfig()
    etype = end_type(end)
    n_max = max(etype.pole_orders)
    predicted = -TWO_PI * (n_max - 1)

    width_exp = None
    if etype.case is EndCase.CASE_II_GENERIC:
        try:
            norm, _ = case2_normal_form(end)
            width_exp = blowup_data(norm).n
        except (WrongCase, DomainError):
            width_exp = None

    radii = [r0 * ratio ** j for j in range(count)]
    totals = _map_ordered(
        lambda r: total_geodesic_curvature(end, r, cfg, width_exponent=width_exp),
        radii,
    )
    extrapolated, stability = aitken_extrapolate(totals)
    achieved = abs(extrapolated - predicted)
    return CurvatureReport(
        radii=tuple(radii),
        totals=tuple(totals),
        extrapolated=extrapolated,
        predicted=predicted,
        converged=achieved < curvature_tol,
        achieved=achieved,
        case=etype.case.value,
        pole_orders=etype.pole_orders,
    )


# ---------------------------------------------------------------------------
# Blow-up verification
# ---------------------------------------------------------------------------


def blowup_epsilon(top_order: int) -> float:
    """Half the admissible window min(1, pi/(2(n-1))) for one singularity."""
    return 0.5 * min(1.0, math.pi / (2.0 * (top_order - 1)))


@dataclass(frozen=True)
class BlowupReport:
    data: BlowupData
    radii: tuple
    sup_deviation: tuple
    singular_integrals: tuple
    epsilon: float
    fitted_m: float
    fitted_mu: float

    def to_json_dict(self) -> dict:
        return {
            "data": self.data.to_json_dict(),
            "radii": list(self.radii),
            "sup_deviation": list(self.sup_deviation),
            "singular_integrals": list(self.singular_integrals),
            "epsilon": self.epsilon,
            "fitted_M": self.fitted_m,
            "fitted_mu": self.fitted_mu,
        }


@dataclass(frozen=True)
class Case3BlowupReport:
    n: int
    b: float
    c: float
    c_active: bool
    radii: tuple
    sup_deviation_zero: tuple
    sup_deviation_pi: tuple
    integral_zero: tuple
    integral_pi: tuple
    epsilon: float

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "b": self.b,
            "c": self.c,
            "c_active": self.c_active,
            "radii": list(self.radii),
            "sup_deviation_zero": list(self.sup_deviation_zero),
            "sup_deviation_pi": list(self.sup_deviation_pi),
            "integral_zero": list(self.integral_zero),
            "integral_pi": list(self.integral_pi),
            "epsilon": self.epsilon,
        }


def _singular_window_integral(end, r, eps, n_eff, cfg, center=0.0):
    ev = EndEvaluator(end)

    def fvec(ts):
        vals = _eta_values(*ev.curvature_terms(float(r), ts))
        bad = ~np.isfinite(vals)
        if np.any(bad):
            vals[bad] = _eta_values(*ev.curvature_terms(float(r), ts[bad] + 1e-13))
        return vals

    w_min = max(float(r) ** n_eff / 4.0, 1e-14)
    offs = [0.0]
    o = w_min
    while o < eps:
        offs.append(o)
        o *= 2.0
    offs.append(eps)
    edges = sorted({center - o for o in offs} | {center + o for o in offs})
    return adaptive_panel_integral(fvec, np.asarray(edges), cfg.abs_tol, cfg.max_panels)


def blowup_check(
    end: EndDefinition,
    cfg: Optional[QuadratureConfig] = None,
    radii: Sequence[float] = (1e-2, 1e-3, 1e-4),
    s_max: float = 50.0,
    s_samples: int = 1001,
):
    """Compare the rescaled integrand r^n eta_r(r^n s) against its limit.

    Generic case: the limit profile is -a/(1 + a^2 s^2) and each singular
    window integrates to -pi. Simple-pole-top ends in their normal form
    get the two-window variant whose contributions at t = 0 and t = pi
    have opposite signs. Anything else is the wrong case.
    """
    cfg = cfg or QuadratureConfig()
    etype = end_type(end)
    if etype.case is EndCase.CASE_II_GENERIC:
        norm, _ = case2_normal_form(end)
        return _blowup_check_case2(norm, cfg, radii, s_max, s_samples)
    if etype.case is EndCase.CASE_III_SIMPLE_POLE_TOP:
        if not is_case3_normal(end):
            raise WrongCase(
                "simple-pole-top blow-up checks need the normal form: last "
                "form (1/z + 1)dz and residue 1 plus positive powers before it"
            )
        return _blowup_check_case3(end, cfg, radii, s_max, s_samples)
    raise WrongCase(f"no blow-up profile for case {etype.case.value}")


def _blowup_check_case2(end, cfg, radii, s_max, s_samples):
    data = blowup_data(end)
    a, n = data.a, data.n
    n_top = data.top_order
    d = end.dimension
    orders = end.pole_orders()
    ev = EndEvaluator(end)
    s = np.linspace(-s_max, s_max, s_samples)
    lorentz = -a / (1.0 + (a * s) ** 2)
    eps = blowup_epsilon(n_top)

    sups = []
    fitted_m = 0.0
    fitted_mu = math.inf
    p_exp = (n - n_top + orders[-2]) / n
    for r in radii:
        ts = (float(r) ** n) * s
        fr, ft, ftt = ev.curvature_terms(float(r), ts)
        vals = (float(r) ** n) * _eta_values(fr, ft, ftt)
        sups.append(float(np.max(np.abs(vals - lorentz))))
        envelope = (np.abs(s) ** p_exp + 1.0) / (1.0 + s * s)
        fitted_m = max(fitted_m, float(np.max(np.abs(vals) / envelope)))
        ft2 = np.sum(ft * ft, axis=0)
        denom_ratio = (float(r) ** (2 * (n_top - 1))) * ft2 / (
            float(r) ** (2 * n) + ts * ts
        )
        fitted_mu = min(fitted_mu, float(np.min(denom_ratio)))

    integrals = tuple(
        _singular_window_integral(end, r, eps, n, cfg) for r in radii
    )
    return BlowupReport(
        data=data,
        radii=tuple(float(r) for r in radii),
        sup_deviation=tuple(sups),
        singular_integrals=integrals,
        epsilon=eps,
        fitted_m=fitted_m,
        fitted_mu=fitted_mu,
    )


def case3_limit_profile(b: float, c: float, s: np.ndarray) -> np.ndarray:
    """(b - c s)/(sqrt(2b - 2cs - c^2 + s^2) (b + s^2)); c = 0 recovers the
    no-cross-term variant."""
    root = np.sqrt(np.maximum(2.0 * b - 2.0 * c * s - c * c + s * s, 0.0))
    return (b - c * s) / (root * (b + s * s))


def _blowup_check_case3(end, cfg, radii, s_max, s_samples):
    d = end.dimension
    sigma_orders = []
    ms = []
    for k in range(d - 1):
        f = end.forms[k]
        if k == d - 2:
            f = f.without_exponent(-1)  # residue sits outside the Sigma part
        if f.is_zero:
            sigma_orders.append(None)
            ms.append(None)
            continue
        n_k = f.pole_order
        sigma_orders.append(n_k)
        ms.append(first_imaginary_index(f, n_k))
    finite = [
        (-sigma_orders[k] + ms[k] - 1, k)
        for k in range(d - 1)
        if ms[k] is not None
    ]
    if not finite:
        raise WrongCase("no imaginary coefficients; nothing blows up")
    n = min(v for v, _ in finite)
    k_star = [k for v, k in finite if v == n]
    b = 0.0
    for k in k_star:
        f = end.forms[k]
        if k == d - 2:
            f = f.without_exponent(-1)
        e = ms[k] - 1 - sigma_orders[k]
        b += f.coefficient(e).imag ** 2

    prev = end.forms[-2].without_exponent(-1)
    c = 0.0
    c_active = False
    if ms[d - 2] is not None:
        c = prev.coefficient(ms[d - 2] - 1 - sigma_orders[d - 2]).imag
        c_active = (-sigma_orders[d - 2] + ms[d - 2] - 1) == n
    c_eff = c if c_active else 0.0

    ev = EndEvaluator(end)
    s = np.linspace(-s_max, s_max, s_samples)
    profile = case3_limit_profile(b, c_eff, s)
    eps = 0.5 * min(1.0, math.pi / 2.0)
    sign = -1.0 if n % 2 else 1.0

    sups0, supsp, ints0, intsp = [], [], [], []
    for r in radii:
        rn = float(r) ** n
        vals0 = rn * _eta_values(*ev.curvature_terms(float(r), rn * s))
        sups0.append(float(np.max(np.abs(vals0 - profile))))
        tpi = sign * rn * s + math.pi
        valspi = rn * _eta_values(*ev.curvature_terms(float(r), tpi))
        supsp.append(float(np.max(np.abs(valspi + profile))))
        ints0.append(_singular_window_integral(end, r, eps, n, cfg, center=0.0))
        intsp.append(_singular_window_integral(end, r, eps, n, cfg, center=math.pi))

    return Case3BlowupReport(
        n=n,
        b=b,
        c=c,
        c_active=c_active,
        radii=tuple(float(r) for r in radii),
        sup_deviation_zero=tuple(sups0),
        sup_deviation_pi=tuple(supsp),
        integral_zero=tuple(ints0),
        integral_pi=tuple(intsp),
        epsilon=eps,
    )


# ---------------------------------------------------------------------------
# Gauss-Bonnet bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnulusReport:
    r_inner: float
    r_outer: float
    boundary_inner: float
    boundary_outer: float
    area_integral: float
    residual: float

    def to_json_dict(self) -> dict:
        return {
            "r_inner": self.r_inner,
            "r_outer": self.r_outer,
            "boundary_inner": self.boundary_inner,
            "boundary_outer": self.boundary_outer,
            "area_integral": self.area_integral,
            "residual": self.residual,
        }


def gauss_bonnet_annulus(
    end: EndDefinition,
    r_inner: float,
    r_outer: float,
    cfg: Optional[QuadratureConfig] = None,
) -> AnnulusReport:
    """Residual of I(r_inner) = area integral of K dA + I(r_outer)."""
    if not 0 < r_inner < r_outer:
        raise DomainError("need 0 < r_inner < r_outer")
    cfg = cfg or QuadratureConfig()
    inner = total_geodesic_curvature(end, r_inner, cfg)
    outer = total_geodesic_curvature(end, r_outer, cfg)
    ev = EndEvaluator(end)

    def f2(rs, ts):
        _, fr, ft, frr, frt, ftt = ev.jet(rs, ts)
        W2 = _wedge_sq(fr, ft)
        E = np.sum(fr * fr, axis=0)
        e1 = fr / np.sqrt(E)
        w = ft - np.sum(ft * e1, axis=0) * e1
        e2 = w / np.linalg.norm(w, axis=0)

        def pn(v):
            return v - np.sum(v * e1, axis=0) * e1 - np.sum(v * e2, axis=0) * e2

        K = (np.sum(pn(frr) * pn(ftt), axis=0) - np.sum(pn(frt) ** 2, axis=0)) / W2
        return K * np.sqrt(W2)

    area = adaptive_rect_integral(
        f2, r_inner, r_outer, 0.0, TWO_PI, cfg.abs_tol * 10
    )
    return AnnulusReport(
        r_inner=r_inner,
        r_outer=r_outer,
        boundary_inner=inner,
        boundary_outer=outer,
        area_integral=area,
        residual=inner - area - outer,
    )


@dataclass(frozen=True)
class GlobalReport:
    """Arithmetic Gauss-Bonnet ledger for a two-ended genus-zero surface."""

    euler_characteristic: int
    end_curvatures: tuple
    disk_integrals: tuple
    boundary_unit_circle: tuple
    total_curvature_integral: float
    identity_rhs: float
    residual: float

    def to_json_dict(self) -> dict:
        return {
            "euler_characteristic": self.euler_characteristic,
            "end_curvatures": list(self.end_curvatures),
            "disk_integrals": list(self.disk_integrals),
            "boundary_unit_circle": list(self.boundary_unit_circle),
            "total_curvature_integral": self.total_curvature_integral,
            "identity_rhs": self.identity_rhs,
            "residual": self.residual,
        }


def two_end_global_check(
    end_zero: EndDefinition,
    end_infinity: EndDefinition,
    r_small: float = 0.1,
    cfg: Optional[QuadratureConfig] = None,
    euler_characteristic: int = 0,
) -> GlobalReport:
    """Assemble the closed-surface identity from two unit-disk charts.

    Each puncture's punctured-unit-disk curvature integral is the chart
    annulus integral over [r_small, 1] plus the tail recovered from the
    extrapolated puncture curvature minus I(r_small). The two charts tile
    the surface, so the total must equal 2 pi chi plus the sum of the
    puncture curvatures.
    """
    cfg = cfg or QuadratureConfig()
    disks = []
    kappas = []
    boundary = []
    for end in (end_zero, end_infinity):
        rep = puncture_curvature(end, cfg)
        ann = gauss_bonnet_annulus(end, r_small, 1.0, cfg)
        i_small = ann.boundary_inner
        tail = rep.extrapolated - i_small
        disks.append(ann.area_integral + tail)
        kappas.append(rep.extrapolated)
        boundary.append(ann.boundary_outer)
    total = disks[0] + disks[1]
    rhs = TWO_PI * euler_characteristic + kappas[0] + kappas[1]
    return GlobalReport(
        euler_characteristic=euler_characteristic,
        end_curvatures=tuple(kappas),
        disk_integrals=tuple(disks),
        boundary_unit_circle=tuple(boundary),
        total_curvature_integral=total,
        identity_rhs=rhs,
        residual=total - rhs,
    )
