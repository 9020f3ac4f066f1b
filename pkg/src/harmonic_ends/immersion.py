"""Exact evaluation of the map and its derivative jet in polar coordinates.

Everything here is direct complex arithmetic on the finite Laurent data:
with F the termwise antiderivative of a form (the z^-1 coefficient
contributing rho*log r, single-valued because residues are validated
real), the map is Re F(z) and the jet follows by the chain rule for
z = r e^(it). That makes the jet exact up to floating rounding, uniformly
on the punctured disk; the trigonometric series view is kept as a
cross-check and for blow-up bookkeeping.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ends import EndDefinition, EndCase, end_type, polar_terms, is_case2_normal
from .errors import CurveThroughOrigin, DegenerateAtPoint, DomainError, WrongCase


@dataclass(frozen=True)
class PolarPoint:
    """A point r e^(it) of the punctured disk; angles are 2pi-periodic."""

    r: float
    t: float

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"radius must be positive, got {self.r!r}")


@dataclass(frozen=True)
class DerivativeJet:
    """Value and first/second derivatives of the map at one polar point."""

    f: np.ndarray
    f_r: np.ndarray
    f_t: np.ndarray
    f_rr: np.ndarray
    f_rt: np.ndarray
    f_tt: np.ndarray


class EndEvaluator:
    """Caches per-form term arrays for vectorized evaluation.

    All methods accept scalars or numpy arrays for r and t (broadcast
    together) and return real arrays whose leading axis indexes the
    coordinate.
    """

    def __init__(self, end: EndDefinition):
        self.end = end
        self.dimension = end.dimension
        self._d1 = []   # F' = omega/dz terms
        self._d2 = []   # F'' terms
        self._anti = []  # antiderivative terms, residue excluded
        self._residues = []
        for f in end.forms:
            d1 = [(e, c) for e, c in f.terms]
            d2 = [(e - 1, e * c) for e, c in f.terms if e != 0]
            anti = [(e + 1, c / (e + 1)) for e, c in f.terms if e != -1]
            self._d1.append(d1)
            self._d2.append(d2)
            self._anti.append(anti)
            self._residues.append(f.residue.real)

    @staticmethod
    def _z(r, t):
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        return r * np.exp(1j * t)

    @staticmethod
    def _sum_terms(terms, z):
        acc = np.zeros_like(z)
        for e, c in terms:
            acc = acc + c * z ** e
        return acc

    def values(self, r, t) -> np.ndarray:
        """The map itself: Re F(z) per coordinate plus rho log r."""
        z = self._z(r, t)
        logr = np.log(np.asarray(r, dtype=float))
        rows = []
        for anti, rho in zip(self._anti, self._residues):
            val = self._sum_terms(anti, z).real
            if rho != 0.0:
                val = val + rho * logr
            rows.append(np.broadcast_to(val, z.shape).astype(float))
        return np.stack(rows)

    def first_derivatives(self, r, t):
        """(f_r, f_t) only; cheaper than the full jet."""
        z = self._z(r, t)
        eit = np.exp(1j * np.asarray(t, dtype=float))
        fr, ft = [], []
        for d1 in self._d1:
            F1 = self._sum_terms(d1, z)
            fr.append((F1 * eit).real)
            ft.append((1j * z * F1).real)
        return np.stack(fr), np.stack(ft)

    def curvature_terms(self, r, t):
        """(f_r, f_t, f_tt), the three vectors the boundary integrand needs."""
        z = self._z(r, t)
        eit = np.exp(1j * np.asarray(t, dtype=float))
        fr, ft, ftt = [], [], []
        for d1, d2 in zip(self._d1, self._d2):
            F1 = self._sum_terms(d1, z)
            F2 = self._sum_terms(d2, z)
            fr.append((F1 * eit).real)
            ft.append((1j * z * F1).real)
            ftt.append((-z * z * F2 - z * F1).real)
        return np.stack(fr), np.stack(ft), np.stack(ftt)

    def jet(self, r, t):
        """All of f, f_r, f_t, f_rr, f_rt, f_tt as stacked arrays."""
        z = self._z(r, t)
        t_arr = np.asarray(t, dtype=float)
        eit = np.exp(1j * t_arr)
        logr = np.log(np.asarray(r, dtype=float))
        f, fr, ft, frr, frt, ftt = [], [], [], [], [], []
        for d1, d2, anti, rho in zip(self._d1, self._d2, self._anti, self._residues):
            F1 = self._sum_terms(d1, z)
            F2 = self._sum_terms(d2, z)
            val = self._sum_terms(anti, z).real
            if rho != 0.0:
                val = val + rho * logr
            f.append(np.broadcast_to(val, z.shape).astype(float))
            fr.append((F1 * eit).real)
            ft.append((1j * z * F1).real)
            frr.append((eit * eit * F2).real)
            frt.append((1j * eit * (z * F2 + F1)).real)
            ftt.append((-z * z * F2 - z * F1).real)
        return (
            np.stack(f),
            np.stack(fr),
            np.stack(ft),
            np.stack(frr),
            np.stack(frt),
            np.stack(ftt),
        )


def eval_jet(end: EndDefinition, p: PolarPoint) -> DerivativeJet:
    """Exact derivative jet at one polar point."""
    if p.r <= 0:
        raise DomainError("radius must be positive")
    ev = EndEvaluator(end)
    f, fr, ft, frr, frt, ftt = ev.jet(p.r, p.t)
    return DerivativeJet(f=f, f_r=fr, f_t=ft, f_rr=frr, f_rt=frt, f_tt=ftt)


# ---------------------------------------------------------------------------
# Trigonometric series view (normal-form cross-check)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesView:
    """Finite sums S_k, T_k, R_k plus beta, beta' at one point.

    Reassembling the first derivatives from these must agree with the
    direct jet; the contract test drives both routes.
    """

    orders: tuple
    S: np.ndarray
    T: np.ndarray
    R: np.ndarray
    beta: float
    beta_prime: float
    f_t: np.ndarray
    f_tt: np.ndarray
    f_r: np.ndarray


def series_view(end: EndDefinition, p: PolarPoint) -> SeriesView:
    """Evaluate the per-coordinate trigonometric sums in the normal form.

    Requires the generic-case normal form: last form z^(-n)dz + rho dz/z
    with n >= 2 and a strict top order.
    """
    if not is_case2_normal(end):
        raise WrongCase("series view needs the generic-case normal form")
    orders = end.pole_orders()
    d = end.dimension
    n_top = orders[-1]
    rho_top = end.forms[-1].residue.real
    r, t = p.r, p.t

    S = np.zeros(d - 1)
    T = np.zeros(d - 1)
    R = np.zeros(d - 1)
    for k in range(d - 1):
        n_k = orders[k]
        rho_k = end.forms[k].residue.real
        s = tt = rr = 0.0
        for j, r_kj, t_kj in polar_terms(end.forms[k], n_k):
            if j == n_k:
                continue  # residue term: no t-dependence, enters R below
            w = j - n_k
            phase = w * t + t_kj
            rj = r ** (j - 1)
            s += -rj * r_kj * math.sin(phase)
            tt += rj * w * r_kj * math.cos(phase)
            rr += rj * r_kj * math.cos(phase)
        if rho_k != 0.0:
            rr += r ** (n_k - 1) * rho_k
        S[k], T[k], R[k] = s, tt, rr

    beta = math.cos((1 - n_top) * t) / (1 - n_top)
    beta_prime = -math.sin((1 - n_top) * t)

    f_t = np.empty(d)
    f_tt = np.empty(d)
    f_r = np.empty(d)
    for k in range(d - 1):
        f_t[k] = r ** (1 - orders[k]) * S[k]
        f_tt[k] = -(r ** (1 - orders[k])) * T[k]
        f_r[k] = r ** (-orders[k]) * R[k]
    f_t[-1] = r ** (1 - n_top) * beta_prime
    f_tt[-1] = -(r ** (1 - n_top)) * (1 - n_top) ** 2 * beta
    f_r[-1] = r ** (-n_top) * ((1 - n_top) * beta + r ** (n_top - 1) * rho_top)

    return SeriesView(
        orders=orders,
        S=S,
        T=T,
        R=R,
        beta=beta,
        beta_prime=beta_prime,
        f_t=f_t,
        f_tt=f_tt,
        f_r=f_r,
    )


# ---------------------------------------------------------------------------
# Generalized Gauss map and the projected winding number
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TangentFrame:
    """Oriented orthonormal basis of the tangent plane, plus the unit
    normal when the ambient dimension is 3."""

    e1: np.ndarray
    e2: np.ndarray
    normal: Optional[np.ndarray]

    def projector(self) -> np.ndarray:
        return np.outer(self.e1, self.e1) + np.outer(self.e2, self.e2)


def gauss_map(end: EndDefinition, p: PolarPoint) -> TangentFrame:
    """Gram-Schmidt frame of span{f_r, f_t}, oriented like (f_r, f_t)."""
    ev = EndEvaluator(end)
    fr, ft = ev.first_derivatives(p.r, p.t)
    fr = fr.reshape(-1)
    ft = ft.reshape(-1)
    nr = float(np.linalg.norm(fr))
    if nr == 0.0:
        raise DegenerateAtPoint(p.r, p.t, "f_r vanishes")
    e1 = fr / nr
    w = ft - np.dot(ft, e1) * e1
    nw = float(np.linalg.norm(w))
    if nw <= 1e-12 * float(np.linalg.norm(ft)) or nw == 0.0:
        raise DegenerateAtPoint(p.r, p.t, "f_t is parallel to f_r")
    e2 = w / nw
    normal = np.cross(e1, e2) if end.dimension == 3 else None
    return TangentFrame(e1=e1, e2=e2, normal=normal)


def limit_tangent_plane(end: EndDefinition) -> np.ndarray:
    """Orthonormal basis (2 x d) of the plane spanned by the real and
    imaginary parts of the top-order leading coefficients."""
    orders = end.pole_orders()
    finite = [o for o in orders if o is not None]
    n_top = max(finite)
    vec = np.zeros(end.dimension, dtype=complex)
    for k, f in enumerate(end.forms):
        if orders[k] == n_top:
            vec[k] = f.coefficient(-n_top)
    u, v = vec.real, vec.imag
    q1 = u / np.linalg.norm(u) if np.linalg.norm(u) > 0 else None
    if q1 is None:
        q1 = v / np.linalg.norm(v)
        w = np.zeros_like(v)
    else:
        w = v - np.dot(v, q1) * q1
    nw = np.linalg.norm(w)
    if nw <= 1e-12 * max(np.linalg.norm(u), np.linalg.norm(v)):
        raise WrongCase("top leading coefficients do not span a plane")
    return np.stack([q1, w / nw])


def project_and_wind(end: EndDefinition, r: float, samples: int = 4096) -> int:
    """Winding number about 0 of the circle image projected to the limit
    tangent plane, by summed angle increments.

    Only meaningful when the limit plane exists (equal top orders with
    independent leading coefficients).
    """
    etype = end_type(end)
    if etype.case is not EndCase.CASE_I_INDEPENDENT_TOP:
        raise WrongCase(
            f"winding needs equal independent top orders, got {etype.case.value}"
        )
    basis = limit_tangent_plane(end)
    ev = EndEvaluator(end)
    ts = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    vals = ev.values(np.full_like(ts, float(r)), ts)
    xy = basis @ vals  # (2, samples)
    radii = np.hypot(xy[0], xy[1])
    if radii.min() < 1e-9 * radii.max():
        raise CurveThroughOrigin(
            f"projected curve passes within {radii.min():.3e} of 0"
        )
    ang = np.arctan2(xy[1], xy[0])
    steps = np.diff(np.concatenate([ang, ang[:1]]))
    steps = np.mod(steps + math.pi, 2.0 * math.pi) - math.pi
    if np.max(np.abs(steps)) > 0.5 * math.pi:
        raise CurveThroughOrigin("angle step too large; sampling under-resolves the curve")
    total = float(np.sum(steps)) / (2.0 * math.pi)
    winding = round(total)
    if abs(total - winding) > 1e-6:
        raise CurveThroughOrigin(f"angle sum {total!r} is not close to an integer")
    return int(winding)
