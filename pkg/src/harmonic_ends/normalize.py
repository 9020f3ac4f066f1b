"""Holomorphic coordinate changes bringing a form to normal form.

Three constructions, split by pole order:

* order <= 0 (zero of order n): integrate, take the principal (n+1)-st
  root, so phi = ((n+1) * antiderivative)^(1/(n+1)) and the normal form
  is z^n dz.
* order 1: phi = z * exp(A) where A is the antiderivative of the
  holomorphic part; the residue is an invariant and stays as a recorded
  scale on dz/z.
* order n >= 2 with real residue rho: write phi = z e^F and solve
  e^((1-n)F)/(1-n) + rho F z^(n-1) = H~ coefficient by coefficient. The
  w-derivative e^((1-n)w) + rho z^(n-1) is nonzero at z = 0, so each
  coefficient is uniquely determined once the branch of the constant term
  is fixed; the normal form is (z^-n + rho/z) dz.

Every result carries a residual computed through an independent pullback
of the normal form, never through the solve itself.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

from .ends import EndDefinition, is_case2_normal, reduce_end
from .errors import DomainError, SolveFailure, WrongCase
from .series import DEFAULT_ORDER, LaurentForm, PowerSeries, pullback

#: A coefficient solve whose verified pullback residual exceeds this fails.
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Normalization:
    """Certificate of one coordinate change: phi, the normal form, the
    branch constant that fixed phi, and the verified pullback residual."""

    kind: str
    phi: PowerSeries
    normal: LaurentForm
    residual: float
    compare_up_to: int
    branch_constant: complex = 0j
    residue_scale: float = 1.0

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "phi": [[c.real, c.imag] for c in self.phi.coeffs],
            "normal": [
                {"exp": e, "re": c.real, "im": c.imag} for e, c in self.normal.terms
            ],
            "residual": self.residual,
            "compare_up_to": self.compare_up_to,
            "branch_constant": [self.branch_constant.real, self.branch_constant.imag],
            "residue_scale": self.residue_scale,
        }


def _antiderivative_polynomial(form: LaurentForm, order: int) -> PowerSeries:
    """Exact antiderivative of a holomorphic form as a padded polynomial."""
    coeffs = [0j] * order
    for e, c in form.terms:
        if e + 1 < order:
            coeffs[e + 1] = c / (e + 1)
    return PowerSeries(tuple(coeffs))


def _verified(kind, phi, normal, form, order, pole, branch=0j, scale=1.0) -> Normalization:
    res = pullback(normal, phi)
    up_to = order - max(pole, 0) - 2
    residual = res.max_abs_diff(form, up_to)
    if residual > RESIDUAL_TOL * max(form.max_abs(), 1.0):
        raise SolveFailure(residual, RESIDUAL_TOL)
    return Normalization(
        kind=kind,
        phi=phi,
        normal=normal,
        residual=residual,
        compare_up_to=up_to,
        branch_constant=branch,
        residue_scale=scale,
    )


def normalize_zero_order(form: LaurentForm, order: int = DEFAULT_ORDER) -> Normalization:
    """Holomorphic form with a zero of order n >= 0 onto z^n dz."""
    pole = form.pole_order
    if pole is None or pole > 0:
        raise DomainError("form must be holomorphic at 0 (pole order <= 0)")
    n = -pole
    anti = _antiderivative_polynomial(form, order + n + 2)
    # (n+1) * antiderivative = z^(n+1) * unit; take the principal root.
    unit = PowerSeries(tuple((n + 1) * c for c in anti.coeffs[n + 1:]))
    root = unit.nth_root(n + 1)
    phi = root.times_z()
    normal = LaurentForm.from_terms({n: 1.0})
    return _verified(
        "zero_order", phi, normal, form, phi.order, pole,
        branch=root.constant_term,
    )


def normalize_simple_pole(form: LaurentForm, order: int = DEFAULT_ORDER) -> Normalization:
    """Simple pole onto (residue) * dz/z via phi = z exp(int a).

    The residue is an invariant, so it is recorded as a scale on the
    normal form rather than absorbed.
    """
    if form.pole_order != 1:
        raise DomainError("form must have a simple pole")
    rho = form.residue
    if rho == 0:
        raise DomainError("simple pole needs a nonzero residue")
    regular = form.without_exponent(-1).scaled(1.0 / rho)
    a_int = _antiderivative_polynomial(regular, order)
    phi = a_int.exp().times_z()
    normal = LaurentForm.from_terms({-1: rho})
    return _verified(
        "simple_pole", phi, normal, form, phi.order, 1,
        scale=abs(rho),
    )


def normalize_higher_pole(form: LaurentForm, order: int = DEFAULT_ORDER) -> Normalization:
    """Pole of order n >= 2 onto (z^-n + rho/z) dz.

    The branch of the constant term solves e^((1-n)F0) = a for the leading
    coefficient a, using the principal logarithm; any branch gives a valid
    coordinate change, and the choice is recorded.
    """
    pole = form.pole_order
    if pole is None or pole < 2:
        raise DomainError("form must have a pole of order at least 2")
    n = pole
    rho = form.residue
    a = form.coefficient(-n)

    # H~ = z^(n-1) * (antiderivative of (omega/dz - rho/z)); the residue
    # slot is excluded, so H~ is a genuine power series with H~(0) = a/(1-n).
    htil = [0j] * order
    for e, c in form.terms:
        if e == -1:
            continue
        k = e + n  # index of z^(e+1) within z^(n-1) * H
        if 0 <= k < order:
            htil[k] = c / (e + 1)

    F = [0j] * order
    G = [0j] * order
    F[0] = cmath.log(a) / (1 - n)
    G[0] = a
    for m in range(1, order):
        s = 0j
        for j in range(1, m):
            s += j * F[j] * G[m - j]
        rhs = htil[m] - s / m
        if m >= n - 1:
            rhs -= rho * F[m - n + 1]
        F[m] = rhs / a
        G[m] = (1 - n) * (s / m + F[m] * a)

    phi = PowerSeries(tuple(F)).exp().times_z()
    terms = {-n: 1.0}
    if rho != 0:
        terms[-1] = rho
    normal = LaurentForm.from_terms(terms)
    return _verified(
        "higher_pole", phi, normal, form, order, n,
        branch=F[0],
    )


def normalize_form(form: LaurentForm, order: int = DEFAULT_ORDER) -> Normalization:
    """Dispatch on the pole order."""
    pole = form.pole_order
    if pole is None:
        raise DomainError("the zero form has no normal form")
    if pole <= 0:
        return normalize_zero_order(form, order)
    if pole == 1:
        return normalize_simple_pole(form, order)
    return normalize_higher_pole(form, order)


# ---------------------------------------------------------------------------
# Whole-end normalization for the generic case
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Case2Certificate:
    """Record of how an end was brought to the generic-case normal form."""

    matrix: tuple
    domain_rotation: complex
    top_scale: float
    phi: Optional[PowerSeries]
    truncation_valid: Optional[int]

    def to_json_dict(self) -> dict:
        return {
            "matrix": [list(row) for row in self.matrix],
            "domain_rotation": [self.domain_rotation.real, self.domain_rotation.imag],
            "top_scale": self.top_scale,
            "phi": None if self.phi is None else [[c.real, c.imag] for c in self.phi.coeffs],
            "truncation_valid": self.truncation_valid,
        }


def _snap_unit(c: complex, tol: float = 1e-9) -> complex:
    return 1.0 + 0j if abs(c - 1.0) <= tol else c


def case2_normal_form(end: EndDefinition, order: int = DEFAULT_ORDER):
    """Reduce, rotate the domain, scale, and normalize the top form.

    Returns ``(normalized_end, certificate)``. The phases move into a
    domain rotation z -> lam z (which fixes residues), the magnitude of
    the top leading coefficient into a real scaling of the last
    coordinate, and any remaining terms of the top form into a coordinate
    change that is pulled through every form. When that last step is
    needed the other forms are truncated expansions materialized at the
    working order; the certificate records how far they are valid.
    """
    red = reduce_end(end)
    rows = list(red.reduced.forms)
    orders = [f.pole_order for f in rows]
    if any(o is None for o in orders):
        raise WrongCase("end reduces to a degenerate (zero) form")
    n_top = orders[-1]
    if n_top < 2 or orders[-2] >= n_top:
        raise WrongCase(
            "generic-case normalization needs a strict top order n >= 2, "
            f"got orders {tuple(orders)}"
        )

    a_top = rows[-1].coefficient(-n_top)
    lam = cmath.exp(1j * cmath.phase(a_top) / (n_top - 1))
    rows = [f.domain_scaled(lam) for f in rows]
    scale = abs(a_top)
    rows[-1] = rows[-1].scaled(1.0 / scale)
    rows[-1] = LaurentForm.from_terms(
        {e: (_snap_unit(c) if e == -n_top else c) for e, c in rows[-1].terms}
    )
    matrix = list(list(r) for r in red.matrix)
    matrix[-1] = [v / scale for v in matrix[-1]]

    phi = None
    trunc_valid = None
    candidate = EndDefinition(tuple(rows), label=end.label)
    if not is_case2_normal(candidate):
        norm = normalize_higher_pole(rows[-1], order)
        phi = norm.phi
        new_rows = []
        for k, f in enumerate(rows[:-1]):
            pulled = pullback(f, phi)
            trunc_valid = pulled.valid_order if trunc_valid is None else min(
                trunc_valid, pulled.valid_order
            )
            new_rows.append(pulled.to_form(tol=1e-14))
        new_rows.append(norm.normal)
        rows = new_rows
        candidate = EndDefinition(tuple(rows), label=end.label)
        if not is_case2_normal(candidate):
            raise SolveFailure(math.inf, RESIDUAL_TOL)

    cert = Case2Certificate(
        matrix=tuple(tuple(row) for row in matrix),
        domain_rotation=lam,
        top_scale=scale,
        phi=phi,
        truncation_valid=trunc_valid,
    )
    return candidate, cert


# ---------------------------------------------------------------------------
# Simple-pole-top helpers
# ---------------------------------------------------------------------------


def is_case3_normal(end: EndDefinition, tol: float = 1e-10) -> bool:
    """Structural check for the simple-pole-top normal form.

    The last form must be exactly (1/z + 1) dz, the one before it
    1/z plus terms with positive exponents only, and the remaining forms
    holomorphic with zeros at 0 (orders < 0) or zero forms.
    """
    d = end.dimension
    if d < 3:
        return False
    top = end.forms[-1]
    if set(top.exponents()) != {-1, 0}:
        return False
    if abs(top.coefficient(-1) - 1.0) > tol or abs(top.coefficient(0) - 1.0) > tol:
        return False
    prev = end.forms[-2]
    if abs(prev.coefficient(-1) - 1.0) > tol:
        return False
    if any(e <= 0 for e in prev.exponents() if e != -1):
        return False
    for f in end.forms[:-2]:
        if f.is_zero:
            continue
        if f.pole_order >= 0:
            return False
    return True
