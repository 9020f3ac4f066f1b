"""End definitions: validation, type computation, and affine reduction.

An end is a d-tuple of finite Laurent forms; the map it induces is the
componentwise real part of the antiderivatives. The operations here work
on the exact coefficient data: checking that residues are real, sampling
the differential for rank, reducing the pole-order tuple to its
lexicographic minimum by real eliminations, and reading off the blow-up
package (n, k*, b, a) from the polar coefficients.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    AllMkInfinite,
    DomainError,
    NumericalRankFailure,
    WrongCase,
)
from .series import LaurentForm

#: |Im residue| below this (times the coefficient scale) counts as real.
RESIDUE_TOL = 1e-12

#: Two leading coefficients count as R-dependent when the 2x2 real
#: determinant is below this times the product of their magnitudes.
RANK_TOL = 1e-9

#: Relative wedge norms below this flag a degenerate sample point.
WEDGE_TOL = 1e-12

_GOLDEN = 0.6180339887498949


@dataclass(frozen=True)
class EndDefinition:
    """d coordinate 1-forms plus a label; the ground-truth input datum."""

    forms: tuple
    label: str = ""

    def __post_init__(self):
        forms = tuple(self.forms)
        if len(forms) < 2:
            raise DomainError("an end needs at least two coordinate forms")
        if all(f.is_zero for f in forms):
            raise DomainError("all coordinate forms are zero")
        object.__setattr__(self, "forms", forms)

    @classmethod
    def from_forms(cls, forms: Iterable[LaurentForm], label: str = "") -> "EndDefinition":
        return cls(tuple(forms), label)

    @property
    def dimension(self) -> int:
        return len(self.forms)

    def pole_orders(self) -> tuple:
        """Per-form pole orders in input order; None marks a zero form."""
        return tuple(f.pole_order for f in self.forms)

    @property
    def top_order(self) -> int:
        orders = [n for n in self.pole_orders() if n is not None]
        return max(orders)

    def residues(self) -> tuple:
        return tuple(f.residue for f in self.forms)

    def coefficient_scale(self) -> float:
        return max(f.max_abs() for f in self.forms)

    # -- JSON file schema ---------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "dimension": self.dimension,
            "forms": [
                {
                    "terms": [
                        {"exp": e, "re": c.real, "im": c.imag}
                        for e, c in f.terms
                    ]
                }
                for f in self.forms
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EndDefinition":
        if not isinstance(doc, dict):
            raise ValueError("end definition must be a JSON object")
        forms_doc = doc.get("forms")
        if not isinstance(forms_doc, list) or len(forms_doc) < 2:
            raise ValueError("'forms' must be a list of at least two forms")
        dim = doc.get("dimension", len(forms_doc))
        if dim != len(forms_doc):
            raise ValueError(
                f"'dimension' is {dim} but {len(forms_doc)} forms were given"
            )
        forms = []
        for k, fdoc in enumerate(forms_doc):
            terms = fdoc.get("terms")
            if not isinstance(terms, list):
                raise ValueError(f"form {k}: 'terms' must be a list")
            pairs = []
            for tdoc in terms:
                exp = tdoc.get("exp")
                if not isinstance(exp, int):
                    raise ValueError(f"form {k}: exponent {exp!r} is not an integer")
                pairs.append((exp, complex(float(tdoc.get("re", 0.0)), float(tdoc.get("im", 0.0)))))
            forms.append(LaurentForm.from_terms(pairs))
        return cls(tuple(forms), str(doc.get("label", "")))


class EndCase(Enum):
    SMOOTH_POINT = "SmoothPoint"
    CASE_I_INDEPENDENT_TOP = "CaseI_IndependentTop"
    CASE_II_GENERIC = "CaseII_Generic"
    CASE_III_SIMPLE_POLE_TOP = "CaseIII_SimplePoleTop"


@dataclass(frozen=True)
class EndType:
    pole_orders: tuple
    case: EndCase

    def to_json_dict(self) -> dict:
        return {"pole_orders": list(self.pole_orders), "case": self.case.value}


@dataclass(frozen=True)
class ValidationIssue:
    kind: str  # "ResidueNotReal" | "DegenerateAtPoint"
    detail: str
    index: Optional[int] = None
    r: Optional[float] = None
    t: Optional[float] = None

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind, "detail": self.detail}
        if self.index is not None:
            out["index"] = self.index
        if self.r is not None:
            out["r"] = self.r
            out["t"] = self.t
        return out


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple
    samples: int
    min_wedge: float
    min_relative_wedge: float
    min_wedge_r: float
    min_wedge_t: float

    def to_json_dict(self) -> dict:
        return {
            "ok": self.ok,
            "issues": [i.to_json_dict() for i in self.issues],
            "samples": self.samples,
            "min_wedge": self.min_wedge,
            "min_relative_wedge": self.min_relative_wedge,
            "min_wedge_location": {"r": self.min_wedge_r, "t": self.min_wedge_t},
        }


def validate(end: EndDefinition, samples: int = 256) -> ValidationReport:
    """Check real residues exactly and the immersion property by sampling.

    Sampling uses a golden-ratio lattice over the annulus r in [1e-3, 0.9],
    geometric in r, so repeated runs are deterministic. Failures are
    reported, not raised.
    """
    issues = []
    scale = max(end.coefficient_scale(), 1.0)
    for k, f in enumerate(end.forms):
        res = f.residue
        if abs(res.imag) >= RESIDUE_TOL * scale:
            issues.append(
                ValidationIssue(
                    kind="ResidueNotReal",
                    index=k + 1,
                    detail=f"residue {res!r} of form {k + 1} is not real",
                )
            )

    from .immersion import EndEvaluator  # local import to avoid a module cycle

    ev = EndEvaluator(end)
    idx = np.arange(samples)
    u = (idx + 0.5) / samples
    rs = 1e-3 * (0.9 / 1e-3) ** u
    ts = 2.0 * math.pi * np.mod(idx * _GOLDEN, 1.0)
    fr, ft = ev.first_derivatives(rs, ts)

    wedge_sq = _wedge_norm_sq(fr, ft)
    norms = np.sqrt(np.sum(fr * fr, axis=0) * np.sum(ft * ft, axis=0))
    rel = np.sqrt(np.maximum(wedge_sq, 0.0)) / np.where(norms > 0, norms, 1.0)
    worst = int(np.argmin(rel))

    if rel[worst] < WEDGE_TOL or norms[worst] == 0.0:
        issues.append(
            ValidationIssue(
                kind="DegenerateAtPoint",
                detail="differential drops below rank 2",
                r=float(rs[worst]),
                t=float(ts[worst]),
            )
        )

    return ValidationReport(
        ok=not issues,
        issues=tuple(issues),
        samples=samples,
        min_wedge=float(math.sqrt(max(wedge_sq[worst], 0.0))),
        min_relative_wedge=float(rel[worst]),
        min_wedge_r=float(rs[worst]),
        min_wedge_t=float(ts[worst]),
    )


def _wedge_norm_sq(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|X ^ Y|^2 summed from pairwise 2x2 determinants (cancellation free)."""
    d = x.shape[0]
    out = np.zeros(x.shape[1:])
    for k in range(d):
        for j in range(k + 1, d):
            det = x[k] * y[j] - x[j] * y[k]
            out += det * det
    return out


# ---------------------------------------------------------------------------
# Affine reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineReduction:
    matrix: tuple  # rows of the real matrix applied to the input forms
    reduced: EndDefinition
    certificate: tuple
    input_orders: tuple
    reduced_orders: tuple

    def matrix_array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    def to_json_dict(self) -> dict:
        return {
            "matrix": [list(row) for row in self.matrix],
            "reduced": self.reduced.to_json_dict(),
            "certificate": list(self.certificate),
            "input_orders": [o if o is not None else None for o in self.input_orders],
            "reduced_orders": [o if o is not None else None for o in self.reduced_orders],
        }


def apply_matrix(matrix: Sequence[Sequence[float]], forms: Sequence[LaurentForm]) -> tuple:
    """Row-combine forms by a real matrix: row_i = sum_j M[i][j] forms[j]."""
    out = []
    for row in matrix:
        acc = LaurentForm.zero_form()
        for coef, form in zip(row, forms):
            if coef != 0:
                acc = acc.plus(form, coef)
        out.append(acc)
    return tuple(out)


def _order_key(order):
    return -math.inf if order is None else order


def _real_dependence(a: complex, b: complex):
    """det of [Re a, Re b; Im a, Im b], relative to |a||b|."""
    det = a.real * b.imag - a.imag * b.real
    scale = abs(a) * abs(b)
    return det, (abs(det) / scale if scale > 0 else 0.0)


def _check_rank_band(rel_det: float):
    # A decision within a factor of 10 of the tie threshold is reported,
    # not guessed.
    if RANK_TOL / 10.0 < rel_det < RANK_TOL * 10.0:
        raise NumericalRankFailure(
            f"relative determinant {rel_det:.3e} is inside the tie band "
            f"around {RANK_TOL:.0e}"
        )


def reduce_end(end: EndDefinition) -> AffineReduction:
    """Greedy real elimination to the lexicographically minimal order tuple.

    Levels are processed from the largest pole order down. At each level
    at most two rows with R-independent leading coefficients survive
    (chosen greedily by magnitude); the rest lose their leading term to a
    real combination of the kept rows, which strictly drops their order.
    The accumulated matrix is invertible by construction and reproduces
    the reduced forms when applied to the input.
    """
    d = end.dimension
    rows = list(end.forms)
    matrix = np.eye(d)
    steps = []
    input_orders = tuple(sorted(end.pole_orders(), key=_order_key))

    for _ in range(1000):
        level = _next_actionable_level(rows)
        if level is None:
            break
        at_level = [i for i, f in enumerate(rows) if f.pole_order == level]
        coeffs = {i: rows[i].leading[1] for i in at_level}
        order = sorted(at_level, key=lambda i: (-abs(coeffs[i]), i))

        kept = [order[0]]
        eliminate = []
        for i in order[1:]:
            if len(kept) == 1:
                _, rel = _real_dependence(coeffs[kept[0]], coeffs[i])
                _check_rank_band(rel)
                if rel >= RANK_TOL:
                    kept.append(i)
                    continue
            eliminate.append(i)

        exp = -level
        for i in eliminate:
            lam, mu = _elimination_coefficients(coeffs[i], [coeffs[k] for k in kept])
            rows[i] = rows[i].plus(rows[kept[0]], -lam)
            matrix[i] -= lam * matrix[kept[0]]
            if mu is not None:
                rows[i] = rows[i].plus(rows[kept[1]], -mu)
                matrix[i] -= mu * matrix[kept[1]]
            rows[i] = rows[i].without_exponent(exp)
            steps.append(
                f"level {level}: row {i + 1} -= "
                + f"{lam:.12g} * row {kept[0] + 1}"
                + (f" + {mu:.12g} * row {kept[1] + 1}" if mu is not None else "")
            )
    else:
        raise NumericalRankFailure("elimination did not stabilize")

    perm = sorted(range(d), key=lambda i: (_order_key(rows[i].pole_order), i))
    if perm != list(range(d)):
        steps.append("sort rows by pole order: " + str([p + 1 for p in perm]))
    rows = [rows[i] for i in perm]
    matrix = matrix[perm]

    reduced = EndDefinition(tuple(rows), label=end.label)
    return AffineReduction(
        matrix=tuple(tuple(float(v) for v in row) for row in matrix),
        reduced=reduced,
        certificate=tuple(steps),
        input_orders=input_orders,
        reduced_orders=tuple(f.pole_order for f in rows),
    )


def _next_actionable_level(rows):
    """Highest pole order where some row's leading term can be eliminated."""
    levels = sorted(
        {f.pole_order for f in rows if f.pole_order is not None}, reverse=True
    )
    for level in levels:
        at_level = [f.leading[1] for f in rows if f.pole_order == level]
        if len(at_level) > 2:
            return level
        if len(at_level) == 2:
            _, rel = _real_dependence(at_level[0], at_level[1])
            if rel < RANK_TOL:
                return level
    return None


def _elimination_coefficients(target: complex, kept: list):
    """Real (lam, mu) with target = lam*kept[0] (+ mu*kept[1])."""
    if len(kept) == 1:
        k = kept[0]
        return (target.real * k.real + target.imag * k.imag) / abs(k) ** 2, None
    k1, k2 = kept
    det = k1.real * k2.imag - k1.imag * k2.real
    lam = (target.real * k2.imag - target.imag * k2.real) / det
    mu = (k1.real * target.imag - k1.imag * target.real) / det
    return lam, mu


def end_type(end: EndDefinition) -> EndType:
    """Case classification of the reduced form's nondecreasing order tuple."""
    red = reduce_end(end)
    orders = red.reduced_orders
    if any(o is None for o in orders):
        raise DomainError(
            "end is affinely degenerate: reduction produced a zero form"
        )
    n_top = orders[-1]
    if n_top <= 0:
        case = EndCase.SMOOTH_POINT
    elif orders[-2] == n_top:
        a = red.reduced.forms[-2].leading[1]
        b = red.reduced.forms[-1].leading[1]
        _, rel = _real_dependence(a, b)
        if rel < RANK_TOL:
            raise NumericalRankFailure(
                "equal top orders with dependent leading coefficients "
                "survived reduction"
            )
        case = EndCase.CASE_I_INDEPENDENT_TOP
    elif n_top >= 2:
        case = EndCase.CASE_II_GENERIC
    else:
        case = EndCase.CASE_III_SIMPLE_POLE_TOP
    return EndType(pole_orders=orders, case=case)


# ---------------------------------------------------------------------------
# Polar coefficient tables and blow-up data
# ---------------------------------------------------------------------------


def polar_terms(form: LaurentForm, pole_order: int) -> list:
    """(j, r_j, t_j) triples for the expansion sum_j r_j e^(i t_j) z^(j-1-n).

    j starts at 1 for the lowest possible exponent -n; absent terms are
    skipped.
    """
    out = []
    for e, c in form.terms:
        j = e + 1 + pole_order
        out.append((j, abs(c), cmath.phase(c)))
    return out


def first_imaginary_index(form: LaurentForm, pole_order: int, tol: float = 1e-12):
    """Smallest j with r_j sin(t_j) != 0 (nonzero imaginary part), else None."""
    scale = max(form.max_abs(), 1.0)
    for e, c in form.terms:
        if abs(c.imag) > tol * scale:
            return e + 1 + pole_order
    return None


@dataclass(frozen=True)
class BlowupData:
    """Asymptotic package for the rescaled curvature integrand.

    n is the blow-up exponent, k_star the indices realizing it, m the
    per-row first-imaginary indices (None for never), b the summed squared
    imaginary leading parts, and a = (top_order - 1)/sqrt(b). c is only
    populated for simple-pole-top ends.
    """

    top_order: int
    n: int
    k_star: tuple
    m: tuple
    b: float
    a: float
    c: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "top_order": self.top_order,
            "n": self.n,
            "k_star": list(self.k_star),
            "m": [v if v is not None else None for v in self.m],
            "b": self.b,
            "a": self.a,
            "c": self.c,
        }


def is_case2_normal(end: EndDefinition, tol: float = 1e-10) -> bool:
    """True when the last form is exactly z^(-n)dz + rho dz/z with n >= 2
    and the pole orders are nondecreasing with a strict top."""
    orders = end.pole_orders()
    if any(o is None for o in orders):
        return False
    if list(orders) != sorted(orders, key=_order_key):
        return False
    n_top = orders[-1]
    if n_top is None or n_top < 2 or orders[-2] >= n_top:
        return False
    top = end.forms[-1]
    for e, c in top.terms:
        if e == -n_top:
            if abs(c - 1.0) > tol:
                return False
        elif e == -1:
            if abs(c.imag) > tol:
                return False
        else:
            return False
    return abs(top.coefficient(-n_top) - 1.0) <= tol


def blowup_data(end: EndDefinition) -> BlowupData:
    """Read n, k*, b, a from the polar coefficients of a normalized end.

    Requires the generic-case normal form (see :func:`is_case2_normal`);
    use the normalization helpers first for raw input.
    """
    if not is_case2_normal(end):
        raise WrongCase(
            "blow-up data needs the generic-case normal form "
            "(last form z^-n dz + rho dz/z with a strict top order n >= 2)"
        )
    orders = end.pole_orders()
    n_top = orders[-1]
    d = end.dimension

    m = []
    for k in range(d - 1):
        m.append(first_imaginary_index(end.forms[k], orders[k]))

    finite = [
        (n_top - orders[k] + m[k] - 1, k) for k in range(d - 1) if m[k] is not None
    ]
    if not finite:
        raise AllMkInfinite(
            "every coordinate form has purely real coefficients; an immersed "
            "end must carry an imaginary coefficient somewhere"
        )
    n = min(v for v, _ in finite)
    k_star = tuple(k for v, k in finite if v == n)
    b = 0.0
    for k in k_star:
        e = m[k] - 1 - orders[k]
        b += end.forms[k].coefficient(e).imag ** 2
    a = (n_top - 1) / math.sqrt(b)
    return BlowupData(
        top_order=n_top,
        n=n,
        k_star=k_star,
        m=tuple(m),
        b=b,
        a=a,
    )
