"""Truncated complex power series and finite Laurent form data.

A :class:`PowerSeries` stores exactly ``order`` coefficients; every power
at or above ``order`` is unknown and is discarded by arithmetic, never
invented. A :class:`LaurentForm` is the exact, finite input datum of the
library: a map from integer exponents to nonzero complex coefficients
representing ``sum_j c_j z^j dz``. Pullbacks of Laurent forms under
coordinate changes produce :class:`TruncatedLaurent` expansions that track
up to which exponent their coefficients are trustworthy.

All values here are immutable; every operation returns a fresh object, so
they can be shared freely between concurrent workers.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .errors import DomainError

#: Default working truncation order. Pulling a pole of order n back through
#: a coordinate change consumes about n orders of accuracy, so keep this
#: comfortably above the largest pole order in play.
DEFAULT_ORDER = 24


def _principal_root(c: complex, n: int) -> complex:
    """Principal n-th root: argument of the result lies in (-pi/n, pi/n]."""
    return abs(c) ** (1.0 / n) * cmath.exp(1j * cmath.phase(c) / n)


@dataclass(frozen=True)
class PowerSeries:
    """Complex power series known through order ``len(coeffs) - 1``."""

    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coeffs)
        if not coeffs:
            raise DomainError("a series needs at least one known coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, value: complex, order: int = DEFAULT_ORDER) -> "PowerSeries":
        return cls((complex(value),) + (0j,) * (order - 1))

    @classmethod
    def zero(cls, order: int = DEFAULT_ORDER) -> "PowerSeries":
        return cls.constant(0j, order)

    @classmethod
    def one(cls, order: int = DEFAULT_ORDER) -> "PowerSeries":
        return cls.constant(1.0 + 0j, order)

    @classmethod
    def variable(cls, order: int = DEFAULT_ORDER) -> "PowerSeries":
        """The series z."""
        if order < 2:
            raise DomainError("order must be at least 2 to represent z")
        return cls((0j, 1.0 + 0j) + (0j,) * (order - 2))

    @classmethod
    def from_polynomial(cls, coeffs: Iterable[complex], order: int = DEFAULT_ORDER) -> "PowerSeries":
        """Series of an exactly known polynomial, zero padded to ``order``."""
        cs = [complex(c) for c in coeffs]
        if len(cs) < order:
            cs += [0j] * (order - len(cs))
        return cls(tuple(cs[:order]))

    # -- basic accessors ---------------------------------------------------

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def coefficient(self, k: int) -> complex:
        return self.coeffs[k] if 0 <= k < self.order else 0j

    @property
    def constant_term(self) -> complex:
        return self.coeffs[0]

    def truncated(self, order: int) -> "PowerSeries":
        if order > self.order:
            raise DomainError("cannot extend a series; higher coefficients are unknown")
        return PowerSeries(self.coeffs[:order])

    def max_abs(self) -> float:
        return max(abs(c) for c in self.coeffs)

    def __call__(self, w: complex) -> complex:
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * w + c
        return acc

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.order, other.order)
        return PowerSeries(tuple(self.coeffs[k] + other.coeffs[k] for k in range(n)))

    def __sub__(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.order, other.order)
        return PowerSeries(tuple(self.coeffs[k] - other.coeffs[k] for k in range(n)))

    def __neg__(self) -> "PowerSeries":
        return PowerSeries(tuple(-c for c in self.coeffs))

    def scaled(self, s: complex) -> "PowerSeries":
        s = complex(s)
        return PowerSeries(tuple(s * c for c in self.coeffs))

    def __mul__(self, other: "PowerSeries") -> "PowerSeries":
        """Cauchy product truncated at the smaller order."""
        n = min(self.order, other.order)
        a, b = self.coeffs, other.coeffs
        out = [0j] * n
        for i in range(n):
            ai = a[i]
            if ai == 0:
                continue
            for j in range(n - i):
                out[i + j] += ai * b[j]
        return PowerSeries(tuple(out))

    def plus_constant(self, value: complex) -> "PowerSeries":
        return PowerSeries((self.coeffs[0] + complex(value),) + self.coeffs[1:])

    def times_z(self) -> "PowerSeries":
        """Multiply by z. Exact, so the order grows by one."""
        return PowerSeries((0j,) + self.coeffs)

    # -- calculus ----------------------------------------------------------

    def derivative(self) -> "PowerSeries":
        if self.order < 2:
            raise DomainError("derivative needs at least two known coefficients")
        return PowerSeries(tuple(k * self.coeffs[k] for k in range(1, self.order)))

    def integrated(self) -> "PowerSeries":
        """Termwise antiderivative z^j -> z^(j+1)/(j+1); order grows by one."""
        return PowerSeries((0j,) + tuple(c / (k + 1) for k, c in enumerate(self.coeffs)))

    # -- transcendental operations -----------------------------------------

    def exp(self) -> "PowerSeries":
        a = self.coeffs
        n = self.order
        out = [0j] * n
        out[0] = cmath.exp(a[0])
        for k in range(1, n):
            acc = 0j
            for j in range(1, k + 1):
                acc += j * a[j] * out[k - j]
            out[k] = acc / k
        return PowerSeries(tuple(out))

    def log(self) -> "PowerSeries":
        a = self.coeffs
        if a[0] == 0:
            raise DomainError("log needs a nonzero constant term")
        n = self.order
        out = [0j] * n
        out[0] = cmath.log(a[0])
        for k in range(1, n):
            acc = 0j
            for j in range(1, k):
                acc += j * out[j] * a[k - j]
            out[k] = (a[k] - acc / k) / a[0]
        return PowerSeries(tuple(out))

    def reciprocal(self) -> "PowerSeries":
        a = self.coeffs
        if a[0] == 0:
            raise DomainError("reciprocal needs a nonzero constant term")
        n = self.order
        out = [0j] * n
        out[0] = 1.0 / a[0]
        for k in range(1, n):
            acc = 0j
            for j in range(1, k + 1):
                acc += a[j] * out[k - j]
            out[k] = -acc * out[0]
        return PowerSeries(tuple(out))

    def nth_root(self, n: int) -> "PowerSeries":
        """Principal n-th root; the constant term's argument lands in (-pi/n, pi/n].

        Callers wanting another branch multiply by a root of unity.
        """
        if n < 1:
            raise DomainError("root index must be a positive integer")
        a0 = self.coeffs[0]
        if a0 == 0:
            raise DomainError("nth_root needs a nonzero constant term")
        unit = self.scaled(1.0 / a0)
        return unit.log().scaled(1.0 / n).exp().scaled(_principal_root(a0, n))

    def pow_int(self, m: int) -> "PowerSeries":
        """Integer power; negative powers require a nonzero constant term."""
        if m < 0:
            return self.reciprocal().pow_int(-m)
        result = PowerSeries.one(self.order)
        base = self
        while m:
            if m & 1:
                result = result * base
            base = base * base
            m >>= 1
        return result

    def compose(self, inner: "PowerSeries") -> "PowerSeries":
        """self(inner(z)) for inner with inner(0) = 0, by Horner's scheme."""
        if inner.constant_term != 0:
            raise DomainError("composition needs inner(0) = 0")
        n = min(self.order, inner.order)
        inner_t = inner.truncated(n)
        acc = PowerSeries.constant(self.coeffs[n - 1], n)
        for k in range(n - 2, -1, -1):
            acc = (acc * inner_t).plus_constant(self.coeffs[k])
        return acc


FormLike = Union["LaurentForm", "TruncatedLaurent"]


@dataclass(frozen=True)
class LaurentForm:
    """Finite 1-form ``sum_j c_j z^j dz`` with all stored c_j nonzero.

    The empty form (no terms) represents the zero form; it has no pole
    order and only arises as a degenerate byproduct of eliminations.
    """

    terms: tuple  # sorted tuple of (exponent, coefficient) pairs

    def __post_init__(self):
        seen = {}
        for e, c in self.terms:
            e = int(e)
            c = complex(c)
            if c != 0:
                seen[e] = seen.get(e, 0j) + c
        cleaned = tuple(sorted((e, c) for e, c in seen.items() if c != 0))
        object.__setattr__(self, "terms", cleaned)

    @classmethod
    def from_terms(cls, terms: Union[Mapping[int, complex], Iterable]) -> "LaurentForm":
        if isinstance(terms, Mapping):
            terms = terms.items()
        return cls(tuple(terms))

    @classmethod
    def zero_form(cls) -> "LaurentForm":
        return cls(())

    # -- accessors -----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, e: int) -> complex:
        for ee, c in self.terms:
            if ee == e:
                return c
        return 0j

    def exponents(self) -> tuple:
        return tuple(e for e, _ in self.terms)

    @property
    def pole_order(self):
        """-min exponent; negative values are zeros, None for the zero form."""
        if self.is_zero:
            return None
        return -self.terms[0][0]

    @property
    def residue(self) -> complex:
        return self.coefficient(-1)

    @property
    def leading(self):
        """(lowest exponent, its coefficient), or None for the zero form."""
        return self.terms[0] if self.terms else None

    def max_abs(self) -> float:
        return max((abs(c) for _, c in self.terms), default=0.0)

    # -- algebra --------------------------------------------------------------

    def scaled(self, s: complex) -> "LaurentForm":
        s = complex(s)
        if s == 0:
            return LaurentForm.zero_form()
        return LaurentForm(tuple((e, s * c) for e, c in self.terms))

    def plus(self, other: "LaurentForm", scale: complex = 1.0) -> "LaurentForm":
        acc = dict(self.terms)
        for e, c in other.terms:
            acc[e] = acc.get(e, 0j) + scale * c
        return LaurentForm.from_terms(acc)

    def without_exponent(self, e: int) -> "LaurentForm":
        """Drop the coefficient at exponent e entirely (exact elimination)."""
        return LaurentForm(tuple(t for t in self.terms if t[0] != e))

    def domain_scaled(self, lam: complex) -> "LaurentForm":
        """Pull back under z -> lam*z:  c_e z^e dz  ->  c_e lam^(e+1) z^e dz."""
        if lam == 0:
            raise DomainError("domain scaling must be invertible")
        return LaurentForm(tuple((e, c * lam ** (e + 1)) for e, c in self.terms))

    def cleaned(self, tol: float) -> "LaurentForm":
        """Drop coefficients below tol times the largest magnitude."""
        scale = self.max_abs()
        if scale == 0.0:
            return self
        return LaurentForm(tuple((e, c) for e, c in self.terms if abs(c) > tol * scale))


@dataclass(frozen=True)
class TruncatedLaurent:
    """Laurent expansion with coefficients known for exponents < valid_order."""

    min_exp: int
    coeffs: tuple
    valid_order: int

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        if self.min_exp + len(self.coeffs) != self.valid_order:
            raise DomainError("coefficient span must end exactly at valid_order")

    def coefficient(self, e: int) -> complex:
        if e >= self.valid_order:
            raise DomainError(f"coefficient at z^{e} is beyond the valid order")
        idx = e - self.min_exp
        return self.coeffs[idx] if idx >= 0 else 0j

    @property
    def residue(self) -> complex:
        return self.coefficient(-1)

    def pole_order(self, tol: float = 1e-12):
        scale = max((abs(c) for c in self.coeffs), default=0.0)
        if scale == 0.0:
            return None
        for k, c in enumerate(self.coeffs):
            if abs(c) > tol * scale:
                return -(self.min_exp + k)
        return None

    def max_abs_diff(self, form: FormLike, up_to: int) -> float:
        """Largest coefficient gap against ``form`` for exponents < up_to."""
        up_to = min(up_to, self.valid_order)
        exps = set(range(self.min_exp, up_to))
        if isinstance(form, LaurentForm):
            exps.update(e for e in form.exponents() if e < up_to)
        worst = 0.0
        for e in exps:
            worst = max(worst, abs(self.coefficient(e) - form.coefficient(e)))
        return worst

    def to_form(self, tol: float = 0.0) -> LaurentForm:
        """Materialize the known coefficients as a finite form."""
        form = LaurentForm(tuple((self.min_exp + k, c) for k, c in enumerate(self.coeffs)))
        return form.cleaned(tol) if tol > 0 else form


def pullback(omega: FormLike, phi: PowerSeries) -> TruncatedLaurent:
    """Pull the form back through the coordinate change phi, phi(0) = 0.

    ``phi* omega = (sum_j c_j phi(z)^j) phi'(z) dz``. Negative powers use
    ``phi(z)^j = z^j u(z)^j`` for the unit ``u = phi / z``, so they cost
    pole-order many coefficients of accuracy: a pole of order n in
    ``omega`` limits the result's valid order to ``-n + phi.order - 1``.
    """
    if phi.constant_term != 0:
        raise DomainError("pullback needs phi(0) = 0")
    if phi.order < 3 or phi.coefficient(1) == 0:
        raise DomainError("pullback needs phi'(0) != 0 and some working order")

    work = phi.order - 1
    unit = PowerSeries(phi.coeffs[1:])  # phi / z, constant term phi'(0)
    dphi = phi.derivative()

    if isinstance(omega, LaurentForm):
        if omega.is_zero:
            raise DomainError("cannot pull back the zero form")
        terms = list(omega.terms)
        input_valid = None
    else:
        terms = [
            (omega.min_exp + k, c)
            for k, c in enumerate(omega.coeffs)
            if c != 0
        ]
        if not terms:
            raise DomainError("cannot pull back the zero form")
        input_valid = omega.valid_order

    e_min = min(e for e, _ in terms)
    out_valid = e_min + work
    if input_valid is not None:
        out_valid = min(out_valid, input_valid)

    acc = {}
    for e, c in terms:
        if e >= out_valid:
            continue
        contrib = unit.pow_int(e) * dphi
        for k in range(contrib.order):
            ek = e + k
            if ek >= out_valid:
                break
            acc[ek] = acc.get(ek, 0j) + c * contrib.coeffs[k]

    coeffs = tuple(acc.get(e, 0j) for e in range(e_min, out_valid))
    return TruncatedLaurent(min_exp=e_min, coeffs=coeffs, valid_order=out_valid)
