"""Exception taxonomy shared across the package."""

from __future__ import annotations


class HarmonicEndsError(Exception):
    """Base class for every error raised by this library."""


class DomainError(HarmonicEndsError):
    """An operation was invoked outside its mathematical domain."""


class ResidueNotReal(HarmonicEndsError):
    """A coordinate form has a residue with a nonzero imaginary part.

    The real part of the antiderivative is then multivalued, so no
    single-valued map exists.
    """

    def __init__(self, index: int, residue: complex):
        self.index = index
        self.residue = residue
        super().__init__(
            f"form {index} has non-real residue {residue!r}; "
            "the coordinate would be multivalued"
        )


class DegenerateAtPoint(HarmonicEndsError):
    """The differential drops below rank 2 at (or too near) a point."""

    def __init__(self, r: float, t: float, detail: str = ""):
        self.r = r
        self.t = t
        msg = f"degenerate differential at (r={r!r}, t={t!r})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class WrongCase(HarmonicEndsError):
    """The end is not in the case (or normal form) the operation requires."""


class NumericalRankFailure(HarmonicEndsError):
    """A linear-independence decision fell inside the tie tolerance."""


class AllMkInfinite(HarmonicEndsError):
    """Every first-imaginary-coefficient index is infinite.

    For an immersed end at least one coordinate must carry an imaginary
    coefficient, so this signals inconsistent input data.
    """


class SolveFailure(HarmonicEndsError):
    """A coefficient solve left a residual above tolerance."""

    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"solve residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
        )


class QuadratureNoConvergence(HarmonicEndsError):
    """Adaptive quadrature ran out of budget before reaching tolerance."""

    def __init__(self, achieved: float, requested: float):
        self.achieved = achieved
        self.requested = requested
        super().__init__(
            f"quadrature error estimate {achieved:.3e} above requested "
            f"{requested:.3e}"
        )


class CurveThroughOrigin(HarmonicEndsError):
    """A projected curve passes too close to 0 for a winding number."""
