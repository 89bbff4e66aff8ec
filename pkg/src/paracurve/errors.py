"""Exception hierarchy shared by all paracurve modules.

Exit-code mapping used by the CLI lives in ``paracurve.cli``; keep the
classes here dependency-free.
"""


class ParacurveError(Exception):
    """Base class for all library errors."""


class StructureError(ParacurveError):
    """Mismatched nvars / truncation order / coefficient backend."""


class PreconditionError(ParacurveError):
    """An operation was called outside its documented domain."""


class ExpressionSyntaxError(ParacurveError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class DivisibilityError(ParacurveError):
    """Division by a coordinate power failed; carries the offending monomial."""

    def __init__(self, message, monomial=None):
        super().__init__(message)
        self.monomial = monomial


class NotInvariantError(ParacurveError):
    """A curve failed an invariance test; records the first obstruction."""

    def __init__(self, message, order=None, component=None):
        super().__init__(message)
        self.order = order
        self.component = component


class PrecisionError(ParacurveError):
    """Floating eigenvalue clusters too close to separate reliably."""


class BudgetError(ParacurveError):
    """Truncation order too small to finish; carries a retry suggestion."""

    def __init__(self, message, required_order=None):
        if required_order is not None:
            message = f"{message} (retry with truncation order >= {required_order})"
        super().__init__(message)
        self.required_order = required_order


class DegenerateSystemError(ParacurveError):
    """A linear system was identically zero to the working budget."""


class NotInFormError(ParacurveError):
    """Shape detection failed; names the first violated clause."""

    def __init__(self, clause):
        super().__init__(f"not in normal form: {clause}")
        self.clause = clause


class OrbitOrderingError(ParacurveError):
    """Telescoped integrating-factor exponent had large positive real part."""


class SectorExitError(ParacurveError):
    """An orbit left the working sector (opening/radius too aggressive)."""


class TailError(ParacurveError):
    """Operator tail failed to decay within the iteration cap."""


class ConstructionFailedError(ParacurveError):
    """No radius in the shrinking ladder produced a converged curve."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class IndeterminateBoundary(ParacurveError):
    """Float-mode angular test fell inside the guard band of a boundary."""
