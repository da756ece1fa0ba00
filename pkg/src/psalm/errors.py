"""Exception types shared across the package."""


class PsalmError(Exception):
    """Base class for all package-specific failures."""


class DomainError(PsalmError, ValueError):
    """An argument lies outside an operation's domain."""


class ParseError(PsalmError, ValueError):
    """Unparseable user input (model codes, data files, CLI values)."""


class SingularPointError(PsalmError):
    """A density or expectation was requested at its pole.

    Carries the offending observation/component indices when raised from
    an E-step over a data matrix (None for direct scalar calls).
    """

    def __init__(self, message, row=None, component=None):
        super().__init__(message)
        self.row = row
        self.component = component


class ConditioningError(PsalmError):
    """An inner linear solve was numerically singular."""


class NumericalError(PsalmError):
    """A numerical computation failed (e.g. every density underflowed)."""


class DegenerateComponentError(PsalmError):
    """A component collapsed (too few members or degenerate geometry)."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class FitFailureError(PsalmError):
    """Every start of an estimation run failed; diagnostics attached."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
