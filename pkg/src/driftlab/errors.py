"""Exception types shared across the lab."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class DomainError(ValueError):
    """Evaluation requested outside the function's domain."""


class OutOfRange(InvalidArgument):
    """A query exceeds the retained truncation (would silently corrupt counts)."""


class ConstructionFailure(RuntimeError):
    """A constructive procedure failed; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class OutOfWindow(RuntimeError):
    """A trajectory or evaluation left its stated validity window."""


class UndefinedRatio(ZeroDivisionError):
    """A ratio check was requested where the denominator vanishes."""


class DegenerateLevel(RuntimeError):
    """A level-set functional degenerates (vanishing norm) at a named radius."""

    def __init__(self, rho, message=None):
        super().__init__(message or f"level-set norm vanishes at rho={rho!r}")
        self.rho = rho


class SolverFailure(RuntimeError):
    """The linear or ODE solver reported failure."""


class NoLimit(RuntimeError):
    """A sequence required to converge shows non-decaying Cauchy differences."""
