"""Exception hierarchy shared across the package."""


class ProxiError(Exception):
    """Base class for all library errors."""


class NotPositiveDefinite(ProxiError, ValueError):
    pass


class SingularMatrix(ProxiError, ValueError):
    pass


class DimensionMismatch(ProxiError, ValueError):
    pass


class ShapeMismatch(ProxiError, ValueError):
    pass


class NotApplicable(ProxiError, TypeError):
    """Operation not defined for this kind of target."""


class NotSamplable(NotApplicable):
    pass


class EmptyBatch(ProxiError, ValueError):
    pass


class EmptyInput(ProxiError, ValueError):
    pass


class GenerationFailed(ProxiError, RuntimeError):
    pass


class FlowInversionFailed(ProxiError, ArithmeticError):
    pass


class FamilyMismatch(ProxiError, TypeError):
    pass


class NonFiniteLoss(ProxiError, ArithmeticError):
    """Raised inside a run when the loss or an iterate stops being finite."""


class MetricMissing(ProxiError, KeyError):
    pass


class UnknownPreset(ProxiError, KeyError):
    pass


class ParseError(ProxiError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ProxiError, ValueError):
    """Config validation failure; ``errors`` holds every (key, message) found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))

    @property
    def keys(self):
        return [k for k, _ in self.errors]
