class NashDynError(Exception):
    """Base class for errors raised by nashdyn."""


class NonFiniteError(NashDynError, ArithmeticError):
    """A NaN or infinity showed up where a finite number was required."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UnsupportedMethodError(NashDynError, ValueError):
    """The method needs something (e.g. an exact best-response oracle) the game lacks."""


class NoOracleError(NashDynError, ValueError):
    """Exact exploitability was requested for a game without a best-response oracle."""


class NoKnownEquilibriumError(NashDynError, ValueError):
    pass


class ConfigError(NashDynError, ValueError):
    pass


class MethodError(NashDynError, ArithmeticError):
    """A method's update could not be computed (e.g. singular linear system)."""
