"""Exception hierarchy shared by all modules.

The CLI maps the three top-level families onto exit codes:
``ConfigError`` -> 2, ``VerifiedFailure`` -> 1, ``NumericalFailure`` -> 3.
"""


class SyzLabError(Exception):
    """Base class for every error raised by syzlab."""


class ConfigError(SyzLabError, ValueError):
    """Bad input: malformed files, out-of-domain arguments."""


class VerifiedFailure(SyzLabError):
    """A property was checked and does not hold."""


class NumericalFailure(SyzLabError, ArithmeticError):
    """An algorithm did not produce a trustworthy number."""


class MalformedFan(ConfigError):
    pass


class NotAmple(VerifiedFailure):
    pass


class ZeroCoordinate(ConfigError):
    pass


class BoundaryPoint(ConfigError):
    pass


class OutsideBox(ConfigError):
    """A grid-sampled field was queried outside its sampling box."""


class OutsidePolytope(NumericalFailure):
    pass


class NumericOverflow(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class Diverging(NumericalFailure):
    pass


class Oscillating(NumericalFailure):
    pass


class EmptyStratum(NumericalFailure):
    pass


class QuadratureFailure(NumericalFailure):
    pass


class SolverFailure(NumericalFailure):
    pass


class ResidualTooLarge(NumericalFailure):
    pass


class NotExtendable(VerifiedFailure):
    """The section fails the growth condition for every candidate class."""
