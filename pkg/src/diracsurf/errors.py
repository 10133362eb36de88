"""Exception hierarchy.

Every numerical failure derives from :class:`NumericalError` so the CLI can
map it to a single exit code; configuration problems use :class:`ConfigError`.
"""


class DiracSurfError(Exception):
    pass


class ConfigError(DiracSurfError, ValueError):
    """Malformed job configuration or input document."""


class NumericalError(DiracSurfError):
    pass


class NotClosed(NumericalError):
    """A 1-form handed to the antiderivative is not closed."""


class NotConformal(NumericalError):
    pass


class DegenerateChart(NumericalError):
    """Sign continuation of the spinor square roots became ambiguous."""


class NonPositiveMetric(NumericalError):
    pass


class ZeroPotential(NumericalError):
    pass


class DegenerateGrid(NumericalError):
    pass


class ComplexDrift(NumericalError):
    """A quantity that must stay real picked up an imaginary part."""


class Instability(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class ThetaZeroDivision(NumericalError):
    """A theta-function denominator vanished (pole of the evaluated quantity)."""


class PoleOnSurface(NumericalError):
    pass


class RegularityLost(NumericalError):
    pass
