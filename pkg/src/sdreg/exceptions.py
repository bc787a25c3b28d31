"""Exception hierarchy for sdreg.

Validation problems (bad shapes, bad options, malformed configs) raise the
standard ``ValueError``/``TypeError`` family or :class:`ConfigError`.
Numerical failures that occur on valid inputs raise subclasses of
:class:`NumericalError` so callers (and the CLI) can distinguish "you gave me
garbage" from "the computation broke down".
"""


class SdregError(Exception):
    """Base class for sdreg-specific errors."""


class ConfigError(SdregError):
    """An experiment configuration is missing, malformed, or inconsistent."""


class FormatError(SdregError):
    """A model/data file is corrupt or does not match its declared header."""


class NumericalError(SdregError):
    """Base class for numerical breakdowns on otherwise valid inputs."""


class DivergenceError(NumericalError):
    """An iterative solver's residual grew far past its running minimum."""


class StepSizeError(NumericalError):
    """A proximal step increased the objective (step size too large)."""


class SingularOperatorError(NumericalError):
    """An operator that must be inverted is numerically singular."""
