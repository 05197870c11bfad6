"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SpikedNoiseError(Exception):
    """Base class for all errors raised by this package."""


class InvalidModelError(SpikedNoiseError, ValueError):
    """A covariance model was declared with invalid parameters."""


class DegenerateSampleError(SpikedNoiseError, ValueError):
    """Too few observations for the requested dimension."""


class ShapeError(SpikedNoiseError, ValueError):
    """Matrix has the wrong shape or is not symmetric."""


class DegenerateSpectrumError(SpikedNoiseError, ValueError):
    """Non-positive eigenvalues where a strictly positive spectrum is needed."""


class NearDegenerateError(SpikedNoiseError, ValueError):
    """Eigenvalues too close together for divided differences to be trusted."""


class RegimeError(SpikedNoiseError, ValueError):
    """The (n, p) pair lies outside the regime where a formula holds."""


class RankError(SpikedNoiseError, ValueError):
    """Requested spiked rank is out of range."""


class IllPosedDenominatorError(SpikedNoiseError, ArithmeticError):
    """The noise minimizer's denominator vanishes."""


class NegativeNoiseError(SpikedNoiseError, ArithmeticError):
    """The noise minimizer returned a non-positive level."""


class BelowBulkError(SpikedNoiseError, ValueError):
    """Sample eigenvalue lies inside the Marchenko-Pastur bulk."""


class SupercriticalityError(SpikedNoiseError, ValueError):
    """A spike is at or below the detection threshold sqrt(c) * sigma^2."""


class DomainError(SpikedNoiseError, ValueError):
    """Argument outside the domain of a closed-form expression."""


class ConfigError(SpikedNoiseError, ValueError):
    """Experiment or CLI configuration failed validation.

    ``problems`` lists every offending field so they can be reported at once.
    """

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NearDegenerateWarning(UserWarning):
    """Emitted when a spectrum has nearly tied eigenvalues."""
