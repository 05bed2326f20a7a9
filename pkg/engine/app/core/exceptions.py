"""
Error hierarchy for the toolkit.

Every error carries the process exit code the CLI should use when it
escapes a command: 2 validation, 3 synthesis, 4 simulation divergence.
"""


class ExoShapeError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 3


# Transfer-function algebra

class DelayMismatch(ExoShapeError):
    """Addition or subtraction of transfer functions with unequal delays."""


class NonInvertibleDelay(ExoShapeError):
    """Inverting a transfer function that carries a nonzero delay."""


class ZeroNumerator(ExoShapeError):
    """Inverting or dividing by an identically zero transfer function."""


class PoleOnAxis(ExoShapeError):
    """Frequency evaluation exactly on a pole."""


class NoConvergence(ExoShapeError):
    """Root iteration hit its cap."""


class ImproperTransferFunction(ExoShapeError):
    """Operation requires deg(num) <= deg(den)."""


# Synthesis / analysis

class DegenerateShape(ExoShapeError):
    """Compliance shape outside the family a construction supports."""


class NoCrossover(ExoShapeError):
    """Loop gain never reaches unity magnitude."""


# Simulation

class InstabilityDetected(ExoShapeError):
    """A simulated signal exceeded the divergence bound."""

    exit_code = 4

    def __init__(self, message: str, time: float | None = None, signal: str | None = None):
        super().__init__(message)
        self.time = time
        self.signal = signal


class NonFiniteState(InstabilityDetected):
    """The integrator produced NaN or infinity."""


# Configuration / CLI

class ConfigParseError(ExoShapeError):
    """Config file is not valid JSON."""

    exit_code = 2

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class ConfigValidationError(ExoShapeError, ValueError):
    """Config parsed but violates an invariant."""

    exit_code = 2


class UnknownParam(ConfigValidationError):
    """Sweep parameter path does not resolve inside the config."""


class UnknownMetric(ConfigValidationError):
    """Sweep metric name is not supported."""
