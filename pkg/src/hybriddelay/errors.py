"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HybridDelayError(Exception):
    """Base class for every error raised by this package."""


class ModelError(HybridDelayError):
    """A numeric or model-level failure (CLI exit code 2)."""


class DegenerateParameterError(ModelError):
    """The correction factor gamma is <= 1/2, so the rising delay is undefined."""


class NoCrossingError(ModelError):
    """The trajectory never reaches the V_DD/2 threshold."""


class NegativeDelayError(ModelError):
    """The threshold crossing lies at or before the mode switch.

    The (non-positive) delay is kept in :attr:`delay`.
    """

    def __init__(self, delay: float, message: str | None = None):
        super().__init__(message or f"crossing at non-positive delay {delay:.6e} s")
        self.delay = delay


class ExponentOverflowError(ModelError):
    """An exponent argument exceeded the guarded range."""


class StiffnessError(ModelError):
    """The adaptive integrator could not make progress."""

    def __init__(self, message: str, t: float, v: float):
        super().__init__(f"{message} (t={t:.6e} s, v={v:.6e} V)")
        self.t = t
        self.v = v


class FitError(ModelError):
    """Inconsistent targets or failure in the parametrization procedure."""


class SimulationError(ModelError):
    """A model error raised while processing a gate event."""

    def __init__(self, gate_id: str, time: float, cause: Exception):
        super().__init__(f"gate {gate_id!r} at t={time:.6e} s: {cause}")
        self.gate_id = gate_id
        self.time = time
        self.cause = cause


class OscillationError(ModelError):
    """Too many events at a single timestamp (zero-delay loop)."""


class WindowMismatchError(HybridDelayError, ValueError):
    """Two traces were recorded over different observation windows."""


class ParseError(HybridDelayError, ValueError):
    """Malformed input text; carries 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)
        self.line = line
        self.column = column


class SyntaxParseError(ParseError):
    pass


class UnknownGateKindError(ParseError):
    pass


class DanglingNetError(ParseError):
    pass


class MultipleDriverError(ParseError):
    pass


class MissingKeyError(ParseError):
    pass
