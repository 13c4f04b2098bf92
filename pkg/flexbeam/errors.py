"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations

EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4
EXIT_USAGE = 64  # malformed command line, kept apart from validation failures


class FlexbeamError(Exception):
    """Base class for every error raised by flexbeam."""

    exit_code: int = EXIT_IO
    stage: str | None = None  # set by the orchestrator on the way out


# --- Beam model / configuration ---


class MalformedSpecError(FlexbeamError):
    """A config or coefficient spec does not parse to an evaluable function."""


class NonPositiveParameterError(FlexbeamError):
    """L, m or J is not strictly positive."""


class NonPositiveCoefficientError(FlexbeamError):
    """rho or EI is not strictly positive somewhere on [0, L]."""


class OutOfDomainError(FlexbeamError):
    """A position or time lies outside its admissible interval."""


class IndexOutOfRangeError(FlexbeamError):
    """A generating-function level outside 0..N was requested."""


# --- Numerics ---


class SolverDivergenceError(FlexbeamError):
    exit_code = EXIT_NUMERIC


class GridTooCoarseError(FlexbeamError):
    exit_code = EXIT_NUMERIC


class QuadratureFailureError(FlexbeamError):
    exit_code = EXIT_NUMERIC


class NonFiniteStateError(FlexbeamError):
    exit_code = EXIT_NUMERIC


class BoundViolationError(FlexbeamError):
    exit_code = EXIT_VALIDATION


class ValidationThresholdError(FlexbeamError):
    """An acceptance threshold of a pipeline run was not met."""

    exit_code = EXIT_VALIDATION


# --- Jets and synthesis ---


class MismatchedJetsError(FlexbeamError):
    """Jets combined with different expansion points or orders."""


class NonPositiveBaseError(FlexbeamError):
    """Non-integer power of a jet whose constant term is not positive."""


class UnknownSpecError(FlexbeamError):
    """Closed-form signal id not in the supported family."""


class JetTooShortError(FlexbeamError):
    """A jet does not carry enough Taylor coefficients for the request."""


class MissingDerivativesError(FlexbeamError):
    """A trajectory was synthesized without the derivative tables needed."""


# --- Simulator ---


class IncompatibleInitialDataError(FlexbeamError):
    """Initial state and input disagree at t = 0."""


class DimensionMismatchError(FlexbeamError):
    pass


class GridMismatchError(FlexbeamError):
    pass


# --- Artifacts ---


class ArtifactNotFoundError(FlexbeamError):
    pass


class ArtifactParseError(FlexbeamError):
    pass
