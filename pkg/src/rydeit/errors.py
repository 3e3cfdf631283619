"""Exception hierarchy and process exit codes.

Three failure families map to distinct CLI exit codes: input/validation
problems (2), numerical/computation problems (3), and file I/O or format
problems (4). Everything raised by this package derives from RydeitError.
"""


class RydeitError(Exception):
    """Base class for all package errors."""


class ValidationError(RydeitError):
    """Invalid input: bad parameter values, malformed config, domain violations."""


class UnsupportedGeometryError(ValidationError):
    """Operation defined only for one beam geometry was called with the other."""


class RangeError(ValidationError):
    """Principal quantum number outside the supported range."""


class ComputationError(RydeitError):
    """Numerical failure while computing a result."""


class QuadratureError(ComputationError):
    """Velocity integral failed to converge at the refinement limit.

    Carries the last two refinement estimates so callers can judge how far
    from convergence the integral stopped.
    """

    def __init__(self, message, previous_estimate, last_estimate):
        super().__init__(message)
        self.previous_estimate = previous_estimate
        self.last_estimate = last_estimate


class DegenerateModelError(ComputationError):
    """Steady-state optical Bloch system is singular (all decay rates zero)."""


class FitError(ComputationError):
    """Least-squares peak fit failed to converge.

    Carries the last parameter iterate for diagnosis.
    """

    def __init__(self, message, last_params=None):
        super().__init__(message)
        self.last_params = last_params


class GeometryError(ComputationError):
    """Fit window does not contain a usable maximum."""


class WindowError(ComputationError):
    """Sideband replica displacement exceeds the scan grid span."""


class DistortionError(ComputationError):
    """Scan distortion polynomial is not monotone over the trace window."""


class CalibrationError(ComputationError):
    """Axis calibration produced a non-monotone or underdetermined mapping."""


class AssignmentError(ComputationError):
    """Detected peak could not be matched to any predicted pathway.

    Carries the orphan positions that failed assignment.
    """

    def __init__(self, message, orphans=()):
        super().__init__(message)
        self.orphans = list(orphans)


class FileFormatError(RydeitError):
    """Trace or table file violates the documented format.

    Carries the 1-based line number when one is identifiable.
    """

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_COMPUTATION = 3
EXIT_IO = 4


def exit_code_for(exc):
    """Map an exception to the documented CLI exit code."""
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, (FileFormatError, OSError)):
        return EXIT_IO
    if isinstance(exc, RydeitError):
        return EXIT_COMPUTATION
    return EXIT_COMPUTATION
