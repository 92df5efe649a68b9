"""
Exception hierarchy for the corrugate engine
"""


class CorrugateError(Exception):
    """Base class for every engine failure"""


class ConfigError(CorrugateError):
    """
    Invalid or unreadable run configuration

    Args:
        message (str): Description of the problem
        key (str, optional): Offending configuration key
        line (int, optional): Line number in the configuration file
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if key is not None:
            location.append(f"key '{key}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class FieldError(CorrugateError):
    """Malformed field data: non-finite values, grid mismatch, oversized stencils"""


class FieldFormatError(FieldError):
    """CIGRID file that cannot be read or written"""


class SolverError(CorrugateError):
    """
    Linear solve that did not reach its tolerance

    Args:
        message (str): Description of the failure
        report (dict, optional): Residual report of the failed solve
    """

    def __init__(self, message, report=None):
        self.report = report or {}
        super().__init__(message)


class ModeMisuseError(CorrugateError):
    """Background data incompatible with the requested mode"""


class FrameError(CorrugateError):
    """No admissible direction frame was found"""


class DecompositionError(CorrugateError):
    """
    Matrix outside the admissible ball around the identity

    Args:
        message (str): Description of the failure
        distance (float): Worst entrywise distance from the identity
        location (tuple, optional): Grid index of the worst point
    """

    def __init__(self, message, distance, location=None):
        self.distance = distance
        self.location = location
        super().__init__(f"{message} (distance {distance:.6g}, location {location})")


class ResolutionError(CorrugateError):
    """Corrugation frequency the grid cannot resolve"""


class ScheduleError(CorrugateError):
    """Parameter schedule that cannot be evaluated"""


class CutoffError(CorrugateError):
    """Mollification length too large for the boundary cut-offs"""


class StageAssertionError(CorrugateError):
    """
    A stage bound failed beyond its discretization allowance

    Args:
        message (str): Which bound failed
        report: DeficitReport of the failing stage
        partial: Last good state and the reports collected so far
    """

    def __init__(self, message, report=None, partial=None):
        self.report = report
        self.partial = partial
        super().__init__(message)


EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_STAGE = 3
EXIT_CONFIG = 4

# Raised from inside a stage when its construction cannot be certified
STAGE_ERRORS = (StageAssertionError, DecompositionError, CutoffError)


def exit_code_for(error):
    """Map an exception to the documented process exit code"""
    if isinstance(error, (ConfigError, FieldFormatError, OSError)):
        return EXIT_CONFIG
    if isinstance(error, STAGE_ERRORS):
        return EXIT_STAGE
    return EXIT_ERROR
