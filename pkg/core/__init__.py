"""
corrugate core module
"""

# Errors
from .errors import (
    CorrugateError,
    ConfigError,
    FieldError,
    FieldFormatError,
    SolverError,
    ModeMisuseError,
    FrameError,
    DecompositionError,
    ResolutionError,
    ScheduleError,
    CutoffError,
    StageAssertionError,
)

# Fields and grids
from .field import Grid, ScalarField, VectorField, SymMatrixField, make_domain

# Construction
from .decomp import Frame, build_frame
from .scheduler import Schedule, find_feasible, check_ledger
from .stages import Problem, Solution, StageOptions, run

__all__ = [
    # Errors
    'CorrugateError',
    'ConfigError',
    'FieldError',
    'FieldFormatError',
    'SolverError',
    'ModeMisuseError',
    'FrameError',
    'DecompositionError',
    'ResolutionError',
    'ScheduleError',
    'CutoffError',
    'StageAssertionError',

    # Fields
    'Grid',
    'ScalarField',
    'VectorField',
    'SymMatrixField',
    'make_domain',

    # Construction
    'Frame',
    'build_frame',
    'Schedule',
    'find_feasible',
    'check_ledger',
    'Problem',
    'Solution',
    'StageOptions',
    'run',
]
