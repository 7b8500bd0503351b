"""Approximation of piecewise-smooth gridded data by signature matching.

Subpackages follow the pipeline: :mod:`grid` (data and test functions),
:mod:`signature` (difference operators), :mod:`basis` (spline and
Chebyshev bases), :mod:`detect` (singular set and regions), :mod:`fit`
(first stage), :mod:`correct` (second stage and error reports).
"""

from .basis import BSplineBasis, ChebyshevBasis, TensorBasis
from .correct import CorrectionOperator, corrected, error_report
from .detect import RegionLabeling, detect_regions
from .errors import (
    ConfigurationError,
    DetectionError,
    DomainError,
    RefinementWarning,
    SigfitError,
    SizeError,
    SolverError,
)
from .fit import PiecewiseApproximant, first_stage
from .grid import GridFunction, GridSpec, get_test_function, sample
from .signature import SignatureSpec, apply_signature

__version__ = "0.1.0"
