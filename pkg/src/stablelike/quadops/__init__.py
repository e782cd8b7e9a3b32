"""Quadrature for the operator and its coupling operator, drift profiles and assumption checks."""

from .checks import (AssumptionReport, check_assumptions, lemma33_check, sample_bounds,
                     scalar_inequality_suite)
from .drift import DriftError, DriftReport, default_smoothing_index, drift_profile
from .operators import apply_coupling_operator, apply_generator, compensator_drift, h4_integral
from .scheme import QuadratureError, QuadratureScheme, QuadResult
from .testfunctions import TestFunction, TestFunctionError, build_test_function

__all__ = [
    "AssumptionReport", "check_assumptions", "lemma33_check", "sample_bounds",
    "scalar_inequality_suite", "DriftError", "DriftReport", "default_smoothing_index",
    "drift_profile", "apply_coupling_operator", "apply_generator", "compensator_drift",
    "h4_integral", "QuadratureError", "QuadratureScheme", "QuadResult", "TestFunction",
    "TestFunctionError", "build_test_function",
]
