"""
pwinterp - interpolation in Paley-Wiener spaces and moment-based control.

This package provides node-sequence diagnostics, band-limited function
evaluation, bandwidth-enlarging multipliers, biorthogonal families, explicit
interpolants, weighted-interpolation checks and minimal-norm controls for
diagonal systems, plus a batch command line.
"""
__version__ = "0.1.0"

from .errors import PWInterpError
from .seqlab import ComplexSequence, DiscreteMeasure, HalfPlane
from .pwcore import PWFunction, synthesize
from .multiplier import BumpMultiplier, build_multiplier
from .biortho import BiorthogonalFamily, GeneratingFunction, biorthogonal_from_S, sinc_family
from .interp import InterpolationProblem, solve_interpolation, verify_interpolant
from .mcphail import WeightedPair, mq_check
from .control import ControlProblem, DiagonalSystem, min_norm_control, simulate

# Export public API
__all__ = [
    "PWInterpError",
    "ComplexSequence",
    "DiscreteMeasure",
    "HalfPlane",
    "PWFunction",
    "synthesize",
    "BumpMultiplier",
    "build_multiplier",
    "BiorthogonalFamily",
    "GeneratingFunction",
    "biorthogonal_from_S",
    "sinc_family",
    "InterpolationProblem",
    "solve_interpolation",
    "verify_interpolant",
    "WeightedPair",
    "mq_check",
    "ControlProblem",
    "DiagonalSystem",
    "min_norm_control",
    "simulate",
]
