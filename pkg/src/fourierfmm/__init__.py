"""Fourier-basis multilevel FMM for the 3D Helmholtz kernel exp(i kappa r) / r."""

from .engine import CoincidentPointsError, FmmPlan, make_plan, run_fmm
from .octree import Octree, build_tree
from .oracle import ErrorTriple, direct_sum, single_pair_error
from .quadrature import QuadratureSpec, SphereQuadrature, build_quadrature
from .series import (KernelGeometry, LowFrequencyBreakdownWarning, TruncationChoice,
                     choose_ell, transfer_function)
from .spherefft import SphericalField, resample_field, resample_values
from .xfer import CanonicalTransferSet, build_bandlimited_transfer

__all__ = [
    "CanonicalTransferSet", "CoincidentPointsError", "ErrorTriple", "FmmPlan",
    "KernelGeometry", "LowFrequencyBreakdownWarning", "Octree", "QuadratureSpec",
    "SphereQuadrature", "SphericalField", "TruncationChoice", "build_bandlimited_transfer",
    "build_quadrature", "build_tree", "choose_ell", "direct_sum", "make_plan",
    "resample_field", "resample_values", "run_fmm", "single_pair_error", "transfer_function",
]

__version__ = "0.1.0"
