"""Estimation of population spectral statistics from sample covariance
eigenvalues by Marchenko-Pastur inversion."""

import os as _os

# MPINV_THREADS caps BLAS threads; it must be applied before numpy loads.
_threads = _os.environ.get("MPINV_THREADS", "0").strip()
if _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .errors import (
    ConfigurationError,
    DomainError,
    EstimationError,
    IterationError,
    MpinvError,
    SignedMeasureError,
    SingularityError,
)
from .fixed_point import FixedPointConfig
from .measures import DiscreteMeasure, stieltjes, underline_stieltjes
from .mp_forward import ForwardModel, solve_mp
from .mp_inverse import SampleSpectrum, estimate_stieltjes
from .domain import DomainConfig, membership, rasterize
from .contours import PolylineCurve, quadrature, rectangle_curve, validate_admissible
from .estimators import HoloFunction, function_from_name, glss_estimate, plss_estimate
from .inference import CltConfig, ci_moments, confidence_interval, gaussian_quantile

__all__ = [
    "CltConfig", "ConfigurationError", "DiscreteMeasure", "DomainConfig", "DomainError", "EstimationError",
    "FixedPointConfig", "ForwardModel", "HoloFunction", "IterationError", "MpinvError", "PolylineCurve",
    "SampleSpectrum", "SignedMeasureError", "SingularityError", "ci_moments", "confidence_interval",
    "estimate_stieltjes", "function_from_name", "gaussian_quantile", "glss_estimate", "membership",
    "plss_estimate", "quadrature", "rasterize", "rectangle_curve", "solve_mp", "stieltjes",
    "underline_stieltjes", "validate_admissible",
]

__version__ = "0.1.0"
