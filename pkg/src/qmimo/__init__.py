"""Linearized models of quantized MIMO transceivers, with Monte Carlo validation."""

from .linearize import LinearModel, estimate_linear_model
from .quantizer import QuantizerSpec, optimize_step, quantize, quantizer_mse
from .randcore import RngStream, sample_complex_gaussian, sample_haar_unitary
from .rate import rate_lower_bound, shannon_capacity
from .spectro import SubbandPlan, aclr, power_fractions, spectral_covariances

__version__ = "0.1.0"

__all__ = [
    "LinearModel",
    "QuantizerSpec",
    "RngStream",
    "SubbandPlan",
    "aclr",
    "estimate_linear_model",
    "optimize_step",
    "power_fractions",
    "quantize",
    "quantizer_mse",
    "rate_lower_bound",
    "sample_complex_gaussian",
    "sample_haar_unitary",
    "shannon_capacity",
    "spectral_covariances",
]
