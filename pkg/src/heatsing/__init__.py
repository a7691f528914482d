"""Numerical laboratory for the heat equation with time-weighted absorption."""

from .model import (
    AbsorptionParams,
    SimilarityTransform,
    absorption_flow,
    c_alpha,
    critical_exponent,
    flat_exact_solution,
    heat_kernel,
    kernel_power_integral,
    similarity_apply,
)

__version__ = "0.1.0"
