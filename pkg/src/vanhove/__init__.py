"""Numerical evaluation and cross-checks of the van Hove model."""

from .errors import (DivergentIntegral, InvalidArgument, IrDivergent, NonPsdCovariance,
                     NumericFailure, UndefinedHatAtZero, Unsupported, UvDivergent, VanHoveError)
from .model import (Dispersion, DomClass, GaussianBump, LogCounterexample, PolynomialWindow,
                    ShellIndicator, SourceModel, TestFunction, cocycle_m, dom_check, inner_product,
                    l2_norm_sq, mean_functional, mean_functional_real)
from .numerics import QuadratureConfig
from .states import QuasiFreeState, ThermalParams

__version__ = "0.1.0"

__all__ = [
    "DivergentIntegral", "InvalidArgument", "IrDivergent", "NonPsdCovariance", "NumericFailure",
    "UndefinedHatAtZero", "Unsupported", "UvDivergent", "VanHoveError",
    "Dispersion", "DomClass", "GaussianBump", "LogCounterexample", "PolynomialWindow", "ShellIndicator",
    "SourceModel", "TestFunction", "cocycle_m", "dom_check", "inner_product", "l2_norm_sq",
    "mean_functional", "mean_functional_real", "QuadratureConfig", "QuasiFreeState", "ThermalParams",
]
