"""Numerical laboratory for the weighted semilinear fractional Laplace equation.

Modules: :mod:`~fraclap.core` (parameters and fields), :mod:`~fraclap.kernels`
(Riesz and ball Green's kernels), :mod:`~fraclap.operator` (the operator by
quadrature and by Fourier symbol), :mod:`~fraclap.kelvin_mp` (Kelvin
transform and moving planes), :mod:`~fraclap.bootstrap` (exact exponent
certificates) and :mod:`~fraclap.cli`.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ConfigInvalid,
    CriticalExponent,
    FraclapError,
    GridField,
    Params,
    ProfileSpec,
    Variant,
    critical_exponent,
    subcritical_check,
)

__all__ = [
    "ConfigInvalid",
    "CriticalExponent",
    "FraclapError",
    "GridField",
    "Params",
    "ProfileSpec",
    "Variant",
    "critical_exponent",
    "subcritical_check",
    "__version__",
]
