"""Traveling fronts and pulses of the FitzHugh-Nagumo system.

The package computes traveling waves of

    u_t = u_xx + (f(u) - v) / d,      v_t = v_xx + u - gamma v,

with f(u) = u(u-beta)(1-u), by constrained variational minimization in an
exponentially weighted space, refines them as boundary value problems, and
cross-validates the speeds against direct time integration.
"""

from .model import (
    CubicNonlinearity,
    DerivedConstants,
    ModelParams,
    RegimeReport,
    SpectralData,
    classify_regime,
    derive_constants,
    energy_level,
    reversed_transform,
    spectral_data,
)

__version__ = "0.1.0"

__all__ = [
    "CubicNonlinearity",
    "DerivedConstants",
    "ModelParams",
    "RegimeReport",
    "SpectralData",
    "classify_regime",
    "derive_constants",
    "energy_level",
    "reversed_transform",
    "spectral_data",
    "__version__",
]
