"""Modified Bessel functions of the second kind (log domain), Bessel
ratios, and the generalized inverse Gaussian density and moments.

These are the scalar primitives under every E-step. Two interchangeable
kernel backends exist (see ``psalm._backend``); the functions here
validate arguments and dispatch.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import ACTIVE, active_backend
from .errors import DomainError

if ACTIVE == "numba":
    from . import _kernels_numba as _K
else:
    from . import _kernels_numpy as _K

__all__ = [
    "GigParams",
    "log_bessel_k",
    "bessel_ratio",
    "gig_log_density",
    "gig_moments",
    "active_backend",
]


@dataclass(frozen=True)
class GigParams:
    """Parameters (a, b, nu) of the generalized inverse Gaussian law.

    Density proportional to x^{nu-1} exp{-(a x + b / x) / 2} on (0, inf).
    Requires a > 0 and b > 0 strictly; callers that can produce b = 0
    must regularize before constructing one of these.
    """

    a: float
    b: float
    nu: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise DomainError(f"GIG parameter a must be finite and > 0, got {self.a}")
        if not (math.isfinite(self.b) and self.b > 0.0):
            raise DomainError(f"GIG parameter b must be finite and > 0, got {self.b}")
        if not math.isfinite(self.nu):
            raise DomainError(f"GIG order nu must be finite, got {self.nu}")


def _check_nu_z(nu, z):
    nu = float(nu)
    if not math.isfinite(nu):
        raise DomainError(f"order nu must be finite, got {nu}")
    zarr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(zarr)):
        raise DomainError("argument z must be finite")
    if not np.all(zarr > 0.0):
        raise DomainError("argument z must be > 0")
    return nu, zarr


def log_bessel_k(nu, z):
    """ln K_nu(z) for real order nu and z > 0.

    Symmetric in the order (K_nu = K_{-nu}) and safe over the whole
    range used by the mixture code: the value is returned in the log
    domain, so neither the overflow of K near z = 0 nor the e^{-z}
    decay for large z loses accuracy.
    """
    nu, zarr = _check_nu_z(nu, z)
    if zarr.ndim == 0:
        return _K.log_kv_scalar(nu, float(zarr))
    return _K.log_kv_arr(nu, zarr.ravel()).reshape(zarr.shape)


def bessel_ratio(nu, z):
    """R_nu(z) = K_{nu+1}(z) / K_nu(z), evaluated via log differences."""
    nu, zarr = _check_nu_z(nu, z)
    if zarr.ndim == 0:
        return math.exp(
            _K.log_kv_scalar(nu + 1.0, float(zarr)) - _K.log_kv_scalar(nu, float(zarr))
        )
    return _K.kv_ratio_arr(nu, zarr.ravel()).reshape(zarr.shape)


def gig_log_density(x, params: GigParams):
    """Log density of GIG(a, b, nu) at x > 0."""
    a, b, nu = params.a, params.b, params.nu
    xarr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xarr)) or not np.all(xarr > 0.0):
        raise DomainError("GIG density is supported on x > 0")
    lognorm = 0.5 * nu * (math.log(a) - math.log(b)) - math.log(2.0) \
        - log_bessel_k(nu, math.sqrt(a * b))
    out = lognorm + (nu - 1.0) * np.log(xarr) - 0.5 * (a * xarr + b / xarr)
    return float(out) if xarr.ndim == 0 else out


def gig_moments(params: GigParams):
    """(E[X], E[1/X]) for X ~ GIG(a, b, nu)."""
    a, b, nu = params.a, params.b, params.nu
    r = bessel_ratio(nu, math.sqrt(a * b))
    mean = math.sqrt(b / a) * r
    inv_mean = math.sqrt(a / b) * r - 2.0 * nu / b
    return mean, inv_mean


def _component_expectations(b, shift, a, nu, psi, cnst):
    """Backend pass-through used by the SAL density / E-step code."""
    return _K.component_expectations(b, shift, a, nu, psi, cnst)
