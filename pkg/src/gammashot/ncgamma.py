"""Scalar probability kernels: gamma, Poisson, and the noncentral gamma law.

The noncentral gamma distribution is the Poisson mixture
Z ~ Poisson(beta), Y | Z ~ Gamma(delta + Z, rate 1/c). Throughout the package
it is parametrised by (shape delta, noncentrality beta, scale c); note the
scale convention: a rate-b gamma corresponds to c = 1/b, and this module is the
single conversion point. delta = 0 selects the zero-inflated case, a point
mass of e^{-beta} at zero plus a density on (0, inf).
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import InvalidParameterError

__all__ = [
    "NcGammaParams",
    "sample_gamma",
    "sample_poisson",
    "sample_ncgamma",
    "sample_ncgamma_vec",
    "ncgamma_logpdf",
    "ncgamma_moments",
]


@dataclass(frozen=True)
class NcGammaParams:
    """Noncentral-gamma parameters (shape, noncentrality, scale)."""

    delta: float
    beta: float
    c: float

    def __post_init__(self):
        if not (self.delta >= 0.0 and np.isfinite(self.delta)):
            raise InvalidParameterError(f"delta must be finite and >= 0, got {self.delta}")
        if not (self.beta >= 0.0 and np.isfinite(self.beta)):
            raise InvalidParameterError(f"beta must be finite and >= 0, got {self.beta}")
        if not (self.c > 0.0 and np.isfinite(self.c)):
            raise InvalidParameterError(f"c must be finite and > 0, got {self.c}")


def sample_gamma(shape, rate, rng):
    """One draw from Gamma(shape, rate) (shape-rate parametrisation)."""
    if not shape > 0.0:
        raise InvalidParameterError(f"shape must be > 0, got {shape}")
    if not rate > 0.0:
        raise InvalidParameterError(f"rate must be > 0, got {rate}")
    return rng.gamma(shape, 1.0 / rate)


def sample_poisson(mean, rng):
    """One Poisson draw; mean 0 returns 0 deterministically."""
    if not mean >= 0.0:
        raise InvalidParameterError(f"mean must be >= 0, got {mean}")
    if mean == 0.0:
        return 0
    return int(rng.poisson(mean))


def sample_ncgamma(p, rng):
    """One noncentral-gamma draw; exactly 0 when delta = 0 and Z = 0."""
    z = sample_poisson(p.beta, rng)
    a = p.delta + z
    if a == 0.0:
        return 0.0
    return rng.gamma(a, p.c)


def sample_ncgamma_vec(delta, beta, c, rng):
    """Vectorised noncentral-gamma draws, one per element.

    Elements with delta + Z = 0 are exactly zero. Draw order is fixed
    (element index), so results are reproducible for a given generator state.
    """
    delta, beta, c = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (delta, beta, c))
    )
    z = rng.poisson(beta)
    a = delta + z
    out = rng.gamma(a, c)  # numpy returns exactly 0.0 at zero shape
    return np.where(a > 0.0, out, 0.0)


def ncgamma_logpdf(y, p):
    """Log density at y > 0; for delta = 0, y = 0 the log of the atom mass.

    Boundary values at y = 0 with delta > 0 are the mathematically correct
    density limits: +inf for delta < 1, log(e^{-beta}/c) for delta = 1, and
    -inf for delta > 1.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0.0):
        raise InvalidParameterError("y must be >= 0")
    return backend.ncg_logpdf(y_arr, p.delta, p.beta, p.c)


def ncgamma_moments(p):
    """(mean, variance) = (c(delta + beta), c^2(delta + 2 beta))."""
    return p.c * (p.delta + p.beta), p.c * p.c * (p.delta + 2.0 * p.beta)
