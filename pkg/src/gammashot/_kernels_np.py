"""Pure-numpy implementations of the hot numeric kernels.

These are the reference implementations; `gammashot.backend` swaps in the
numba-compiled twins from `_kernels_nb` unless GAMMASHOT_DISABLE_NUMBA is set.
All functions are deterministic (no RNG) so the two backends agree to
floating-point noise.
"""

import numpy as np
from scipy.special import erf, gammaln

LOG_TWO_PI = float(np.log(2.0 * np.pi))

# Relative truncation tolerance of the noncentral-gamma mixture series.
SERIES_RTOL = 1e-14


def _series_zmax(y, delta, beta, c):
    """Upper summation bound for the Poisson-mixture series.

    The product term peaks near z* with (z*+1)(delta+z*) = beta*y/c, and never
    later than the Poisson mode beta; 12 standard deviations past the larger of
    the two plus a constant slack keeps the omitted tail below SERIES_RTOL.
    """
    peak = np.sqrt(np.maximum(beta * y / c, 0.0))
    hi = np.maximum(peak, beta)
    return int(np.ceil(np.max(hi + 12.0 * np.sqrt(hi + 1.0) + 40.0)))


def ncg_logpdf(y, delta, beta, c):
    """Log density/mass of the noncentral gamma law at y (elementwise).

    Parameters follow the Poisson-mixture construction: Z ~ Poisson(beta),
    Y | Z ~ Gamma(delta + Z, rate 1/c); delta = 0 makes the z = 0 component a
    point mass at zero, whose log mass (-beta) is returned at y = 0.
    """
    y, delta, beta, c = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (y, delta, beta, c))
    )
    shape = y.shape
    y = y.ravel()
    delta = delta.ravel()
    beta = beta.ravel()
    c = c.ravel()
    out = np.empty(y.shape, dtype=float)

    at_zero = y == 0.0
    if np.any(at_zero):
        d0 = delta[at_zero]
        b0 = beta[at_zero]
        c0 = c[at_zero]
        res = np.where(d0 == 0.0, -b0, np.nan)
        res = np.where((d0 > 0.0) & (d0 < 1.0), np.inf, res)
        res = np.where(d0 == 1.0, -b0 - np.log(c0), res)
        res = np.where(d0 > 1.0, -np.inf, res)
        out[at_zero] = res

    pos = ~at_zero
    if np.any(pos):
        out[pos] = _ncg_logpdf_pos(y[pos], delta[pos], beta[pos], c[pos])
    return out.reshape(shape) if shape else float(out[0])


def _ncg_logpdf_pos(y, delta, beta, c):
    out = np.empty(y.shape, dtype=float)

    nob = beta == 0.0
    if np.any(nob):
        d, yy, cc = delta[nob], y[nob], c[nob]
        g = (d - 1.0) * np.log(yy) - yy / cc - gammaln(d) - d * np.log(cc)
        out[nob] = np.where(d == 0.0, -np.inf, g)

    mix = ~nob
    if np.any(mix):
        yy, d, b, cc = y[mix], delta[mix], beta[mix], c[mix]
        zmax = _series_zmax(yy, d, b, cc)
        z = np.arange(zmax + 1, dtype=float)
        dz = d[:, None] + z[None, :]
        terms = (
            -b[:, None]
            + z[None, :] * np.log(b[:, None])
            - gammaln(z + 1.0)[None, :]
            + (dz - 1.0) * np.log(yy[:, None])
            - (yy / cc)[:, None]
            - gammaln(dz)
            - dz * np.log(cc[:, None])
        )
        # the z = 0 component of a delta = 0 mixture is the atom, not a density
        terms[:, 0] = np.where(d == 0.0, -np.inf, terms[:, 0])
        m = np.max(terms, axis=1)
        out[mix] = m + np.log(np.sum(np.exp(terms - m[:, None]), axis=1))
    return out


def gauss_log_kernel(points, centers, phi):
    """(n, J) matrix of log N2(point | center, phi^2 I)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    d2 = (
        (points[:, 0][:, None] - centers[:, 0][None, :]) ** 2
        + (points[:, 1][:, None] - centers[:, 1][None, :]) ** 2
    )
    return -d2 / (2.0 * phi * phi) - LOG_TWO_PI - 2.0 * np.log(phi)


def rect_mass(centers, x0, x1, y0, y1, phi):
    """Mass of N2(. | center, phi^2 I) on the rectangle [x0,x1] x [y0,y1]."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    s = phi * np.sqrt(2.0)
    mx = 0.5 * (erf((x1 - centers[:, 0]) / s) - erf((x0 - centers[:, 0]) / s))
    my = 0.5 * (erf((y1 - centers[:, 1]) / s) - erf((y0 - centers[:, 1]) / s))
    return mx * my
