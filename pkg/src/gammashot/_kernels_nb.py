"""Numba-compiled twins of the kernels in `_kernels_np`.

The noncentral-gamma series is evaluated by a mode-centred expansion: start at
z* = floor(beta), walk outward in both directions, and stop a direction once
its terms are falling and below SERIES_RTOL of the running sum (the terms are
log-concave in z, so they rise at most once).
"""

import math

import numpy as np
from numba import njit

LOG_TWO_PI = math.log(2.0 * math.pi)
_LOG_RTOL = math.log(1e-14)


@njit(cache=True)
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    m = a if a > b else b
    return m + math.log(math.exp(a - m) + math.exp(b - m))


@njit(cache=True)
def _series_term(z, y, delta, beta, c):
    dz = delta + z
    return (
        -beta
        + z * math.log(beta)
        - math.lgamma(z + 1.0)
        + (dz - 1.0) * math.log(y)
        - y / c
        - math.lgamma(dz)
        - dz * math.log(c)
    )


@njit(cache=True)
def ncg_logpdf_scalar(y, delta, beta, c):
    if y == 0.0:
        if delta == 0.0:
            return -beta
        if delta < 1.0:
            return np.inf
        if delta == 1.0:
            return -beta - math.log(c)
        return -np.inf
    if beta == 0.0:
        if delta == 0.0:
            return -np.inf
        return (delta - 1.0) * math.log(y) - y / c - math.lgamma(delta) - delta * math.log(c)

    zlo = 0 if delta > 0.0 else 1
    zstar = int(beta)
    if zstar < zlo:
        zstar = zlo
    total = _series_term(float(zstar), y, delta, beta, c)

    prev = total
    z = zstar + 1
    while True:
        t = _series_term(float(z), y, delta, beta, c)
        total = _logaddexp(total, t)
        if t < prev and t < total + _LOG_RTOL:
            break
        prev = t
        z += 1

    prev = np.inf
    z = zstar - 1
    while z >= zlo:
        t = _series_term(float(z), y, delta, beta, c)
        total = _logaddexp(total, t)
        if t < prev and t < total + _LOG_RTOL:
            break
        prev = t
        z -= 1
    return total


@njit(cache=True)
def _ncg_logpdf_flat(y, delta, beta, c, out):
    for i in range(y.shape[0]):
        out[i] = ncg_logpdf_scalar(y[i], delta[i], beta[i], c[i])


def _flat(a):
    a = a.ravel()
    if not (a.flags.c_contiguous and a.flags.writeable):
        a = a.copy()
    return a


def ncg_logpdf(y, delta, beta, c):
    """Log density/mass of the noncentral gamma law at y (elementwise)."""
    y, delta, beta, c = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (y, delta, beta, c))
    )
    shape = y.shape
    out = np.empty(y.size, dtype=float)
    _ncg_logpdf_flat(_flat(y), _flat(delta), _flat(beta), _flat(c), out)
    return out.reshape(shape) if shape else float(out[0])


@njit(cache=True)
def _gauss_log_kernel_impl(points, centers, phi, out):
    lognorm = -LOG_TWO_PI - 2.0 * math.log(phi)
    inv = 1.0 / (2.0 * phi * phi)
    for i in range(points.shape[0]):
        for j in range(centers.shape[0]):
            dx = points[i, 0] - centers[j, 0]
            dy = points[i, 1] - centers[j, 1]
            out[i, j] = -(dx * dx + dy * dy) * inv + lognorm


def gauss_log_kernel(points, centers, phi):
    """(n, J) matrix of log N2(point | center, phi^2 I)."""
    points = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    centers = np.ascontiguousarray(np.atleast_2d(np.asarray(centers, dtype=float)))
    out = np.empty((points.shape[0], centers.shape[0]), dtype=float)
    _gauss_log_kernel_impl(points, centers, float(phi), out)
    return out


@njit(cache=True)
def _rect_mass_impl(centers, x0, x1, y0, y1, phi, out):
    s = phi * math.sqrt(2.0)
    for j in range(centers.shape[0]):
        mx = 0.5 * (math.erf((x1 - centers[j, 0]) / s) - math.erf((x0 - centers[j, 0]) / s))
        my = 0.5 * (math.erf((y1 - centers[j, 1]) / s) - math.erf((y0 - centers[j, 1]) / s))
        out[j] = mx * my


def rect_mass(centers, x0, x1, y0, y1, phi):
    """Mass of N2(. | center, phi^2 I) on the rectangle [x0,x1] x [y0,y1]."""
    centers = np.ascontiguousarray(np.atleast_2d(np.asarray(centers, dtype=float)))
    out = np.empty(centers.shape[0], dtype=float)
    _rect_mass_impl(centers, float(x0), float(x1), float(y0), float(y1), float(phi), out)
    return out
