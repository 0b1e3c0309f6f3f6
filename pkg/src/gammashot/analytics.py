"""Closed-form moment, correlation, and diagnostic formulas.

First/second-order statistics of the latent weights and of the observed
counts, the cross-pair correlation function, stationary higher-order count
moments, and the fit/uncertainty diagnostics. Everything here is a pure
function of parameters; the test suite validates each formula against Monte
Carlo simulation of the corresponding process.
"""

from dataclasses import dataclass
from math import gamma as _gamma_fn

import numpy as np

from . import backend
from .errors import (
    InvalidParameterError,
    UndefinedIqrError,
    UndefinedRatioError,
    UnsupportedOrderError,
    UnsupportedRegimeError,
)
from .latent import lag_params

__all__ = [
    "ObsModel",
    "MomentReport",
    "init_moments",
    "w_mean",
    "w_cov",
    "intensity_d1",
    "product_density_d2",
    "pair_correlation",
    "count_mean",
    "count_cov",
    "count_moment",
    "stirling2",
    "fit_diagnostics",
    "cv_field",
    "iqr_norm",
]


@dataclass(frozen=True)
class ObsModel:
    """Observation-side inputs to the count statistics: kernel bandwidth,
    per-step global factors kappa_1..T, and the law of w_1 ("stationary" or a
    fixed weight vector)."""

    phi: float
    kappas: np.ndarray
    w1_law: object = "stationary"

    def __post_init__(self):
        object.__setattr__(self, "kappas", np.atleast_1d(np.asarray(self.kappas, dtype=float)))

    def kappa(self, t):
        if not 1 <= t <= self.kappas.shape[0]:
            raise IndexError(f"t = {t} outside 1..{self.kappas.shape[0]}")
        return float(self.kappas[t - 1])


@dataclass
class MomentReport:
    """One closed-form-vs-Monte-Carlo comparison record."""

    target: str
    region: object
    t: int
    h: int
    order: int
    closed_form: float
    mc_estimate: float = None
    mc_se: float = None

    def __post_init__(self):
        if not np.isfinite(self.closed_form):
            raise InvalidParameterError("closed_form must be finite")
        if self.mc_estimate is not None and not (self.mc_se and self.mc_se > 0.0):
            raise InvalidParameterError("mc_se must be > 0 when mc_estimate is present")


def init_moments(params, w1_law):
    """Per-cell mean and variance of w_1 under the given initial law.

    Cells are independent under both supported laws, so these two vectors
    carry the full second-order structure of W_1.
    """
    if isinstance(w1_law, str):
        if w1_law != "stationary":
            raise InvalidParameterError(f"unknown initial law {w1_law!r}")
        if params.scales.kind != "constant":
            raise UnsupportedRegimeError("stationary law needs a constant scale")
        c = params.scales.scale_at(1)
        rho = params.beta * c
        if rho >= 1.0:
            raise UnsupportedRegimeError("stationary law needs rho < 1")
        alpha = params.grid.masses
        return alpha * c / (1.0 - rho), alpha * (c / (1.0 - rho)) ** 2
    w1 = np.asarray(w1_law, dtype=float)
    return w1, np.zeros_like(w1)


def w_mean(g, t, params, w1_mean):
    """E(sum_j g_j w_{j,t}) given the mean of w_1 (conventions c_{1|1} = 0,
    rho_{1|1} = 1)."""
    g = np.asarray(g, dtype=float)
    rho1, c1, _ = lag_params(1, t - 1, params)
    return float(c1 * g @ params.grid.masses + rho1 * g @ np.asarray(w1_mean, dtype=float))


def w_cov(g1, g2, t, h, params, w1_law="stationary"):
    """cov(sum g1_j w_{j,t}, sum g2_j w_{j,t+h}) for h >= 0."""
    if h < 0:
        raise IndexError("h must be >= 0")
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    m1, v1 = init_moments(params, w1_law)
    rho1, c1, _ = lag_params(1, t - 1, params)
    alpha = params.grid.masses
    g12 = g1 * g2
    cov_tt = (
        c1 * c1 * g12 @ alpha + 2.0 * rho1 * c1 * g12 @ m1 + rho1 * rho1 * g12 @ v1
    )
    if h == 0:
        return float(cov_tt)
    rho_h, _, _ = lag_params(t, h, params)
    return float(rho_h * cov_tt)


def _kernel_at(points, grid, phi):
    return np.exp(backend.gauss_log_kernel(points, grid.atoms, phi))


def intensity_d1(y, t, params, obs):
    """First-order intensity of the counts at location(s) y and time t."""
    m1, _ = init_moments(params, obs.w1_law)
    rho1, c1, _ = lag_params(1, t - 1, params)
    k = _kernel_at(y, params.grid, obs.phi)
    out = obs.kappa(t) * (c1 * k @ params.grid.masses + rho1 * k @ m1)
    return float(out[0]) if out.size == 1 else out


def product_density_d2(y1, y2, t, h, params, obs):
    """Second-order product density of counts at (y1, t) and (y2, t + h);
    h = 0 gives the within-time product density."""
    if h < 0:
        raise IndexError("h must be >= 0")
    m1, v1 = init_moments(params, obs.w1_law)
    rho1, c1, _ = lag_params(1, t - 1, params)
    grid = params.grid
    k1 = _kernel_at(y1, grid, obs.phi).ravel()
    k2 = _kernel_at(y2, grid, obs.phi).ravel()
    kap_t = obs.kappa(t)
    d1_y1 = kap_t * (c1 * k1 @ grid.masses + rho1 * k1 @ m1)
    d1_y2 = kap_t * (c1 * k2 @ grid.masses + rho1 * k2 @ m1)
    k12 = k1 * k2
    cov_w = c1 * c1 * k12 @ grid.masses + 2.0 * rho1 * c1 * k12 @ m1 + rho1 * rho1 * k12 @ v1
    d2_tt = d1_y1 * d1_y2 + kap_t * kap_t * cov_w
    if h == 0:
        return float(d2_tt)
    rho_h, c_h, _ = lag_params(t, h, params)
    kap_th = obs.kappa(t + h)
    return float(
        (kap_th / kap_t) * rho_h * d2_tt + d1_y1 * kap_th * c_h * k2 @ grid.masses
    )


def pair_correlation(y1, y2, t, h, params, obs):
    """Cross-pair correlation R_{t,t+h}(y1, y2) = D2 / (D1(y1) D1(y2))."""
    d1a = intensity_d1(y1, t, params, obs)
    d1b = intensity_d1(y2, t + h, params, obs)
    if d1a <= 0.0 or d1b <= 0.0:
        raise UndefinedRatioError("pair correlation undefined where the intensity vanishes")
    return product_density_d2(y1, y2, t, h, params, obs) / (d1a * d1b)


def _region_masses(B, grid, phi):
    """Kernel masses K_phi(B intersect window, theta_j); the reference measure
    lives on the window, so regions are clipped to it."""
    clipped = B.intersect(grid.window)
    if clipped is None:
        return np.zeros(grid.n_cells)
    return backend.rect_mass(grid.atoms, clipped.x0, clipped.x1, clipped.y0, clipped.y1, phi)


def count_mean(B, t, params, obs):
    """E N_t(B) for an axis-aligned rectangle B."""
    m1, _ = init_moments(params, obs.w1_law)
    rho1, c1, _ = lag_params(1, t - 1, params)
    mb = _region_masses(B, params.grid, obs.phi)
    return float(obs.kappa(t) * (c1 * mb @ params.grid.masses + rho1 * mb @ m1))


def count_cov(B1, B2, t, h, params, obs):
    """cov(N_t(B1), N_{t+h}(B2)) for axis-aligned rectangles, h >= 0; the
    h = 0 overlap term uses the exact rectangle intersection."""
    if h < 0:
        raise IndexError("h must be >= 0")
    grid = params.grid
    m1, v1 = init_moments(params, obs.w1_law)
    rho1, c1, _ = lag_params(1, t - 1, params)
    rho_h, _, _ = lag_params(t, h, params)
    kap_t = obs.kappa(t)
    kap_th = obs.kappa(t + h)
    mb1 = _region_masses(B1, grid, obs.phi)
    mb2 = _region_masses(B2, grid, obs.phi)
    m12 = mb1 * mb2
    smooth = (
        c1 * c1 * m12 @ grid.masses + 2.0 * rho1 * c1 * m12 @ m1 + rho1 * rho1 * m12 @ v1
    )
    out = kap_t * kap_th * rho_h * smooth
    if h == 0:
        inter = B1.intersect(B2)
        if inter is not None:
            mbi = _region_masses(inter, grid, obs.phi)
            out += kap_t * (c1 * mbi @ grid.masses + rho1 * mbi @ m1)
    return float(out)


def stirling2(m, j):
    """Stirling number of the second kind S(m, j) for 0 <= j <= m <= 6."""
    if not (0 <= j <= m <= 6):
        raise UnsupportedOrderError(f"stirling2 requires 0 <= j <= m <= 6, got ({m}, {j})")
    table = np.zeros((m + 1, j + 1), dtype=np.int64)
    table[0, 0] = 1
    for mm in range(1, m + 1):
        for jj in range(1, min(mm, j) + 1):
            table[mm, jj] = jj * table[mm - 1, jj] + table[mm - 1, jj - 1]
    return int(table[m, j])


def _integer_partitions(j):
    """Multiplicity vectors (l_1..l_j) with sum_r r * l_r = j."""
    out = []

    def rec(remaining, max_part, counts):
        if remaining == 0:
            out.append(tuple(counts))
            return
        for r in range(min(max_part, remaining), 0, -1):
            counts[r - 1] += 1
            rec(remaining - r, r, counts)
            counts[r - 1] -= 1

    rec(j, j, [0] * j)
    return out


def count_moment(B, m, t, params, obs):
    """Stationary m-th raw moment of N_t(B), m <= 6.

    Uses J_r(B) = Gamma(r) c^r (1-rho)^{-r} sum_j alpha_j K_phi(B, theta_j)^r
    and the Stirling/partition expansion of the Poisson moments.
    """
    if m > 6 or m < 1:
        raise UnsupportedOrderError("moment order must be in 1..6")
    if params.scales.kind != "constant" or not isinstance(obs.w1_law, str):
        raise UnsupportedRegimeError("count_moment needs the stationary regime")
    c = params.scales.scale_at(1)
    rho = params.beta * c
    if rho >= 1.0:
        raise UnsupportedRegimeError("count_moment needs rho < 1")
    mb = _region_masses(B, params.grid, obs.phi)
    alpha = params.grid.masses
    J = {
        r: _gamma_fn(r) * (c / (1.0 - rho)) ** r * float(alpha @ mb**r)
        for r in range(1, m + 1)
    }
    kap = obs.kappa(t)
    total = 0.0
    for j in range(1, m + 1):
        inner = 0.0
        # partition coefficient c(l) = j! / prod_r (r!)^{l_r} l_r!
        for counts in _integer_partitions(j):
            coef = _factorial(j)
            prod = 1.0
            for r, lr in enumerate(counts, start=1):
                if lr:
                    coef /= _factorial(r) ** lr * _factorial(lr)
                    prod *= J[r] ** lr
            inner += coef * prod
        total += stirling2(m, j) * kap**j * inner
    return float(total)


def _factorial(n):
    out = 1
    for k in range(2, n + 1):
        out *= k
    return float(out)


def fit_diagnostics(counts, fitted):
    """(MSE, MAE) of a fitted intensity series against observed counts."""
    counts = np.asarray(counts, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    if counts.shape != fitted.shape:
        raise InvalidParameterError("series must have equal length")
    err = fitted - counts
    return float(np.mean(err**2)), float(np.mean(np.abs(err)))


def cv_field(draws):
    """Coefficient of variation (posterior sd / posterior mean) of draws."""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise InvalidParameterError("draws must be nonempty")
    mean = draws.mean()
    if mean == 0.0:
        raise UndefinedRatioError("coefficient of variation undefined at zero mean")
    if draws.size == 1 or np.ptp(draws) == 0.0:
        return 0.0
    return float(draws.std(ddof=1) / mean)


def iqr_norm(draws):
    """Normalised interquantile range (q97.5 - q2.5) / q50 with type-7
    (linear-interpolation) quantiles."""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise InvalidParameterError("draws must be nonempty")
    q025, q50, q975 = np.quantile(draws, [0.025, 0.5, 0.975])
    if q50 == 0.0:
        raise UndefinedIqrError("normalised IQR undefined at zero median")
    return float((q975 - q025) / q50)
