"""Measure-valued autoregressive gamma dynamics on a gridded base measure.

A latent path is a (T, J) array of nonnegative cell weights w[t, j]; row 0 is
time 1 (time indices in the public API are 1-based, mirroring the model's
convention). Two equivalent forward constructions are provided: the
Poisson/gamma state-space recursion and the thinning-plus-innovation form.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidParameterError,
    StationarityError,
    UnsupportedRegimeError,
)
from .ncgamma import NcGammaParams, sample_ncgamma_vec

__all__ = [
    "Rect",
    "Grid",
    "ScaleRegime",
    "MargParams",
    "substream",
    "lag_params_seq",
    "lag_params",
    "simulate_statespace",
    "simulate_thinning",
    "stationary_init",
    "conditional_mean",
    "laplace_functional_exact",
    "laplace_functional_mc",
]


def substream(seed, *key):
    """Derive an independent generator from an integer seed and an index key.

    Streams for distinct keys are independent and reproducible regardless of
    the order (or parallel schedule) in which they are consumed.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InvalidParameterError("rectangle must have positive extent")

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (
            (pts[:, 0] >= self.x0)
            & (pts[:, 0] <= self.x1)
            & (pts[:, 1] >= self.y0)
            & (pts[:, 1] <= self.y1)
        )

    def intersect(self, other):
        x0, x1 = max(self.x0, other.x0), min(self.x1, other.x1)
        y0, y1 = max(self.y0, other.y0), min(self.y1, other.y1)
        if x1 <= x0 or y1 <= y0:
            return None
        return Rect(x0, x1, y0, y1)


@dataclass(frozen=True)
class Grid:
    """Tessellated window: nx * ny cells with centers `atoms` and base-measure
    masses `masses` (one mass per cell, all >= 0, at least one positive)."""

    window: Rect
    nx: int
    ny: int
    atoms: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)

    def __post_init__(self):
        atoms = np.ascontiguousarray(np.asarray(self.atoms, dtype=float))
        masses = np.ascontiguousarray(np.asarray(self.masses, dtype=float))
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "masses", masses)
        if self.nx < 1 or self.ny < 1:
            raise InvalidParameterError("nx and ny must be positive")
        if atoms.shape != (self.nx * self.ny, 2):
            raise InvalidParameterError("atoms must have shape (nx*ny, 2)")
        if masses.shape != (self.nx * self.ny,):
            raise InvalidParameterError("masses must have shape (nx*ny,)")
        if not np.all(np.isfinite(masses)) or np.any(masses < 0.0):
            raise InvalidParameterError("masses must be finite and >= 0")
        if not np.any(masses > 0.0):
            raise InvalidParameterError("at least one mass must be positive")
        if not bool(np.all(self.window.contains(atoms))):
            raise InvalidParameterError("every atom must lie inside the window")

    @classmethod
    def regular(cls, window, nx, ny, masses=None):
        """Regular nx-by-ny tessellation of `window` with cell-center atoms.

        `masses` may be a scalar (same mass per cell), a full vector, or None
        for Lebesgue-like masses equal to the cell area.
        """
        xs = window.x0 + (np.arange(nx) + 0.5) * (window.x1 - window.x0) / nx
        ys = window.y0 + (np.arange(ny) + 0.5) * (window.y1 - window.y0) / ny
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        atoms = np.column_stack([gx.ravel(), gy.ravel()])
        cell_area = window.area / (nx * ny)
        if masses is None:
            m = np.full(nx * ny, cell_area)
        else:
            m = np.asarray(masses, dtype=float)
            if m.ndim == 0:
                m = np.full(nx * ny, float(m))
        return cls(window=window, nx=nx, ny=ny, atoms=atoms, masses=m)

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def cell_area(self):
        return self.window.area / self.n_cells


@dataclass(frozen=True)
class ScaleRegime:
    """Scale specification: one constant c, per-step values c_1..c_T, or twelve
    month scales xi_1..xi_12 mapped onto steps through `start_month`."""

    kind: str
    values: np.ndarray
    start_month: int = 1

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", values)
        if self.kind not in ("constant", "time_varying", "monthly"):
            raise InvalidParameterError(f"unknown scale regime kind {self.kind!r}")
        if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
            raise InvalidParameterError("all scale values must be finite and > 0")
        if self.kind == "constant" and values.shape != (1,):
            raise InvalidParameterError("constant regime takes a single value")
        if self.kind == "monthly" and values.shape != (12,):
            raise InvalidParameterError("monthly regime takes twelve values")
        if not 1 <= self.start_month <= 12:
            raise InvalidParameterError("start_month must be in 1..12")

    @classmethod
    def constant(cls, c):
        return cls(kind="constant", values=np.array([float(c)]))

    @classmethod
    def time_varying(cls, cs):
        return cls(kind="time_varying", values=np.asarray(cs, dtype=float))

    @classmethod
    def monthly(cls, xis, start_month=1):
        return cls(kind="monthly", values=np.asarray(xis, dtype=float), start_month=start_month)

    def month_index(self, t):
        """Calendar slot k in 1..12 of step t (1-based); with start_month = 1
        this is t mod 12 with slot 12 at t mod 12 = 0."""
        return (self.start_month - 1 + t - 1) % 12 + 1

    def scale_at(self, t):
        """Scale c_t for 1-based time step t."""
        if t < 1:
            raise IndexError(f"time index must be >= 1, got {t}")
        if self.kind == "constant":
            return float(self.values[0])
        if self.kind == "time_varying":
            if t > self.values.shape[0]:
                raise IndexError(f"time index {t} beyond configured horizon")
            return float(self.values[t - 1])
        return float(self.values[self.month_index(t) - 1])

    def scale_path(self, T):
        return np.array([self.scale_at(t) for t in range(1, T + 1)])


@dataclass(frozen=True)
class MargParams:
    """Latent-process parameters: grid base measure, persistence beta (constant
    over time), scale regime, and horizon T."""

    grid: Grid
    beta: float
    scales: ScaleRegime
    T: int

    def __post_init__(self):
        if not (self.beta > 0.0 and np.isfinite(self.beta)):
            raise InvalidParameterError("beta must be finite and > 0")
        if self.T < 1:
            raise InvalidParameterError("T must be >= 1")
        if self.scales.kind == "time_varying" and self.scales.values.shape[0] < self.T:
            raise InvalidParameterError("time-varying regime shorter than horizon")

    def rho_at(self, t):
        return self.beta * self.scales.scale_at(t)

    @property
    def is_stationary(self):
        return self.scales.kind == "constant" and self.rho_at(2) < 1.0


def lag_params_seq(betas, cs, t, h):
    """Lag-h conditional parameters from per-step sequences.

    `betas[s]` and `cs[s]` hold beta_s and c_s for s = t+1..t+h (1-based model
    times; the arrays are indexed with s-1). Returns (rho_lag, c_lag, beta_lag)
    with rho_lag = prod rho_s and c_lag built by the backward recursion
    c_{t+s|t} = c_{t+s} + rho_{t+s} c_{t+s-1|t}; h = 0 returns the within-time
    convention (1, 0, inf).
    """
    if t < 1 or h < 0:
        raise IndexError("require t >= 1 and h >= 0")
    if h == 0:
        return 1.0, 0.0, np.inf
    betas = np.asarray(betas, dtype=float)
    cs = np.asarray(cs, dtype=float)
    if t + h - 1 >= cs.shape[0] or t + h - 1 >= betas.shape[0]:
        raise IndexError("parameter sequences shorter than t + h")
    rho_lag = 1.0
    c_lag = 0.0
    for s in range(t + 1, t + h + 1):
        rho_s = betas[s - 1] * cs[s - 1]
        c_lag = cs[s - 1] + rho_s * c_lag
        rho_lag *= rho_s
    return rho_lag, c_lag, rho_lag / c_lag


def lag_params(t, h, params):
    """Lag-h conditional parameters (rho_lag, c_lag, beta_lag) under `params`."""
    if h >= 1 and t + h > params.T:
        raise IndexError(f"t + h = {t + h} beyond horizon {params.T}")
    cs = params.scales.scale_path(max(t + h, 1))
    betas = np.full_like(cs, params.beta)
    return lag_params_seq(betas, cs, t, h)


def _step(w_prev, alpha, beta, c_next, rng):
    v = rng.poisson(beta * w_prev)
    a = alpha + v
    draw = rng.gamma(a, c_next)
    return np.where(a > 0.0, draw, 0.0)


def simulate_statespace(init, params, rng):
    """Forward path via the auxiliary-Poisson recursion: per cell,
    v ~ Poisson(beta w_t) then w_{t+1} ~ Gamma(alpha_j + v, rate 1/c_{t+1}),
    exactly zero when alpha_j + v = 0. Returns a (T, J) array with row 0 = init.
    """
    init = np.asarray(init, dtype=float)
    grid = params.grid
    if init.shape != (grid.n_cells,) or np.any(init < 0.0):
        raise InvalidParameterError("init must be a nonnegative vector of length n_cells")
    path = np.empty((params.T, grid.n_cells))
    path[0] = init
    for t in range(2, params.T + 1):
        path[t - 1] = _step(path[t - 2], grid.masses, params.beta, params.scales.scale_at(t), rng)
    return path


def simulate_thinning(init, params, rng):
    """Forward path via the thinning representation: surviving mass
    u ~ NcGamma(0, beta w_t, c_{t+1}) plus an independent innovation
    Gamma(alpha_j, rate 1/c_{t+1}). Equal in law to `simulate_statespace`.
    """
    init = np.asarray(init, dtype=float)
    grid = params.grid
    if init.shape != (grid.n_cells,) or np.any(init < 0.0):
        raise InvalidParameterError("init must be a nonnegative vector of length n_cells")
    path = np.empty((params.T, grid.n_cells))
    path[0] = init
    zeros = np.zeros(grid.n_cells)
    for t in range(2, params.T + 1):
        c_next = params.scales.scale_at(t)
        u = sample_ncgamma_vec(zeros, params.beta * path[t - 2], c_next, rng)
        g_draw = rng.gamma(grid.masses, c_next)
        g = np.where(grid.masses > 0.0, g_draw, 0.0)
        path[t - 1] = u + g
    return path


def stationary_init(params, rng):
    """Draw w_1 from the invariant law Gamma(alpha_j, rate (1-rho)/c).

    Requires a constant scale regime with rho = beta c < 1; cells with
    alpha_j = 0 are exactly zero.
    """
    if params.scales.kind != "constant":
        raise UnsupportedRegimeError("stationary initialisation needs a constant scale")
    c = params.scales.scale_at(1)
    rho = params.beta * c
    if rho >= 1.0:
        raise StationarityError(f"rho = beta*c = {rho} >= 1")
    alpha = params.grid.masses
    draw = rng.gamma(alpha, c / (1.0 - rho))
    return np.where(alpha > 0.0, draw, 0.0)


def conditional_mean(w_t, t, h, params):
    """E(w_{t+h} | w_t) per cell: c_lag * alpha_j + rho_lag * w_{t,j}."""
    rho_lag, c_lag, _ = lag_params(t, h, params)
    return c_lag * params.grid.masses + rho_lag * np.asarray(w_t, dtype=float)


def laplace_functional_exact(t, h, w_t, f, params):
    """Closed-form conditional Laplace functional E(exp(-sum_j f_j w_{j,t+h}) | w_t)."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0.0):
        raise InvalidParameterError("f must be >= 0")
    rho_lag, c_lag, _ = lag_params(t, h, params)
    alpha = params.grid.masses
    w_t = np.asarray(w_t, dtype=float)
    expo = np.sum(alpha * np.log1p(c_lag * f)) + np.sum(
        rho_lag * f * w_t / (1.0 + c_lag * f)
    )
    return float(np.exp(-expo))


def laplace_functional_mc(draws, f):
    """Monte Carlo Laplace functional: mean of exp(-sum_j f_j w_j) over rows of
    `draws` (one draw of the weight vector per row). Returns (estimate, se).
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    f = np.asarray(f, dtype=float)
    vals = np.exp(-draws @ f)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.shape[0]))
