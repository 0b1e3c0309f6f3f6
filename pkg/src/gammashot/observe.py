"""Shot-noise Cox observation layer.

The random intensity at time t is kappa_t * sum_j w_{j,t} K_phi(y, theta_j)
with K_phi a bivariate normal density with covariance phi^2 I restricted to a
bounded window; events are conditionally Poisson given the latent weights.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import DegenerateKernelError, InvalidParameterError
from .latent import MargParams, Rect, simulate_statespace, stationary_init

__all__ = [
    "KernelSpec",
    "CovariateModel",
    "PointSeries",
    "ModelSpec",
    "kernel_density",
    "kernel_mass",
    "kappa_eval",
    "kappa_path",
    "intensity_at",
    "intensity_total",
    "simulate_points",
    "simulate_series",
]

DEFAULT_DRY_MONTHS = (8, 9, 10, 11, 12)


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel bandwidth on a shared bounded window."""

    phi: float
    window: Rect

    def __post_init__(self):
        if not (self.phi > 0.0 and np.isfinite(self.phi)):
            raise InvalidParameterError("phi must be finite and > 0")


def kernel_density(y, theta, phi):
    """N2(y | theta, phi^2 I) evaluated pointwise."""
    out = np.exp(backend.gauss_log_kernel(y, theta, phi))
    return float(out[0, 0]) if out.size == 1 else out


def kernel_mass(rect, theta, phi):
    """Kernel mass on an axis-aligned rectangle (product of 1-D normal CDF
    differences); infinite bounds are allowed."""
    out = backend.rect_mass(theta, rect.x0, rect.x1, rect.y0, rect.y1, phi)
    return float(out[0]) if out.size == 1 else out


def _month_of_step(t, start_month):
    return (start_month - 1 + t - 1) % 12 + 1


@dataclass(frozen=True)
class CovariateModel:
    """Deterministic global factor kappa_t = exp(eta . x_t).

    `design` holds x_t rows for t = 1..T. The two standard builders produce an
    intercept + linear trend plus either a dry-season dummy or four sin/cos
    harmonic pairs; `extend` rebuilds the design past T for forecasting.
    """

    kind: str
    design: np.ndarray = field(repr=False)
    frequencies: tuple = ()
    dry_months: tuple = DEFAULT_DRY_MONTHS
    start_month: int = 1

    def __post_init__(self):
        design = np.atleast_2d(np.asarray(self.design, dtype=float))
        object.__setattr__(self, "design", design)
        if self.kind not in ("dummy", "harmonic", "custom"):
            raise InvalidParameterError(f"unknown covariate kind {self.kind!r}")
        if self.kind == "harmonic":
            freqs = np.asarray(self.frequencies, dtype=float)
            if freqs.shape != (4,):
                raise InvalidParameterError("harmonic model takes four frequencies")
            if np.any(freqs <= 0.0) or np.any(freqs >= 0.5):
                raise InvalidParameterError("frequencies must lie in (0, 0.5)")

    @staticmethod
    def _dummy_row(t, dry_months, start_month):
        d = 1.0 if _month_of_step(t, start_month) in dry_months else 0.0
        return [1.0, float(t), d]

    @staticmethod
    def _harmonic_row(t, frequencies):
        row = [1.0, float(t)]
        for w in frequencies:
            row.append(np.sin(2.0 * np.pi * w * t))
            row.append(np.cos(2.0 * np.pi * w * t))
        return row

    @classmethod
    def dummy(cls, T, dry_months=DEFAULT_DRY_MONTHS, start_month=1):
        rows = [cls._dummy_row(t, tuple(dry_months), start_month) for t in range(1, T + 1)]
        return cls(
            kind="dummy",
            design=np.array(rows),
            dry_months=tuple(dry_months),
            start_month=start_month,
        )

    @classmethod
    def harmonic(cls, T, frequencies):
        freqs = tuple(float(w) for w in frequencies)
        rows = [cls._harmonic_row(t, freqs) for t in range(1, T + 1)]
        return cls(kind="harmonic", design=np.array(rows), frequencies=freqs)

    @classmethod
    def custom(cls, design):
        return cls(kind="custom", design=np.asarray(design, dtype=float))

    @property
    def T(self):
        return self.design.shape[0]

    @property
    def m(self):
        return self.design.shape[1]

    def extend(self, T_new):
        """Design covering t = 1..T_new (rebuilt for dummy/harmonic kinds)."""
        if T_new <= self.T:
            return self
        if self.kind == "dummy":
            return CovariateModel.dummy(T_new, self.dry_months, self.start_month)
        if self.kind == "harmonic":
            return CovariateModel.harmonic(T_new, self.frequencies)
        raise InvalidParameterError("custom designs cannot be extended past T")


def kappa_eval(model, eta, t):
    """kappa_t = exp(eta . x_t) for a 1-based time index."""
    if not 1 <= t <= model.T:
        raise IndexError(f"t = {t} outside 1..{model.T}")
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (model.m,):
        raise InvalidParameterError("eta length must match the design width")
    return float(np.exp(model.design[t - 1] @ eta))


def kappa_path(model, eta, T=None):
    """kappa_t for t = 1..T as a vector."""
    T = model.T if T is None else T
    model = model.extend(T)
    eta = np.asarray(eta, dtype=float)
    return np.exp(model.design[:T] @ eta)


@dataclass
class PointSeries:
    """Per-step planar event patterns with optional cell allocations.

    `events[t]` is an (n_t, 2) array; `alloc[t]` is an int array of 0-based
    cell indices or None when unallocated.
    """

    events: list
    alloc: list

    def __post_init__(self):
        self.events = [np.asarray(e, dtype=float).reshape(-1, 2) for e in self.events]
        self.alloc = [
            None if a is None else np.asarray(a, dtype=np.int64) for a in self.alloc
        ]
        if len(self.events) != len(self.alloc):
            raise InvalidParameterError("events and alloc must have equal length")
        for e, a in zip(self.events, self.alloc):
            if a is not None and a.shape[0] != e.shape[0]:
                raise InvalidParameterError("allocation length must match event count")

    @classmethod
    def empty(cls, T):
        return cls(events=[np.empty((0, 2)) for _ in range(T)], alloc=[None] * T)

    @property
    def T(self):
        return len(self.events)

    @property
    def counts(self):
        return np.array([e.shape[0] for e in self.events], dtype=np.int64)


@dataclass(frozen=True)
class ModelSpec:
    """Observation-model parameters apart from the base-measure masses:
    persistence beta, scale regime, kernel bandwidth phi, covariate design and
    coefficients eta."""

    beta: float
    scales: object
    phi: float
    covariates: CovariateModel
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))
        if not (self.phi > 0.0 and np.isfinite(self.phi)):
            raise InvalidParameterError("phi must be finite and > 0")
        if self.eta.shape != (self.covariates.m,):
            raise InvalidParameterError("eta length must match the design width")


def intensity_at(y, w_t, kappa_t, grid, phi):
    """Intensity kappa_t * sum_j w_j K_phi(y, theta_j) at one or more points."""
    dens = np.exp(backend.gauss_log_kernel(y, grid.atoms, phi))
    out = kappa_t * dens @ np.asarray(w_t, dtype=float)
    return float(out[0]) if out.size == 1 else out


def intensity_total(w_t, kappa_t, grid, phi):
    """Expected count over the window: kappa_t * sum_j w_j K_phi(window, theta_j)."""
    masses = backend.rect_mass(
        grid.atoms, grid.window.x0, grid.window.x1, grid.window.y0, grid.window.y1, phi
    )
    return float(kappa_t * np.asarray(w_t, dtype=float) @ masses)


_MAX_REJECTION_ROUNDS = 10_000


def _sample_truncated_normal(center, phi, window, rng):
    """Location draw from N2(center, phi^2 I) restricted to the window, by
    rejection from the untruncated normal."""
    for _ in range(_MAX_REJECTION_ROUNDS):
        y = center + phi * rng.standard_normal(2)
        if window.x0 <= y[0] <= window.x1 and window.y0 <= y[1] <= window.y1:
            return y
    raise DegenerateKernelError(
        "truncated-kernel rejection stalled; bandwidth is pathological for the window"
    )


def simulate_points(w_t, kappa_t, grid, phi, rng):
    """One time step of the point pattern given latent weights.

    Returns (locations (n, 2), allocations (n,)). The count is Poisson with
    mean `intensity_total`; each event picks a cell with probability
    proportional to w_j * kernel_mass and a truncated-normal location.
    """
    w_t = np.asarray(w_t, dtype=float)
    masses = backend.rect_mass(
        grid.atoms, grid.window.x0, grid.window.x1, grid.window.y0, grid.window.y1, phi
    )
    cell_w = w_t * masses
    total = kappa_t * cell_w.sum()
    if total == 0.0:
        return np.empty((0, 2)), np.empty(0, dtype=np.int64)
    n = int(rng.poisson(total))
    if n == 0:
        return np.empty((0, 2)), np.empty(0, dtype=np.int64)
    probs = cell_w / cell_w.sum()
    cells = rng.choice(grid.n_cells, size=n, p=probs)
    locs = np.empty((n, 2))
    for i, j in enumerate(cells):
        locs[i] = _sample_truncated_normal(grid.atoms[j], phi, grid.window, rng)
    return locs, cells.astype(np.int64)


def simulate_series(grid, spec, T, rng, init="stationary"):
    """Simulate the latent path and the conditional point patterns.

    `init` is "stationary" or an explicit weight vector for w_1. Returns
    (path (T, J), PointSeries with true allocations recorded).
    """
    params = MargParams(grid=grid, beta=spec.beta, scales=spec.scales, T=T)
    if isinstance(init, str):
        if init != "stationary":
            raise InvalidParameterError(f"unknown init {init!r}")
        w1 = stationary_init(params, rng)
    else:
        w1 = np.asarray(init, dtype=float)
    path = simulate_statespace(w1, params, rng)
    kappas = kappa_path(spec.covariates, spec.eta, T)
    events, alloc = [], []
    for t in range(1, T + 1):
        locs, cells = simulate_points(path[t - 1], kappas[t - 1], grid, spec.phi, rng)
        events.append(locs)
        alloc.append(cells)
    return path, PointSeries(events=events, alloc=alloc)
