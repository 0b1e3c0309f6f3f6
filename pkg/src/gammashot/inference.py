"""Posterior building blocks: priors, chain state, complete-data likelihood,
exact conditional draws, and adaptive Metropolis-Hastings updates.

All conditionals target the normalised complete-data joint
  prod_t Poi(N_t | Lambda_t) * prod_j NcGamma transitions
         * prod_i kappa_t w_{z,t} K_phi(y_i, theta_z) / Lambda_t,
with the time-1 latent term taken from the configured initial law: the
stationary gamma law for the constant-scale regime (which constrains
rho = beta c < 1) and Gamma(alpha_j, rate 1/c_1) otherwise.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import backend
from .errors import (
    DegenerateAllocationError,
    InvalidParameterError,
)
from .latent import ScaleRegime
from .observe import CovariateModel, kappa_path

__all__ = [
    "Priors",
    "InferenceModel",
    "FitData",
    "ChainState",
    "SmcConfig",
    "adapt_step",
    "complete_loglik",
    "sample_allocations",
    "update_gamma",
    "log_accept_ratio_logscale",
    "log_accept_ratio_gaussian",
]

LOG_TWO_PI = math.log(2.0 * math.pi)

# Floor for latent proposals inside the sampler: gamma draws with small shape
# can underflow to exact 0, which the continuous targets cannot score.
TINY_WEIGHT = 1e-300


@dataclass(frozen=True)
class Priors:
    """Hyperparameters of the static-parameter priors.

    alpha_j | gamma ~ Ga(a_alpha, gamma b_alpha), beta | gamma ~ Ga(a_beta,
    gamma b_beta), gamma ~ Ga(a_gamma, b_gamma), phi ~ Ga(a_phi, b_phi),
    eta ~ N(mu_eta, Sigma_eta); the scale prior is Ga(a_c, b_c) for the
    constant regime or the hierarchical Ga(r^2/sigma2_c, r/sigma2_c) with
    r ~ Ga(a_r, b_r) for the time-varying/monthly regimes.
    """

    a_alpha: float
    b_alpha: float
    a_beta: float
    b_beta: float
    a_gamma: float
    b_gamma: float
    a_phi: float
    b_phi: float
    mu_eta: np.ndarray
    Sigma_eta: np.ndarray
    a_c: float = None
    b_c: float = None
    sigma2_c: float = None
    a_r: float = None
    b_r: float = None

    def __post_init__(self):
        for name in ("a_alpha", "b_alpha", "a_beta", "b_beta", "a_gamma", "b_gamma", "a_phi", "b_phi"):
            if not getattr(self, name) > 0.0:
                raise InvalidParameterError(f"{name} must be > 0")
        mu = np.atleast_1d(np.asarray(self.mu_eta, dtype=float))
        sig = np.atleast_2d(np.asarray(self.Sigma_eta, dtype=float))
        object.__setattr__(self, "mu_eta", mu)
        object.__setattr__(self, "Sigma_eta", sig)
        if sig.shape != (mu.shape[0], mu.shape[0]) or not np.allclose(sig, sig.T):
            raise InvalidParameterError("Sigma_eta must be symmetric, matching mu_eta")
        np.linalg.cholesky(sig)  # raises if not positive-definite
        for name in ("a_c", "b_c", "sigma2_c", "a_r", "b_r"):
            v = getattr(self, name)
            if v is not None and not v > 0.0:
                raise InvalidParameterError(f"{name} must be > 0 when given")


@dataclass(frozen=True)
class InferenceModel:
    """Fixed model structure for a fit: grid, horizon, scale-regime kind,
    covariate design, and which phi conditional to target ("exact" includes
    the e^{-Lambda} count factor; "truncation_ratio" uses the per-event
    kernel-mass ratio instead)."""

    grid: object
    T: int
    scale_kind: str = "constant"
    start_month: int = 1
    covariates: CovariateModel = None
    phi_target: str = "exact"

    def __post_init__(self):
        if self.scale_kind not in ("constant", "time_varying", "monthly"):
            raise InvalidParameterError(f"unknown scale kind {self.scale_kind!r}")
        if self.phi_target not in ("exact", "truncation_ratio"):
            raise InvalidParameterError(f"unknown phi target {self.phi_target!r}")
        if self.covariates is None:
            object.__setattr__(self, "covariates", CovariateModel.custom(np.ones((self.T, 1))))

    @property
    def n_scales(self):
        if self.scale_kind == "constant":
            return 1
        if self.scale_kind == "monthly":
            return 12
        return self.T


class FitData:
    """Events prepared for inference: per-step locations, counts, and the
    (squared) distances to every grid atom, which only depend on the data."""

    def __init__(self, series, grid):
        self.events = [np.asarray(e, dtype=float).reshape(-1, 2) for e in series.events]
        self.counts = np.array([e.shape[0] for e in self.events], dtype=np.int64)
        self.T = len(self.events)
        atoms = grid.atoms
        self.sq_dists = [
            (e[:, 0][:, None] - atoms[:, 0][None, :]) ** 2
            + (e[:, 1][:, None] - atoms[:, 1][None, :]) ** 2
            for e in self.events
        ]

    @property
    def total_events(self):
        return int(self.counts.sum())


@dataclass
class ChainState:
    """One particle-Gibbs state: parameter values, latent path, allocations,
    and the adaptive-proposal bookkeeping (log step sizes, acceptance sums)."""

    alpha: np.ndarray
    beta: float
    scales: np.ndarray
    gamma: float
    phi: float
    eta: np.ndarray
    r: float = None
    path: np.ndarray = None
    alloc: list = None
    log_steps: dict = field(default_factory=dict)
    accept_sums: dict = field(default_factory=dict)
    proposal_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.scales = np.atleast_1d(np.asarray(self.scales, dtype=float))
        self.eta = np.atleast_1d(np.asarray(self.eta, dtype=float))

    def scale_regime(self, model):
        return ScaleRegime(
            kind=model.scale_kind, values=self.scales, start_month=model.start_month
        )

    def scale_path(self, model):
        return self.scale_regime(model).scale_path(model.T)

    def kappas(self, model):
        return kappa_path(model.covariates, self.eta, model.T)

    def record_proposal(self, name, accept_prob):
        self.accept_sums[name] = self.accept_sums.get(name, 0.0) + accept_prob
        self.proposal_counts[name] = self.proposal_counts.get(name, 0) + 1

    def acceptance_rates(self):
        return {
            k: self.accept_sums[k] / self.proposal_counts[k]
            for k in sorted(self.proposal_counts)
        }


@dataclass(frozen=True)
class SmcConfig:
    """Conditional-SMC settings: particle count and the block partition of the
    cells (disjoint, covering). Resampling is multinomial at every step."""

    n_particles: int
    blocks: tuple
    resampling: str = "multinomial"

    def __post_init__(self):
        if self.n_particles < 2:
            raise InvalidParameterError("need at least 2 particles (1 would pin the reference)")
        if self.resampling != "multinomial":
            raise InvalidParameterError("only multinomial resampling is supported")
        blocks = tuple(np.asarray(b, dtype=np.int64) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def default(cls, n_cells, n_particles=16, block_size=8):
        """Contiguous row-major strips of about `block_size` cells."""
        edges = list(range(0, n_cells, block_size)) + [n_cells]
        blocks = [np.arange(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
        return cls(n_particles=n_particles, blocks=tuple(blocks))

    def validate_partition(self, n_cells):
        seen = np.concatenate(self.blocks) if self.blocks else np.empty(0, dtype=np.int64)
        if np.array_equal(np.sort(seen), np.arange(n_cells)):
            return
        raise InvalidParameterError("blocks must form a disjoint cover of the cells")


def initial_rate(model, beta, scales):
    """Rate of the Gamma(alpha_j, rate) law of w_1, or None when the constant
    regime's stationarity constraint rho = beta c < 1 is violated (the target
    carries zero posterior mass there)."""
    if model.scale_kind == "constant":
        c = float(scales[0])
        rho = beta * c
        if rho >= 1.0:
            return None
        return (1.0 - rho) / c
    regime = ScaleRegime(kind=model.scale_kind, values=scales, start_month=model.start_month)
    return 1.0 / regime.scale_at(1)


def transition_loglik(path, alpha, beta, c_path, r0):
    """Sum of latent log transition densities, including the time-1 term.

    `r0` is the initial-law rate from `initial_rate`; None yields -inf.
    """
    if r0 is None:
        return -np.inf
    alpha = np.asarray(alpha, dtype=float)
    total = float(np.sum(backend.ncg_logpdf(path[0], alpha, 0.0, 1.0 / r0)))
    if path.shape[0] > 1:
        total += float(
            np.sum(
                backend.ncg_logpdf(
                    path[1:], alpha[None, :], beta * path[:-1], c_path[1:, None]
                )
            )
        )
    return total


def transition_loglik_cell(col, alpha_j, beta, c_path, r0):
    """Per-cell version of `transition_loglik` for the alpha_j conditionals."""
    if r0 is None:
        return -np.inf
    total = float(backend.ncg_logpdf(col[0], alpha_j, 0.0, 1.0 / r0))
    if col.shape[0] > 1:
        total += float(
            np.sum(backend.ncg_logpdf(col[1:], alpha_j, beta * col[:-1], c_path[1:]))
        )
    return total


def window_masses(model, phi):
    g = model.grid
    return backend.rect_mass(g.atoms, g.window.x0, g.window.x1, g.window.y0, g.window.y1, phi)


def lambda_totals(state, model):
    """Lambda_t(window) for t = 1..T given the current state."""
    masses = window_masses(model, state.phi)
    return state.kappas(model) * (state.path @ masses)


def _event_log_kernel(state, data, t):
    """Per-event log K_phi(y_i, theta_{z_i}) at step t (0-based index t-1)."""
    z = state.alloc[t]
    d2 = data.sq_dists[t][np.arange(z.shape[0]), z]
    return -d2 / (2.0 * state.phi**2) - LOG_TWO_PI - 2.0 * math.log(state.phi)


def loglik_counts(state, model, data):
    """Count + allocation/location part of the complete-data log likelihood."""
    if data is None:
        return 0.0
    lam = lambda_totals(state, model)
    kappas = state.kappas(model)
    n = data.counts
    if np.any((n > 0) & (lam <= 0.0)):
        return -np.inf
    with np.errstate(divide="ignore"):
        total = float(np.sum(-lam + n * np.where(lam > 0.0, np.log(lam), 0.0) - gammaln(n + 1.0)))
    for t in range(data.T):
        if n[t] == 0:
            continue
        w = state.path[t, state.alloc[t]]
        if np.any(w <= 0.0):
            return -np.inf
        total += float(
            n[t] * math.log(kappas[t])
            + np.sum(np.log(w))
            + np.sum(_event_log_kernel(state, data, t))
            - n[t] * math.log(lam[t])
        )
    return total


def complete_loglik(state, model, data):
    """Complete-data log likelihood of (counts, locations, allocations, path)."""
    r0 = initial_rate(model, state.beta, state.scales)
    trans = transition_loglik(
        state.path, state.alpha, state.beta, state.scale_path(model), r0
    )
    if trans == -np.inf:
        return -np.inf
    return trans + loglik_counts(state, model, data)


def sample_allocations(state, model, data, rng):
    """Exact categorical draw of each event's latent cell.

    pr(z = m) is proportional to w_{m,t} K_phi(y_i, theta_m); the window
    truncation factor is common to all cells and cancels.
    """
    out = []
    inv = 1.0 / (2.0 * state.phi**2)
    for t in range(data.T):
        n = data.counts[t]
        if n == 0:
            out.append(np.empty(0, dtype=np.int64))
            continue
        logk = -data.sq_dists[t] * inv
        probs = state.path[t][None, :] * np.exp(logk)
        norm = probs.sum(axis=1)
        if np.any(norm <= 0.0):
            raise DegenerateAllocationError("an event has zero mixture weight in every cell")
        probs /= norm[:, None]
        cum = np.cumsum(probs, axis=1)
        u = rng.random(n)
        z = np.sum(cum < u[:, None], axis=1)
        out.append(np.minimum(z, probs.shape[1] - 1).astype(np.int64))
    return out


def allocation_probs(state, data, t):
    """Normalised allocation probabilities at step t (for diagnostics/tests)."""
    inv = 1.0 / (2.0 * state.phi**2)
    probs = state.path[t][None, :] * np.exp(-data.sq_dists[t] * inv)
    return probs / probs.sum(axis=1, keepdims=True)


def update_gamma(state, priors, rng):
    """Exact conjugate draw of the hierarchical scale gamma."""
    n_cells = state.alpha.shape[0]
    a_post = priors.a_gamma + priors.a_beta + n_cells * priors.a_alpha
    b_post = priors.b_gamma + state.beta * priors.b_beta + priors.b_alpha * float(state.alpha.sum())
    return rng.gamma(a_post, 1.0 / b_post)


def gamma_logpdf(x, a, b):
    """log Ga(x | shape a, rate b)."""
    if x <= 0.0:
        return -np.inf
    return a * math.log(b) - math.lgamma(a) + (a - 1.0) * math.log(x) - b * x


def mvnormal_logpdf(x, mu, sigma):
    diff = np.asarray(x, dtype=float) - mu
    chol = np.linalg.cholesky(sigma)
    sol = np.linalg.solve(chol, diff)
    return float(
        -0.5 * sol @ sol - np.sum(np.log(np.diag(chol))) - 0.5 * diff.shape[0] * LOG_TWO_PI
    )


def log_accept_ratio_logscale(logtarget, x, x_new):
    """MH log acceptance ratio for a log-scale Gaussian random walk (lognormal
    proposal), including the Jacobian correction."""
    return logtarget(x_new) - logtarget(x) + math.log(x_new) - math.log(x)


def log_accept_ratio_gaussian(logtarget, x, x_new):
    """MH log acceptance ratio for a symmetric Gaussian random walk."""
    return logtarget(x_new) - logtarget(x)


def mh_step_positive(x, logtarget, log_step, rng):
    """One lognormal-proposal MH step for a positive scalar.

    Returns (new value, acceptance probability).
    """
    x_new = x * math.exp(math.exp(log_step) * rng.standard_normal())
    logr = log_accept_ratio_logscale(logtarget, x, x_new)
    prob = math.exp(min(0.0, logr)) if np.isfinite(logr) else (1.0 if logr > 0 else 0.0)
    if rng.random() < prob:
        return x_new, prob
    return x, prob


def mh_step_vector(x, logtarget, log_step, rng, chol=None):
    """One Gaussian random-walk MH step for an unconstrained vector.

    `chol` preconditions the proposal (covariance step^2 * chol chol^T); a
    fixed preconditioner keeps the proposal symmetric.
    """
    z = rng.standard_normal(x.shape[0])
    if chol is not None:
        z = chol @ z
    x_new = x + math.exp(log_step) * z
    logr = log_accept_ratio_gaussian(logtarget, x, x_new)
    prob = math.exp(min(0.0, logr)) if np.isfinite(logr) else (1.0 if logr > 0 else 0.0)
    if rng.random() < prob:
        return x_new, prob
    return x, prob


def adapt_step(accept_rate, log_step, iteration, target=0.44):
    """Robbins-Monro step-size update; frozen by the caller after burn-in."""
    if iteration < 1:
        raise InvalidParameterError("iteration must be >= 1")
    return log_step + iteration ** (-0.6) * (accept_rate - target)
