"""Blocked conditional Sequential Monte Carlo for the latent weight paths.

One call refreshes a single block of cells given everything else. Particles
propose from the prior noncentral-gamma transitions, weights carry only the
block-dependent likelihood factor (total-intensity suppression plus the
weights of events allocated inside the block), resampling is multinomial at
every step, and the reference path is pinned to particle 0 with a fixed
ancestor lineage (no ancestor sampling).
"""

import numpy as np

from .inference import TINY_WEIGHT, initial_rate, window_masses

__all__ = ["csmc_block"]


def _normalise_logw(logw):
    m = np.max(logw)
    if not np.isfinite(m):
        raise RuntimeError("all cSMC particles carry zero weight, including the reference")
    w = np.exp(logw - m)
    return w / w.sum()


def _block_logweights(w_t, coef, alloc_local):
    """Incremental log weight of each particle at one time step.

    `w_t` is (N, s); the factor is -sum_j w_j * kappa_t * mass_j plus
    sum over block-allocated events of log w at the allocated cell (zero
    weights give -inf: the particle is killed).
    """
    out = -w_t @ coef
    if alloc_local.shape[0]:
        with np.errstate(divide="ignore"):
            out = out + np.sum(np.log(w_t[:, alloc_local]), axis=1)
    return out


def _propose(shape, scale, rng):
    """Gamma proposals with the exact-zero shape-0 case preserved and positive
    draws floored at TINY_WEIGHT so the continuous targets stay finite."""
    draw = rng.gamma(shape, scale)
    return np.where(shape > 0.0, np.maximum(draw, TINY_WEIGHT), 0.0)


def csmc_block(cells, reference, state, model, data, config, rng):
    """One conditional-SMC refresh of the path slice for `cells`.

    `reference` is the current (T, s) slice, which must have finite log
    weight; the return value is the new (T, s) slice drawn from the particle
    approximation (the reference survives every resampling step by
    construction).
    """
    cells = np.asarray(cells, dtype=np.int64)
    T = model.T
    s = cells.shape[0]
    N = config.n_particles
    alpha = state.alpha[cells]
    c_path = state.scale_path(model)
    r0 = initial_rate(model, state.beta, state.scales)
    if r0 is None:
        raise RuntimeError("state violates the stationarity constraint rho < 1")

    kappas = state.kappas(model)
    masses = window_masses(model, state.phi)[cells]
    coef = kappas[:, None] * masses[None, :]

    alloc_local = []
    if data is None:
        coef = np.zeros_like(coef)
        alloc_local = [np.empty(0, dtype=np.int64)] * T
    else:
        glob_to_loc = np.full(model.grid.n_cells, -1, dtype=np.int64)
        glob_to_loc[cells] = np.arange(s)
        for t in range(T):
            z = glob_to_loc[state.alloc[t]]
            alloc_local.append(z[z >= 0])

    particles = np.empty((T, N, s))
    ancestors = np.zeros((T, N), dtype=np.int64)

    particles[0, 0] = reference[0]
    particles[0, 1:] = _propose(
        np.broadcast_to(alpha, (N - 1, s)), 1.0 / r0, rng
    )
    logw = _block_logweights(particles[0], coef[0], alloc_local[0])

    for t in range(1, T):
        u = _normalise_logw(logw)
        cum = np.cumsum(u)
        ancestors[t, 0] = 0
        ancestors[t, 1:] = np.minimum(
            np.searchsorted(cum, rng.random(N - 1)), N - 1
        )
        parents = particles[t - 1][ancestors[t]]
        v = rng.poisson(state.beta * parents[1:])
        particles[t, 1:] = _propose(alpha[None, :] + v, c_path[t], rng)
        particles[t, 0] = reference[t]
        logw = _block_logweights(particles[t], coef[t], alloc_local[t])

    u = _normalise_logw(logw)
    k = int(np.minimum(np.searchsorted(np.cumsum(u), rng.random()), N - 1))
    out = np.empty((T, s))
    out[T - 1] = particles[T - 1, k]
    for t in range(T - 1, 0, -1):
        k = int(ancestors[t, k])
        out[t - 1] = particles[t - 1, k]
    return out
