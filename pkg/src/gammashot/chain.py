"""Particle-Gibbs driver: one full sweep, the chain runner, and forecasting.

A sweep cycles (1) parameter updates (exact conjugate draw for gamma,
adaptive MH for everything else), (2) exact allocation draws, (3) blocked
conditional SMC over the latent path. Step sizes adapt during burn-in only.
"""

import math

import numpy as np
from scipy.special import gammaln

from . import backend
from .errors import InvalidParameterError, NoDrawsError
from .inference import (
    TINY_WEIGHT,
    ChainState,
    adapt_step,
    complete_loglik,
    gamma_logpdf,
    initial_rate,
    lambda_totals,
    mh_step_positive,
    mh_step_vector,
    mvnormal_logpdf,
    sample_allocations,
    transition_loglik,
    update_gamma,
    window_masses,
)
from .latent import ScaleRegime, substream
from .observe import kappa_path
from .smc import csmc_block

__all__ = [
    "particle_gibbs_step",
    "init_state",
    "run_chain",
    "forecast",
    "effective_sample_size",
]

ETA_TARGET_RATE = 0.234
SCALAR_TARGET_RATE = 0.44


def _do_mh_positive(state, key, value, logtarget, rng, adapt, iteration):
    log_step = state.log_steps.setdefault(key, math.log(0.5))
    new, prob = mh_step_positive(value, logtarget, log_step, rng)
    state.record_proposal(key, prob)
    if adapt:
        state.log_steps[key] = adapt_step(prob, log_step, iteration, SCALAR_TARGET_RATE)
    return new


def _do_mh_vector(state, key, value, logtarget, rng, adapt, iteration, chol=None):
    log_step = state.log_steps.setdefault(key, math.log(0.2))
    new, prob = mh_step_vector(value, logtarget, log_step, rng, chol=chol)
    state.record_proposal(key, prob)
    if adapt:
        state.log_steps[key] = adapt_step(prob, log_step, iteration, ETA_TARGET_RATE)
    return new


def _trans_terms_into_t(path, alpha, beta, c_t, t):
    """Latent transition log density into 1-based step t with scale c_t; the
    t = 1 term is the Gamma(alpha_j, rate 1/c_1) initial law of the
    non-constant regimes."""
    if t == 1:
        return float(np.sum(backend.ncg_logpdf(path[0], alpha, 0.0, c_t)))
    return float(np.sum(backend.ncg_logpdf(path[t - 1], alpha, beta * path[t - 2], c_t)))


def _gamma_logpdf_vec(x, a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a * np.log(b) - gammaln(a) + (a - 1.0) * np.log(x) - b * x
    return np.where(x > 0.0, out, -np.inf)


def _alpha_col_logliks(path, alpha, beta, c_path, r0):
    """Per-cell transition log likelihood (time-1 term included) as a (J,)
    vector; the alpha_j conditionals are independent across cells."""
    out = backend.ncg_logpdf(path[0], alpha, 0.0, 1.0 / r0)
    if path.shape[0] > 1:
        out = out + np.sum(
            backend.ncg_logpdf(path[1:], alpha[None, :], beta * path[:-1], c_path[1:, None]),
            axis=0,
        )
    return out


def _update_alpha(state, model, priors, rng, adapt, iteration):
    """Simultaneous per-coordinate MH for the alpha vector (the coordinates'
    full conditionals are mutually independent given the rest)."""
    J = state.alpha.shape[0]
    c_path = state.scale_path(model)
    r0 = initial_rate(model, state.beta, state.scales)
    rate = state.gamma * priors.b_alpha
    log_steps = np.array(
        [state.log_steps.setdefault(f"alpha_{j}", math.log(0.5)) for j in range(J)]
    )
    cur = state.alpha
    prop = cur * np.exp(np.exp(log_steps) * rng.standard_normal(J))
    ll_cur = _alpha_col_logliks(state.path, cur, state.beta, c_path, r0)
    ll_prop = _alpha_col_logliks(state.path, prop, state.beta, c_path, r0)
    logr = (
        ll_prop
        - ll_cur
        + _gamma_logpdf_vec(prop, priors.a_alpha, rate)
        - _gamma_logpdf_vec(cur, priors.a_alpha, rate)
        + np.log(prop)
        - np.log(cur)
    )
    probs = np.where(np.isnan(logr), 0.0, np.exp(np.minimum(0.0, logr)))
    accept = rng.random(J) < probs
    state.alpha = np.where(accept, prop, cur)
    for j in range(J):
        state.record_proposal(f"alpha_{j}", float(probs[j]))
        if adapt:
            state.log_steps[f"alpha_{j}"] = adapt_step(
                float(probs[j]), log_steps[j], iteration, SCALAR_TARGET_RATE
            )


def _update_beta(state, model, priors, rng, adapt, iteration):
    c_path = state.scale_path(model)

    def logtarget(b):
        r0 = initial_rate(model, b, state.scales)
        return gamma_logpdf(b, priors.a_beta, state.gamma * priors.b_beta) + transition_loglik(
            state.path, state.alpha, b, c_path, r0
        )

    state.beta = _do_mh_positive(state, "beta", state.beta, logtarget, rng, adapt, iteration)


def _update_scales(state, model, priors, rng, adapt, iteration):
    if model.scale_kind == "constant":

        def logtarget(c):
            scales = np.array([c])
            r0 = initial_rate(model, state.beta, scales)
            c_path = np.full(model.T, c)
            return gamma_logpdf(c, priors.a_c, priors.b_c) + transition_loglik(
                state.path, state.alpha, state.beta, c_path, r0
            )

        new = _do_mh_positive(state, "scale_0", state.scales[0], logtarget, rng, adapt, iteration)
        state.scales = np.array([new])
        return

    a_c = state.r * state.r / priors.sigma2_c
    b_c = state.r / priors.sigma2_c
    if model.scale_kind == "time_varying":
        # c_t only enters the transition into step t, so the T coordinates'
        # conditionals are independent; update them simultaneously.
        T = model.T
        log_steps = np.array(
            [state.log_steps.setdefault(f"scale_{t}", math.log(0.5)) for t in range(T)]
        )
        cur = state.scales[:T]
        prop = cur * np.exp(np.exp(log_steps) * rng.standard_normal(T))

        def _per_t_loglik(c_vec):
            first = np.sum(backend.ncg_logpdf(state.path[0], state.alpha, 0.0, c_vec[0]))
            rest = np.sum(
                backend.ncg_logpdf(
                    state.path[1:],
                    state.alpha[None, :],
                    state.beta * state.path[:-1],
                    c_vec[1:, None],
                ),
                axis=1,
            )
            return np.concatenate([[first], rest])

        logr = (
            _per_t_loglik(prop)
            - _per_t_loglik(cur)
            + _gamma_logpdf_vec(prop, a_c, b_c)
            - _gamma_logpdf_vec(cur, a_c, b_c)
            + np.log(prop)
            - np.log(cur)
        )
        probs = np.where(np.isnan(logr), 0.0, np.exp(np.minimum(0.0, logr)))
        accept = rng.random(T) < probs
        state.scales = np.where(accept, prop, cur)
        for t in range(T):
            state.record_proposal(f"scale_{t}", float(probs[t]))
            if adapt:
                state.log_steps[f"scale_{t}"] = adapt_step(
                    float(probs[t]), log_steps[t], iteration, SCALAR_TARGET_RATE
                )
        return

    regime = ScaleRegime(kind="monthly", values=state.scales, start_month=model.start_month)
    slots = [regime.month_index(t) for t in range(1, model.T + 1)]
    for k in range(1, 13):
        steps = [t for t in range(1, model.T + 1) if slots[t - 1] == k]

        def logtarget(xi, steps=steps):
            out = gamma_logpdf(xi, a_c, b_c)
            for t in steps:
                out += _trans_terms_into_t(state.path, state.alpha, state.beta, xi, t)
            return out

        state.scales[k - 1] = _do_mh_positive(
            state, f"scale_{k - 1}", state.scales[k - 1], logtarget, rng, adapt, iteration
        )


def _update_r(state, model, priors, rng, adapt, iteration):
    scales = state.scales

    def logtarget(r):
        a = r * r / priors.sigma2_c
        b = r / priors.sigma2_c
        out = gamma_logpdf(r, priors.a_r, priors.b_r)
        for c in scales:
            out += gamma_logpdf(c, a, b)
        return out

    state.r = _do_mh_positive(state, "r", state.r, logtarget, rng, adapt, iteration)


def _update_phi(state, model, data, priors, rng, adapt, iteration):
    if data is None:
        # no observation record at all: the conditional is the prior
        def logtarget(phi):
            return gamma_logpdf(phi, priors.a_phi, priors.b_phi)

        state.phi = _do_mh_positive(state, "phi", state.phi, logtarget, rng, adapt, iteration)
        return
    if data.total_events == 0:
        d2_alloc = np.empty(0)
        z_all = np.empty(0, dtype=np.int64)
    else:
        d2_alloc = np.concatenate(
            [
                data.sq_dists[t][np.arange(data.counts[t]), state.alloc[t]]
                for t in range(data.T)
                if data.counts[t]
            ]
        )
        z_all = np.concatenate([state.alloc[t] for t in range(data.T) if data.counts[t]])
    kappas = state.kappas(model)
    n_events = d2_alloc.shape[0]

    def logtarget(phi):
        out = gamma_logpdf(phi, priors.a_phi, priors.b_phi)
        kernel_term = (
            -np.sum(d2_alloc) / (2.0 * phi * phi)
            - n_events * (math.log(2.0 * math.pi) + 2.0 * math.log(phi))
        )
        if model.phi_target == "exact":
            masses = window_masses(model, phi)
            out -= float(kappas @ (state.path @ masses))
            out += kernel_term
        else:
            masses = window_masses(model, phi)
            with np.errstate(divide="ignore"):
                out += kernel_term - float(np.sum(np.log(masses[z_all])))
        return out

    state.phi = _do_mh_positive(state, "phi", state.phi, logtarget, rng, adapt, iteration)


def _update_eta(state, model, data, priors, rng, adapt, iteration):
    if data is None:
        def logtarget(eta):
            return mvnormal_logpdf(eta, priors.mu_eta, priors.Sigma_eta)

        chol = np.linalg.cholesky(priors.Sigma_eta)
        state.eta = _do_mh_vector(
            state, "eta", state.eta, logtarget, rng, adapt, iteration, chol=chol
        )
        return
    masses = window_masses(model, state.phi)
    smooth = state.path @ masses
    counts = data.counts
    design = model.covariates.design[: model.T]

    def logtarget(eta):
        lam = np.exp(design @ eta) * smooth
        with np.errstate(divide="ignore"):
            loglam = np.where(lam > 0.0, np.log(lam), -np.inf)
        pois = -lam + np.where(counts > 0, counts * loglam, 0.0)
        return mvnormal_logpdf(eta, priors.mu_eta, priors.Sigma_eta) + float(np.sum(pois))

    chol = np.linalg.cholesky(priors.Sigma_eta)
    state.eta = _do_mh_vector(state, "eta", state.eta, logtarget, rng, adapt, iteration, chol=chol)


def _has_intercept(model):
    return bool(np.all(model.covariates.design[: model.T, 0] == 1.0))


def _update_level(state, model, data, priors, rng, adapt, iteration):
    """Joint ridge move: eta_0 += delta, alpha *= e^-delta, path *= e^-delta.

    The observation side is exactly invariant (kappa * w unchanged), so the
    acceptance ratio reduces to the alpha/eta priors, the latent transitions,
    and the log-Jacobian -delta J (1 + T) of the rescaling. This traverses the
    intensity-level ridge that the single-site updates cross only slowly.
    """
    if not _has_intercept(model):
        return
    key = "level"
    log_step = state.log_steps.setdefault(key, math.log(0.1))
    delta = math.exp(log_step) * rng.standard_normal()
    scale = math.exp(-delta)
    J = state.alpha.shape[0]
    c_path = state.scale_path(model)
    r0 = initial_rate(model, state.beta, state.scales)

    alpha_new = state.alpha * scale
    path_new = state.path * scale
    eta_new = state.eta.copy()
    eta_new[0] += delta

    a_rate = state.gamma * priors.b_alpha
    logr = (
        transition_loglik(path_new, alpha_new, state.beta, c_path, r0)
        - transition_loglik(state.path, state.alpha, state.beta, c_path, r0)
        + float(np.sum(_gamma_logpdf_vec(alpha_new, priors.a_alpha, a_rate)))
        - float(np.sum(_gamma_logpdf_vec(state.alpha, priors.a_alpha, a_rate)))
        + mvnormal_logpdf(eta_new, priors.mu_eta, priors.Sigma_eta)
        - mvnormal_logpdf(state.eta, priors.mu_eta, priors.Sigma_eta)
        - delta * J * (1.0 + model.T)
    )
    prob = math.exp(min(0.0, logr)) if np.isfinite(logr) else (1.0 if logr > 0 else 0.0)
    if rng.random() < prob:
        state.alpha = alpha_new
        state.path = path_new
        state.eta = eta_new
    state.record_proposal(key, prob)
    if adapt:
        state.log_steps[key] = adapt_step(prob, log_step, iteration, SCALAR_TARGET_RATE)


def _scale_prior_logpdf(state, model, priors, scales):
    if model.scale_kind == "constant":
        return gamma_logpdf(float(scales[0]), priors.a_c, priors.b_c)
    a_c = state.r * state.r / priors.sigma2_c
    b_c = state.r / priors.sigma2_c
    return float(np.sum(_gamma_logpdf_vec(scales, a_c, b_c)))


def _update_persistence_ridge(state, model, data, priors, rng, adapt, iteration):
    """Joint ridge move: beta *= e^delta, every scale *= e^-delta.

    All rho_t = beta c_t are preserved, so the move slides along the
    persistence/innovation-scale ridge the single-site updates cross slowly.
    Only the transition likelihood and the beta/scale priors enter the ratio;
    the log-Jacobian is delta (1 - n_scales).
    """
    key = "ridge"
    log_step = state.log_steps.setdefault(key, math.log(0.2))
    delta = math.exp(log_step) * rng.standard_normal()
    beta_new = state.beta * math.exp(delta)
    scales_new = state.scales * math.exp(-delta)
    c_path_new = ScaleRegime(
        kind=model.scale_kind, values=scales_new, start_month=model.start_month
    ).scale_path(model.T)
    c_path = state.scale_path(model)
    logr = (
        transition_loglik(
            state.path, state.alpha, beta_new, c_path_new,
            initial_rate(model, beta_new, scales_new),
        )
        - transition_loglik(
            state.path, state.alpha, state.beta, c_path,
            initial_rate(model, state.beta, state.scales),
        )
        + gamma_logpdf(beta_new, priors.a_beta, state.gamma * priors.b_beta)
        - gamma_logpdf(state.beta, priors.a_beta, state.gamma * priors.b_beta)
        + _scale_prior_logpdf(state, model, priors, scales_new)
        - _scale_prior_logpdf(state, model, priors, state.scales)
        + delta * (1.0 - state.scales.shape[0])
    )
    prob = math.exp(min(0.0, logr)) if np.isfinite(logr) else (1.0 if logr > 0 else 0.0)
    if rng.random() < prob:
        state.beta = beta_new
        state.scales = scales_new
    state.record_proposal(key, prob)
    if adapt:
        state.log_steps[key] = adapt_step(prob, log_step, iteration, SCALAR_TARGET_RATE)


def _update_weight_scale(state, model, data, priors, rng, adapt, iteration):
    """Joint ridge move: path *= s, scales *= s, beta /= s with s = e^delta.

    The latent transition density is exactly invariant under this rescaling
    (gamma scale family; every rho_t is unchanged), so the observation layer
    and the beta/scale priors decide the acceptance. The log-Jacobian is
    delta (T J + n_scales - 1); the transition terms recomputed inside
    `loglik` cancel it for the path block, so both are kept for clarity.
    """
    key = "wscale"
    log_step = state.log_steps.setdefault(key, math.log(0.1))
    delta = math.exp(log_step) * rng.standard_normal()
    s = math.exp(delta)
    cand = ChainState(
        alpha=state.alpha,
        beta=state.beta / s,
        scales=state.scales * s,
        gamma=state.gamma,
        phi=state.phi,
        eta=state.eta,
        r=state.r,
        path=state.path * s,
        alloc=state.alloc,
    )
    n_scales = state.scales.shape[0]
    logr = (
        complete_loglik(cand, model, data)
        - complete_loglik(state, model, data)
        + gamma_logpdf(cand.beta, priors.a_beta, state.gamma * priors.b_beta)
        - gamma_logpdf(state.beta, priors.a_beta, state.gamma * priors.b_beta)
        + _scale_prior_logpdf(state, model, priors, cand.scales)
        - _scale_prior_logpdf(state, model, priors, state.scales)
        + delta * (model.T * state.alpha.shape[0] + n_scales - 1.0)
    )
    prob = math.exp(min(0.0, logr)) if np.isfinite(logr) else (1.0 if logr > 0 else 0.0)
    if rng.random() < prob:
        state.beta = cand.beta
        state.scales = cand.scales
        state.path = cand.path
    state.record_proposal(key, prob)
    if adapt:
        state.log_steps[key] = adapt_step(prob, log_step, iteration, SCALAR_TARGET_RATE)


def update_parameters(state, model, data, priors, rng, adapt=False, iteration=1):
    """Step 1 of the sweep: gamma exactly, everything else by adaptive MH."""
    state.gamma = update_gamma(state, priors, rng)
    _update_alpha(state, model, priors, rng, adapt, iteration)
    _update_beta(state, model, priors, rng, adapt, iteration)
    _update_scales(state, model, priors, rng, adapt, iteration)
    if model.scale_kind != "constant":
        _update_r(state, model, priors, rng, adapt, iteration)
    _update_phi(state, model, data, priors, rng, adapt, iteration)
    _update_eta(state, model, data, priors, rng, adapt, iteration)
    _update_level(state, model, data, priors, rng, adapt, iteration)
    _update_persistence_ridge(state, model, data, priors, rng, adapt, iteration)
    _update_weight_scale(state, model, data, priors, rng, adapt, iteration)


def particle_gibbs_step(state, model, data, config, priors, rng, adapt=False, iteration=1):
    """One full particle-Gibbs sweep (parameters, allocations, latent blocks)."""
    update_parameters(state, model, data, priors, rng, adapt, iteration)
    if data is not None and data.total_events > 0:
        state.alloc = sample_allocations(state, model, data, rng)
    for cells in config.blocks:
        state.path[:, cells] = csmc_block(
            cells, state.path[:, cells], state, model, data, config, rng
        )
    return state


def init_state(model, priors, rng, from_prior=False):
    """Build a feasible starting state.

    Default: prior means with the stationarity constraint enforced; with
    `from_prior`, an exact draw from the (constrained) prior instead.
    """
    J = model.grid.n_cells
    m = model.covariates.m
    if from_prior:
        for _ in range(10_000):
            gamma = rng.gamma(priors.a_gamma, 1.0 / priors.b_gamma)
            alpha = rng.gamma(priors.a_alpha, 1.0 / (gamma * priors.b_alpha), size=J)
            beta = rng.gamma(priors.a_beta, 1.0 / (gamma * priors.b_beta))
            if model.scale_kind == "constant":
                r = None
                scales = np.array([rng.gamma(priors.a_c, 1.0 / priors.b_c)])
                if beta * scales[0] >= 1.0:
                    continue  # the constant-regime prior is truncated to rho < 1
            else:
                r = rng.gamma(priors.a_r, 1.0 / priors.b_r)
                a_c = r * r / priors.sigma2_c
                scales = rng.gamma(a_c, priors.sigma2_c / r, size=model.n_scales)
                scales = np.maximum(scales, TINY_WEIGHT)
            phi = rng.gamma(priors.a_phi, 1.0 / priors.b_phi)
            eta = priors.mu_eta + np.linalg.cholesky(priors.Sigma_eta) @ rng.standard_normal(m)
            break
        else:
            raise InvalidParameterError("could not draw a prior state with rho < 1")
    else:
        gamma = priors.a_gamma / priors.b_gamma
        alpha = np.full(J, priors.a_alpha / (gamma * priors.b_alpha))
        beta = priors.a_beta / (gamma * priors.b_beta)
        if model.scale_kind == "constant":
            r = None
            c0 = priors.a_c / priors.b_c
            if beta * c0 >= 1.0:
                c0 = 0.5 / beta
            scales = np.array([c0])
        else:
            r = priors.a_r / priors.b_r
            scales = np.full(model.n_scales, r)
        phi = priors.a_phi / priors.b_phi
        eta = priors.mu_eta.copy()

    state = ChainState(
        alpha=alpha, beta=beta, scales=scales, gamma=gamma, phi=phi, eta=eta, r=r
    )
    r0 = initial_rate(model, state.beta, state.scales)
    w1 = rng.gamma(state.alpha, 1.0 / r0)
    w1 = np.where(state.alpha > 0.0, np.maximum(w1, TINY_WEIGHT), 0.0)
    c_path = state.scale_path(model)
    path = np.empty((model.T, J))
    path[0] = w1
    for t in range(1, model.T):
        v = rng.poisson(state.beta * path[t - 1])
        a = state.alpha + v
        draw = rng.gamma(a, c_path[t])
        path[t] = np.where(a > 0.0, np.maximum(draw, TINY_WEIGHT), 0.0)
    state.path = path
    return state


def _record(state, model, data, iteration, store_latent):
    rec = {
        "iteration": int(iteration),
        "parameters": {
            "alpha": state.alpha.tolist(),
            "beta": float(state.beta),
            "scales": state.scales.tolist(),
            "gamma": float(state.gamma),
            "phi": float(state.phi),
            "r": None if state.r is None else float(state.r),
            "eta": state.eta.tolist(),
        },
        "loglik": float(complete_loglik(state, model, data)),
        "lambda_total": lambda_totals(state, model).tolist(),
        "w_last": state.path[-1].tolist(),
    }
    if store_latent:
        rec["latent"] = state.path.tolist()
    return rec


def run_chain(
    data,
    model,
    priors,
    config,
    seed,
    iterations=20_000,
    burn_in=10_000,
    thin=10,
    store_latent=False,
    adapt=True,
    init=None,
):
    """Run one particle-Gibbs chain and return (records, summary).

    Adaptation runs during burn-in only; records are kept every `thin`
    post-burn-in sweeps. The chain is a single sequential process driven by a
    stream derived from `seed`, so results are reproducible regardless of
    worker settings.
    """
    if iterations <= burn_in:
        raise InvalidParameterError("iterations must exceed burn_in")
    config.validate_partition(model.grid.n_cells)
    rng = substream(seed, 0)
    state = init_state(model, priors, rng) if init is None else init
    if data is not None and data.total_events > 0:
        state.alloc = sample_allocations(state, model, data, rng)
    else:
        state.alloc = [np.empty(0, dtype=np.int64) for _ in range(model.T)]
    records = []
    for it in range(1, iterations + 1):
        particle_gibbs_step(
            state, model, data, config, priors, rng, adapt=adapt and it <= burn_in, iteration=it
        )
        if it > burn_in and (it - burn_in) % thin == 0:
            records.append(_record(state, model, data, it, store_latent))
    summary = summarize(records, state, model, data)
    return records, summary


def effective_sample_size(x):
    """ESS via the autocovariance with Geyer's initial positive-sequence rule."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4 or np.allclose(x, x[0]):
        return float(n)
    x = x - x.mean()
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    if acov[0] <= 0.0:
        return float(n)
    rho = acov / acov[0]
    # sum consecutive pairs; stop at the first non-positive pair
    tau = 1.0
    for k in range(1, n - 1, 2):
        pair = rho[k] + rho[k + 1] if k + 1 < n else rho[k]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    return float(min(n, n / tau))


def _quantiles(xs):
    q = np.quantile(xs, [0.025, 0.5, 0.975])
    return {"q025": float(q[0]), "q500": float(q[1]), "q975": float(q[2])}


def summarize(records, state, model, data):
    """Posterior means, quantiles, acceptance rates and ESS per parameter."""
    if not records:
        return {"n_draws": 0, "acceptance": state.acceptance_rates()}
    series = {}
    for rec in records:
        p = rec["parameters"]
        series.setdefault("beta", []).append(p["beta"])
        series.setdefault("gamma", []).append(p["gamma"])
        series.setdefault("phi", []).append(p["phi"])
        if p["r"] is not None:
            series.setdefault("r", []).append(p["r"])
        for i, v in enumerate(p["eta"]):
            series.setdefault(f"eta_{i}", []).append(v)
        for i, v in enumerate(p["scales"]):
            series.setdefault(f"scale_{i}", []).append(v)
        series.setdefault("alpha_total", []).append(float(np.sum(p["alpha"])))
    out = {"n_draws": len(records), "parameters": {}, "acceptance": state.acceptance_rates()}
    for name, xs in series.items():
        xs = np.asarray(xs)
        out["parameters"][name] = {
            "mean": float(xs.mean()),
            **_quantiles(xs),
            "ess": effective_sample_size(xs),
        }
    alpha_draws = np.array([rec["parameters"]["alpha"] for rec in records])
    out["alpha_mean"] = alpha_draws.mean(axis=0).tolist()
    return out


def forecast(records, model, horizon, seed, holdout_counts=None, priors=None):
    """Posterior-predictive count summaries over `horizon` future steps.

    For each retained draw, the latent path is advanced by the prior
    noncentral-gamma transitions from its stored final state and counts are
    drawn from the observation layer; time-varying scales beyond T are drawn
    from their hierarchical prior using that draw's r. Returns per-horizon
    mean and quantiles, plus MSE/MAE against `holdout_counts` when given.
    """
    if horizon == 0:
        return {"horizons": [], "mean": [], "q025": [], "q500": [], "q975": []}
    if not records:
        raise NoDrawsError("forecast requires a nonempty draw archive")
    rng = substream(seed, 99)
    masses_cache = {}
    T = model.T
    cov = model.covariates.extend(T + horizon)
    counts = np.empty((len(records), horizon))
    for i, rec in enumerate(records):
        p = rec["parameters"]
        alpha = np.asarray(p["alpha"])
        beta = p["beta"]
        phi = p["phi"]
        eta = np.asarray(p["eta"])
        scales = np.asarray(p["scales"])
        w = np.asarray(rec["w_last"])
        key = round(phi, 14)
        if key not in masses_cache:
            g = model.grid
            masses_cache[key] = backend.rect_mass(
                g.atoms, g.window.x0, g.window.x1, g.window.y0, g.window.y1, phi
            )
        masses = masses_cache[key]
        kappas = np.exp(cov.design[T : T + horizon] @ eta)
        for k in range(1, horizon + 1):
            t_new = T + k
            if model.scale_kind == "constant":
                c_new = scales[0]
            elif model.scale_kind == "monthly":
                slot = (model.start_month - 1 + t_new - 1) % 12 + 1
                c_new = scales[slot - 1]
            else:
                a_c = p["r"] ** 2 / priors.sigma2_c
                c_new = rng.gamma(a_c, priors.sigma2_c / p["r"])
            v = rng.poisson(beta * w)
            a = alpha + v
            draw = rng.gamma(a, c_new)
            w = np.where(a > 0.0, draw, 0.0)
            counts[i, k - 1] = rng.poisson(kappas[k - 1] * float(w @ masses))
    out = {
        "horizons": list(range(1, horizon + 1)),
        "mean": counts.mean(axis=0).tolist(),
        "q025": np.quantile(counts, 0.025, axis=0).tolist(),
        "q500": np.quantile(counts, 0.5, axis=0).tolist(),
        "q975": np.quantile(counts, 0.975, axis=0).tolist(),
    }
    if holdout_counts is not None:
        held = np.asarray(holdout_counts, dtype=float)[:horizon]
        pred = counts.mean(axis=0)[: held.shape[0]]
        err = pred - held
        out["mse"] = float(np.mean(err**2))
        out["mae"] = float(np.mean(np.abs(err)))
    return out
