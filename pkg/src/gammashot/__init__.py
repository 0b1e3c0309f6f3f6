"""Spatiotemporal gamma shot-noise Cox processes.

Simulation of latent measure-valued autoregressive gamma dynamics and their
driven point patterns, closed-form moment/correlation analytics, and Bayesian
inference via blocked particle Gibbs with conditional SMC.
"""

from .analytics import (
    ObsModel,
    count_cov,
    count_mean,
    count_moment,
    cv_field,
    fit_diagnostics,
    intensity_d1,
    iqr_norm,
    pair_correlation,
    product_density_d2,
    stirling2,
    w_cov,
    w_mean,
)
from .backend import USING_NUMBA
from .chain import (
    effective_sample_size,
    forecast,
    init_state,
    particle_gibbs_step,
    run_chain,
)
from .inference import (
    ChainState,
    FitData,
    InferenceModel,
    Priors,
    SmcConfig,
    adapt_step,
    complete_loglik,
    sample_allocations,
    update_gamma,
)
from .latent import (
    Grid,
    MargParams,
    Rect,
    ScaleRegime,
    conditional_mean,
    lag_params,
    lag_params_seq,
    laplace_functional_exact,
    laplace_functional_mc,
    simulate_statespace,
    simulate_thinning,
    stationary_init,
    substream,
)
from .ncgamma import (
    NcGammaParams,
    ncgamma_logpdf,
    ncgamma_moments,
    sample_gamma,
    sample_ncgamma,
    sample_ncgamma_vec,
    sample_poisson,
)
from .observe import (
    CovariateModel,
    KernelSpec,
    ModelSpec,
    PointSeries,
    intensity_at,
    intensity_total,
    kappa_eval,
    kappa_path,
    kernel_density,
    kernel_mass,
    simulate_points,
    simulate_series,
)
from .smc import csmc_block

__version__ = "0.1.0"
