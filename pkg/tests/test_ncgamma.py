import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from gammashot import (
    NcGammaParams,
    ncgamma_logpdf,
    ncgamma_moments,
    sample_gamma,
    sample_ncgamma,
    sample_ncgamma_vec,
    sample_poisson,
)
from gammashot.errors import InvalidParameterError

from helpers import assert_within_se, se_mean, se_prob, se_var

# frozen against a 60-digit mpmath summation of 1e4 mixture terms
LOGPDF_ORACLE = {
    (0.7, 1.5, 2.0, 0.8): -1.6232377556973663875,
    (3.2, 0.5, 7.5, 0.3): -1.5232239728928666372,
    (0.05, 0.0, 1.5, 1.0): -1.1072663804474669358,
}


def draws_ncgamma(p, n, rng):
    return sample_ncgamma_vec(np.full(n, p.delta), np.full(n, p.beta), p.c, rng)


class TestValidation:
    def test_bad_params(self):
        with pytest.raises(InvalidParameterError):
            NcGammaParams(delta=-0.1, beta=1.0, c=1.0)
        with pytest.raises(InvalidParameterError):
            NcGammaParams(delta=1.0, beta=-1.0, c=1.0)
        with pytest.raises(InvalidParameterError):
            NcGammaParams(delta=1.0, beta=1.0, c=0.0)
        NcGammaParams(delta=0.0, beta=0.0, c=1.0)  # delta = 0 is legal

    def test_gamma_poisson_errors(self):
        rng = np.random.default_rng(0)
        with pytest.raises(InvalidParameterError):
            sample_gamma(0.0, 1.0, rng)
        with pytest.raises(InvalidParameterError):
            sample_gamma(1.0, 0.0, rng)
        with pytest.raises(InvalidParameterError):
            sample_poisson(-1e-9, rng)

    def test_negative_y(self):
        with pytest.raises(InvalidParameterError):
            ncgamma_logpdf(-0.5, NcGammaParams(1.0, 1.0, 1.0))


class TestSamplers:
    def test_gamma_exponential_case(self):
        rng = np.random.default_rng(1)
        x = rng.gamma(1.0, 1.0, size=10**6)
        assert_within_se(x.mean(), 1.0, se_mean(x), 3, "exp mean")
        assert_within_se(x.var(ddof=1), 1.0, se_var(x), 3, "exp var")

    def test_gamma_shape_rate_moments(self):
        rng = np.random.default_rng(2)
        x = np.array([sample_gamma(2.0, 4.0, rng) for _ in range(2 * 10**5)])
        assert_within_se(x.mean(), 0.5, se_mean(x), 3, "gamma mean")
        assert_within_se(x.var(ddof=1), 0.125, se_var(x), 3, "gamma var")

    def test_gamma_small_shape_support(self):
        rng = np.random.default_rng(3)
        x = rng.gamma(0.1, 1.0, size=10**5)
        assert np.all(np.isfinite(x))
        # underflow to exact zero is possible at tiny shapes but must be rare
        assert np.mean(x > 0.0) > 0.999

    def test_poisson_degenerate_and_moments(self):
        rng = np.random.default_rng(4)
        assert sample_poisson(0.0, rng) == 0
        assert sample_poisson(1e-12, rng) == 0
        x = rng.poisson(3.0, size=10**6).astype(float)
        assert_within_se(x.mean(), 3.0, se_mean(x), 3, "poisson mean")
        assert_within_se(x.var(ddof=1), 3.0, se_var(x), 3, "poisson var")

    def test_ncgamma_beta0_is_gamma(self):
        rng = np.random.default_rng(5)
        p = NcGammaParams(2.0, 0.0, 0.5)
        x = draws_ncgamma(p, 10**6, rng)
        assert_within_se(x.mean(), 1.0, se_mean(x), 3, "ncg beta0 mean")
        d = stats.kstest(x[:10**5], stats.gamma(a=2.0, scale=0.5).cdf)
        assert d.pvalue > 0.01

    def test_ncgamma_zero_atom(self):
        rng = np.random.default_rng(6)
        p = NcGammaParams(0.0, 1.5, 1.0)
        x = draws_ncgamma(p, 10**6, rng)
        p_hat = np.mean(x == 0.0)
        expected = np.exp(-1.5)
        assert_within_se(p_hat, expected, se_prob(p_hat, x.shape[0]), 3, "atom mass")

    def test_ncgamma_moments_law(self):
        rng = np.random.default_rng(7)
        p = NcGammaParams(2.0, 3.0, 0.5)
        x = draws_ncgamma(p, 10**6, rng)
        assert_within_se(x.mean(), 2.5, se_mean(x), 3, "ncg mean")
        assert_within_se(x.var(ddof=1), 2.0, se_var(x), 3, "ncg var")

    def test_scalar_sampler_zero_case(self):
        rng = np.random.default_rng(8)
        p = NcGammaParams(0.0, 0.0, 1.0)
        assert sample_ncgamma(p, rng) == 0.0


class TestLogpdf:
    def test_pure_gamma_case(self):
        p = NcGammaParams(2.0, 0.0, 0.5)
        assert ncgamma_logpdf(1.0, p) == pytest.approx(np.log(4.0) - 2.0, abs=1e-12)

    def test_atom_log_mass(self):
        assert ncgamma_logpdf(0.0, NcGammaParams(0.0, 2.0, 1.0)) == -2.0

    def test_frozen_oracle_values(self):
        for (y, d, b, c), expected in LOGPDF_ORACLE.items():
            got = ncgamma_logpdf(y, NcGammaParams(d, b, c))
            assert got == pytest.approx(expected, rel=1e-10)

    def test_boundary_limits_at_zero(self):
        assert ncgamma_logpdf(0.0, NcGammaParams(2.0, 1.0, 1.0)) == -np.inf
        assert ncgamma_logpdf(0.0, NcGammaParams(1.0, 2.0, 0.5)) == pytest.approx(
            -2.0 - np.log(0.5)
        )
        assert ncgamma_logpdf(0.0, NcGammaParams(0.5, 0.01, 1.0)) == np.inf
        # delta = 0, y > 0 excludes the atom component
        val = ncgamma_logpdf(1e-9, NcGammaParams(0.0, 1.0, 1.0))
        assert np.isfinite(val)

    def test_beta_to_zero_continuity(self):
        p = NcGammaParams(1.7, 1e-12, 0.6)
        ys = np.array([0.05, 0.3, 1.0, 2.5, 8.0])
        pure = stats.gamma(a=1.7, scale=0.6).logpdf(ys)
        got = ncgamma_logpdf(ys, p)
        assert np.max(np.abs(got - pure)) < 1e-8


class TestMoments:
    @pytest.mark.parametrize(
        "params,expected",
        [
            ((1.0, 0.0, 1.0), (1.0, 1.0)),
            ((0.0, 4.0, 0.25), (1.0, 0.5)),
            ((2.0, 3.0, 0.5), (2.5, 2.0)),
        ],
    )
    def test_closed_forms(self, params, expected):
        mean, var = ncgamma_moments(NcGammaParams(*params))
        assert (mean, var) == pytest.approx(expected, rel=1e-14)


PARAM_GRID = [
    (0.5, 0.5, 1.0),
    (1.0, 1.0, 0.5),
    (2.0, 0.0, 0.25),
    (2.0, 3.0, 0.5),
    (0.0, 1.5, 1.0),
    (0.0, 4.0, 0.25),
    (3.5, 8.0, 0.1),
    (1.0, 10.0, 2.0),
    (5.0, 0.5, 0.8),
    (0.2, 2.0, 1.5),
]


class TestInvariants:
    @pytest.mark.parametrize("d,b,c", [(2.0, 3.0, 0.5), (1.5, 0.5, 1.0), (0.7, 2.0, 0.3)])
    def test_density_normalises(self, d, b, c):
        p = NcGammaParams(d, b, c)
        mean, var = ncgamma_moments(p)
        ymax = mean + 20.0 * np.sqrt(var)
        total, err = integrate.quad(
            lambda y: np.exp(ncgamma_logpdf(y, p)), 0.0, ymax, limit=300
        )
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_density_normalises_with_atom(self):
        p = NcGammaParams(0.0, 2.0, 1.0)
        mean, var = ncgamma_moments(p)
        ymax = mean + 20.0 * np.sqrt(var)
        total, _ = integrate.quad(
            lambda y: np.exp(ncgamma_logpdf(y, p)), 1e-300, ymax, limit=300
        )
        assert total + np.exp(-2.0) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("d,b,c", [(2.0, 3.0, 0.5), (0.0, 1.5, 1.0), (1.0, 1.0, 0.5)])
    def test_sampler_matches_density_cdf(self, d, b, c):
        p = NcGammaParams(d, b, c)
        rng = np.random.default_rng(11)
        x = np.sort(draws_ncgamma(p, 10**5, rng))
        mean, var = ncgamma_moments(p)
        ymax = max(float(x[-1]), mean + 12.0 * np.sqrt(var)) * 1.01
        grid = np.linspace(1e-12, ymax, 40001)
        pdf = np.exp(ncgamma_logpdf(grid, p))
        cdf = integrate.cumulative_trapezoid(pdf, grid, initial=0.0)
        if d == 0.0:
            cdf = cdf + np.exp(-b)
        # evaluate |F_n - F| on the dense grid (both right-continuous, so the
        # delta = 0 atom at zero is handled consistently)
        ecdf = np.searchsorted(x, grid, side="right") / x.shape[0]
        ks = np.max(np.abs(ecdf - cdf))
        assert ks < 0.01

    def test_moment_formulas_across_grid(self):
        rng = np.random.default_rng(12)
        n = 10**6
        for d, b, c in PARAM_GRID:
            p = NcGammaParams(d, b, c)
            mean, var = ncgamma_moments(p)
            x = draws_ncgamma(p, n, rng)
            assert_within_se(x.mean(), mean, se_mean(x), 4, f"mean {p}")
            assert_within_se(x.var(ddof=1), var, se_var(x), 4, f"var {p}")


@settings(max_examples=60, deadline=None)
@given(
    y=st.floats(1e-6, 50.0),
    d=st.floats(0.0, 8.0),
    b=st.floats(0.0, 30.0),
    c=st.floats(0.05, 5.0),
)
def test_backends_agree(y, d, b, c):
    """The numba and numpy series evaluations are the same function."""
    from gammashot import _kernels_nb, _kernels_np

    a = _kernels_np.ncg_logpdf(y, d, b, c)
    b2 = _kernels_nb.ncg_logpdf(y, d, b, c)
    assert a == pytest.approx(b2, rel=1e-10, abs=1e-12)
