import numpy as np
import pytest
from scipy import integrate

from gammashot import (
    CovariateModel,
    Grid,
    KernelSpec,
    MargParams,
    ModelSpec,
    PointSeries,
    Rect,
    ScaleRegime,
    intensity_at,
    intensity_total,
    kappa_eval,
    kappa_path,
    kernel_density,
    kernel_mass,
    simulate_points,
    simulate_series,
)
from gammashot.errors import InvalidParameterError

from helpers import assert_within_se, se_mean, se_prob

WIN = Rect(0.0, 4.0, 0.0, 4.0)


class TestKernel:
    def test_mode_value(self):
        assert kernel_density((1.0, 1.0), (1.0, 1.0), 1.0) == pytest.approx(
            1.0 / (2.0 * np.pi), rel=1e-14
        )

    def test_one_sd_contour(self):
        phi = 0.7
        val = kernel_density((phi, 0.0), (0.0, 0.0), phi)
        assert val == pytest.approx(np.exp(-0.5) / (2 * np.pi * phi**2), rel=1e-13)

    def test_direct_formula(self):
        val = kernel_density((1.0, 0.0), (0.0, 0.0), 0.5)
        assert val == pytest.approx(np.exp(-2.0) / (2 * np.pi * 0.25), rel=1e-13)

    def test_spec_validation(self):
        with pytest.raises(InvalidParameterError):
            KernelSpec(phi=0.0, window=WIN)

    def test_mass_whole_plane(self):
        rect = Rect(-np.inf, np.inf, -np.inf, np.inf)
        assert kernel_mass(rect, (0.3, 0.7), 0.5) == pytest.approx(1.0, abs=1e-15)

    def test_mass_ten_sd(self):
        phi = 0.2
        rect = Rect(-10 * phi, 10 * phi, -10 * phi, 10 * phi)
        assert kernel_mass(rect, (0.0, 0.0), phi) == pytest.approx(1.0, abs=1e-8)

    def test_mass_quadrant(self):
        rect = Rect(0.0, np.inf, 0.0, np.inf)
        assert kernel_mass(rect, (0.0, 0.0), 1.3) == pytest.approx(0.25, abs=1e-10)

    def test_mass_matches_quadrature(self):
        phi, theta = 0.6, (1.1, 2.3)
        rect = Rect(0.5, 2.0, 1.0, 3.0)
        val, _ = integrate.dblquad(
            lambda y, x: kernel_density((x, y), theta, phi), rect.x0, rect.x1, rect.y0, rect.y1
        )
        assert kernel_mass(rect, theta, phi) == pytest.approx(val, rel=1e-9)


class TestCovariates:
    def test_zero_eta(self):
        model = CovariateModel.dummy(12)
        assert kappa_eval(model, np.zeros(3), 5) == 1.0

    def test_dummy_example_values(self):
        # start in January: step 10 is October, inside the dry season
        model = CovariateModel.dummy(12, start_month=1)
        eta = np.array([0.0, 0.04, 1.367])
        assert kappa_eval(model, eta, 10) == pytest.approx(np.exp(0.4 + 1.367), rel=1e-12)
        # step 3 (March) is wet: dummy column off
        assert kappa_eval(model, eta, 3) == pytest.approx(np.exp(0.12), rel=1e-12)

    def test_harmonic_design(self):
        freqs = (0.086, 0.168, 0.254, 0.336)
        model = CovariateModel.harmonic(10, freqs)
        assert model.m == 10
        t = 4
        row = model.design[t - 1]
        assert row[0] == 1.0 and row[1] == t
        for k, w in enumerate(freqs):
            assert row[2 + 2 * k] == pytest.approx(np.sin(2 * np.pi * w * t))
            assert row[3 + 2 * k] == pytest.approx(np.cos(2 * np.pi * w * t))

    def test_frequency_validation(self):
        with pytest.raises(InvalidParameterError):
            CovariateModel.harmonic(5, (0.1, 0.2, 0.3, 0.6))

    def test_t_out_of_range(self):
        model = CovariateModel.dummy(6)
        with pytest.raises(IndexError):
            kappa_eval(model, np.zeros(3), 7)

    def test_extend_rebuilds(self):
        model = CovariateModel.dummy(6, start_month=3)
        ext = model.extend(18)
        assert ext.T == 18
        assert np.allclose(ext.design[:6], model.design)


class TestIntensity:
    def test_zero_weights(self):
        grid = Grid.regular(WIN, 2, 2, masses=1.0)
        assert intensity_at((1.0, 1.0), np.zeros(4), 1.0, grid, 0.5) == 0.0
        assert intensity_total(np.zeros(4), 1.0, grid, 0.5) == 0.0

    def test_single_cell_mode(self):
        grid = Grid.regular(WIN, 1, 1, masses=1.0)
        val = intensity_at(tuple(grid.atoms[0]), np.array([2.0]), 1.0, grid, 1.0)
        assert val == pytest.approx(2.0 / (2 * np.pi), rel=1e-13)

    def test_brute_force_sum(self):
        grid = Grid.regular(WIN, 5, 4, masses=1.0)
        rng = np.random.default_rng(0)
        w = rng.gamma(1.0, 1.0, size=20)
        y = (1.7, 2.9)
        kappa, phi = 1.3, 0.45
        brute = kappa * sum(
            w[j] * kernel_density(y, tuple(grid.atoms[j]), phi) for j in range(20)
        )
        assert intensity_at(y, w, kappa, grid, phi) == pytest.approx(brute, rel=1e-12)

    def test_total_huge_window(self):
        win = Rect(-1e6, 1e6, -1e6, 1e6)
        grid = Grid.regular(win, 2, 2, masses=1.0)
        w = np.array([0.5, 1.5, 2.0, 0.1])
        assert intensity_total(w, 1.2, grid, 1.0) == pytest.approx(1.2 * w.sum(), rel=1e-8)

    def test_total_unit_mass(self):
        grid = Grid.regular(WIN, 2, 2, masses=1.0)
        w = np.array([0.0, 1.0, 0.0, 0.0])
        expected = 1.1 * kernel_mass(WIN, tuple(grid.atoms[1]), 0.6)
        assert intensity_total(w, 1.1, grid, 0.6) == pytest.approx(expected, rel=1e-13)

    def test_total_matches_quadrature(self):
        grid = Grid.regular(WIN, 2, 2, masses=1.0)
        rng = np.random.default_rng(1)
        w = rng.gamma(1.0, 1.0, size=4)
        phi, kappa = 0.8, 0.9
        val, _ = integrate.dblquad(
            lambda y, x: intensity_at((x, y), w, kappa, grid, phi),
            WIN.x0,
            WIN.x1,
            WIN.y0,
            WIN.y1,
            epsabs=1e-10,
            epsrel=1e-10,
        )
        assert intensity_total(w, kappa, grid, phi) == pytest.approx(val, rel=1e-6)


class TestSimulatePoints:
    def test_zero_weights_empty(self):
        grid = Grid.regular(WIN, 2, 2, masses=1.0)
        locs, alloc = simulate_points(np.zeros(4), 1.0, grid, 0.5, np.random.default_rng(0))
        assert locs.shape == (0, 2)
        assert alloc.shape == (0,)

    def test_single_cell_allocation(self):
        grid = Grid.regular(WIN, 1, 1, masses=1.0)
        locs, alloc = simulate_points(
            np.array([50.0]), 1.0, grid, 0.5, np.random.default_rng(1)
        )
        assert np.all(alloc == 0)
        assert np.all(grid.window.contains(locs))

    def test_count_mean_and_allocation_frequencies(self):
        grid = Grid.regular(WIN, 2, 2, masses=1.0)
        w = np.array([0.4, 1.2, 0.0, 0.9])
        phi, kappa = 0.5, 1.3
        total = intensity_total(w, kappa, grid, phi)
        rng = np.random.default_rng(2)
        reps = 2000
        counts = np.empty(reps)
        cells = []
        for i in range(reps):
            locs, alloc = simulate_points(w, kappa, grid, phi, rng)
            counts[i] = locs.shape[0]
            cells.append(alloc)
        assert_within_se(counts.mean(), total, se_mean(counts), 3, "E(N)")
        cells = np.concatenate(cells)
        from gammashot import backend

        masses = backend.rect_mass(grid.atoms, WIN.x0, WIN.x1, WIN.y0, WIN.y1, phi)
        probs = w * masses / (w * masses).sum()
        n = cells.shape[0]
        for j in range(4):
            p_hat = np.mean(cells == j)
            if probs[j] == 0.0:
                assert p_hat == 0.0
            else:
                assert_within_se(p_hat, probs[j], se_prob(p_hat, n), 3, f"cell {j}")

    def test_locations_always_inside_window(self):
        # tight window relative to the bandwidth exercises the rejection loop
        win = Rect(0.0, 0.5, 0.0, 0.5)
        grid = Grid.regular(win, 2, 2, masses=1.0)
        rng = np.random.default_rng(3)
        locs, _ = simulate_points(np.full(4, 30.0), 1.0, grid, 1.0, rng)
        assert locs.shape[0] > 0
        assert np.all(win.contains(locs))


class TestSimulateSeries:
    def _spec(self, T, eta=None):
        cov = CovariateModel.dummy(T)
        eta = np.zeros(3) if eta is None else eta
        return ModelSpec(
            beta=1.0, scales=ScaleRegime.constant(0.5), phi=0.4, covariates=cov, eta=eta
        )

    def test_zero_kappa_gives_empty_pattern(self):
        grid = Grid.regular(WIN, 2, 2, masses=1.0)
        spec = self._spec(4, eta=np.array([-746.0, 0.0, 0.0]))
        _, series = simulate_series(grid, spec, 4, np.random.default_rng(4))
        assert int(series.counts.sum()) == 0

    def test_fixed_seed_bit_identical(self):
        grid = Grid.regular(WIN, 2, 2, masses=1.0)
        spec = self._spec(5)
        p1, s1 = simulate_series(grid, spec, 5, np.random.default_rng(42))
        p2, s2 = simulate_series(grid, spec, 5, np.random.default_rng(42))
        assert np.array_equal(p1, p2)
        for a, b in zip(s1.events, s2.events):
            assert np.array_equal(a, b)
        for a, b in zip(s1.alloc, s2.alloc):
            assert np.array_equal(a, b)

    def test_events_inside_window(self):
        grid = Grid.regular(WIN, 3, 3, masses=1.0)
        spec = self._spec(6)
        _, series = simulate_series(grid, spec, 6, np.random.default_rng(5))
        for ev in series.events:
            assert np.all(grid.window.contains(ev)) if ev.size else True

    def test_stationary_count_mean_matches_closed_form(self):
        # E N_t(B) = c kappa/(1-rho) sum_j alpha_j K(B, theta_j), kappa = 1
        alpha, beta, c, phi = 0.8, 1.0, 0.5, 0.5
        grid = Grid.regular(WIN, 2, 2, masses=alpha)
        cov = CovariateModel.custom(np.ones((1, 1)))
        spec = ModelSpec(
            beta=beta, scales=ScaleRegime.constant(c), phi=phi, covariates=cov,
            eta=np.zeros(1),
        )
        rng = np.random.default_rng(6)
        from gammashot import backend

        masses_full = backend.rect_mass(grid.atoms, WIN.x0, WIN.x1, WIN.y0, WIN.y1, phi)
        quad = Rect(0.0, 2.0, 0.0, 2.0)
        masses_quad = backend.rect_mass(grid.atoms, quad.x0, quad.x1, quad.y0, quad.y1, phi)
        rho = beta * c
        expect_full = c / (1 - rho) * (grid.masses @ masses_full)
        expect_quad = c / (1 - rho) * (grid.masses @ masses_quad)
        reps = 4000
        n_full = np.empty(reps)
        n_quad = np.empty(reps)
        for i in range(reps):
            _, series = simulate_series(grid, spec, 1, rng)
            ev = series.events[0]
            n_full[i] = ev.shape[0]
            n_quad[i] = int(np.sum(quad.contains(ev))) if ev.size else 0
        assert_within_se(n_full.mean(), expect_full, se_mean(n_full), 4, "window count")
        assert_within_se(n_quad.mean(), expect_quad, se_mean(n_quad), 4, "quadrant count")


class TestPointSeries:
    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            PointSeries(events=[np.zeros((2, 2))], alloc=[np.array([0])])

    def test_counts(self):
        s = PointSeries.empty(3)
        assert list(s.counts) == [0, 0, 0]
