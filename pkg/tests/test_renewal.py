
import numpy as np
import pytest
from scipy import stats

from renewal_lab import (
    Exponential,
    Gamma,
    Grid,
    GridFunction,
    Uniform,
    convolve_measure_function,
    convolve_measures,
    forward_recurrence_cdf,
    forward_recurrence_density,
    linear_forcing,
    measure_from_distribution,
    renewal_measure,
    solve_renewal_equation,
    tv_to_stationary,
)
from renewal_lab.compensator import sample_forward_recurrence
from renewal_lab.errors import HorizonExceededError, StepTooCoarseError
from renewal_lab.renewal import default_grid, default_recurrence_grid


def small_grid(dist, horizon_means=30.0, points_per_mean=100):
    return Grid(dist.mean() / points_per_mean, int(points_per_mean * horizon_means))


class TestRenewalMeasure:
    def test_atom_is_one(self, dist):
        phi = renewal_measure(dist, small_grid(dist))
        assert phi.atom0 == 1.0
        assert phi.cumulative()[0] == 1.0

    def test_exponential_closed_form(self):
        # Poisson: renewal function 1 + t, renewal density identically 1
        d = Exponential(1.0)
        grid = small_grid(d)
        phi = renewal_measure(d, grid)
        assert np.max(np.abs(phi.cumulative() - (1.0 + grid.nodes()))) < 5.0 * grid.step
        assert np.max(np.abs(phi.density - 1.0)) < 1e-4

    def test_gamma_closed_form(self):
        # transform inversion: Phi([0,t]) = 1 + t/2 - (1 - e^{-2t})/4
        d = Gamma(2.0, 1.0)
        grid = small_grid(d)
        phi = renewal_measure(d, grid)
        closed = 1.0 + grid.nodes() / 2.0 - (1.0 - np.exp(-2.0 * grid.nodes())) / 4.0
        assert np.max(np.abs(phi.cumulative() - closed)) < 5.0 * grid.step

    def test_matches_truncated_series(self):
        # Phi = sum of convolution powers, summed far past the horizon count
        d = Gamma(2.0, 1.0)
        grid = Grid(d.mean() / 100.0, 100 * 10)
        phi = renewal_measure(d, grid)
        kernel = measure_from_distribution(d, grid)
        from renewal_lab.grids import GridMeasure

        total = GridMeasure.dirac(grid)
        power = GridMeasure.dirac(grid)
        for _ in range(40):
            power = convolve_measures(power, kernel)
            total = GridMeasure(grid, total.atom0 + power.atom0, total.density + power.density)
        assert np.max(np.abs(total.density - phi.density)) < 1e-6

    def test_step_too_coarse_rejected(self):
        from renewal_lab.renewal import volterra_renewal_density

        grid = Grid(0.25, 20)
        kernel = np.full(grid.n_nodes, 10.0)  # implicit diagonal 1 - 10 * h / 2 < 0
        with pytest.raises(StepTooCoarseError):
            volterra_renewal_density(kernel, kernel, grid)

    def test_mass_corrected_smooth_kernels_never_too_coarse(self):
        # rescaling bounds kernel(0) h / 2 by the in-horizon mass, so even an
        # absurdly coarse grid stays (uselessly but stably) solvable
        phi = renewal_measure(Exponential(10.0), Grid(0.25, 100))
        assert np.all(np.isfinite(phi.density))

    def test_elementary_renewal_ratio(self, dist):
        grid = small_grid(dist, horizon_means=55.0)
        phi = renewal_measure(dist, grid)
        t = 50.0 * dist.mean()
        ratio = phi.interval_mass(-1.0, t) / t
        assert abs(ratio - dist.rate()) / dist.rate() < 0.05

    def test_exponential_measure_convolved_with_own_density_is_constant(self):
        # e^-t + int_0^t e^-(t-u) du = 1 identically (not the tempting (1+t)e^-t)
        d = Exponential(1.0)
        grid = small_grid(d)
        phi = renewal_measure(d, grid)
        z = GridFunction.from_callable(grid, lambda x: np.exp(-x))
        out = convolve_measure_function(phi, z)
        assert np.max(np.abs(out.values - 1.0)) < 1e-4

    def test_subadditivity_window_bound(self, dist):
        # Phi((x-a-b, x-a]) <= Phi([0, b]) for all x
        grid = small_grid(dist)
        phi = renewal_measure(dist, grid)
        a, b = 0.4 * dist.mean(), 0.9 * dist.mean()
        bound = phi.interval_mass(-1.0, b)
        xs = np.linspace(0.0, grid.horizon, 97)
        worst = max(phi.interval_mass(x - a - b, x - a) for x in xs)
        assert worst <= bound + 1e-9


class TestRenewalEquation:
    def test_zero_forcing_gives_zero(self, dist):
        grid = small_grid(dist)
        z = GridFunction(grid, np.zeros(grid.n_nodes))
        sol = solve_renewal_equation(dist, z)
        assert np.max(np.abs(sol.Z.values)) == 0.0

    def test_linear_solution_all_kinds(self, dist):
        # the forcing m * int_0^t survival makes the solution exactly m t
        grid = small_grid(dist)
        sol = solve_renewal_equation(dist, linear_forcing(dist, grid))
        err = np.max(np.abs(sol.Z.values - dist.rate() * grid.nodes()))
        assert err < 100.0 * 10.0 * grid.step**2
        assert sol.residual < 1e-8

    def test_halving_step_shrinks_error(self, dist):
        errors = []
        for ppm in (100, 200):
            grid = Grid(dist.mean() / ppm, ppm * 30)
            sol = solve_renewal_equation(dist, linear_forcing(dist, grid))
            errors.append(np.max(np.abs(sol.Z.values - dist.rate() * grid.nodes())))
        assert errors[1] <= errors[0] / 3.0 + 1e-12

    def test_forcing_perturbation_moves_solution(self, dist):
        # sensitivity: an eps bump on one forcing node shifts the solution >= eps
        grid = small_grid(dist, horizon_means=10.0)
        z = linear_forcing(dist, grid)
        eps = 0.01
        bumped = z.values.copy()
        bumped[grid.count // 2] += eps
        base = solve_renewal_equation(dist, z)
        sol = solve_renewal_equation(dist, GridFunction(grid, bumped))
        assert np.max(np.abs(sol.Z.values - base.Z.values)) >= eps * (1.0 - 1e-12)

    def test_agrees_with_measure_convolution(self):
        d = Exponential(1.0)
        grid = small_grid(d, horizon_means=10.0)
        z = GridFunction.from_callable(grid, lambda x: np.where(x <= 1.0, 1.0, 0.0))
        sol = solve_renewal_equation(d, z)
        direct = convolve_measure_function(sol.phi, z)
        assert np.max(np.abs(direct.values - sol.Z.values)) < 5.0 * grid.step

    def test_indicator_forcing_against_fine_grid_oracle(self):
        # oracle: same quantity on a 10x finer grid, compared at shared nodes
        d = Exponential(1.0)
        coarse = Grid(0.02, 500)
        fine = Grid(0.002, 5000)
        z_fn = lambda x: np.where(np.asarray(x) <= 1.0, 1.0, 0.0)
        sol_c = solve_renewal_equation(d, GridFunction.from_callable(coarse, z_fn))
        sol_f = solve_renewal_equation(d, GridFunction.from_callable(fine, z_fn))
        diff = np.max(np.abs(sol_c.Z.values - sol_f.Z.values[::10]))
        assert diff < 3.0 * coarse.step

    def test_linear_forcing_limits(self, dist):
        grid = small_grid(dist, horizon_means=40.0)
        z = linear_forcing(dist, grid)
        assert z.values[0] == 0.0
        # m * int_0^inf survival = 1
        assert z.values[-1] == pytest.approx(1.0, abs=1e-3)

    def test_linear_forcing_exponential_closed_form(self):
        # trapezoidal cumulative integration carries an O(h^2) bias
        d = Exponential(2.0)
        grid = small_grid(d)
        z = linear_forcing(d, grid)
        assert np.max(np.abs(z.values - (1.0 - np.exp(-2.0 * grid.nodes())))) < grid.step**2


class TestForwardRecurrence:
    def test_cdf_starts_at_zero_and_increases(self, dist):
        phi = renewal_measure(dist, small_grid(dist))
        cdf = forward_recurrence_cdf(dist, 5.0 * dist.mean(), phi=phi)
        assert cdf.values[0] == 0.0
        assert np.all(np.diff(cdf.values) >= 0.0)
        assert cdf.values[-1] <= 1.0
        assert cdf.values[-1] > 0.999

    def test_exponential_memorylessness(self):
        d = Exponential(1.0)
        phi = renewal_measure(d, small_grid(d))
        for t in [0.7, 3.0, 11.0]:
            cdf = forward_recurrence_cdf(d, t, phi=phi)
            exact = np.asarray(d.cdf(cdf.grid.nodes()))
            assert np.max(np.abs(cdf.values - exact)) < 1e-10

    def test_t_zero_recovers_interarrival_law(self, dist):
        phi = renewal_measure(dist, small_grid(dist))
        cdf = forward_recurrence_cdf(dist, 0.0, phi=phi)
        exact = np.asarray(dist.cdf(cdf.grid.nodes()))
        assert np.max(np.abs(cdf.values - exact)) < 1e-12

    def test_horizon_exceeded(self, dist):
        phi = renewal_measure(dist, small_grid(dist, horizon_means=5.0))
        with pytest.raises(HorizonExceededError):
            forward_recurrence_cdf(dist, 6.0 * dist.mean(), phi=phi)

    def test_uniform_law_against_monte_carlo(self, rng):
        # oracle: direct simulation of the recurrence time at t = 10
        d = Uniform(0.0, 2.0)
        phi = renewal_measure(d, small_grid(d, horizon_means=15.0))
        cdf = forward_recurrence_cdf(d, 10.0, phi=phi)
        draws = sample_forward_recurrence(d, 10.0, 100_000, rng)
        res = stats.kstest(draws, lambda v: np.interp(v, cdf.grid.nodes(), cdf.values, right=1.0))
        assert res.statistic < 0.01

    def test_density_route_matches_cdf_route(self, dist):
        # uniform densities carry jumps, so their direct-density route is only
        # first-order near the kink lines; smooth kinds agree much tighter
        phi = renewal_measure(dist, small_grid(dist))
        t = 4.0 * dist.mean()
        dens = forward_recurrence_density(dist, t, phi=phi)
        cdf = forward_recurrence_cdf(dist, t, phi=phi)
        h = dens.grid.step
        integrated = np.concatenate(([0.0], np.cumsum(0.5 * h * (dens.values[1:] + dens.values[:-1]))))
        tol = h if dist.kind == "uniform" else 5e-4
        assert np.max(np.abs(integrated - cdf.values)) < tol


class TestTvToStationary:
    def test_exponential_is_stationary(self):
        d = Exponential(1.0)
        phi = renewal_measure(d, small_grid(d))
        for t in [1.0, 5.0, 20.0]:
            assert tv_to_stationary(d, t, phi=phi) < 1e-4

    def test_t_zero_is_distance_between_interarrival_and_stationary(self):
        # oracle: int_0^2 |1/2 - (1 - x/2)| dx = 1/2
        d = Uniform(0.0, 2.0)
        phi = renewal_measure(d, small_grid(d))
        assert tv_to_stationary(d, 0.0, phi=phi) == pytest.approx(0.5, abs=1e-3)

    def test_gamma_decreasing_in_t(self):
        # strict decrease holds while the signal sits above the numerical floor
        d = Gamma(2.0, 1.0)
        phi = renewal_measure(d, default_grid(d, horizon_means=30.0))
        tvs = [tv_to_stationary(d, t, phi=phi) for t in (2.0, 4.0, 5.5)]
        assert tvs[0] > tvs[1] > tvs[2]

    def test_gamma_against_monte_carlo_histogram_oracle(self, rng):
        # binned-TV Monte Carlo oracle at a t where the distance is still large
        d = Gamma(2.0, 1.0)
        t = 2.0
        phi = renewal_measure(d, default_grid(d, horizon_means=10.0))
        tv_grid = tv_to_stationary(d, t, phi=phi)
        n = 200_000
        draws = sample_forward_recurrence(d, t, n, rng)
        edges = np.linspace(0.0, 14.0, 15)
        hist, _ = np.histogram(draws, bins=edges)
        probs = hist / n
        pis = np.array(
            [d.stationary_delay_cdf(b) - d.stationary_delay_cdf(a) for a, b in zip(edges[:-1], edges[1:])]
        )
        tv_mc_binned = np.sum(np.abs(probs - pis)) + (1.0 - pis.sum())
        # binned TV lower-bounds the true TV; noise scale ~ sqrt(bins/n)
        assert tv_mc_binned <= tv_grid + 0.01
        assert tv_grid <= 3.0 * tv_mc_binned + 0.02

    def test_diagnostics_reported(self):
        d = Gamma(2.0, 1.0)
        phi = renewal_measure(d, small_grid(d))
        diag = {}
        tv_to_stationary(d, 3.0, phi=phi, diagnostics=diag)
        assert set(diag) == {"clipped_mass", "tail_mass_bt", "tail_mass_stationary"}
        assert diag["clipped_mass"] >= 0.0


class TestDefaultGrids:
    def test_default_grid_shape(self, dist):
        grid = default_grid(dist)
        assert grid.step == pytest.approx(dist.mean() / 200.0)
        assert grid.count == 20000

    def test_recurrence_grid_covers_quantile(self, dist):
        grid = default_grid(dist)
        xg = default_recurrence_grid(dist, grid.step)
        assert xg.horizon >= dist.quantile(1.0 - 1e-6) - 1e-12
        assert xg.step == grid.step
