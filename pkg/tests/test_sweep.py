import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusgas.euler import taylor_green
from torusgas.grid import Grid
from torusgas.sweep import (RateReport, SweepConfig, SweepError, fit_rate,
                            run_sweep, theoretical_envelope_exponent,
                            well_prepared_data)


class TestWellPreparedData:
    def test_zero_delta_reproduces_target(self, grid2d):
        v0 = taylor_green(grid2d)
        rho0, mom0 = well_prepared_data(grid2d, 0.5, v0, 0.0)
        assert np.array_equal(rho0, np.ones(grid2d.sizes))
        assert np.array_equal(mom0, v0)

    def test_bound_arithmetic(self, grid2d):
        # eps = delta = 1/4 with a sup-norm-one shape keeps rho within 1/16
        v0 = taylor_green(grid2d)
        rho0, _ = well_prepared_data(grid2d, 0.25, v0, 0.25)
        assert np.min(rho0) >= 1 - 1 / 16 - 1e-14
        assert np.max(rho0) <= 1 + 1 / 16 + 1e-14

    def test_hypothesis_inequalities_pointwise(self, grid2d):
        # direct audit of the data-preparation inequalities
        v0 = taylor_green(grid2d)
        for eps, delta in ((1.0, 1.0), (0.5, 0.5), (0.125, 0.125)):
            rho0, mom0 = well_prepared_data(grid2d, eps, v0, delta)
            assert np.max(np.abs(rho0 - 1.0)) / eps <= delta + 1e-12
            gap = np.sqrt(np.sum((mom0 - v0) ** 2, axis=0))
            assert np.max(gap) <= delta + 1e-12
            assert np.min(rho0) > 0

    def test_rejects_nonsolenoidal(self, grid2d):
        X, _ = grid2d.coordinates()
        v = np.stack([np.sin(X), np.zeros(grid2d.sizes)])
        with pytest.raises(SweepError):
            well_prepared_data(grid2d, 0.5, v, 0.1)

    def test_rejects_oversized_shapes(self, grid2d):
        v0 = taylor_green(grid2d)
        with pytest.raises(SweepError):
            well_prepared_data(grid2d, 0.5, v0, 0.1,
                               eta_shape=2.0 * np.sin(grid2d.coordinates()[0]))

    @given(eps=st.floats(0.05, 1.0), delta=st.floats(0.0, 1.0))
    @settings(max_examples=25, deadline=None)
    def test_property_bounds(self, eps, delta):
        grid = Grid((16,))
        v0 = np.zeros((1, 16))
        rho0, mom0 = well_prepared_data(grid, eps, v0, delta)
        assert np.max(np.abs(rho0 - 1.0)) <= eps * delta + 1e-12
        assert np.max(np.abs(mom0)) <= delta + 1e-12


def synthetic_report(eps, values):
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    n = eps.size
    return RateReport(
        eps=eps, times=np.array([0.0, 1.0]),
        emv_mean=np.stack([values, values], axis=1),
        emv_se=np.zeros((n, 2)),
        d_series=np.zeros((n, 2)),
        d_sup=np.zeros(n), d_sup_se=np.zeros(n),
        tau_min=np.ones(n), n_steps=np.full(n, 8),
    )


class TestFitRate:
    def test_linear_synthetic(self):
        eps = [1.0, 0.5, 0.25, 0.125]
        out = fit_rate(synthetic_report(eps, eps), gamma=2.0)
        assert out["slope"] == pytest.approx(1.0, abs=1e-12)
        assert out["monotone"]
        assert out["pass"]

    def test_quadratic_synthetic(self):
        eps = np.array([1.0, 0.5, 0.25])
        out = fit_rate(synthetic_report(eps, eps**2), gamma=2.0)
        assert out["slope"] == pytest.approx(2.0, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(SweepError):
            fit_rate(synthetic_report([1.0, 0.5], [1.0, 0.5]))

    def test_envelope_exponent(self):
        assert theoretical_envelope_exponent(2.0) == pytest.approx(1.0)
        assert theoretical_envelope_exponent(1.4) == pytest.approx(1.0)
        assert theoretical_envelope_exponent(3.0) == pytest.approx(1.0)

    def test_nonmonotone_detected(self):
        out = fit_rate(synthetic_report([1.0, 0.5, 0.25], [1.0, 1.2, 0.3]))
        assert not out["monotone"]
        assert not out["pass"]


class TestRunSweep:
    def test_exact_quiescent_data_gives_zero(self):
        # eps = 1, v0 = 0, no noise, exact data (1, 0): nothing moves
        cfg = SweepConfig(grid_sizes=(16, 16), eps_schedule=(1.0,),
                          nu_of_eps=lambda e: 1e-2, lambda_of_eps=lambda e: 0.0,
                          delta_data_of_eps=lambda e: 0.0,
                          horizon=0.1, members=1, noise_K=(), noise_L=(),
                          n_samples=2, v0_kind="zero", se_groups=1)
        report = run_sweep(cfg)
        assert np.max(np.abs(report.emv_mean)) < 1e-24
        assert np.max(report.d_sup) == 0.0
        assert report.tau_min[0] == cfg.horizon

    def test_se_shrinks_with_members(self):
        # Monte Carlo scaling oracle: doubling members twice shrinks the
        # standard error by about 2
        def run(members):
            cfg = SweepConfig(grid_sizes=(16,), eps_schedule=(1.0,),
                              horizon=0.1, members=members,
                              noise_K=(0.1,), noise_L=(0.05,),
                              n_samples=2, v0_kind="zero", grad_threshold=1e9,
                              se_groups=2, seed=3)
            return run_sweep(cfg).emv_se[0, -1]

        ratio = run(8) / run(32)
        assert 1.2 <= ratio <= 3.5

    def test_mini_taylor_green_trend(self):
        # small version of the limit experiment: relative energy decreases
        # along the eps schedule
        cfg = SweepConfig(grid_sizes=(16, 16), eps_schedule=(1.0, 0.5, 0.25),
                          horizon=0.125, members=4, noise_K=(0.1,),
                          noise_L=(0.05,), n_samples=2, grad_threshold=2.0,
                          se_groups=2, seed=1)
        report = run_sweep(cfg)
        finals = report.final_emv
        assert finals[0] > finals[1] > finals[2] > 0
        assert np.all(report.emv_mean >= 0)
        assert np.all(report.tau_min == cfg.horizon)  # TG gradient stays at 1

    def test_paths_shared_across_eps(self):
        # the same member key drives every eps: step counts divide a common
        # base so coarse increments aggregate fine ones exactly
        cfg = SweepConfig(grid_sizes=(16,), eps_schedule=(1.0, 0.5),
                          horizon=0.1, members=2, noise_K=(0.1,), noise_L=(0.0,),
                          n_samples=2, v0_kind="zero", grad_threshold=1e9,
                          se_groups=2, seed=7)
        report = run_sweep(cfg)
        assert report.n_steps[1] % report.n_steps[0] == 0 or \
            report.n_steps[0] % report.n_steps[1] == 0
