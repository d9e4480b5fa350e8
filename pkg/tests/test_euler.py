import numpy as np
import pytest

from torusgas.euler import (EulerError, advection, check_affine_noise,
                            euler_cfl_dt, grad_inf, kinetic_energy, make_state,
                            pressure_from_projection, step_em_euler,
                            stopping_time_tau_m, taylor_green)
from torusgas.grid import Grid, random_solenoidal
from torusgas.noise import NoiseModel, WienerPath


class TestPressure:
    def test_constant_velocity_zero_pressure(self, grid2d):
        v = np.zeros((2, *grid2d.sizes))
        v[0], v[1] = 0.7, -0.2
        assert np.max(np.abs(pressure_from_projection(grid2d, v))) < 1e-14

    def test_taylor_green_closed_form(self, grid2d):
        # derived via the defining identity grad(pi) = P_H[(v.grad)v] - (v.grad)v:
        # for v = (sin x cos y, -cos x sin y) the advection is grad(phi) with
        # phi = -(cos 2x + cos 2y)/4, so pi = -phi = +(cos 2x + cos 2y)/4
        v = taylor_green(grid2d)
        pi = pressure_from_projection(grid2d, v)
        X, Y = grid2d.coordinates()
        assert np.max(np.abs(pi - (np.cos(2 * X) + np.cos(2 * Y)) / 4)) < 1e-12

    def test_defining_identity_on_random_fields(self, grid2d, rng):
        for _ in range(3):
            v = random_solenoidal(grid2d, rng, kmax=5)
            pi = pressure_from_projection(grid2d, v)
            adv = advection(grid2d, v)
            residual = grid2d.gradient(pi) - (grid2d.helmholtz_project(adv) - adv)
            assert np.max(np.abs(residual)) < 1e-10
            assert abs(np.mean(pi)) < 1e-14


class TestStepping:
    def test_taylor_green_stationary(self):
        # TG is an exact steady Euler solution; on 128^2 the numerical drift
        # over t in [0, 1] must stay below 1e-6
        grid = Grid((128, 128))
        v0 = taylor_green(grid)
        state = make_state(grid, v0)
        dt = 0.01
        for step in range(100):
            state = step_em_euler(grid, None, state, None, step, dt=dt)
        assert np.max(np.abs(state.v - v0)) < 1e-6

    def test_zero_stays_zero(self, grid2d):
        state = make_state(grid2d, np.zeros((2, *grid2d.sizes)))
        for step in range(5):
            state = step_em_euler(grid2d, None, state, None, step, dt=0.05)
        assert np.max(np.abs(state.v)) == 0.0

    def test_divergence_preserved(self, grid2d, rng):
        state = make_state(grid2d, random_solenoidal(grid2d, rng, kmax=4))
        dt = 0.5 * euler_cfl_dt(grid2d, state)
        for step in range(20):
            state = step_em_euler(grid2d, None, state, None, step, dt=dt)
            assert np.max(np.abs(grid2d.divergence(state.v))) < 1e-10

    def test_constant_forcing_random_drift(self):
        # Monte Carlo oracle: with K-only noise and zero initial data the
        # velocity is the spatially constant walk sum_k K_k e_k W_k(t) with
        # variance sum K_k^2 t
        grid = Grid((8, 8))
        noise = NoiseModel(K=(0.3,), L=(0.0,))
        n_paths, n_steps, dt = 2000, 10, 0.02
        finals = np.empty(n_paths)
        for member in range(n_paths):
            w = WienerPath(5, member, 1, dt)
            state = make_state(grid, np.zeros((2, 8, 8)))
            for step in range(n_steps):
                state = step_em_euler(grid, noise, state, w, step)
            # field is spatially constant; take one sample point
            assert np.max(np.abs(state.v[0] - state.v[0, 0, 0])) < 1e-12
            finals[member] = state.v[0, 0, 0]
        var_pred = 0.09 * n_steps * dt
        se = var_pred * np.sqrt(2.0 / (n_paths - 1))
        assert abs(finals.var(ddof=1) - var_pred) < 5 * se

    def test_zero_noise_energy_drift_halves(self, rng):
        grid = Grid((32, 32))
        v0 = random_solenoidal(grid, rng, kmax=3)

        def drift(dt, n):
            state = make_state(grid, v0)
            e0 = kinetic_energy(grid, state.v)
            for step in range(n):
                state = step_em_euler(grid, None, state, None, step, dt=dt)
            return abs(kinetic_energy(grid, state.v) - e0)

        ratio = drift(4e-3, 125) / drift(2e-3, 250)
        assert 1.5 <= ratio <= 2.5

    def test_projection_order_agrees(self, grid2d, rng):
        # projecting the drift before stepping equals projecting after
        v = random_solenoidal(grid2d, rng, kmax=4)
        adv = advection(grid2d, v)
        dt = 1e-2
        after = grid2d.helmholtz_project(v - dt * adv)
        before = v - dt * grid2d.helmholtz_project(adv)
        assert np.max(np.abs(after - before)) < 1e-12


class TestStoppingTime:
    def test_huge_threshold_returns_horizon(self):
        times = [0.0, 0.5, 1.0]
        assert stopping_time_tau_m(times, [1.0, 2.0, 3.0], 1e9) == 1.0

    def test_zero_threshold_triggers_immediately(self):
        times = [0.0, 0.5, 1.0]
        assert stopping_time_tau_m(times, [1.0, 2.0, 3.0], 0.0) == 0.0

    def test_taylor_green_thresholds(self, grid2d):
        # TG has velocity-gradient sup exactly 1
        v = taylor_green(grid2d)
        g = grad_inf(grid2d, v)
        assert g == pytest.approx(1.0, abs=1e-12)
        times = [0.0, 0.25, 0.5]
        norms = [g, g, g]
        assert stopping_time_tau_m(times, norms, 0.5) == 0.0
        assert stopping_time_tau_m(times, norms, 2.0) == 0.5


def test_affine_noise_required():
    general = NoiseModel(kind="general",
                         coefficients=(lambda c, r, m: m,), alphas=(1.0,))
    with pytest.raises(EulerError):
        check_affine_noise(general)
    check_affine_noise(NoiseModel(K=(0.1,), L=(0.2,)))  # passes
    check_affine_noise(None)


def test_taylor_green_needs_2d(grid1d):
    with pytest.raises(EulerError):
        taylor_green(grid1d)
