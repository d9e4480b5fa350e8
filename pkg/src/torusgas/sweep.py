"""Inviscid-incompressible limit experiment and convergence-rate fitting.

For each Mach parameter eps the compressible ensemble (pressure stiffened
by 1/eps^2, viscosities shrinking with eps) runs against the stochastic
incompressible Euler reference on the same Brownian paths; the scaled
relative energy against the pair ``(1, v)``,

    int <0.5 rho |m/rho - v|^2 + (P(rho) - P'(1)(rho - 1) - P(1)) / eps^2>,

is sampled up to the reference's gradient stopping time.  Along the default
coupling ``nu_eps = lambda_eps = eps^2`` and data preparation
``delta(eps) = eps``, the theoretical envelope decays like
``eps^min(2/gamma_*, 1)`` with ``gamma_* = min(gamma, 2)``; the sweep
asserts monotone decay and at least half the envelope slope, since the
unknown Gronwall constant and the fixed-grid discretization bias pollute
the small-eps end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .constitutive import PressureLaw, Viscosity
from .dynamics import (ModelConfig, SimulationError, State, StepperConfig,
                       cfl_dt, step_em)
from .ensemble import EmpiricalYoungMeasure, dissipation_defect
from .euler import (check_affine_noise, euler_cfl_dt, grad_inf, make_state,
                    step_em_euler, taylor_green)
from .grid import Grid
from .noise import NestedWiener, NoiseModel
from .relative import relative_energy_state


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    grid_sizes: tuple = (64, 64)
    eps_schedule: tuple = tuple(0.5**j for j in range(6))
    gamma: float = 2.0
    a: float = 1.0
    nu_of_eps: Callable[[float], float] = lambda e: e * e
    lambda_of_eps: Callable[[float], float] = lambda e: e * e
    delta_data_of_eps: Callable[[float], float] = lambda e: e
    horizon: float = 0.5
    grad_threshold: float = 2.0
    members: int = 64
    seed: int = 0
    noise_K: tuple = (0.1,)
    noise_L: tuple = (0.05,)
    cfl: float = 0.4
    n_samples: int = 8
    v0_kind: str = "taylor_green"  # or "zero"
    se_groups: int = 4


@dataclass
class RateReport:
    eps: np.ndarray                 # (n_eps,)
    times: np.ndarray               # (n_samples,)
    emv_mean: np.ndarray            # (n_eps, n_samples)
    emv_se: np.ndarray              # (n_eps, n_samples)
    d_series: np.ndarray            # (n_eps, n_samples) pooled defect
    d_sup: np.ndarray               # (n_eps,)
    d_sup_se: np.ndarray            # (n_eps,)
    tau_min: np.ndarray             # (n_eps,) earliest member stopping time
    n_steps: np.ndarray             # (n_eps,)

    @property
    def final_emv(self) -> np.ndarray:
        return self.emv_mean[:, -1]


def well_prepared_data(grid: Grid, eps: float, v0: np.ndarray, delta_data: float,
                       eta_shape: Optional[np.ndarray] = None,
                       zeta_shape: Optional[np.ndarray] = None,
                       div_tol: float = 1e-8):
    """Initial pair ``rho0 = 1 + eps delta eta(x)``, ``m0 = v0 + delta zeta(x)``.

    ``v0`` must be solenoidal.  The preparation bounds are one-sided, so the
    default shapes are half-amplitude low Fourier modes: they satisfy
    ``|rho0 - 1|/eps <= delta`` and ``|m0 - v0| <= delta`` while keeping the
    density strictly positive even at ``eps * delta = 1`` (a sup-norm-one
    shape would touch vacuum there).
    """
    v0 = grid.check_vector(v0)
    if float(np.max(np.abs(grid.divergence(v0)))) > div_tol:
        raise SweepError("well-prepared data needs a solenoidal v0")
    coords = grid.coordinates()
    if eta_shape is None:
        eta_shape = 0.5 * np.sin(coords[0])
    if zeta_shape is None:
        zeta_shape = np.zeros((grid.dim, *grid.sizes))
        zeta_shape[0] = 0.5 * np.sin(coords[-1])
    if np.max(np.abs(eta_shape)) > 1.0 + 1e-12:
        raise SweepError("eta shape must have sup-norm at most 1")
    zeta_sup = np.max(np.sqrt(np.sum(zeta_shape**2, axis=0)))
    if zeta_sup > 1.0 + 1e-12:
        raise SweepError("zeta shape must have sup-norm at most 1")
    rho0 = 1.0 + eps * delta_data * eta_shape
    if np.min(rho0) <= 0:
        raise SweepError("prepared density lost positivity; shrink eta or delta")
    mom0 = v0 + delta_data * zeta_shape
    return rho0, mom0


def _round_up_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def _initial_v0(grid: Grid, kind: str) -> np.ndarray:
    if kind == "taylor_green":
        return taylor_green(grid)
    if kind == "zero":
        return np.zeros((grid.dim, *grid.sizes))
    raise SweepError(f"unknown v0 kind {kind!r}")


def run_sweep(cfg: SweepConfig) -> RateReport:
    """Execute the eps schedule and collect the rate data.

    Brownian paths are shared across eps values through one nested lattice
    per member (step counts are powers of two dividing a common base), which
    variance-reduces the cross-eps comparison.
    """
    grid = Grid(cfg.grid_sizes)
    noise = NoiseModel(K=cfg.noise_K, L=cfg.noise_L)
    check_affine_noise(noise)
    v0 = _initial_v0(grid, cfg.v0_kind)
    eps_list = list(cfg.eps_schedule)

    # per-eps step counts from the acoustic CFL, rounded up to powers of two
    n_steps = []
    models = []
    stepper = StepperConfig(cfl=cfg.cfl)
    for eps in eps_list:
        law = PressureLaw(cfg.a, cfg.gamma)
        visc = Viscosity(cfg.nu_of_eps(eps), cfg.lambda_of_eps(eps))
        model = ModelConfig(law=law, visc=visc, noise=noise, eps=eps,
                            grad_threshold=cfg.grad_threshold)
        delta_data = cfg.delta_data_of_eps(eps)
        rho0, mom0 = well_prepared_data(grid, eps, v0, delta_data)
        trial = State(rho0, mom0)
        dt_bound = min(cfl_dt(grid, model, trial, stepper),
                       euler_cfl_dt(grid, make_state(grid, v0), cfg.cfl))
        # generous margin: the bound tightens as acoustics steepen mid-run
        n = _round_up_pow2(max(cfg.n_samples, int(np.ceil(cfg.horizon / (0.6 * dt_bound)))))
        n_steps.append(n)
        models.append((model, rho0, mom0))
    n_base = max(n_steps)

    sample_stride = [n // cfg.n_samples for n in n_steps]
    times = np.linspace(0.0, cfg.horizon, cfg.n_samples + 1)

    n_eps = len(eps_list)
    emv = np.zeros((n_eps, cfg.members, cfg.n_samples + 1))
    d_series = np.zeros((n_eps, cfg.n_samples + 1))
    d_groups = np.zeros((n_eps, cfg.se_groups, cfg.n_samples + 1))
    tau_min = np.full(n_eps, cfg.horizon)

    for i_eps, eps in enumerate(eps_list):
        model, rho0, mom0 = models[i_eps]
        law_eff = model.law_eff
        n = n_steps[i_eps]
        stride = sample_stride[i_eps]
        rho_snap = np.zeros((cfg.members, cfg.n_samples + 1, *grid.sizes))
        mom_snap = np.zeros((cfg.members, cfg.n_samples + 1, grid.dim, *grid.sizes))
        for member in range(cfg.members):
            lattice = NestedWiener(cfg.seed, member, noise.modes, cfg.horizon, n_base)
            w = lattice.view(n)
            comp = State(rho0.copy(), mom0.copy())
            eul = make_state(grid, v0)
            frozen = False
            tau_member = cfg.horizon
            ones = np.ones(grid.sizes)
            for step in range(n + 1):
                if step % stride == 0:
                    i_s = step // stride
                    if not frozen and grad_inf(grid, eul.v) > cfg.grad_threshold:
                        frozen = True
                        tau_member = step * w.dt
                    if frozen and i_s > 0:
                        emv[i_eps, member, i_s] = emv[i_eps, member, i_s - 1]
                        rho_snap[member, i_s] = rho_snap[member, i_s - 1]
                        mom_snap[member, i_s] = mom_snap[member, i_s - 1]
                    else:
                        emv[i_eps, member, i_s] = relative_energy_state(
                            grid, law_eff, comp, ones, eul.v)
                        rho_snap[member, i_s] = comp.rho
                        mom_snap[member, i_s] = comp.mom
                if step < n and not frozen:
                    try:
                        comp = step_em(grid, model, stepper, comp, w, step)
                    except SimulationError as exc:
                        needed = cfl_dt(grid, model, comp, stepper)
                        raise SweepError(
                            f"CFL blow-up at eps={eps}: {exc}; "
                            f"required dt <= {needed:.3e} (have {w.dt:.3e})"
                        ) from exc
                    eul = step_em_euler(grid, noise, eul, w, step)
            tau_min[i_eps] = min(tau_min[i_eps], tau_member)
        # pooled dissipation defect across members per sample time
        for i_s in range(cfg.n_samples + 1):
            ym = EmpiricalYoungMeasure(grid, rho_snap[:, i_s], mom_snap[:, i_s])
            _, d_series[i_eps, i_s] = dissipation_defect(ym, law_eff)
            g_size = cfg.members // cfg.se_groups
            for gidx in range(cfg.se_groups):
                sl = slice(gidx * g_size, (gidx + 1) * g_size)
                ym_g = EmpiricalYoungMeasure(grid, rho_snap[sl, i_s], mom_snap[sl, i_s])
                _, d_groups[i_eps, gidx, i_s] = dissipation_defect(ym_g, law_eff)

    emv_mean = emv.mean(axis=1)
    emv_se = (emv.std(axis=1, ddof=1) / np.sqrt(cfg.members)
              if cfg.members > 1 else np.zeros_like(emv_mean))
    d_sup = d_series.max(axis=1)
    d_sup_se = (d_groups.max(axis=2).std(axis=1, ddof=1) / np.sqrt(cfg.se_groups)
                if cfg.se_groups > 1 else np.zeros(n_eps))
    return RateReport(
        eps=np.asarray(eps_list),
        times=times,
        emv_mean=emv_mean,
        emv_se=emv_se,
        d_series=d_series,
        d_sup=d_sup,
        d_sup_se=d_sup_se,
        tau_min=tau_min,
        n_steps=np.asarray(n_steps),
    )


def theoretical_envelope_exponent(gamma: float) -> float:
    """Envelope exponent ``min(2/gamma_*, 1)`` for the default couplings."""
    gamma_star = min(gamma, 2.0)
    return min(2.0 / gamma_star, 1.0)


def fit_rate(report: RateReport, gamma: float = 2.0) -> dict:
    """Log-log slope of the final relative energy against eps, plus checks.

    Needs at least three eps points.  Pass requires monotone decay along
    the schedule and a fitted slope of at least half the theoretical
    envelope exponent.
    """
    eps = np.asarray(report.eps, dtype=np.float64)
    if eps.size < 3:
        raise SweepError("rate fit needs at least 3 eps points")
    vals = np.asarray(report.final_emv, dtype=np.float64)
    if np.any(vals <= 0):
        raise SweepError("rate fit needs positive relative-energy values")
    slope = float(np.polyfit(np.log(eps), np.log(vals), 1)[0])
    envelope = theoretical_envelope_exponent(gamma)
    order = np.argsort(eps)[::-1]  # decreasing eps along the schedule
    monotone = bool(np.all(np.diff(vals[order]) < 0))
    d_sup = report.d_sup[order]
    d_se = report.d_sup_se[order]
    d_ok = bool(np.all(np.diff(d_sup) <= 2.0 * (d_se[1:] + d_se[:-1])))
    return {
        "slope": slope,
        "envelope": envelope,
        "monotone": monotone,
        "slope_ok": slope >= 0.5 * envelope,
        "d_sup_nonincreasing": d_ok,
        "pass": monotone and slope >= 0.5 * envelope and d_ok,
    }
