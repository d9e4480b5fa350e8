"""Relative energy functional, remainder breakdown and weak-strong experiment.

The relative energy between a Young measure (with defect D) and a smooth
pair ``(r, U)`` is evaluated in two algebraically identical forms: the
five-term definition

    int <0.5|m|^2/rho + P(rho)> + D - int <m>.U + 0.5 int <rho>|U|^2
        - int <rho> P'(r) + int (P'(r) r - P(r))

and the regrouped ``int <0.5 rho |u - U|^2 + H(rho, r)> + D``.  The
remainder breakdown mirrors the nine displayed terms of the relative-energy
inequality; concentration-defect slots accept estimator fields and default
to zero, which is what finite empirical measures produce.

The weak-strong experiment realizes the computable shadow of the
uniqueness principle: no closed-form strong solutions of the stochastic
system exist, so the reference is the same discretization at finer
resolution driven pathwise by the same Brownian increments (fine increments
aggregate pairwise onto the coarse partition).  Refinement stability of the
relative-energy gap is then the testable statement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .constitutive import (PressureLaw, potential_delta, potential_delta_prime,
                           potential_delta_second, potential_delta_third,
                           pressure_delta, pressure_delta_second, stress)
from .dynamics import ModelConfig, State, StepperConfig, step_em
from .ensemble import EmpiricalYoungMeasure, build_ym
from .grid import Grid, grad_inf_norm, random_smooth_scalar, random_smooth_vector
from .noise import NestedWiener


class RelativeEnergyError(ValueError):
    pass


# --------------------------------------------------------------------------
# the functional
# --------------------------------------------------------------------------


def relative_energy(grid: Grid, law: PressureLaw, ym: EmpiricalYoungMeasure,
                    D: float, r: np.ndarray, U: np.ndarray,
                    form: str = "regrouped") -> float:
    """Relative energy of ``(ym, D)`` against the pair ``(r, U)``."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise RelativeEnergyError("reference density must be positive")
    if form == "regrouped":
        rho_a, mom_a = ym.flat()
        r_flat = np.ascontiguousarray(np.broadcast_to(r, grid.sizes).reshape(-1))
        U_flat = np.ascontiguousarray(np.broadcast_to(U, (grid.dim, *grid.sizes)).reshape(grid.dim, -1))
        acc = np.zeros(r_flat.shape[0])
        for i in range(ym.n_atoms):
            acc += kernels.relative_energy_density(rho_a[i], mom_a[i], r_flat, U_flat,
                                                   *law.params)
        total = float(np.sum(acc)) / ym.n_atoms * grid.cell_volume
        return total + D
    if form == "five_term":
        rho_a = ym.rho_atoms
        mom_a = ym.mom_atoms
        energy = np.mean(
            0.5 * np.sum(mom_a**2, axis=1) / rho_a + potential_delta(law, rho_a), axis=0
        )
        b_rho = np.mean(rho_a, axis=0)
        b_mom = np.mean(mom_a, axis=0)
        t1 = grid.integrate(energy) + D
        t2 = -grid.integrate(np.sum(b_mom * U, axis=0))
        t3 = 0.5 * grid.integrate(b_rho * np.sum(U * U, axis=0))
        t4 = -grid.integrate(b_rho * potential_delta_prime(law, r))
        t5 = grid.integrate(potential_delta_prime(law, r) * r - potential_delta(law, r))
        return t1 + t2 + t3 + t4 + t5
    raise RelativeEnergyError(f"unknown form {form!r}")


def relative_energy_state(grid: Grid, law: PressureLaw, state: State,
                          r: np.ndarray, U: np.ndarray) -> float:
    """Dirac fast path: relative energy of one realization (D = 0)."""
    rho = np.ascontiguousarray(state.rho.reshape(-1))
    mom = np.ascontiguousarray(state.mom.reshape(grid.dim, -1))
    r_flat = np.ascontiguousarray(np.asarray(r).reshape(-1))
    U_flat = np.ascontiguousarray(np.asarray(U).reshape(grid.dim, -1))
    dens = kernels.relative_energy_density(rho, mom, r_flat, U_flat, *law.params)
    return float(np.sum(dens)) * grid.cell_volume


# --------------------------------------------------------------------------
# reference pairs and remainder breakdown
# --------------------------------------------------------------------------


@dataclass
class RefDecomps:
    """Drift/diffusion decomposition of the reference pair at one time."""

    ddr: Optional[np.ndarray] = None   # D^d_t r
    ddU: Optional[np.ndarray] = None   # D^d_t U
    dsr: Optional[np.ndarray] = None   # (modes, *sizes)
    dsU: Optional[np.ndarray] = None   # (modes, N, *sizes)


@dataclass
class ReferencePair:
    """Sampled strong reference ``(r, U)`` with on-demand decompositions.

    The decompositions substitute the reference's own equations: the
    continuity drift for r, the primitive-variable momentum drift for U and
    the scaled noise coefficient for the diffusion of U.
    """

    grid: Grid
    model: ModelConfig
    times: np.ndarray
    r: np.ndarray   # (n_t, *sizes)
    U: np.ndarray   # (n_t, N, *sizes)

    def bounds(self):
        return float(np.min(self.r)), float(np.max(self.r))

    def decomps(self, i: int) -> RefDecomps:
        grid, model = self.grid, self.model
        r = self.r[i]
        U = self.U[i]
        if np.min(r) <= 0:
            raise RelativeEnergyError("reference density lost positivity")
        law = model.law_eff
        ddr = -grid.divergence(r[None, :] * U if grid.dim == 1 else r * U)
        grad_U = grid.gradient_vector(U)
        conv = np.einsum("j...,ij...->i...", U, grad_U)
        ddU = -conv - grid.gradient(pressure_delta(law, r)) / r
        if model.visc is not None:
            ddU = ddU + grid.viscous_operator(U, model.visc.nu,
                                              model.visc.eta(grid.dim)) / r
        modes = model.modes
        dsr = np.zeros((modes, *grid.sizes))
        dsU = np.zeros((modes, grid.dim, *grid.sizes))
        if model.noise is not None:
            for k in range(modes):
                dsU[k] = model.noise.apply_mode(k, grid, r, r * U) / r
        return RefDecomps(ddr=ddr, ddU=ddU, dsr=dsr, dsU=dsU)


REMAINDER_TERMS = (
    "stress_gap",            # S(grad U) : (grad U - grad <u>)
    "momentum_drift",        # <rho U - m> . [D^d U + U.grad U]
    "reynolds",              # <(m - rho U) x (rho U - m)/rho> : grad U
    "density_drift",         # (r - <rho>) P''(r) D^d r + grad P'(r).(r U - <m>)
    "pressure_div",          # (p(r) - <p(rho)>) div U
    "noise_mismatch",        # 0.5 sum_k <rho |G_k/rho - D^s U(e_k)|^2>
    "defect_momentum",       # - grad U : mu_m
    "defect_energy",         # + 0.5 mu_e
    "density_ito",           # second-order D^s r terms
)


def remainder(grid: Grid, model: ModelConfig, ym: EmpiricalYoungMeasure,
              r: np.ndarray, U: np.ndarray, decomps: RefDecomps,
              mu_m: Optional[np.ndarray] = None,
              mu_e: Optional[np.ndarray] = None) -> dict:
    """The nine remainder terms of the relative-energy inequality.

    Returns a dict keyed by :data:`REMAINDER_TERMS` plus ``"total"``.
    Missing decomposition fields raise with the term that needs them.
    """
    law = model.law_eff
    visc = model.visc
    rho_a, mom_a = ym.rho_atoms, ym.mom_atoms
    b_rho = np.mean(rho_a, axis=0)
    b_mom = np.mean(mom_a, axis=0)
    u_mean = np.mean(mom_a / rho_a[:, None], axis=0)
    grad_U = grid.gradient_vector(U)
    div_U = np.trace(grad_U, axis1=0, axis2=1)
    out = {}

    if visc is not None:
        S_U = stress(visc, grad_U)
        gap = grad_U - grid.gradient_vector(u_mean)
        out["stress_gap"] = grid.integrate(np.sum(S_U * gap, axis=(0, 1)))
    else:
        out["stress_gap"] = 0.0

    if decomps.ddU is None:
        raise RelativeEnergyError("remainder term 'momentum_drift' needs D^d U")
    conv = np.einsum("j...,ij...->i...", U, grad_U)
    out["momentum_drift"] = grid.integrate(
        np.sum((b_rho * U - b_mom) * (decomps.ddU + conv), axis=0)
    )

    w = mom_a - rho_a[:, None] * U  # m - rho U per atom
    reyn = -np.mean(w[:, :, None] * w[:, None, :] / rho_a[:, None, None], axis=0)
    out["reynolds"] = grid.integrate(np.sum(reyn * grad_U, axis=(0, 1)))

    if decomps.ddr is None:
        raise RelativeEnergyError("remainder term 'density_drift' needs D^d r")
    grad_Pp = grid.gradient(potential_delta_prime(law, r))
    out["density_drift"] = grid.integrate(
        (r - b_rho) * potential_delta_second(law, r) * decomps.ddr
        + np.sum(grad_Pp * (r * U - b_mom), axis=0)
    )

    p_mean = np.mean(pressure_delta(law, rho_a), axis=0)
    out["pressure_div"] = grid.integrate((pressure_delta(law, r) - p_mean) * div_U)

    noise = model.noise
    if noise is not None and noise.modes:
        if decomps.dsU is None:
            raise RelativeEnergyError("remainder term 'noise_mismatch' needs D^s U")
        acc = np.zeros(grid.sizes)
        for k in range(noise.modes):
            for i in range(ym.n_atoms):
                gk = noise.apply_mode(k, grid, rho_a[i], mom_a[i])
                diff = gk / rho_a[i] - decomps.dsU[k]
                acc += rho_a[i] * np.sum(diff * diff, axis=0) / ym.n_atoms
        out["noise_mismatch"] = 0.5 * grid.integrate(acc)
    else:
        out["noise_mismatch"] = 0.0

    out["defect_momentum"] = (
        -grid.integrate(np.sum(grad_U * mu_m, axis=(0, 1))) if mu_m is not None else 0.0
    )
    out["defect_energy"] = 0.5 * grid.integrate(mu_e) if mu_e is not None else 0.0

    if decomps.dsr is None:
        raise RelativeEnergyError("remainder term 'density_ito' needs D^s r")
    acc = np.zeros(grid.sizes)
    for k in range(decomps.dsr.shape[0]):
        ds2 = decomps.dsr[k] ** 2
        acc += (-0.5 * b_rho * potential_delta_third(law, r)
                + 0.5 * pressure_delta_second(law, r)) * ds2
    out["density_ito"] = grid.integrate(acc)

    out["total"] = float(sum(out[name] for name in REMAINDER_TERMS))
    return out


# --------------------------------------------------------------------------
# Gronwall helpers
# --------------------------------------------------------------------------


def gronwall_check(times, values, c: float, bias: float, tol: float = 1e-12) -> float:
    """Max of ``E(t) - (E(0) + bias) exp(c t)``; passes when <= tol-ish zero."""
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    envelope = (values[0] + bias) * np.exp(c * (times - times[0]))
    return float(np.max(values - envelope))


def fit_exponential(times, values, floor: float = 1e-300):
    """Least-squares fit of ``log E = log A + c t``; returns ``(c, A)``."""
    times = np.asarray(times, dtype=np.float64)
    values = np.maximum(np.asarray(values, dtype=np.float64), floor)
    keep = values > floor
    if np.count_nonzero(keep) < 2:
        return 0.0, 0.0
    c, logA = np.polyfit(times[keep], np.log(values[keep]), 1)
    return float(c), float(np.exp(logA))


# --------------------------------------------------------------------------
# weak-strong experiment
# --------------------------------------------------------------------------


@dataclass
class WeakStrongConfig:
    grid_sizes: tuple
    model: ModelConfig
    horizon: float
    n_steps: int
    members: int = 8
    seed: int = 0
    eta: float = 0.0          # target initial relative energy (0 = exact data)
    refine: int = 2           # reference refinement factor (1 = self comparison)
    sample_every: int = 1
    stepper: StepperConfig = field(default_factory=StepperConfig)
    init: Optional[Callable] = None  # fine grid -> (rho0, mom0)
    with_remainder: bool = False


@dataclass
class RelativeEnergyReport:
    times: np.ndarray
    emv: np.ndarray           # (members, n_samples), frozen past the stopping time
    tau: np.ndarray           # (members,) gradient-threshold stopping times
    gronwall_c: float
    gronwall_bias: float
    gronwall_residual: float
    remainder_terms: Optional[np.ndarray] = None  # (n_samples, 9) member means

    @property
    def emv_mean(self) -> np.ndarray:
        return self.emv.mean(axis=0)

    @property
    def emv_se(self) -> np.ndarray:
        m = self.emv.shape[0]
        if m < 2:
            return np.zeros(self.emv.shape[1])
        return self.emv.std(axis=0, ddof=1) / np.sqrt(m)


def default_smooth_init(grid: Grid):
    """Smooth deterministic data: a density wave with a gentle shear."""
    coords = grid.coordinates()
    rho = 1.0 + 0.1 * np.sin(coords[0])
    mom = np.zeros((grid.dim, *grid.sizes))
    mom[0] = 0.1 * np.cos(coords[-1])
    return rho, mom


def _perturb(grid: Grid, law: PressureLaw, rho: np.ndarray, mom: np.ndarray,
             eta: float, rng: np.random.Generator):
    """Perturb data so the initial relative energy is about eta."""
    d_rho = random_smooth_scalar(grid, rng, kmax=3, amplitude=1.0)
    d_mom = random_smooth_vector(grid, rng, kmax=3, amplitude=1.0)
    trial = 1e-4
    st = State(rho + trial * d_rho, mom + trial * d_mom)
    u_ref = mom / rho
    e_trial = relative_energy_state(grid, law, st, rho, u_ref)
    if e_trial <= 0:
        return rho.copy(), mom.copy()
    amp = trial * np.sqrt(eta / e_trial)
    return rho + amp * d_rho, mom + amp * d_mom


def weak_strong_experiment(cfg: WeakStrongConfig) -> RelativeEnergyReport:
    """Pathwise coarse-vs-fine comparison under shared Brownian increments.

    Each member runs the coarse discretization and its own fine reference
    (refined grid and time step) on one nested Wiener path; the relative
    energy of the coarse state against the restricted reference is sampled
    on the coarse cadence and frozen once the reference velocity gradient
    exceeds the configured threshold.
    """
    grid_c = Grid(cfg.grid_sizes)
    grid_f = Grid(tuple(cfg.refine * n for n in cfg.grid_sizes))
    model = cfg.model
    law = model.law_eff
    n_f = cfg.refine * cfg.n_steps
    dt_c = cfg.horizon / cfg.n_steps
    init = cfg.init or default_smooth_init
    rho_f0, mom_f0 = init(grid_f)
    rho_c0 = grid_f.restrict(rho_f0, grid_c)
    mom_c0 = grid_f.restrict_vector(mom_f0, grid_c)

    sample_idx = list(range(0, cfg.n_steps + 1, cfg.sample_every))
    if sample_idx[-1] != cfg.n_steps:
        sample_idx.append(cfg.n_steps)
    times = np.array([i * dt_c for i in sample_idx])
    n_samples = len(sample_idx)

    emv = np.zeros((cfg.members, n_samples))
    tau = np.full(cfg.members, cfg.horizon)
    rem_acc = np.zeros((n_samples, len(REMAINDER_TERMS))) if cfg.with_remainder else None

    for member in range(cfg.members):
        lattice = NestedWiener(cfg.seed, member, model.modes, cfg.horizon, n_f)
        w_fine = lattice.view(n_f)
        w_coarse = lattice.view(cfg.n_steps)

        rng = np.random.default_rng((cfg.seed, member, 0x7A))
        if cfg.eta > 0:
            rho_c, mom_c = _perturb(grid_c, law, rho_c0, mom_c0, cfg.eta, rng)
        else:
            rho_c, mom_c = rho_c0.copy(), mom_c0.copy()
        coarse = State(rho_c, mom_c)
        fine = State(rho_f0.copy(), mom_f0.copy())

        frozen = False
        sample_pos = 0
        for i_step in range(cfg.n_steps + 1):
            if i_step == sample_idx[sample_pos]:
                r_fine = fine.rho
                u_fine = fine.mom / fine.rho
                if not frozen and grad_inf_norm(grid_f, u_fine) > model.grad_threshold:
                    frozen = True
                    tau[member] = i_step * dt_c
                if frozen and sample_pos > 0:
                    emv[member, sample_pos] = emv[member, sample_pos - 1]
                else:
                    r_c = grid_f.restrict(r_fine, grid_c)
                    U_c = grid_f.restrict_vector(u_fine, grid_c)
                    if np.min(r_c) <= 0:
                        raise RelativeEnergyError(
                            "restricted reference density lost positivity")
                    emv[member, sample_pos] = relative_energy_state(
                        grid_c, law, coarse, r_c, U_c)
                    if cfg.with_remainder:
                        ref = ReferencePair(grid_c, model, times[sample_pos:sample_pos + 1],
                                            r_c[None], U_c[None])
                        dec = ref.decomps(0)
                        ym = build_ym(grid_c, [coarse])
                        terms = remainder(grid_c, model, ym, r_c, U_c, dec)
                        rem_acc[sample_pos] += [terms[k] for k in REMAINDER_TERMS]
                sample_pos += 1
                if sample_pos == n_samples:
                    break
            if i_step < cfg.n_steps and not frozen:
                coarse = step_em(grid_c, model, cfg.stepper, coarse, w_coarse, i_step)
                for j in range(cfg.refine):
                    fine = step_em(grid_f, model, cfg.stepper, fine, w_fine,
                                   cfg.refine * i_step + j)

    c_fit, amp = fit_exponential(times, emv.mean(axis=0))
    bias = max(amp - emv.mean(axis=0)[0], 0.0)
    resid = gronwall_check(times, emv.mean(axis=0), c_fit, bias)
    return RelativeEnergyReport(
        times=times,
        emv=emv,
        tau=tau,
        gronwall_c=c_fit,
        gronwall_bias=bias,
        gronwall_residual=resid,
        remainder_terms=None if rem_acc is None else rem_acc / cfg.members,
    )
