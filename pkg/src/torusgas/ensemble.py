"""Monte Carlo ensembles and empirical Young measures.

An ensemble of M realizations induces, cell by cell, a uniform atomic
probability measure on state space: the empirical Young measure.  Pairings
``<nu; F>`` are atom averages; the Jensen gaps of the energy and momentum
nonlinearities at the atom barycenter estimate the dissipation defect and
the tensor-valued momentum defect.  Concentration parts are identically
zero at finite resolution (atoms cannot escape to infinity), so the defect
estimators carry the oscillation content only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .constitutive import PressureLaw
from .dynamics import State
from .grid import Grid


class EnsembleError(ValueError):
    pass


class ConvexityError(RuntimeError):
    """A Jensen-based estimator came out negative beyond roundoff."""


@dataclass(frozen=True)
class EmpiricalYoungMeasure:
    """Per-cell atoms with uniform weights 1/M, stored as stacked snapshots.

    ``rho_atoms`` has shape ``(M, *sizes)`` and ``mom_atoms``
    ``(M, N, *sizes)``; atoms are shared by reference with the ensemble
    snapshot they came from.
    """

    grid: Grid
    rho_atoms: np.ndarray
    mom_atoms: np.ndarray

    def __post_init__(self):
        if self.rho_atoms.shape[1:] != self.grid.sizes:
            raise EnsembleError("atom density shape mismatch")
        if self.mom_atoms.shape != (self.n_atoms, self.grid.dim, *self.grid.sizes):
            raise EnsembleError("atom momentum shape mismatch")
        if np.any(self.rho_atoms < 0):
            raise EnsembleError("atoms must have nonnegative density")

    @property
    def n_atoms(self) -> int:
        return self.rho_atoms.shape[0]

    def flat(self):
        """Atoms with cell axes flattened, C-contiguous for the kernels."""
        m = self.n_atoms
        rho = np.ascontiguousarray(self.rho_atoms.reshape(m, -1))
        mom = np.ascontiguousarray(self.mom_atoms.reshape(m, self.grid.dim, -1))
        return rho, mom

    def barycenter(self):
        """Mean density and momentum fields ``(<rho>, <m>)``."""
        return np.mean(self.rho_atoms, axis=0), np.mean(self.mom_atoms, axis=0)

    def vacuum_cells(self, rho_floor: float) -> np.ndarray:
        """Per-cell count of atoms below the density floor (quality flag)."""
        return np.sum(self.rho_atoms < rho_floor, axis=0)


def build_ym(grid: Grid, states: list[State]) -> EmpiricalYoungMeasure:
    """Stack member states into the per-cell uniform atomic measure."""
    if not states:
        raise EnsembleError("need at least one member")
    rho = np.stack([s.rho for s in states])
    mom = np.stack([s.mom for s in states])
    return EmpiricalYoungMeasure(grid, rho, mom)


@dataclass(frozen=True)
class Observable:
    """Evaluation rule ``F(rho, m)`` with declared growth exponents.

    ``func`` maps stacked atoms ``(rho, mom)`` -> per-atom values with the
    atom axis first.  ``p_growth``/``q_growth`` are the declared powers in
    density and momentum; :meth:`within_budget` flags whether they respect
    the integrability budget of the limit framework.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    p_growth: float = 0.0
    q_growth: float = 0.0
    name: str = ""

    def within_budget(self, gamma: float) -> bool:
        return self.p_growth <= gamma and self.q_growth <= 2.0 * gamma / (gamma + 1.0)


def expect(ym: EmpiricalYoungMeasure, obs: Observable) -> np.ndarray:
    """Pairing ``<nu; F>``: the atom average of F, cell by cell."""
    vals = np.asarray(obs.func(ym.rho_atoms, ym.mom_atoms), dtype=np.float64)
    if vals.shape[0] != ym.n_atoms:
        raise EnsembleError("observable must keep the atom axis first")
    out = np.mean(vals, axis=0)
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))
        raise EnsembleError(f"observable {obs.name!r} non-finite at cells {bad[:5].tolist()}")
    return out


def dissipation_defect(ym: EmpiricalYoungMeasure, law: PressureLaw,
                       tol: float = 1e-12):
    """Oscillation part of the dissipation defect.

    Returns the pointwise field ``<0.5|m|^2/rho + P(rho)> - (0.5|<m>|^2/<rho>
    + P(<rho>))`` and its integral D.  Joint convexity makes the field
    nonnegative; values below ``-tol`` (scaled) indicate a broken estimator
    and raise.
    """
    rho, mom = ym.flat()
    mean_e, defect = kernels.ym_energy_defect(rho, mom, *law.params)
    scale = max(1.0, float(np.max(np.abs(mean_e))))
    if float(np.min(defect)) < -tol * scale:
        raise ConvexityError(f"negative energy defect {np.min(defect):.3e}")
    field = defect.reshape(ym.grid.sizes)
    return field, ym.grid.integrate(field)


def mean_energy_density(ym: EmpiricalYoungMeasure, law: PressureLaw) -> np.ndarray:
    """``<nu; 0.5 |m|^2 / rho + P_delta(rho)>`` as a field."""
    rho, mom = ym.flat()
    mean_e, _ = kernels.ym_energy_defect(rho, mom, *law.params)
    return mean_e.reshape(ym.grid.sizes)


def momentum_defect(ym: EmpiricalYoungMeasure, law: PressureLaw):
    """Oscillation estimator of the tensor momentum defect.

    Returns ``(kinetic, pressure)``: the positive-semidefinite kinetic part
    ``<m x m / rho> - <m> x <m> / <rho>`` with shape ``(N, N, *sizes)`` and
    the scalar isotropic part ``<p(rho)> - p(<rho>)``.
    """
    rho, mom = ym.flat()
    kin, press = kernels.ym_momentum_defect(rho, mom, *law.params)
    dim = ym.grid.dim
    return (kin.reshape(dim, dim, *ym.grid.sizes), press.reshape(ym.grid.sizes))


def momentum_defect_total(ym: EmpiricalYoungMeasure, law: PressureLaw) -> np.ndarray:
    """Kinetic plus isotropic pressure part as one tensor field."""
    kin, press = momentum_defect(ym, law)
    out = kin.copy()
    for i in range(ym.grid.dim):
        out[i, i] += press
    return out


def defect_domination_audit(ym: EmpiricalYoungMeasure, law: PressureLaw,
                            c: Optional[float] = None, tol: float = 1e-9) -> dict:
    """Pointwise check ``|mu_m| <= c D`` with ``c = max(2, N (gamma - 1))``.

    ``|mu_m|`` is the Frobenius norm of the combined momentum defect and D
    the energy oscillation defect density.  Cells where both vanish pass by
    convention.
    """
    dim = ym.grid.dim
    if c is None:
        c = max(2.0, dim * (law.gamma - 1.0))
    total = momentum_defect_total(ym, law)
    norm = np.sqrt(np.sum(total * total, axis=(0, 1)))
    defect, _ = dissipation_defect(ym, law)
    defect = np.maximum(defect, 0.0)
    tiny = 1e-14 * max(1.0, float(np.max(norm)))
    live = (norm > tiny) | (defect > tiny)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(defect > 0, norm / np.maximum(defect, 1e-300), np.inf)
    ratio = np.where(live, ratio, 0.0)
    max_ratio = float(np.max(ratio)) if ratio.size else 0.0
    return {"constant": c, "max_ratio": max_ratio, "pass": max_ratio <= c + tol}


def velocity_oscillation_field(ym: EmpiricalYoungMeasure) -> np.ndarray:
    """``<nu; |u - <nu; u>|^2>`` per cell."""
    rho, mom = ym.flat()
    return kernels.velocity_oscillation(rho, mom).reshape(ym.grid.sizes)
