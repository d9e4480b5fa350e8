"""Truncated cylindrical Wiener process and the momentum diffusion operator.

The driving noise is a finite family of independent scalar Brownian motions
``W_k``; mode ``k`` forces the momentum through a coefficient field
``G_k(rho, m)``.  Two coefficient families are supported:

* ``affine``: ``G_k(rho, m) = rho K_k e_{k mod N} + L_k m`` with real
  ``K_k, L_k``.  The density factor acts along a fixed unit axis per mode
  (axes cycle with ``k``), which keeps constants solenoidal and makes the
  sub-linearity constant ``2 sum(K_k^2 + L_k^2)`` exact.
* ``general``: user callables ``g(coords, rho, mom) -> (N, *sizes)`` with
  declared Lipschitz constants, vanishing at ``(rho, m) = (0, 0)``.

Brownian increments come from counter-based Philox streams keyed by
``(master seed, member)`` with the step index in the counter, so every path
is a pure function of its key and is independent of scheduling order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

log = logging.getLogger(__name__)


class NoiseError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "affine"
    K: tuple[float, ...] = ()
    L: tuple[float, ...] = ()
    coefficients: tuple = ()  # general kind: callables g(coords, rho, mom)
    alphas: tuple[float, ...] = ()  # general kind: declared Lipschitz constants

    def __post_init__(self):
        if self.kind not in ("affine", "general"):
            raise NoiseError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "K", tuple(float(k) for k in self.K))
        object.__setattr__(self, "L", tuple(float(l) for l in self.L))
        if self.kind == "affine":
            if len(self.K) != len(self.L):
                raise NoiseError("K and L must have equal length")
        else:
            if len(self.coefficients) != len(self.alphas):
                raise NoiseError("each general coefficient needs a Lipschitz constant")

    @property
    def modes(self) -> int:
        return len(self.K) if self.kind == "affine" else len(self.coefficients)

    @property
    def alpha_sum(self) -> float:
        """Sum of per-mode Lipschitz constants (finite by truncation)."""
        if self.kind == "affine":
            return float(sum(abs(k) + abs(l) for k, l in zip(self.K, self.L)))
        return float(sum(self.alphas))

    def apply_mode(self, mode: int, grid, rho: np.ndarray, mom: np.ndarray) -> np.ndarray:
        """Coefficient field ``G_k(rho, m)`` for one mode."""
        if not 0 <= mode < self.modes:
            raise NoiseError(f"mode {mode} out of range [0, {self.modes})")
        if self.kind == "affine":
            out = self.L[mode] * mom
            axis = mode % grid.dim
            out[axis] += self.K[mode] * rho
            return out
        return np.asarray(self.coefficients[mode](grid.coordinates(), rho, mom))

    def momentum_kick(self, grid, rho: np.ndarray, mom: np.ndarray,
                      dW: np.ndarray) -> np.ndarray:
        """``sum_k G_k(rho, m) dW_k`` in closed form for the affine kind."""
        if self.modes == 0:
            return np.zeros_like(mom)
        if self.kind == "affine":
            out = float(np.dot(self.L, dW)) * mom
            for mode in range(self.modes):
                if self.K[mode] != 0.0:
                    out[mode % grid.dim] += self.K[mode] * dW[mode] * rho
            return out
        out = np.zeros_like(mom)
        for mode in range(self.modes):
            out += dW[mode] * self.apply_mode(mode, grid, rho, mom)
        return out

    def ito_correction_density(self, grid, rho: np.ndarray, mom: np.ndarray,
                               rho_floor: float = 1e-8) -> np.ndarray:
        """Pointwise ``sum_k |G_k(rho, m)|^2 / rho``.

        Evaluated in the velocity form ``rho |K_k e + L_k u|^2`` with
        ``u = m / max(rho, rho_floor)``, which stays finite toward vacuum.
        Vacuum cells carrying momentum are reported through the module
        logger.
        """
        if self.modes == 0:
            return np.zeros_like(rho)
        vac = rho < rho_floor
        if np.any(vac):
            bad = int(np.count_nonzero(vac & (np.sum(np.abs(mom), axis=0) > 0)))
            if bad:
                log.warning("ito correction: %d vacuum cells with nonzero momentum", bad)
        u = mom / np.maximum(rho, rho_floor)
        if self.kind == "affine":
            out = np.zeros_like(rho)
            u2 = np.sum(u * u, axis=0)
            for mode in range(self.modes):
                k, l = self.K[mode], self.L[mode]
                axis = mode % grid.dim
                out += k * k + 2.0 * k * l * u[axis] + l * l * u2
            return rho * out
        out = np.zeros_like(rho)
        for mode in range(self.modes):
            gk = self.apply_mode(mode, grid, rho, mom)
            out += np.sum(gk * gk, axis=0)
        return out / np.maximum(rho, rho_floor)

    def energy_injection_rate(self, grid, rho: np.ndarray, mom: np.ndarray,
                              rho_floor: float = 1e-8) -> float:
        """Integral of half the Ito correction density over the torus."""
        return 0.5 * grid.integrate(self.ito_correction_density(grid, rho, mom, rho_floor))


# --------------------------------------------------------------------------
# Wiener increments
# --------------------------------------------------------------------------


def _philox_normals(seed: int, member: int, step: int, count: int) -> np.ndarray:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, member & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    # step sits in the high counter word; draws advance the low words, so
    # streams for distinct steps can never overlap
    counter = np.array([0, 0, 0, step & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return Generator(Philox(key=key, counter=counter)).standard_normal(count)


@dataclass(frozen=True)
class WienerPath:
    """Counter-based Brownian increment stream for one ensemble member.

    ``increments(step)`` returns the K independent ``N(0, dt)`` draws for
    that step, deterministically from ``(seed, member, step)``.
    """

    seed: int
    member: int
    modes: int
    dt: float

    def increments(self, step: int) -> np.ndarray:
        if self.dt == 0.0 or self.modes == 0:
            return np.zeros(self.modes)
        return _philox_normals(self.seed, self.member, step, self.modes) * np.sqrt(self.dt)


@dataclass(frozen=True)
class NestedWiener:
    """Brownian increments on a base partition of [0, T] with coarse views.

    Increments are canonical at ``n_base`` steps; a view with ``n_steps``
    dividing ``n_base`` aggregates consecutive fine increments, so runs at
    different step counts share one underlying path exactly.
    """

    seed: int
    member: int
    modes: int
    horizon: float
    n_base: int

    @property
    def base_dt(self) -> float:
        return self.horizon / self.n_base

    def base_increments(self, step: int) -> np.ndarray:
        if self.modes == 0:
            return np.zeros(0)
        return _philox_normals(self.seed, self.member, step, self.modes) * np.sqrt(self.base_dt)

    def view(self, n_steps: int) -> "WienerView":
        if n_steps < 1 or self.n_base % n_steps != 0:
            raise NoiseError(f"n_steps {n_steps} must divide n_base {self.n_base}")
        return WienerView(self, n_steps)


@dataclass(frozen=True)
class WienerView:
    lattice: NestedWiener
    n_steps: int

    @property
    def dt(self) -> float:
        return self.lattice.horizon / self.n_steps

    def increments(self, step: int) -> np.ndarray:
        agg = self.lattice.n_base // self.n_steps
        out = np.zeros(self.lattice.modes)
        for j in range(step * agg, (step + 1) * agg):
            out += self.lattice.base_increments(j)
        return out


@dataclass(frozen=True)
class TableWiener:
    """Precomputed increment table, mostly for tests."""

    table: np.ndarray  # (n_steps, modes)
    dt: float

    def increments(self, step: int) -> np.ndarray:
        return np.asarray(self.table[step])


# --------------------------------------------------------------------------
# statistical audits
# --------------------------------------------------------------------------


def ito_isometry_audit(g: np.ndarray, horizon: float, n_steps: int, n_paths: int,
                       seed: int = 0) -> dict:
    """Check Var(sum_k int g_k dW_k) against ``sum_k int g_k^2 dt``.

    ``g`` holds constant per-mode integrands.  Passes when the sample
    variance sits within five standard errors of the Ito prediction.
    """
    g = np.atleast_1d(np.asarray(g, dtype=np.float64))
    modes = g.size
    dt = horizon / n_steps
    totals = np.empty(n_paths)
    for member in range(n_paths):
        path = WienerPath(seed, member, modes, dt)
        acc = 0.0
        for step in range(n_steps):
            acc += float(np.dot(g, path.increments(step)))
        totals[member] = acc
    var_est = float(np.var(totals, ddof=1))
    var_pred = float(np.sum(g * g) * horizon)
    # Var of the sample variance of a Gaussian: 2 sigma^4 / (n - 1)
    se = var_pred * np.sqrt(2.0 / max(n_paths - 1, 1)) if var_pred > 0 else np.sqrt(2.0 / max(n_paths - 1, 1))
    return {
        "var_est": var_est,
        "var_pred": var_pred,
        "se": se,
        "pass": abs(var_est - var_pred) <= 5.0 * se,
    }


def lipschitz_audit(model: NoiseModel, grid, n_pairs: int = 10_000, seed: int = 0) -> dict:
    """Sampled check of ``|G_k(r,q) - G_k(r',q')| <= alpha_k (|r-r'| + |q-q'|)``."""
    rng = np.random.default_rng(seed)
    if model.kind == "affine":
        alphas = [abs(k) + abs(l) for k, l in zip(model.K, model.L)]
    else:
        alphas = list(model.alphas)
    shape = grid.sizes
    worst = 0.0
    violations = 0
    for _ in range(max(1, n_pairs // grid.n_cells)):
        rho1 = rng.uniform(0.0, 3.0, shape)
        rho2 = rng.uniform(0.0, 3.0, shape)
        m1 = rng.normal(0.0, 1.5, (grid.dim, *shape))
        m2 = rng.normal(0.0, 1.5, (grid.dim, *shape))
        for mode in range(model.modes):
            g1 = model.apply_mode(mode, grid, rho1, m1)
            g2 = model.apply_mode(mode, grid, rho2, m2)
            lhs = np.sqrt(np.sum((g1 - g2) ** 2, axis=0))
            rhs = alphas[mode] * (np.abs(rho1 - rho2) + np.sqrt(np.sum((m1 - m2) ** 2, axis=0)))
            excess = lhs - rhs
            worst = max(worst, float(np.max(excess)))
            violations += int(np.count_nonzero(excess > 1e-12 * (1.0 + rhs)))
    zero = 0.0
    for mode in range(model.modes):
        z = model.apply_mode(mode, grid, np.zeros(shape), np.zeros((grid.dim, *shape)))
        zero = max(zero, float(np.max(np.abs(z))))
    return {"max_excess": worst, "violations": violations, "zero_at_zero": zero,
            "pass": violations == 0 and zero == 0.0}


def domination_audit(model: NoiseModel, grid, n_states: int = 32, seed: int = 0) -> dict:
    """Check ``sum_k |G_k|^2 / rho <= c (rho + |m|^2 / rho)`` on random states.

    For the affine kind the sharp constant is ``c = 2 sum(K_k^2 + L_k^2)``.
    """
    rng = np.random.default_rng(seed)
    if model.kind == "affine":
        c = 2.0 * float(sum(k * k + l * l for k, l in zip(model.K, model.L)))
    else:
        c = 2.0 * float(sum(a * a for a in model.alphas))
    worst = 0.0
    for _ in range(n_states):
        rho = rng.uniform(0.05, 3.0, grid.sizes)
        mom = rng.normal(0.0, 1.5, (grid.dim, *grid.sizes))
        lhs = model.ito_correction_density(grid, rho, mom, rho_floor=1e-300)
        rhs = c * (rho + np.sum(mom * mom, axis=0) / rho)
        with np.errstate(invalid="ignore"):
            ratio = np.where(rhs > 0, lhs / rhs, 0.0)
        worst = max(worst, float(np.max(ratio)))
    return {"constant": c, "max_ratio": worst, "pass": worst <= 1.0 + 1e-9}
