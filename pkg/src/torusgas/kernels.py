"""Hot pointwise kernels with numba and pure-numpy implementations.

Every kernel exists twice: a loop version compiled with ``numba.njit`` and a
vectorized numpy fallback.  The active set is chosen at import time; setting
the environment variable ``TORUSGAS_DISABLE_NUMBA=1`` (or a failed numba
import) selects the numpy path.  ``benchmarks/bench_kernels.py`` times the
two side by side and ``tests/test_kernels.py`` pins their agreement.

All kernels take flattened cell axes: atom arrays are ``(M, ncells)`` for
density and ``(M, ncomp, ncells)`` for momentum.  Pressure-law parameters
arrive as plain floats ``(a, gamma, delta, Gam)``.
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLED = os.environ.get("TORUSGAS_DISABLE_NUMBA", "").strip() not in ("", "0")

try:  # pragma: no cover - exercised implicitly by the import
    if _DISABLED:
        raise ImportError("numba disabled by TORUSGAS_DISABLE_NUMBA")
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    njit = None
    _HAVE_NUMBA = False


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------


def _xlogx_np(x):
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def pressure_np(rho, a, gamma, delta, Gam):
    """p_delta(rho) = a rho^gamma + delta (rho + rho^Gam)."""
    p = a * rho**gamma
    if delta != 0.0:
        p = p + delta * (rho + rho**Gam)
    return p


def potential_np(rho, a, gamma, delta, Gam):
    """P_delta(rho) = a (rho^gamma - rho)/(gamma-1) + delta (rho log rho + rho^Gam/(Gam-1))."""
    P = a * (rho**gamma - rho) / (gamma - 1.0)
    if delta != 0.0:
        P = P + delta * (_xlogx_np(np.asarray(rho, dtype=np.float64)) + rho**Gam / (Gam - 1.0))
    return P


def potential_prime_np(rho, a, gamma, delta, Gam):
    dP = a * (gamma * rho ** (gamma - 1.0) - 1.0) / (gamma - 1.0)
    if delta != 0.0:
        dP = dP + delta * (np.log(rho) + 1.0 + Gam * rho ** (Gam - 1.0) / (Gam - 1.0))
    return dP


def potential_second_np(rho, a, gamma, delta, Gam):
    d2P = a * gamma * rho ** (gamma - 2.0)
    if delta != 0.0:
        d2P = d2P + delta * (1.0 / rho + Gam * rho ** (Gam - 2.0))
    return d2P


def relative_h_np(rho, r, a, gamma, delta, Gam):
    """H(rho, r) = P(rho) - P'(r)(rho - r) - P(r), Taylor form near rho = r."""
    rho = np.asarray(rho, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    rho_b, r_b = np.broadcast_arrays(rho, r)
    direct = (
        potential_np(rho_b, a, gamma, delta, Gam)
        - potential_prime_np(r_b, a, gamma, delta, Gam) * (rho_b - r_b)
        - potential_np(r_b, a, gamma, delta, Gam)
    )
    near = np.abs(rho_b - r_b) < 1e-6 * r_b
    if np.any(near):
        taylor = 0.5 * potential_second_np(r_b, a, gamma, delta, Gam) * (rho_b - r_b) ** 2
        direct = np.where(near, taylor, direct)
    return direct


def kinetic_np(rho, mom):
    """0.5 |m|^2 / rho with rho, (ncomp, n) momentum; returns (n,)."""
    return 0.5 * np.sum(mom * mom, axis=0) / rho


def ym_energy_defect_np(rho_atoms, mom_atoms, a, gamma, delta, Gam):
    """Mean energy density and its Jensen gap at the atom barycenter.

    Returns ``(mean_energy, defect)`` per cell where
    ``mean_energy = <0.5|m|^2/rho + P(rho)>`` and
    ``defect = mean_energy - (0.5|<m>|^2/<rho> + P(<rho>))``.
    """
    mean_e = np.mean(
        0.5 * np.sum(mom_atoms**2, axis=1) / rho_atoms
        + potential_np(rho_atoms, a, gamma, delta, Gam),
        axis=0,
    )
    b_rho = np.mean(rho_atoms, axis=0)
    b_mom = np.mean(mom_atoms, axis=0)
    bary_e = 0.5 * np.sum(b_mom**2, axis=0) / b_rho + potential_np(b_rho, a, gamma, delta, Gam)
    return mean_e, mean_e - bary_e


def ym_momentum_defect_np(rho_atoms, mom_atoms, a, gamma, delta, Gam):
    """Kinetic tensor defect and scalar pressure defect of the atom cloud.

    Returns ``(kin, press)`` with ``kin[i, j] = <m_i m_j / rho> -
    <m>_i <m>_j / <rho>`` and ``press = <p(rho)> - p(<rho>)``.
    """
    m, ncomp, n = mom_atoms.shape
    outer = mom_atoms[:, :, None, :] * mom_atoms[:, None, :, :] / rho_atoms[:, None, None, :]
    kin = np.mean(outer, axis=0)
    b_rho = np.mean(rho_atoms, axis=0)
    b_mom = np.mean(mom_atoms, axis=0)
    kin -= b_mom[:, None, :] * b_mom[None, :, :] / b_rho[None, None, :]
    press = np.mean(pressure_np(rho_atoms, a, gamma, delta, Gam), axis=0) - pressure_np(
        b_rho, a, gamma, delta, Gam
    )
    return kin, press


def velocity_oscillation_np(rho_atoms, mom_atoms):
    """<|u - <u>|^2> per cell, u = m / rho atomwise."""
    u = mom_atoms / rho_atoms[:, None, :]
    du = u - np.mean(u, axis=0)
    return np.mean(np.sum(du**2, axis=1), axis=0)


def relative_energy_density_np(rho, mom, r, U, a, gamma, delta, Gam):
    """0.5 rho |m/rho - U|^2 + H(rho, r) per cell."""
    u = mom / rho
    kin = 0.5 * rho * np.sum((u - U) ** 2, axis=0)
    return kin + relative_h_np(rho, r, a, gamma, delta, Gam)


_NUMPY_IMPLS = {
    "pressure": pressure_np,
    "potential": potential_np,
    "potential_prime": potential_prime_np,
    "potential_second": potential_second_np,
    "relative_h": relative_h_np,
    "kinetic": kinetic_np,
    "ym_energy_defect": ym_energy_defect_np,
    "ym_momentum_defect": ym_momentum_defect_np,
    "velocity_oscillation": velocity_oscillation_np,
    "relative_energy_density": relative_energy_density_np,
}


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _fast_pow(x, e):
        # powers hit constantly in the hot loops; the common small integer
        # exponents beat math.pow by a wide margin
        if e == 2.0:
            return x * x
        if e == 1.0:
            return x
        if e == 3.0:
            return x * x * x
        if e == 0.0:
            return 1.0
        if e == 4.0:
            x2 = x * x
            return x2 * x2
        if e == 5.0:
            x2 = x * x
            return x2 * x2 * x
        if e == 6.0:
            x3 = x * x * x
            return x3 * x3
        if e == -1.0:
            return 1.0 / x
        return x**e

    @njit(cache=True, nogil=True)
    def _pot_scalar(x, a, gamma, delta, Gam):
        P = a * (_fast_pow(x, gamma) - x) / (gamma - 1.0)
        if delta != 0.0:
            xlx = x * math.log(x) if x > 0.0 else 0.0
            P += delta * (xlx + _fast_pow(x, Gam) / (Gam - 1.0))
        return P

    @njit(cache=True, nogil=True)
    def _pot_prime_scalar(x, a, gamma, delta, Gam):
        dP = a * (gamma * _fast_pow(x, gamma - 1.0) - 1.0) / (gamma - 1.0)
        if delta != 0.0:
            dP += delta * (math.log(x) + 1.0 + Gam * _fast_pow(x, Gam - 1.0) / (Gam - 1.0))
        return dP

    @njit(cache=True, nogil=True)
    def _pot_second_scalar(x, a, gamma, delta, Gam):
        d2P = a * gamma * _fast_pow(x, gamma - 2.0)
        if delta != 0.0:
            d2P += delta * (1.0 / x + Gam * _fast_pow(x, Gam - 2.0))
        return d2P

    @njit(cache=True, nogil=True)
    def _press_scalar(x, a, gamma, delta, Gam):
        p = a * _fast_pow(x, gamma)
        if delta != 0.0:
            p += delta * (x + _fast_pow(x, Gam))
        return p

    @njit(cache=True, nogil=True)
    def _h_scalar(x, r, a, gamma, delta, Gam):
        if abs(x - r) < 1e-6 * r:
            return 0.5 * _pot_second_scalar(r, a, gamma, delta, Gam) * (x - r) ** 2
        return (
            _pot_scalar(x, a, gamma, delta, Gam)
            - _pot_prime_scalar(r, a, gamma, delta, Gam) * (x - r)
            - _pot_scalar(r, a, gamma, delta, Gam)
        )

    @njit(cache=True, nogil=True)
    def pressure_nb(rho, a, gamma, delta, Gam):
        flat = rho.ravel()
        out = np.empty(flat.shape[0])
        for i in range(flat.shape[0]):
            out[i] = _press_scalar(flat[i], a, gamma, delta, Gam)
        return out.reshape(rho.shape)

    @njit(cache=True, nogil=True)
    def potential_nb(rho, a, gamma, delta, Gam):
        flat = rho.ravel()
        out = np.empty(flat.shape[0])
        for i in range(flat.shape[0]):
            out[i] = _pot_scalar(flat[i], a, gamma, delta, Gam)
        return out.reshape(rho.shape)

    @njit(cache=True, nogil=True)
    def potential_prime_nb(rho, a, gamma, delta, Gam):
        flat = rho.ravel()
        out = np.empty(flat.shape[0])
        for i in range(flat.shape[0]):
            out[i] = _pot_prime_scalar(flat[i], a, gamma, delta, Gam)
        return out.reshape(rho.shape)

    @njit(cache=True, nogil=True)
    def potential_second_nb(rho, a, gamma, delta, Gam):
        flat = rho.ravel()
        out = np.empty(flat.shape[0])
        for i in range(flat.shape[0]):
            out[i] = _pot_second_scalar(flat[i], a, gamma, delta, Gam)
        return out.reshape(rho.shape)

    @njit(cache=True, nogil=True)
    def relative_h_nb(rho, r, a, gamma, delta, Gam):
        rho_b = np.broadcast_to(rho, np.broadcast_shapes(rho.shape, r.shape))
        r_b = np.broadcast_to(r, rho_b.shape)
        x = rho_b.ravel()
        y = r_b.ravel()
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            out[i] = _h_scalar(x[i], y[i], a, gamma, delta, Gam)
        return out.reshape(rho_b.shape)

    @njit(cache=True, nogil=True)
    def kinetic_nb(rho, mom):
        ncomp, n = mom.shape
        out = np.empty(n)
        for i in range(n):
            s = 0.0
            for c in range(ncomp):
                s += mom[c, i] * mom[c, i]
            out[i] = 0.5 * s / rho[i]
        return out

    @njit(cache=True, nogil=True)
    def ym_energy_defect_nb(rho_atoms, mom_atoms, a, gamma, delta, Gam):
        m, ncomp, n = mom_atoms.shape
        mean_e = np.zeros(n)
        b_rho = np.zeros(n)
        b_mom = np.zeros((ncomp, n))
        for k in range(m):
            for i in range(n):
                rho = rho_atoms[k, i]
                s = 0.0
                for c in range(ncomp):
                    s += mom_atoms[k, c, i] * mom_atoms[k, c, i]
                    b_mom[c, i] += mom_atoms[k, c, i]
                mean_e[i] += 0.5 * s / rho + _pot_scalar(rho, a, gamma, delta, Gam)
                b_rho[i] += rho
        defect = np.empty(n)
        for i in range(n):
            mean_e[i] /= m
            br = b_rho[i] / m
            s = 0.0
            for c in range(ncomp):
                bm = b_mom[c, i] / m
                s += bm * bm
            defect[i] = mean_e[i] - (0.5 * s / br + _pot_scalar(br, a, gamma, delta, Gam))
        return mean_e, defect

    @njit(cache=True, nogil=True)
    def ym_momentum_defect_nb(rho_atoms, mom_atoms, a, gamma, delta, Gam):
        m, ncomp, n = mom_atoms.shape
        kin = np.zeros((ncomp, ncomp, n))
        press = np.zeros(n)
        b_rho = np.zeros(n)
        b_mom = np.zeros((ncomp, n))
        for k in range(m):
            for i in range(n):
                rho = rho_atoms[k, i]
                for c in range(ncomp):
                    b_mom[c, i] += mom_atoms[k, c, i]
                    for d in range(ncomp):
                        kin[c, d, i] += mom_atoms[k, c, i] * mom_atoms[k, d, i] / rho
                press[i] += _press_scalar(rho, a, gamma, delta, Gam)
                b_rho[i] += rho
        for i in range(n):
            br = b_rho[i] / m
            press[i] = press[i] / m - _press_scalar(br, a, gamma, delta, Gam)
            for c in range(ncomp):
                for d in range(ncomp):
                    kin[c, d, i] = kin[c, d, i] / m - (b_mom[c, i] / m) * (b_mom[d, i] / m) / br
        return kin, press

    @njit(cache=True, nogil=True)
    def velocity_oscillation_nb(rho_atoms, mom_atoms):
        m, ncomp, n = mom_atoms.shape
        mean_u = np.zeros((ncomp, n))
        for k in range(m):
            for c in range(ncomp):
                for i in range(n):
                    mean_u[c, i] += mom_atoms[k, c, i] / rho_atoms[k, i]
        out = np.zeros(n)
        for k in range(m):
            for i in range(n):
                s = 0.0
                for c in range(ncomp):
                    du = mom_atoms[k, c, i] / rho_atoms[k, i] - mean_u[c, i] / m
                    s += du * du
                out[i] += s
        return out / m

    @njit(cache=True, nogil=True)
    def relative_energy_density_nb(rho, mom, r, U, a, gamma, delta, Gam):
        ncomp, n = mom.shape
        out = np.empty(n)
        for i in range(n):
            s = 0.0
            for c in range(ncomp):
                du = mom[c, i] / rho[i] - U[c, i]
                s += du * du
            out[i] = 0.5 * rho[i] * s + _h_scalar(rho[i], r[i], a, gamma, delta, Gam)
        return out

    _NUMBA_IMPLS = {
        "pressure": pressure_nb,
        "potential": potential_nb,
        "potential_prime": potential_prime_nb,
        "potential_second": potential_second_nb,
        "relative_h": relative_h_nb,
        "kinetic": kinetic_nb,
        "ym_energy_defect": ym_energy_defect_nb,
        "ym_momentum_defect": ym_momentum_defect_nb,
        "velocity_oscillation": velocity_oscillation_nb,
        "relative_energy_density": relative_energy_density_nb,
    }
else:  # pragma: no cover
    _NUMBA_IMPLS = None


ACTIVE = _NUMBA_IMPLS if _HAVE_NUMBA else _NUMPY_IMPLS


def backend() -> str:
    """Name of the active kernel backend (``numba`` or ``numpy``)."""
    return "numba" if _HAVE_NUMBA else "numpy"


def implementations():
    """Both implementation tables, for parity tests and benchmarks."""
    return {"numpy": _NUMPY_IMPLS, "numba": _NUMBA_IMPLS}


pressure = ACTIVE["pressure"]
potential = ACTIVE["potential"]
potential_prime = ACTIVE["potential_prime"]
potential_second = ACTIVE["potential_second"]
relative_h = ACTIVE["relative_h"]
kinetic = ACTIVE["kinetic"]
ym_energy_defect = ACTIVE["ym_energy_defect"]
ym_momentum_defect = ACTIVE["ym_momentum_defect"]
velocity_oscillation = ACTIVE["velocity_oscillation"]
relative_energy_density = ACTIVE["relative_energy_density"]
