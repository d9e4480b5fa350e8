#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

The active backend is chosen at import time of ``torusgas.kernels``
(``TORUSGAS_DISABLE_NUMBA=1`` forces numpy); this script imports both
implementation tables directly and times them side by side, so it works
regardless of the flag.

Usage: python benchmarks/bench_kernels.py [--members M] [--cells N]
"""

import argparse
import time

import numpy as np

from torusgas import kernels

PARAMS = (1.0, 2.0, 0.05, 6.0)


def time_call(fn, *args, repeat=5):
    fn(*args)  # warm-up (JIT compile / cache load)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--members", type=int, default=64)
    parser.add_argument("--cells", type=int, default=4096)
    parser.add_argument("--dim", type=int, default=2)
    args = parser.parse_args()

    impls = kernels.implementations()
    if impls["numba"] is None:
        print("numba unavailable or disabled; nothing to compare")
        return

    rng = np.random.default_rng(0)
    rho1 = rng.uniform(0.2, 3.0, args.cells)
    rho_atoms = rng.uniform(0.2, 3.0, (args.members, args.cells))
    mom1 = rng.normal(0.0, 1.0, (args.dim, args.cells))
    mom_atoms = rng.normal(0.0, 1.0, (args.members, args.dim, args.cells))
    r = rng.uniform(0.5, 2.0, args.cells)
    U = rng.normal(0.0, 0.5, (args.dim, args.cells))

    cases = [
        ("pressure", (rho_atoms, *PARAMS)),
        ("potential", (rho_atoms, *PARAMS)),
        ("relative_h", (rho_atoms, np.broadcast_to(r, rho_atoms.shape).copy(), *PARAMS)),
        ("kinetic", (rho1, mom1)),
        ("ym_energy_defect", (rho_atoms, mom_atoms, *PARAMS)),
        ("ym_momentum_defect", (rho_atoms, mom_atoms, *PARAMS)),
        ("velocity_oscillation", (rho_atoms, mom_atoms)),
        ("relative_energy_density", (rho1, mom1, r, U, *PARAMS)),
    ]

    print(f"members={args.members} cells={args.cells} dim={args.dim} "
          f"(active backend: {kernels.backend()})")
    print(f"{'kernel':<26}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}")
    for name, call_args in cases:
        t_np = time_call(impls["numpy"][name], *call_args)
        t_nb = time_call(impls["numba"][name], *call_args)
        print(f"{name:<26}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}"
              f"{t_np / t_nb:>9.2f}x")


if __name__ == "__main__":
    main()
