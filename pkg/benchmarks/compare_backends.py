#!/usr/bin/env python3
"""Compare the compiled kernel core against the pure-numpy fallback.

Times the hot per-slab kernels (diffusion stencil apply, polar flux
reduction, donor-cell and WENO3 flux builds, flux-difference update) on a
realistic slab and prints per-call times plus the speedup.  Also verifies
that both backends produce bitwise-identical outputs while it is at it.

Usage: python benchmarks/compare_backends.py [--n-theta N] [--n-phi N]
       [--repeats R]
"""

import argparse
import time

import numpy as np

from fluxport import kernels_numpy
from fluxport.grid import build_uniform_grid

try:
    from fluxport import _core
except ImportError:
    _core = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-theta", type=int, default=128)
    parser.add_argument("--n-phi", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if _core is None:
        parser.error("compiled core not built; run pip install -e . first")

    grid = build_uniform_grid(args.n_theta, args.n_phi)
    rng = np.random.default_rng(7)
    ntm, npm = grid.ntm, grid.npm
    x = rng.standard_normal((ntm, npm))
    x[:, -1] = x[:, 0]
    coef = rng.standard_normal((ntm, npm, 5))
    nu = np.abs(rng.standard_normal((ntm, npm))) + 0.5
    nu[:, -1] = nu[:, 0]
    vt = 1e-3 * rng.standard_normal((ntm, npm))
    vt[0] = vt[-1] = 0.0
    vt[:, -1] = vt[:, 0]
    vp = 1e-3 * rng.standard_normal((ntm, npm))
    vp[:, -1] = vp[:, 0]
    y = np.empty_like(x)
    ft = np.empty((ntm - 1, npm - 1))
    fp = np.empty((ntm, npm - 1))
    dia = 0.01 * grid.inv_cell_area
    cap = 0.01 * grid.inv_cap_area

    cases = {
        "diffusion_interior": lambda m: m.diffusion_interior(x, coef, y),
        "pole_flux_sums": lambda m: m.pole_flux_sums(x, nu, grid.dp),
        "upwind_fluxes": lambda m: m.upwind_fluxes(
            x, vt, vp, grid.theta_face_len, grid.phi_face_len, ft, fp),
        "weno3_fluxes": lambda m: m.weno3_fluxes(
            x, vt, vp, grid.theta_face_len, grid.phi_face_len,
            grid.weno_eps_theta, grid.weno_eps_phi, ft, fp),
        "flux_update": lambda m: m.flux_update(x, ft, fp, dia, cap, cap,
                                               y),
    }

    print(f"slab {ntm} x {npm}, best of {args.repeats}")
    print(f"{'kernel':<20} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
    for name, call in cases.items():
        outs = {}
        for label, mod in (("numpy", kernels_numpy), ("compiled", _core)):
            y_probe = np.zeros_like(x)
            ft_probe = np.zeros_like(ft)
            fp_probe = np.zeros_like(fp)
            if name in ("diffusion_interior",):
                mod.diffusion_interior(x, coef, y_probe)
                outs[label] = y_probe.copy()
            elif name == "pole_flux_sums":
                outs[label] = mod.pole_flux_sums(x, nu, grid.dp)
            elif name in ("upwind_fluxes", "weno3_fluxes"):
                call_args = (x, vt, vp, grid.theta_face_len,
                             grid.phi_face_len)
                if name == "weno3_fluxes":
                    call_args += (grid.weno_eps_theta, grid.weno_eps_phi)
                getattr(mod, name)(*call_args, ft_probe, fp_probe)
                outs[label] = (ft_probe.copy(), fp_probe.copy())
            else:
                mod.flux_update(x, ft, fp, dia, cap, cap, y_probe)
                outs[label] = y_probe.copy()
        a, b = outs["numpy"], outs["compiled"]
        if isinstance(a, tuple):
            identical = all(np.array_equal(u, v) for u, v in zip(a, b))
        else:
            identical = np.array_equal(np.asarray(a), np.asarray(b))
        t_np = best_of(lambda: call(kernels_numpy), args.repeats)
        t_c = best_of(lambda: call(_core), args.repeats)
        flag = "" if identical else "  MISMATCH"
        print(f"{name:<20} {t_np * 1e6:>10.1f}us {t_c * 1e6:>10.1f}us "
              f"{t_np / t_c:>8.1f}x{flag}")


if __name__ == "__main__":
    main()
