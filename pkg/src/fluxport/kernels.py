"""Backend selection for the hot solver kernels.

The compiled extension (fluxport._core) is preferred when importable; the
pure-numpy module is the fallback.  Both expose the same functions with
bitwise-identical results, so selection only affects speed.

Set FLUXPORT_BACKEND=python or FLUXPORT_BACKEND=compiled to force a
backend (the latter raises if the extension is missing).
"""

import os

from . import kernels_numpy

BACKEND_ENV = "FLUXPORT_BACKEND"

try:
    from . import _core
except ImportError:
    _core = None


def _select():
    forced = os.environ.get(BACKEND_ENV, "").strip().lower()
    if forced in ("python", "numpy", "fallback"):
        return kernels_numpy
    if forced == "compiled":
        if _core is None:
            raise ImportError(
                "FLUXPORT_BACKEND=compiled but fluxport._core is not built"
            )
        return _core
    if forced:
        raise ValueError(f"unrecognized {BACKEND_ENV}={forced!r}")
    return _core if _core is not None else kernels_numpy


impl = _select()

BACKEND_NAME = impl.BACKEND_NAME
HAVE_COMPILED = _core is not None

seq_sum = impl.seq_sum
slab_min_max = impl.slab_min_max
diffusion_interior = impl.diffusion_interior
pole_flux_sums = impl.pole_flux_sums
upwind_fluxes = impl.upwind_fluxes
weno3_fluxes = impl.weno3_fluxes
flux_update = impl.flux_update


def available_backends():
    """Name -> module for every importable backend."""
    out = {"numpy": kernels_numpy}
    if _core is not None:
        out["compiled"] = _core
    return out
