"""fluxport: surface flux-transport ensemble simulation at desk scale.

Evolves an ensemble of radial-field maps on a spherical surface under
analytic flows and diffusion, with a data-parallel loop layer, bit-exact
file formats and validation, and roofline microbenchmarks.  Hot kernels
run on a compiled extension when built, with a pure-numpy fallback that
produces bitwise-identical results.
"""

from .grid import MapField, SphericalGrid, build_uniform_grid, integrate_map
from .kernels import BACKEND_NAME, HAVE_COMPILED
from .parloop import Executor, ExecutorConfig, IndexSpace, ReductionSpec

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "Executor",
    "ExecutorConfig",
    "HAVE_COMPILED",
    "IndexSpace",
    "MapField",
    "ReductionSpec",
    "SphericalGrid",
    "build_uniform_grid",
    "integrate_map",
    "__version__",
]
