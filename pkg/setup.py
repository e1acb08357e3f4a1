import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# _core holds the solver kernels.  It is compiled with strict IEEE settings
# (no FMA contraction, no reassociation) so its results are bitwise identical
# to the pure-numpy fallback in fluxport.kernels_numpy.
core = Extension(
    "fluxport._core",
    ["src/fluxport/_core.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
)

# _bench holds the microbenchmark kernels and is tuned for raw throughput
# (native ISA so fma() maps to the hardware instruction).
bench = Extension(
    "fluxport._bench",
    ["src/fluxport/_bench.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3", "-march=native", "-funroll-loops"],
)

setup(
    ext_modules=cythonize(
        [core, bench],
        compiler_directives={"language_level": "3"},
    )
)
