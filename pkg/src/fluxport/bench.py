"""Roofline microbenchmarks: FMA throughput and streaming bandwidth.

The measured numbers characterize this machine, not any vendor hardware;
they exist so the roofline curve and the solver's arithmetic-intensity
band can be emitted and plotted.  FLOPs are counted at 2 per fused
multiply-add, stated in the CSV metadata.

Kernels run on the compiled _bench extension when available and fall back
to numpy sweeps otherwise (the fallback evaluates the multiply and add
separately; the FLOP accounting convention is unchanged).
"""

import time
from dataclasses import dataclass

import numpy as np

from .parloop import IndexSpace, default_executor

try:
    from . import _bench
except ImportError:
    _bench = None

MIN_FMA_ITEMS = 2 ** 20
FLOPS_PER_FMA = 2
FMA_ITERATIONS = 128
FLOPS_PER_ITEM = FMA_ITERATIONS * 2 * FLOPS_PER_FMA   # 512

# Arithmetic-intensity accounting for the diffusion stencil: 9 FLOPs per
# interior point (5 multiplies, 4 adds) against one x read, one y write,
# and five coefficient reads of 8 bytes each.
DIFFUSION_FLOPS_PER_POINT = 9
DIFFUSION_BYTES_PER_POINT = 8 * (1 + 1 + 5)
DEFAULT_AI_RANGE = (0.05, 0.5)

# The stream buffer should comfortably exceed the last-level cache; four
# times a typical 32 MiB LLC is the documented heuristic for CLI defaults.
DEFAULT_STREAM_N = 2 ** 23


@dataclass
class RooflineSample:
    """Measured throughput/bandwidth points plus the kernel AI band."""

    fp64_gflops: float
    read_gbs: float
    write_gbs: float
    kernel_ai_range: tuple = DEFAULT_AI_RANGE

    def __post_init__(self):
        if min(self.fp64_gflops, self.read_gbs, self.write_gbs) <= 0:
            raise ValueError("measurements must be positive")

    @property
    def bw_avg(self):
        return 0.5 * (self.read_gbs + self.write_gbs)

    @property
    def bw_min(self):
        return min(self.read_gbs, self.write_gbs)

    @property
    def bw_max(self):
        return max(self.read_gbs, self.write_gbs)

    @property
    def ridge_ai(self):
        return self.fp64_gflops / self.bw_avg


def stencil_arithmetic_intensity():
    """FLOP/byte of the diffusion apply kernel (counted traffic)."""
    return DIFFUSION_FLOPS_PER_POINT / DIFFUSION_BYTES_PER_POINT


def _fma_chunk_numpy(lo, hi):
    n = np.arange(lo, hi, dtype=np.float64)
    x = n.copy()
    y = np.asarray(np.arange(lo, hi) & 255, dtype=np.float64)
    for _ in range(FMA_ITERATIONS):
        x = y * x + y
        y = x * y + x
    return float(y[-1]) if y.size else 0.0


def bench_fma_detailed(n_items, repeats=5, executor=None):
    """Best-of-N FMA throughput; returns (GFLOP/s, per-repeat seconds)."""
    if n_items < MIN_FMA_ITEMS:
        raise ValueError(
            f"n_items must be >= {MIN_FMA_ITEMS} to exceed timer resolution"
        )
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    ex = executor if executor is not None else default_executor()
    space = IndexSpace((0, n_items - 1))
    sinks = []

    def block(sub):
        lo, hi = sub.dims[0]
        if _bench is not None:
            sinks.append(_bench.fma_chain(lo, hi + 1))
        else:
            sinks.append(_fma_chunk_numpy(lo, hi + 1))

    times = []
    for _ in range(repeats):
        sinks.clear()
        t0 = time.perf_counter()
        ex.par_for_blocks(space, block)
        times.append(time.perf_counter() - t0)
    flops = FLOPS_PER_ITEM * n_items
    return flops / min(times) / 1e9, times


def bench_fma(n_items, repeats=5, executor=None):
    """fp64 GFLOP/s of the two-FMA chain kernel (best of repeats)."""
    gflops, _ = bench_fma_detailed(n_items, repeats, executor)
    return gflops


def bench_stream_detailed(n, m_passes=8, mode="write", repeats=5,
                          executor=None):
    """Best-of-N streaming bandwidth; returns (GB/s, per-repeat seconds).

    Moves n * m_passes binary64 elements per measurement.  The buffer
    should be at least 4x the last-level cache for a memory (not cache)
    number; that heuristic is not enforced so small self-tests stay cheap.
    """
    if mode not in ("read", "write"):
        raise ValueError(f"mode must be 'read' or 'write', got {mode!r}")
    if n < 1 or m_passes < 1 or repeats < 1:
        raise ValueError("n, m_passes, and repeats must be positive")
    ex = executor if executor is not None else default_executor()
    buf = np.ones(n, dtype=np.float64)
    space = IndexSpace((0, n - 1))
    lane_out = []

    def block(sub):
        lo, hi = sub.dims[0]
        view = buf[lo:hi + 1]
        if _bench is not None:
            if mode == "write":
                _bench.stream_write(view, m_passes)
            else:
                lane_out.append(_bench.stream_read(view, m_passes))
        else:
            if mode == "write":
                for _ in range(m_passes):
                    view[:] = 0.0
            else:
                acc = 0.0
                for _ in range(m_passes):
                    acc += float(np.add.reduce(view))
                lane_out.append(acc)

    times = []
    for _ in range(repeats):
        lane_out.clear()
        t0 = time.perf_counter()
        ex.par_for_blocks(space, block)
        times.append(time.perf_counter() - t0)
    moved = 8.0 * n * m_passes
    return moved / min(times) / 1e9, times


def bench_stream(n, m_passes=8, mode="write", repeats=5, executor=None):
    """GB/s of the strided-pass stream kernel (best of repeats)."""
    gbs, _ = bench_stream_detailed(n, m_passes, mode, repeats, executor)
    return gbs


def measure_sample(n_items=MIN_FMA_ITEMS, stream_n=DEFAULT_STREAM_N,
                   m_passes=8, repeats=5, executor=None,
                   ai_range=DEFAULT_AI_RANGE):
    """Run all benchmarks and bundle them into a RooflineSample."""
    gflops = bench_fma(n_items, repeats, executor)
    read = bench_stream(stream_n, m_passes, "read", repeats, executor)
    write = bench_stream(stream_n, m_passes, "write", repeats, executor)
    return RooflineSample(gflops, read, write, ai_range)


def emit_roofline(sample, path, points_per_octave=4):
    """Write the roofline curve CSV.

    Numeric rows sweep arithmetic intensity log-spaced over [2^-6, 2^6];
    roof(ai) = min(fp64_gflops, bw * ai) per bandwidth column.  Two
    comment rows annotate the solver's kernel AI band for the plotter.
    """
    n = 12 * points_per_octave + 1
    ais = np.logspace(-6, 6, n, base=2.0)
    lo, hi = sample.kernel_ai_range
    with open(path, "w", encoding="utf-8") as f:
        f.write("# fluxport roofline sample (FLOPs counted as 2 per FMA)\n")
        f.write(f"# fp64_gflops,{sample.fp64_gflops:.6g}\n")
        f.write(f"# read_gbs,{sample.read_gbs:.6g}\n")
        f.write(f"# write_gbs,{sample.write_gbs:.6g}\n")
        f.write(f"# kernel_ai_low,{lo:.6g}\n")
        f.write(f"# kernel_ai_high,{hi:.6g}\n")
        f.write("ai,flops_roof,bw_min_roof,bw_max_roof\n")
        for ai in ais:
            roof = min(sample.fp64_gflops, sample.bw_avg * ai)
            roof_lo = min(sample.fp64_gflops, sample.bw_min * ai)
            roof_hi = min(sample.fp64_gflops, sample.bw_max * ai)
            f.write(f"{ai:.9g},{roof:.9g},{roof_lo:.9g},{roof_hi:.9g}\n")
    return path
