"""Data-parallel loop execution layer.

Models a `do concurrent`-style contract: multi-dimensional index spaces
iterated by kernels with disjoint writes, plus scalar multi-accumulator
reductions.  Iterations may be spread over a thread pool; results never
depend on the worker count.

Two kernel styles are supported.  Elementwise kernels are plain Python
callables invoked once per index.  Block kernels receive a whole sub-space
and are expected to be vectorized (numpy slices or compiled loops); they
must compute each element identically regardless of how the space was
partitioned, which every elementwise-defined kernel does by construction.

Deterministic reductions fold contributions in ascending index order (a
fixed left-leaning combine tree keyed to the index space), so the result is
bitwise identical for any worker count and equals a plain serial loop.
`min` and `max` are exact in floating point, so any combine order gives the
same bits; only `sum` is order sensitive.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

WORKERS_ENV = "FLUXPORT_WORKERS"

_COMBINERS = {
    "sum": lambda a, b: a + b,
    "min": min,
    "max": max,
}

_IDENTITIES = {
    "sum": 0.0,
    "min": math.inf,
    "max": -math.inf,
}


class IndexSpace:
    """Cartesian product of 1 to 3 inclusive integer ranges.

    A range with upper == lower - 1 is empty.  Iteration order (where it
    matters, i.e. for deterministic reductions and the serial-equivalence
    contract) is lexicographic with the first dimension outermost.
    """

    def __init__(self, *dims):
        if not 1 <= len(dims) <= 3:
            raise ValueError("IndexSpace supports 1 to 3 dimensions")
        self.dims = tuple((int(lo), int(hi)) for lo, hi in dims)
        for lo, hi in self.dims:
            if hi < lo - 1:
                raise ValueError(f"invalid range ({lo}, {hi})")

    @property
    def shape(self):
        return tuple(max(0, hi - lo + 1) for lo, hi in self.dims)

    def __len__(self):
        n = 1
        for s in self.shape:
            n *= s
        return n

    def __repr__(self):
        return f"IndexSpace{self.dims}"

    def indices(self):
        """Yield all multi-indices in ascending lexicographic order."""
        if len(self) == 0:
            return
        ranges = [range(lo, hi + 1) for lo, hi in self.dims]
        if len(ranges) == 1:
            for i in ranges[0]:
                yield (i,)
        elif len(ranges) == 2:
            for i in ranges[0]:
                for j in ranges[1]:
                    yield (i, j)
        else:
            for i in ranges[0]:
                for j in ranges[1]:
                    for k in ranges[2]:
                        yield (i, j, k)

    def split(self, n):
        """Split into at most n contiguous chunks along the outer dimension.

        Chunks cover the space exactly once and are returned in ascending
        order.  An empty space yields no chunks.
        """
        if len(self) == 0:
            return []
        lo, hi = self.dims[0]
        length = hi - lo + 1
        n = max(1, min(n, length))
        base, extra = divmod(length, n)
        chunks = []
        start = lo
        for c in range(n):
            size = base + (1 if c < extra else 0)
            sub = ((start, start + size - 1),) + self.dims[1:]
            chunks.append(IndexSpace(*sub))
            start += size
        return chunks


class ReductionSpec:
    """Accumulator layout for par_reduce: (identity, combiner) pairs.

    Combiners are named ("sum", "min", "max") so exactness properties are
    known to the executor.  The identity must be the combiner's neutral
    element.
    """

    def __init__(self, accumulators):
        self.accumulators = []
        for identity, op in accumulators:
            if op not in _COMBINERS:
                raise ValueError(f"unknown combiner '{op}'")
            if identity != _IDENTITIES[op]:
                raise ValueError(
                    f"identity {identity!r} is not neutral for '{op}'"
                )
            self.accumulators.append((identity, op))

    @classmethod
    def sums(cls, n):
        return cls([(0.0, "sum")] * n)

    @classmethod
    def of(cls, *ops):
        return cls([(_IDENTITIES[op], op) for op in ops])

    def __len__(self):
        return len(self.accumulators)

    @property
    def identities(self):
        return [identity for identity, _ in self.accumulators]


@dataclass
class ExecutorConfig:
    worker_count: int = field(default=0)  # 0 means auto
    deterministic: bool = True

    def __post_init__(self):
        if self.worker_count < 0:
            raise ValueError("worker_count must be >= 1 (or 0 for auto)")


def resolve_worker_count(requested=None):
    """Worker-count resolution: explicit request, then env, then CPU count."""
    if requested is not None and requested > 0:
        return int(requested)
    env = os.environ.get(WORKERS_ENV)
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer")
        return n
    return os.cpu_count() or 1


class Executor:
    """Runs parallel regions on a shared thread pool.

    A single instance processes one parallel region at a time (the module
    contract); kernels must be safe to invoke from any worker thread.
    """

    def __init__(self, worker_count=None, deterministic=True):
        self.worker_count = resolve_worker_count(worker_count)
        self.deterministic = bool(deterministic)
        self._pool = None
        # Serial executor handed to nested bodies so inner regions cannot
        # deadlock the shared pool.
        self._inner = None if self.worker_count == 1 else Executor(
            1, deterministic
        )

    @classmethod
    def from_config(cls, config: ExecutorConfig):
        requested = config.worker_count if config.worker_count > 0 else None
        return cls(requested, config.deterministic)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def _run_chunks(self, tasks):
        """Execute callables, on the pool when more than one worker."""
        if self.worker_count == 1 or len(tasks) == 1:
            for t in tasks:
                t()
            return
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.worker_count)
        futures = [self._pool.submit(t) for t in tasks]
        for f in futures:
            f.result()

    # -- parallel for ----------------------------------------------------

    def par_for(self, space, kernel):
        """Invoke kernel(*idx) exactly once per index in the space.

        The kernel must write only to locations uniquely determined by its
        index, so the result is identical to ascending serial execution.
        """
        chunks = space.split(self.worker_count)
        if not chunks:
            return

        def run(chunk):
            def task():
                for idx in chunk.indices():
                    kernel(*idx)
            return task

        self._run_chunks([run(c) for c in chunks])

    def par_for_blocks(self, space, block_kernel):
        """Invoke block_kernel(subspace) once per worker chunk.

        The block kernel carries the same disjoint-write contract as an
        elementwise kernel: per-element results must not depend on the
        partition (true for any vectorized elementwise update).
        """
        chunks = space.split(self.worker_count)
        if not chunks:
            return
        self._run_chunks([
            (lambda c: (lambda: block_kernel(c)))(c) for c in chunks
        ])

    # -- reductions ------------------------------------------------------

    def par_reduce(self, space, spec, kernel):
        """Reduce kernel(*idx) contributions over the space.

        The kernel returns one value per accumulator (a bare number is
        accepted for a single accumulator).  In deterministic mode the fold
        runs in ascending index order regardless of worker count, so the
        result is bitwise identical to a serial loop.
        """
        n = len(space)
        nacc = len(spec)
        if n == 0:
            return list(spec.identities)

        if self.deterministic:
            rows = [None] * n
            chunks = space.split(self.worker_count)
            offsets = []
            off = 0
            for c in chunks:
                offsets.append(off)
                off += len(c)

            def run(chunk, offset):
                def task():
                    pos = offset
                    for idx in chunk.indices():
                        rows[pos] = _as_row(kernel(*idx), nacc)
                        pos += 1
                return task

            self._run_chunks(
                [run(c, o) for c, o in zip(chunks, offsets)]
            )
            accs = list(spec.identities)
            for a, (_, op) in enumerate(spec.accumulators):
                combine = _COMBINERS[op]
                acc = accs[a]
                for row in rows:
                    acc = combine(acc, row[a])
                accs[a] = acc
            return accs

        # Non-deterministic mode: per-chunk folds combined in chunk order.
        # Sum results may differ from the serial order at rounding level.
        chunks = space.split(self.worker_count)
        partials = [None] * len(chunks)

        def run(ci, chunk):
            def task():
                accs = list(spec.identities)
                for idx in chunk.indices():
                    row = _as_row(kernel(*idx), nacc)
                    for a, (_, op) in enumerate(spec.accumulators):
                        accs[a] = _COMBINERS[op](accs[a], row[a])
                partials[ci] = accs
            return task

        self._run_chunks([run(ci, c) for ci, c in enumerate(chunks)])
        accs = list(spec.identities)
        for part in partials:
            for a, (_, op) in enumerate(spec.accumulators):
                accs[a] = _COMBINERS[op](accs[a], part[a])
        return accs

    def par_reduce_blocks(self, space, spec, block_kernel):
        """Reduce per-block partials computed by block_kernel(subspace).

        Intended for exact combiners (min/max) or sums whose block partials
        are themselves order-fixed; partials are combined in block order.
        """
        chunks = space.split(self.worker_count)
        if not chunks:
            return list(spec.identities)
        nacc = len(spec)
        partials = [None] * len(chunks)

        def run(ci, chunk):
            def task():
                partials[ci] = _as_row(block_kernel(chunk), nacc)
            return task

        self._run_chunks([run(ci, c) for ci, c in enumerate(chunks)])
        accs = list(spec.identities)
        for part in partials:
            for a, (_, op) in enumerate(spec.accumulators):
                accs[a] = _COMBINERS[op](accs[a], part[a])
        return accs

    # -- nested topology -------------------------------------------------

    def par_for_nested(self, outer, body):
        """Outer-parallel / inner-serial nesting.

        body(inner, *outer_idx) is called once per outer index, possibly on
        distinct workers.  `inner` is a serial executor for inner par_for /
        par_reduce regions, which are local to one outer index and complete
        before their results are consumed.
        """
        inner = self._inner if self._inner is not None else self

        def kernel(*idx):
            body(inner, *idx)

        self.par_for(outer, kernel)


def _as_row(value, nacc):
    if nacc == 1 and not isinstance(value, (tuple, list)):
        return (value,)
    row = tuple(value)
    if len(row) != nacc:
        raise ValueError(
            f"kernel returned {len(row)} contributions, expected {nacc}"
        )
    return row


_default_executor = None


def default_executor():
    """Process-wide executor built from the environment on first use."""
    global _default_executor
    if _default_executor is None:
        _default_executor = Executor()
    return _default_executor


def set_default_executor(executor):
    global _default_executor
    _default_executor = executor
