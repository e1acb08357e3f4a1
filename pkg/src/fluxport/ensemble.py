"""Multi-realization simulation driver.

Realizations are the Cartesian product of the configured diffusion levels
with the attenuation toggle set.  Each one is an independent calculation,
but all advance together with the strictest per-realization time step, and
per-step analysis collects the extrema and flux integrals of every map.

Within a step the ensemble is advanced in two phases, advection then
diffusion (Lie splitting), each parallelized over realizations; the two
phases are timed separately to build the run's timing breakdown.
"""

import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import io as fio
from .advection import (
    FlowParams,
    _ssprk_slab,
    attenuate_flows,
    build_analytic_flows,
    cfl_dt_limit,
)
from .diffusion import _sts_slab, build_diffusion_operator
from .grid import MapField, build_uniform_grid, integrate_map
from .kernels import slab_min_max
from .parloop import Executor, IndexSpace, ReductionSpec

KM2_S_TO_RAD2_HOUR = 1.0e6 * 3600.0 / (6.96e8 ** 2)

BOUNDARY_EPS = 1e-9


@dataclass
class RealizationParams:
    nu_multiplier: float
    attenuation: bool

    def __post_init__(self):
        if self.nu_multiplier <= 0:
            raise ValueError("nu_multiplier must be positive")


@dataclass
class HistoryRecord:
    sim_time: float
    mins: np.ndarray
    maxs: np.ndarray
    signed: np.ndarray
    positive: np.ndarray
    negative: np.ndarray

    def well_formed(self):
        ok = np.all(self.mins <= self.maxs)
        ok = ok and np.array_equal(self.signed,
                                   self.positive + self.negative)
        return bool(ok)


class EnsembleState:
    """Solver state: the ensemble map plus per-realization parameters."""

    def __init__(self, map_field, params, grid, sim_time=0.0, step_count=0):
        if map_field.nr != len(params):
            raise ValueError("map realizations do not match params")
        self.map = map_field
        self.params = list(params)
        self.grid = grid
        self.sim_time = float(sim_time)
        self.step_count = int(step_count)

    @property
    def nr(self):
        return len(self.params)


def builtin_blob_map(grid, nr):
    """Smooth two-spot initial condition with nonzero net flux.

    A strong positive spot and a weaker negative spot (Gaussian in
    great-circle distance), peak ~1200 G so the default attenuation scale
    is actually exercised.
    """
    def spot(th, ph, th0, ph0, width):
        cosd = (np.cos(th) * np.cos(th0)
                + np.sin(th) * np.sin(th0) * np.cos(ph - ph0))
        d = np.arccos(np.clip(cosd, -1.0, 1.0))
        return np.exp(-((d / width) ** 2))

    def profile(th, ph):
        return (1200.0 * spot(th, ph, np.pi / 3.0, 0.9 * np.pi, 0.30)
                - 600.0 * spot(th, ph, 0.62 * np.pi, 1.45 * np.pi, 0.35))

    return MapField.from_function(grid, profile, nr)


def build_test_ensemble(config, grid=None):
    """Realizations = diffusion levels x attenuation toggles.

    The order is level-major with the attenuation-off member first, e.g.
    four levels and {off, on} give the canonical eight realizations.
    """
    if not config.diffusion_levels:
        raise ValueError("diffusion_levels must not be empty")
    if not config.attenuation_set:
        raise ValueError("attenuation_set must not be empty")
    if grid is None:
        grid = build_uniform_grid(config.n_theta, config.n_phi)
    params = [
        RealizationParams(level, att)
        for level in config.diffusion_levels
        for att in config.attenuation_set
    ]
    nr = len(params)
    if config.initial_map == "blob":
        map_field = builtin_blob_map(grid, nr)
    else:
        loaded = fio.read_map(config.initial_map)
        if loaded.nr == nr:
            map_field = loaded
        elif loaded.nr == 1:
            map_field = MapField(np.repeat(loaded.values, nr, axis=0))
        else:
            raise ValueError(
                f"initial map has {loaded.nr} realizations, need 1 or {nr}"
            )
        if (loaded.ntm, loaded.npm) != (grid.ntm, grid.npm):
            raise ValueError(
                f"initial map is {loaded.ntm}x{loaded.npm - 1}, config "
                f"grid is {grid.ntm}x{grid.npm - 1}"
            )
    return EnsembleState(map_field, params, grid)


class RunContext:
    """Prebuilt operators shared by the stepping loop."""

    def __init__(self, config, state):
        self.config = config
        self.grid = state.grid
        self.executor = Executor(
            config.n_workers if config.n_workers > 0 else None,
            config.deterministic,
        )
        self.flow_params = FlowParams(config.d0, config.d2, config.d4,
                                      config.m1, config.m2, config.b0)
        base_nu = config.base_nu_km2s * KM2_S_TO_RAD2_HOUR
        mult = np.array([p.nu_multiplier for p in state.params])
        nu = base_nu * mult[:, None, None] * np.ones(
            (1, self.grid.ntm, self.grid.npm)
        )
        self.op = build_diffusion_operator(self.grid, nu)
        attenuation = np.array([p.attenuation for p in state.params])
        self.base_flow = build_analytic_flows(
            self.grid, self.flow_params, state.nr, attenuation
        )
        self.method = config.flow_num_method


def current_flows(state, ctx):
    """Per-step flows: the analytic base attenuated by the current field."""
    return attenuate_flows(ctx.base_flow, state.map, ctx.flow_params)


def per_realization_dt_limits(state, ctx, flows=None):
    """Step limit per realization: min(SSP advective limit, max step).

    Diffusion never constrains the step (the super time stepper covers any
    dt); the advective limit enters at twice the Euler CFL bound, which is
    what SSPRK(4,3) allows.
    """
    if flows is None:
        flows = current_flows(state, ctx)
    ssp = 2.0 * cfl_dt_limit(ctx.grid, flows)
    return np.minimum(ssp, ctx.config.max_step_hours)


def global_dt(per_realization_limits):
    """Strictest limit of all realizations (shared by all of them)."""
    limits = list(per_realization_limits)
    if not limits:
        raise ValueError("no per-realization limits given")
    if any(l <= 0 for l in limits):
        raise ValueError("per-realization limits must be positive")
    return min(limits)


def _advect_phase(state, dt, flows, ctx):
    limits = cfl_dt_limit(ctx.grid, flows)

    def body(inner, i):
        allowed = 2.0 * limits[i]
        if math.isfinite(allowed):
            nsub = max(1, math.ceil(dt / allowed - 1e-12))
        else:
            nsub = 1
        h = dt / nsub
        slab = state.map.values[i]
        for _ in range(nsub):
            slab = _ssprk_slab(ctx.grid, flows.vt[i], flows.vp[i], slab,
                               h, ctx.method)
        state.map.values[i] = slab

    ctx.executor.par_for_nested(IndexSpace((0, state.nr - 1)), body)


def _diffuse_phase(state, dt, ctx):
    def body(inner, i):
        _sts_slab(ctx.op, i, state.map.values[i], dt)

    ctx.executor.par_for_nested(IndexSpace((0, state.nr - 1)), body)


def step(state, dt, config, ctx=None, flows=None, timers=None):
    """Advance the ensemble by dt: advection first, then diffusion.

    Flows are rebuilt from the current field for realizations with
    attenuation enabled; advection sub-steps when dt exceeds a
    realization's own limit.  Mutates and returns the state.
    """
    local_ctx = ctx is None
    if local_ctx:
        ctx = RunContext(config, state)
    if flows is None:
        flows = current_flows(state, ctx)
    t0 = time.perf_counter()
    _advect_phase(state, dt, flows, ctx)
    t1 = time.perf_counter()
    _diffuse_phase(state, dt, ctx)
    t2 = time.perf_counter()
    state.map.refresh_wrap()
    state.sim_time += dt
    state.step_count += 1
    if timers is not None:
        timers["advection"] += t1 - t0
        timers["diffusion"] += t2 - t1
    if local_ctx:
        ctx.executor.close()
    return state


def analyze(state, executor=None):
    """Per-realization extrema and flux integrals at the current time."""
    grid = state.grid
    nr = state.nr
    mins = np.empty(nr)
    maxs = np.empty(nr)
    signed = np.empty(nr)
    positive = np.empty(nr)
    negative = np.empty(nr)
    ex = executor if executor is not None else Executor(1)
    minmax_spec = ReductionSpec.of("min", "max")

    def body(inner, i):
        slab = state.map.values[i]
        rows = IndexSpace((0, grid.ntm - 1))
        mins[i], maxs[i] = inner.par_reduce_blocks(
            rows, minmax_spec,
            lambda sub: slab_min_max(
                slab[sub.dims[0][0]:sub.dims[0][1] + 1]
            ),
        )
        signed[i], positive[i], negative[i] = integrate_map(grid, slab)

    ex.par_for_nested(IndexSpace((0, nr - 1)), body)
    return HistoryRecord(state.sim_time, mins, maxs, signed, positive,
                         negative)


@dataclass
class RunResult:
    state: EnsembleState
    history_path: str
    map_paths: list
    timing: "fio.TimingReport"
    timing_csv_path: str


def _next_boundary(t, cadence):
    k = math.floor(t / cadence + BOUNDARY_EPS) + 1
    return k * cadence


def run(config):
    """Full simulation: step loop, analysis, outputs, timing breakdown."""
    total0 = time.perf_counter()
    os.makedirs(config.output_dir, exist_ok=True)
    history_path = os.path.join(config.output_dir, "history.txt")
    timing_csv_path = os.path.join(config.output_dir, "timing.csv")
    for path in (history_path, timing_csv_path):
        if os.path.exists(path):
            os.remove(path)

    state = build_test_ensemble(config)
    ctx = RunContext(config, state)
    timers = {"advection": 0.0, "diffusion": 0.0, "analysis": 0.0,
              "io": 0.0}
    map_paths = []

    def do_analysis():
        t0 = time.perf_counter()
        record = analyze(state, ctx.executor)
        t1 = time.perf_counter()
        fio.append_history(history_path, record)
        t2 = time.perf_counter()
        timers["analysis"] += t1 - t0
        timers["io"] += t2 - t1

    def do_map_output():
        t0 = time.perf_counter()
        path = os.path.join(config.output_dir,
                            f"map_{state.sim_time:09.2f}h.ftmap")
        fio.write_map(path, state.map)
        map_paths.append(path)
        timers["io"] += time.perf_counter() - t0

    do_analysis()
    do_map_output()

    duration = config.duration_hours
    while state.sim_time < duration - BOUNDARY_EPS:
        t0 = time.perf_counter()
        flows = current_flows(state, ctx)
        limits = per_realization_dt_limits(state, ctx, flows)
        dt = global_dt(limits)
        t = state.sim_time
        dt = min(dt,
                 _next_boundary(t, config.analysis_cadence_hours) - t,
                 _next_boundary(t, config.output_cadence_hours) - t,
                 duration - t)
        timers["advection"] += time.perf_counter() - t0

        step(state, dt, config, ctx, flows, timers)

        for cad in (config.analysis_cadence_hours,
                    config.output_cadence_hours):
            snapped = round(state.sim_time / cad) * cad
            if abs(state.sim_time - snapped) < BOUNDARY_EPS:
                state.sim_time = snapped
        if abs(state.sim_time - duration) < BOUNDARY_EPS:
            state.sim_time = duration

        at_end = state.sim_time >= duration - BOUNDARY_EPS
        if _on_boundary(state.sim_time, config.analysis_cadence_hours) \
                or at_end:
            do_analysis()
        if _on_boundary(state.sim_time, config.output_cadence_hours) \
                or at_end:
            do_map_output()

    ctx.executor.close()
    total = time.perf_counter() - total0
    timing = fio.TimingReport.from_measured(
        timers["advection"], timers["diffusion"], timers["analysis"],
        timers["io"], total,
    )
    fio.write_timing_csv(timing_csv_path, timing, _run_label(config))
    return RunResult(state, history_path, map_paths, timing,
                     timing_csv_path)


def _on_boundary(t, cadence):
    k = round(t / cadence)
    return abs(t - k * cadence) < BOUNDARY_EPS


def _run_label(config):
    method = "upwind" if config.flow_num_method == 1 else "weno3"
    return (f"{config.n_theta}x{config.n_phi}_"
            f"r{len(config.diffusion_levels) * len(config.attenuation_set)}"
            f"_{method}")
