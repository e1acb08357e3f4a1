import math
import os

import numpy as np
import pytest

from fluxport import ensemble
from fluxport.advection import cfl_dt_limit, ssprk43_advance
from fluxport.ensemble import (
    EnsembleState,
    RealizationParams,
    RunContext,
    analyze,
    build_test_ensemble,
    builtin_blob_map,
    global_dt,
    per_realization_dt_limits,
    step,
)
from fluxport.grid import FOUR_PI, MapField, build_uniform_grid, integrate_map
from fluxport.io import RunConfig, read_history
from fluxport.parloop import Executor


def small_config(**overrides):
    base = dict(n_theta=16, n_phi=32, duration_hours=4.0,
                analysis_cadence_hours=1.0, output_cadence_hours=2.0,
                output_dir="unused")
    base.update(overrides)
    return RunConfig(**base)


class TestBuildEnsemble:
    def test_default_eight_realizations_in_documented_order(self):
        config = RunConfig(n_theta=16, n_phi=32)
        state = build_test_ensemble(config)
        assert state.nr == 8
        expected = [(1.0, False), (1.0, True), (2.0, False), (2.0, True),
                    (4.0, False), (4.0, True), (8.0, False), (8.0, True)]
        got = [(p.nu_multiplier, p.attenuation) for p in state.params]
        assert got == expected

    def test_degenerate_single_realization(self):
        config = small_config(diffusion_levels=[2.0],
                              attenuation_set=[False])
        state = build_test_ensemble(config)
        assert state.nr == 1
        assert state.params[0] == RealizationParams(2.0, False)

    def test_three_levels_two_toggles_enumeration(self):
        config = small_config(diffusion_levels=[1.0, 3.0, 9.0])
        state = build_test_ensemble(config)
        got = [(p.nu_multiplier, p.attenuation) for p in state.params]
        assert got == [(1.0, False), (1.0, True), (3.0, False), (3.0, True),
                       (9.0, False), (9.0, True)]

    def test_empty_levels_rejected(self):
        config = small_config(diffusion_levels=[])
        with pytest.raises(ValueError):
            build_test_ensemble(config)

    def test_blob_has_positive_net_flux_and_strong_field(self):
        grid = build_uniform_grid(64, 128)
        blob = builtin_blob_map(grid, 1)
        signed, pos, neg = integrate_map(grid, blob.values[0])
        assert signed > 10.0
        assert neg < 0.0
        assert np.max(np.abs(blob.values)) > 500.0

    def test_initial_map_from_file(self, tmp_path):
        from fluxport.io import write_map

        grid = build_uniform_grid(16, 32)
        blob = builtin_blob_map(grid, 1)
        path = tmp_path / "start.ftmap"
        write_map(path, blob)
        config = small_config(initial_map=str(path),
                              diffusion_levels=[1.0, 2.0])
        state = build_test_ensemble(config)
        assert state.nr == 4
        for i in range(4):
            assert np.array_equal(state.map.values[i], blob.values[0])

        bad = small_config(initial_map=str(path), n_theta=32, n_phi=64)
        with pytest.raises(ValueError):
            build_test_ensemble(bad)


class TestGlobalDt:
    def test_minimum(self):
        assert global_dt([3.0, 5.0, 2.0]) == 2.0

    def test_infinite_entries_ignored_by_min(self):
        assert global_dt([math.inf, 4.0]) == 4.0
        assert global_dt([math.inf, math.inf]) == math.inf

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            global_dt([])

    def test_eight_realizations_hand_computed(self):
        config = small_config()
        state = build_test_ensemble(config)
        ctx = RunContext(config, state)
        flows = ensemble.current_flows(state, ctx)
        limits = per_realization_dt_limits(state, ctx, flows)
        # independently: each realization's limit is the lesser of twice
        # its advective CFL bound and the configured max step
        cfl = cfl_dt_limit(ctx.grid, flows)
        expected = [min(2.0 * cfl[i], config.max_step_hours)
                    for i in range(state.nr)]
        assert list(limits) == expected
        assert global_dt(limits) == min(expected)

    def test_nonincreasing_in_each_limit(self, rng):
        # tightening any single realization's limit never relaxes the
        # ensemble step
        limits = list(np.abs(rng.standard_normal(6)) + 0.1)
        base = global_dt(limits)
        for i in range(len(limits)):
            tightened = list(limits)
            tightened[i] *= 0.5
            assert global_dt(tightened) <= base


class TestStep:
    def test_zero_flow_is_pure_diffusion_and_conserves(self):
        config = small_config(d0=0.0, d2=0.0, d4=0.0, m1=0.0, m2=0.0,
                              diffusion_levels=[1.0, 4.0])
        state = build_test_ensemble(config)
        ctx = RunContext(config, state)
        before = [integrate_map(state.grid, state.map.values[i])[0]
                  for i in range(state.nr)]
        step(state, 1.0, config, ctx)
        for i in range(state.nr):
            after = integrate_map(state.grid, state.map.values[i])[0]
            assert abs(after - before[i]) < 1e-10 * abs(before[i])
        assert state.sim_time == 1.0 and state.step_count == 1

    def test_vanishing_nu_matches_advection_alone(self):
        config = small_config(diffusion_levels=[1e-12],
                              attenuation_set=[False])
        state = build_test_ensemble(config)
        ctx = RunContext(config, state)
        reference = state.map.copy()
        flows = ensemble.current_flows(state, ctx)
        limits = per_realization_dt_limits(state, ctx, flows)
        dt = global_dt(limits)
        step(state, dt, config, ctx)

        allowed = 2.0 * cfl_dt_limit(ctx.grid, flows)[0]
        nsub = max(1, math.ceil(dt / allowed - 1e-12))
        advected = reference
        for _ in range(nsub):
            advected = ssprk43_advance(ctx.grid, flows, advected,
                                       dt / nsub, config.flow_num_method)
        scale = np.max(np.abs(advected.values))
        assert np.max(np.abs(state.map.values - advected.values)) \
            < 1e-8 * scale

    def test_worker_count_reproducibility_ten_steps(self):
        def run_history(workers):
            config = RunConfig(n_theta=64, n_phi=128, n_workers=workers)
            state = build_test_ensemble(config)
            ctx = RunContext(config, state)
            records = [analyze(state, ctx.executor)]
            for _ in range(10):
                flows = ensemble.current_flows(state, ctx)
                dt = global_dt(per_realization_dt_limits(state, ctx,
                                                         flows))
                step(state, dt, config, ctx, flows)
                records.append(analyze(state, ctx.executor))
            ctx.executor.close()
            return records

        ref = run_history(1)
        alt = run_history(8)
        for a, b in zip(ref, alt):
            assert a.sim_time == b.sim_time
            for name in ("mins", "maxs", "signed", "positive", "negative"):
                assert np.array_equal(getattr(a, name), getattr(b, name))


class TestAnalyze:
    def test_constant_map(self):
        grid = build_uniform_grid(16, 32)
        state = EnsembleState(
            MapField(np.full((2, grid.ntm, grid.npm), 2.0)),
            [RealizationParams(1.0, False)] * 2, grid,
        )
        rec = analyze(state)
        assert np.all(rec.mins == 2.0) and np.all(rec.maxs == 2.0)
        assert np.allclose(rec.signed, 2.0 * FOUR_PI, rtol=1e-12)
        assert np.allclose(rec.positive, 2.0 * FOUR_PI, rtol=1e-12)
        assert np.all(rec.negative == 0.0)
        assert rec.well_formed()

    def test_antisymmetric_map(self):
        grid = build_uniform_grid(16, 32)
        values = np.broadcast_to(
            np.where(grid.theta[:, None] < np.pi / 2, 1.0, -1.0),
            (1, grid.ntm, grid.npm),
        ).copy()
        state = EnsembleState(MapField(values),
                              [RealizationParams(1.0, False)], grid)
        rec = analyze(state)
        assert abs(rec.signed[0]) < 1e-12
        assert abs(rec.positive[0] + rec.negative[0]) < 1e-12

    def test_matches_serial_full_scan(self, rng):
        grid = build_uniform_grid(16, 32)
        values = rng.standard_normal((3, grid.ntm, grid.npm))
        values[:, :, -1] = values[:, :, 0]
        state = EnsembleState(MapField(values),
                              [RealizationParams(1.0, False)] * 3, grid)
        rec = analyze(state, Executor(4))
        for i in range(3):
            phys = values[i, :, :-1]
            assert rec.mins[i] == phys.min()
            assert rec.maxs[i] == phys.max()
            assert rec.signed[i] == integrate_map(grid, values[i])[0]


class TestRun:
    def test_duration_zero_single_record(self, tmp_path):
        config = small_config(duration_hours=0.0,
                              output_dir=str(tmp_path / "out"))
        result = ensemble.run(config)
        names, data = read_history(result.history_path)
        assert data.shape[0] == 1
        assert result.timing.advection == 0.0
        assert result.timing.diffusion == 0.0
        assert result.state.step_count == 0

    def test_small_run_outputs_and_buckets(self, tmp_path):
        config = small_config(duration_hours=5.0,
                              output_dir=str(tmp_path / "out"))
        result = ensemble.run(config)
        names, data = read_history(result.history_path)
        times = data[:, 0]
        assert np.all(np.diff(times) > 0)
        assert times[0] == 0.0 and times[-1] == 5.0
        # map outputs at t=0, 2, 4 and the final time
        assert len(result.map_paths) == 4
        for path in result.map_paths:
            assert os.path.exists(path)
        t = result.timing
        assert t.well_formed()
        total_named = t.advection + t.diffusion + t.analysis + t.io
        assert abs(total_named + t.other - t.total) < 0.05 * t.total + 1e-9
        assert os.path.exists(result.timing_csv_path)

    def test_history_max_monotone_under_pure_diffusion(self, tmp_path):
        config = small_config(d0=0.0, d2=0.0, d4=0.0, m1=0.0, m2=0.0,
                              duration_hours=4.0,
                              output_dir=str(tmp_path / "out"))
        result = ensemble.run(config)
        names, data = read_history(result.history_path)
        for i in range(1, 9):
            mx = data[:, names.index(f"r{i:02d}_max")]
            mn = data[:, names.index(f"r{i:02d}_min")]
            assert np.all(np.diff(mx) <= 1e-12)
            assert np.all(np.diff(mn) >= -1e-12)

    def test_smoothing_ordering_in_nu(self, tmp_path):
        config = small_config(d0=0.0, d2=0.0, d4=0.0, m1=0.0, m2=0.0,
                              diffusion_levels=[1.0, 8.0],
                              attenuation_set=[False],
                              duration_hours=3.0,
                              output_dir=str(tmp_path / "out"))
        result = ensemble.run(config)
        state = result.state

        def area_variance(i):
            slab = state.map.values[i]
            signed, _, _ = integrate_map(state.grid, slab)
            mean = signed / FOUR_PI
            var, _, _ = integrate_map(state.grid, (slab - mean) ** 2)
            return var / FOUR_PI

        assert area_variance(1) <= area_variance(0) + 1e-12

    def test_realization_permutation_invariance(self, tmp_path):
        def run_levels(levels, out):
            config = small_config(diffusion_levels=levels,
                                  attenuation_set=[False],
                                  duration_hours=3.0,
                                  output_dir=str(tmp_path / out))
            return read_history(ensemble.run(config).history_path)

        names_a, data_a = run_levels([1.0, 4.0], "a")
        names_b, data_b = run_levels([4.0, 1.0], "b")
        cols = ("min", "max", "signed", "pos", "neg")
        for q in cols:
            a1 = data_a[:, names_a.index(f"r01_{q}")]
            b2 = data_b[:, names_b.index(f"r02_{q}")]
            assert np.array_equal(a1, b2)
            a2 = data_a[:, names_a.index(f"r02_{q}")]
            b1 = data_b[:, names_b.index(f"r01_{q}")]
            assert np.array_equal(a2, b1)
