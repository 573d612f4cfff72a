import time

import numpy as np
import pytest

from emgrip.calibration import MinMaxScaler
from emgrip.errors import ConfigError, DataError
from emgrip.estimation import (
    EstimatorModel,
    HankelParams,
    IndicatorGrid,
    build_lifted_matrices,
    estimate_batch,
    estimate_window_scaled,
    fit_estimator,
    fit_static_koopman,
    hankel_lift,
    indicator_observables,
    indicator_rows_for,
    power_grid_bounds,
)
from emgrip.metrics import wmape
from emgrip.processing import TimestampedSeries, process_recording


class TestHankelLift:
    def test_direct_instantiation(self):
        h = hankel_lift(np.array([1.0, 2, 3, 4, 5]), 2)
        assert np.array_equal(h, [[1, 2, 3], [2, 3, 4], [3, 4, 5]])

    def test_zero_delays(self):
        x = np.arange(7.0)
        h = hankel_lift(x, 0)
        assert h.shape == (1, 7)
        assert np.array_equal(h[0], x)

    def test_sliding_window_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(40)
        d = 6
        h = hankel_lift(x, d)
        for n in range(h.shape[1]):
            assert np.array_equal(h[:, n], x[n : n + d + 1])

    def test_too_short_rejected(self):
        with pytest.raises(DataError):
            hankel_lift(np.zeros(5), 5)


class TestPowerGridBounds:
    def test_uniform_when_exponent_one(self):
        assert np.allclose(power_grid_bounds(2, 1.0), [0.0, 0.5, 1.0])

    def test_first_edge_value(self):
        edges = power_grid_bounds(22, 1.8)
        assert edges[1] == pytest.approx((1 / 22) ** 1.8)
        assert edges[1] == pytest.approx(0.00388, abs=5e-5)

    def test_strictly_increasing_endpoint_exact(self):
        for div, expo in [(2, 1.0), (5, 0.7), (22, 1.8), (40, 3.0)]:
            edges = power_grid_bounds(div, expo)
            assert edges[0] == 0.0 and edges[-1] == 1.0
            assert np.all(np.diff(edges) > 0)


def _naive_cell(value, edges):
    """Lowest-index closed interval [b_i, b_{i+1}] containing the value."""
    for i in range(edges.size - 1):
        if edges[i] <= value <= edges[i + 1]:
            return i
    return -1


def _naive_indicator(hankel, grid):
    edges = grid.edges
    div = grid.divisions
    n_cols = hankel.shape[1]
    rows = np.zeros((div**3, n_cols))
    for n in range(n_cols):
        i = _naive_cell(hankel[0, n], edges)
        j = _naive_cell(hankel[grid.tau1, n], edges)
        k = _naive_cell(hankel[grid.tau2, n], edges)
        if i >= 0 and j >= 0 and k >= 0:
            rows[(i * div + j) * div + k, n] = 1.0
    return rows


class TestIndicatorObservables:
    def test_single_column_example(self):
        grid = IndicatorGrid(divisions=2, exponent=1.0, tau1=1, tau2=2, min_density=0.0)
        h = np.array([[0.2], [0.7], [0.4]])
        rows, kept = indicator_observables(h, grid)
        hot = kept[rows[:, 0] == 1.0]
        assert hot.size == 1
        # (i, j, k) = (0, 1, 0) -> flat index 0*4 + 1*2 + 0
        assert hot[0] == 2

    def test_all_data_one_cell(self):
        grid = IndicatorGrid(divisions=4, exponent=1.0, tau1=1, tau2=2)
        h = np.full((3, 50), 0.1)
        rows, kept = indicator_observables(h, grid)
        assert rows.shape[0] == 1
        assert np.all(rows == 1.0)

    def test_matches_naive_enumeration(self):
        rng = np.random.default_rng(5)
        grid = IndicatorGrid(divisions=5, exponent=1.8, tau1=1, tau2=2, min_density=0.0)
        h = rng.uniform(-0.1, 1.1, size=(3, 1000))  # some triples out of range
        rows, kept = indicator_observables(h, grid)
        naive = _naive_indicator(h, grid)
        assert np.array_equal(kept, np.arange(grid.divisions**3))
        assert np.array_equal(rows, naive)

    def test_disjoint_and_candidate_count(self):
        rng = np.random.default_rng(6)
        grid = IndicatorGrid(divisions=22, exponent=1.8, tau1=1, tau2=2, min_density=0.0)
        h = rng.uniform(0, 1, size=(3, 500))
        rows, kept = indicator_observables(h, grid)
        assert kept.size <= 22**3
        assert rows.shape[0] == kept.size
        assert np.all(rows.sum(axis=0) <= 1.0)

    def test_density_filter(self):
        grid = IndicatorGrid(divisions=2, exponent=1.0, tau1=1, tau2=2, min_density=0.5)
        h = np.array([[0.1] * 9 + [0.9], [0.1] * 9 + [0.9], [0.1] * 9 + [0.9]])
        rows, kept = indicator_observables(h, grid)
        assert kept.size == 1  # the 10% cell is dropped

    def test_boundary_tie_goes_to_lower_cell(self):
        grid = IndicatorGrid(divisions=2, exponent=1.0, tau1=1, tau2=2, min_density=0.0)
        h = np.full((3, 1), 0.5)  # exactly on the shared edge
        rows, kept = indicator_observables(h, grid)
        hot = kept[rows[:, 0] == 1.0]
        assert hot[0] == 0  # cell (0, 0, 0)

    def test_out_of_range_hits_no_cell(self):
        grid = IndicatorGrid(divisions=3, exponent=1.0, tau1=1, tau2=2, min_density=0.0)
        h = np.array([[1.2], [0.5], [0.5]])
        rows = indicator_rows_for(h, grid, np.arange(27))
        assert np.all(rows == 0.0)

    def test_tau_out_of_range_rejected(self):
        grid = IndicatorGrid(divisions=2, exponent=1.0, tau1=3, tau2=5)
        with pytest.raises(ConfigError):
            indicator_observables(np.zeros((4, 10)), grid)


class TestBuildLiftedMatrices:
    def _scalers(self):
        return MinMaxScaler(0.0, 1.0), MinMaxScaler(0.0, 1.0)

    def test_degenerate_grid_plain_hankel(self):
        rng = np.random.default_rng(1)
        emg = rng.uniform(0.2, 0.8, 50)
        grip = rng.uniform(0.2, 0.8, 50)
        params = HankelParams(delays=4, downsample=1)
        # data spread over several cells, so no cell reaches 100% density
        grid = IndicatorGrid(divisions=2, exponent=1.0, tau1=1, tau2=3, min_density=1.0)
        es, gs = self._scalers()
        e, g, kept = build_lifted_matrices(emg, grip, es, gs, params, grid)
        assert kept.size == 0
        assert e.shape == (5, 46)
        assert g.shape == (5, 46)

    def test_row_counts(self):
        rng = np.random.default_rng(2)
        emg = rng.uniform(0, 1, 80)
        grip = rng.uniform(0, 1, 80)
        params = HankelParams(delays=6, downsample=1)
        grid = IndicatorGrid(divisions=3, exponent=1.0, tau1=2, tau2=5, min_density=0.0)
        es, gs = self._scalers()
        e, g, kept = build_lifted_matrices(emg, grip, es, gs, params, grid)
        assert e.shape[0] == 7 + kept.size
        assert g.shape == e.shape
        # grip indicator block is zero by construction
        assert np.all(g[7:] == 0.0)

    def test_zero_grip_hankel_block_zero(self):
        rng = np.random.default_rng(3)
        emg = rng.uniform(0, 1, 60)
        grip = np.zeros(60)
        params = HankelParams(delays=5, downsample=1)
        grid = IndicatorGrid(divisions=2, exponent=1.0, tau1=1, tau2=4, min_density=0.0)
        es = MinMaxScaler(0.0, 1.0)
        gs = MinMaxScaler(0.0, 100.0)  # fitted on the calibration range
        _, g, _ = build_lifted_matrices(emg, grip, es, gs, params, grid)
        assert np.all(g == 0.0)

    def test_length_mismatch_rejected(self):
        es, gs = self._scalers()
        with pytest.raises(DataError):
            build_lifted_matrices(
                np.zeros(30), np.zeros(29), es, gs, HankelParams(2, 1), IndicatorGrid(2, 1.0, 1, 1 + 1)
            )


class TestFitStaticKoopman:
    def test_scalar_map(self):
        rng = np.random.default_rng(3)
        e = rng.standard_normal((6, 60))
        k = fit_static_koopman(e, 2.0 * e)
        assert np.abs(k - 2.0 * np.eye(6)).max() < 1e-8

    def test_recovers_random_map(self):
        rng = np.random.default_rng(4)
        e = rng.standard_normal((20, 300))
        a = rng.standard_normal((20, 20))
        k = fit_static_koopman(e, a @ e)
        assert np.linalg.norm(k - a) / np.linalg.norm(a) < 1e-8

    def test_rank_deficient_matches_lstsq_residual(self):
        rng = np.random.default_rng(5)
        base = rng.standard_normal((3, 40))
        e = np.vstack([base, base[0] + base[1]])  # rank 3 with 4 rows
        g = rng.standard_normal((4, 40))
        k = fit_static_koopman(e, g)
        res = np.linalg.norm(g - k @ e)
        kt, *_ = np.linalg.lstsq(e.T, g.T, rcond=None)
        res_ref = np.linalg.norm(g - kt.T @ e)
        assert res == pytest.approx(res_ref, abs=1e-8)

    def test_global_minimum_under_perturbation(self):
        rng = np.random.default_rng(6)
        e = rng.standard_normal((8, 50))
        g = rng.standard_normal((8, 50))
        k = fit_static_koopman(e, g)
        res0 = np.linalg.norm(g - k @ e)
        for _ in range(25):
            dk = rng.standard_normal(k.shape)
            dk *= 1e-3 / np.linalg.norm(dk)
            assert np.linalg.norm(g - (k + dk) @ e) >= res0 - 1e-12

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            fit_static_koopman(np.zeros((0, 0)), np.zeros((0, 0)))


def _linear_coupling_model():
    """Grip is a scaled, delayed copy of the envelope: exactly learnable."""
    t = np.arange(1200) / 100.0
    emg = 1.0 + 0.5 * np.sin(2 * np.pi * 0.05 * t) + 0.3 * np.sin(2 * np.pi * 0.13 * t + 1.0)
    shift = 3  # decimated steps
    grip = 0.5 * np.concatenate([np.full(shift, emg[0]), emg[:-shift]])
    params = HankelParams(delays=10, downsample=2)
    grid = IndicatorGrid(divisions=3, exponent=1.8, tau1=2, tau2=9, min_density=0.0)
    es = MinMaxScaler.fit(emg[::2])
    gs = MinMaxScaler.fit(grip[::2])
    e, g, kept = build_lifted_matrices(emg[::2], grip[::2], es, gs, params, grid)
    k = fit_static_koopman(e, g)
    model = EstimatorModel(k, es, gs, params, grid, kept, batch_size=100, fs=100.0)
    return model, emg, grip


class TestEstimateBatch:
    def test_linear_coupling_recovered(self):
        model, emg, grip = _linear_coupling_model()
        window = emg[300:340]
        est = estimate_batch(model, window)
        truth = grip[300:340:2][: est.size]
        assert wmape(truth, est) <= 1.0

    def test_window_too_short_rejected(self):
        model, emg, _ = _linear_coupling_model()
        with pytest.raises(DataError):
            estimate_batch(model, emg[:20])

    def test_scaled_floor_applies(self):
        model, emg, _ = _linear_coupling_model()
        scaled = estimate_window_scaled(model, emg[:40])
        assert np.all(scaled >= model.grip_floor)

    def test_zero_window_is_clamped_offset_response(self):
        model, emg, _ = _linear_coupling_model()
        est = estimate_window_scaled(model, np.zeros(40))
        assert np.all(est >= model.grip_floor)
        assert np.all(np.isfinite(est))


class TestFitEstimator:
    def test_affine_grip_equivariance(self, calib_recording, test_recording, mask, smoothing):
        m1 = fit_estimator(calib_recording.emg, calib_recording.grip, mask, smoothing)
        a, b = 2.5, -7.0
        grip2 = TimestampedSeries(
            calib_recording.grip.times, a * calib_recording.grip.values + b
        )
        m2 = fit_estimator(calib_recording.emg, grip2, mask, smoothing)
        proc = process_recording(test_recording.emg, mask, smoothing)
        window = proc[:976]
        e1 = estimate_batch(m1, window)
        e2 = estimate_batch(m2, window)
        assert np.abs(e2 - (a * e1 + b)).max() < 1e-8

    def test_estimates_bounded_below_by_inverse_floor(self, model, stream_result):
        floor_n = model.grip_scaler.invert(model.grip_floor)
        assert np.all(stream_result.estimates >= floor_n - 1e-12)

    def test_kept_cells_within_bound(self, model):
        assert model.kept.size <= model.grid.divisions**3
        assert model.k.shape == (model.lifted_dim, model.lifted_dim)

    def test_training_time_budget(self, calib_recording, mask, smoothing, model):
        start = time.perf_counter()
        fit_estimator(calib_recording.emg, calib_recording.grip, mask, smoothing)
        assert time.perf_counter() - start <= 1.5

    def test_tau_versus_delays_validated(self, calib_recording, mask, smoothing):
        with pytest.raises(ConfigError):
            fit_estimator(
                calib_recording.emg,
                calib_recording.grip,
                mask,
                smoothing,
                HankelParams(delays=30),
                IndicatorGrid(),  # tau2 = 59 > delays - 1
            )

    def test_estimation_lifts_the_decimated_window(self):
        # the batch path must equal decimating first, then scaling + lifting
        model, emg, _ = _linear_coupling_model()
        window = emg[100:180]
        got = estimate_window_scaled(model, window)
        ds = model.emg_scaler.apply(window[:: model.hankel.downsample])
        he = hankel_lift(ds, model.hankel.delays)
        lifted = np.vstack([he, indicator_rows_for(he, model.grid, model.kept)])
        want = np.maximum(model.k[0] @ lifted, model.grip_floor)
        assert np.array_equal(got, want)
