"""Streaming batch simulator: process -> estimate -> predict with latency accounting.

Feeds a recording's EMG stream through the pipeline in fixed-size batches,
exactly as a live session would see it: the envelope processor carries its
smoothing tail, the estimator sees only data up to the current batch end,
and the forecaster is retrained from scratch on every batch.  Wall-clock
time per stage is recorded for the latency report.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .estimation import EstimatorModel, estimate_window_scaled
from .forecasting import ForecastHyperparams, predict_batch
from .io import Recording
from .metrics import wmape
from .processing import (
    DEFAULT_MAX_LAG_S,
    BatchProcessor,
    RawEmgBatch,
    SmoothingParams,
    SpectralMask,
    peak_cross_correlation,
    resample_linear,
)


@dataclass
class LatencyReport:
    """Per-batch wall-clock milliseconds for each pipeline stage."""

    process_ms: np.ndarray
    estimate_ms: np.ndarray
    predict_ms: np.ndarray

    @property
    def total_ms(self) -> np.ndarray:
        return self.process_ms + self.estimate_ms + self.predict_ms

    def percentiles(self, qs=(50, 90, 99)) -> dict[str, dict[str, float]]:
        out = {}
        for name, arr in (
            ("process", self.process_ms),
            ("estimate", self.estimate_ms),
            ("predict", self.predict_ms),
            ("total", self.total_ms),
        ):
            out[name] = {f"p{q}": float(np.percentile(arr, q)) for q in qs}
        return out


@dataclass
class ForecastBlock:
    batch_index: int
    times: np.ndarray
    values: np.ndarray


@dataclass
class StreamResult:
    """Everything the simulator emitted for one recording."""

    estimate_times: np.ndarray
    estimates: np.ndarray          # newtons
    forecasts: list[ForecastBlock]
    latency: LatencyReport
    processed: np.ndarray

    def forecast_rows(self):
        for block in self.forecasts:
            for t, v in zip(block.times, block.values):
                yield block.batch_index, t, v


def stream_simulate(
    recording: Recording,
    model: EstimatorModel,
    mask: SpectralMask,
    smoothing: SmoothingParams,
    hyper: ForecastHyperparams = ForecastHyperparams(),
    real_time: bool = False,
) -> StreamResult:
    """Run the full pipeline over one recording in streaming batches.

    Offline mode runs at full speed; ``real_time`` sleeps each batch to the
    nominal cadence.  Forecast blocks start once the estimate history can
    fill the prediction window.
    """
    emg = recording.emg
    fs = emg.rate
    if abs(fs - model.fs) > 0.01 * model.fs:
        raise ConfigError(
            f"recording rate {fs:.2f} Hz does not match model rate {model.fs:.2f} Hz"
        )
    batch_size = model.batch_size
    step = model.hankel.downsample
    delays = model.hankel.delays
    batch_ds = batch_size // step

    processor = BatchProcessor(mask, smoothing)
    processed = np.empty(0)
    est_scaled = np.empty(0)
    n_est = 0  # decimated positions already estimated
    est_times: list[np.ndarray] = []
    forecasts: list[ForecastBlock] = []
    lat_process: list[float] = []
    lat_estimate: list[float] = []
    lat_predict: list[float] = []

    n_batches = emg.values.size // batch_size
    tail = emg.values.size % batch_size
    if tail >= 2:
        n_batches += 1
    if n_batches == 0:
        raise DataError("recording shorter than one batch")

    cadence = batch_size / fs
    wall_start = time.perf_counter()
    for b in range(n_batches):
        start = b * batch_size
        chunk = emg.values[start : start + batch_size]
        t0 = emg.times[start]

        tic = time.perf_counter()
        out = processor.process(RawEmgBatch(chunk, t0, fs))
        processed = np.concatenate([processed, out.samples])
        lat_process.append((time.perf_counter() - tic) * 1e3)

        tic = time.perf_counter()
        m_ds = -(-processed.size // step)  # ceil: decimated samples available
        n_avail = m_ds - delays
        window = processed[step * n_est :]
        # a terminal fragment shorter than the contract window is skipped
        if n_avail > n_est and window.size >= model.min_window():
            scaled = estimate_window_scaled(model, window)
            est_scaled = np.concatenate([est_scaled, scaled])
            idx = (n_est + np.arange(scaled.size)) * step
            est_times.append(emg.times[idx])
            n_est = n_avail
        lat_estimate.append((time.perf_counter() - tic) * 1e3)

        tic = time.perf_counter()
        # forecast timestamps extrapolate from the rate of the data seen so
        # far, so a truncated rerun reproduces them bit for bit (causality)
        seen = processed.size
        dt_seen = (emg.times[seen - 1] - emg.times[0]) / (seen - 1)
        preds = predict_batch(
            est_scaled,
            hyper,
            model.grip_scaler,
            batch_samples=batch_ds,
            dt_eff=hyper.thin_step * step * dt_seen,
        )
        if preds is not None:
            tau = np.arange(1, preds.size + 1)
            t_last = emg.times[(n_est - 1) * step]
            times = t_last + tau * hyper.thin_step * step * dt_seen
            forecasts.append(ForecastBlock(b, times, preds))
        lat_predict.append((time.perf_counter() - tic) * 1e3)

        if real_time:
            deadline = wall_start + (b + 1) * cadence
            now = time.perf_counter()
            if deadline > now:
                time.sleep(deadline - now)

    estimates = model.grip_scaler.invert(est_scaled)
    times = np.concatenate(est_times) if est_times else np.empty(0)
    return StreamResult(
        times,
        estimates,
        forecasts,
        LatencyReport(np.array(lat_process), np.array(lat_estimate), np.array(lat_predict)),
        processed,
    )


@dataclass(frozen=True)
class RunEvaluation:
    peak_xcorr: float
    lag_samples: int
    estimation_wmape: float
    prediction_wmape: float


def evaluate_run(
    recording: Recording,
    model: EstimatorModel,
    mask: SpectralMask,
    smoothing: SmoothingParams,
    hyper: ForecastHyperparams = ForecastHyperparams(),
    result: StreamResult | None = None,
) -> RunEvaluation:
    """Streaming metrics for one recording against its measured grip force.

    Estimates and forecasts are compared with the grip series resampled at
    their own timestamps; the peak cross-correlation is computed between
    the processed envelope and grip on the EMG clock.
    """
    if result is None:
        result = stream_simulate(recording, model, mask, smoothing, hyper)
    emg_times = recording.emg.times[: result.processed.size]
    grip_on_emg = resample_linear(recording.grip, emg_times).values
    max_lag = int(round(DEFAULT_MAX_LAG_S * recording.emg.rate))
    peak, lag = peak_cross_correlation(result.processed, grip_on_emg, max_lag)

    grip_at_est = resample_linear(recording.grip, result.estimate_times).values
    est_wmape = wmape(grip_at_est, result.estimates)

    pred_rows = list(result.forecast_rows())
    if pred_rows:
        t_max = recording.grip.times[-1]
        kept = [(t, v) for _, t, v in pred_rows if t <= t_max]
        if kept:
            t_pred = np.array([t for t, _ in kept])
            order = np.argsort(t_pred, kind="stable")
            t_pred = t_pred[order]
            v_pred = np.array([v for _, v in kept])[order]
            # forecast timestamps can repeat across batches; wMAPE is
            # order-insensitive so sorted non-strict times are fine
            grip_at_pred = np.interp(t_pred, recording.grip.times, recording.grip.values)
            pred_wmape = wmape(grip_at_pred, v_pred)
        else:
            pred_wmape = float("nan")
    else:
        pred_wmape = float("nan")
    return RunEvaluation(peak, lag, est_wmape, pred_wmape)
