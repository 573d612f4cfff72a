"""Batched EMG conditioning: spectral masking, rectification, envelope smoothing.

The chain turns a raw EMG batch into a smooth non-negative envelope that
tracks exerted grip force:

    FFT -> per-bin gain mask -> inverse FFT -> |.| -> windowed exponential MA

Smoothing is the only stage with cross-batch state: the first (window - 1)
output samples of a batch draw on the tail of the previous batch's
rectified-masked signal.  Alignment utilities (linear resampling, lagged
peak cross-correlation) live here as well because they operate on the same
streams.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError

NOMINAL_EMG_FS = 992.97
DEFAULT_BATCH_SIZE = 496
GRIP_FS = 200.0
# half-width of the lag search window for peak cross-correlation
DEFAULT_MAX_LAG_S = 0.160


@dataclass(frozen=True)
class RawEmgBatch:
    """One timestamped window of raw EMG samples (millivolts)."""

    samples: np.ndarray
    t0: float = 0.0
    fs: float = NOMINAL_EMG_FS

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 2:
            raise DataError("batch needs at least 2 samples in a 1-d array")
        if not self.fs > 0:
            raise ConfigError("sampling rate must be positive")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class ProcessedEmgBatch:
    """Non-negative envelope batch produced by the processing chain."""

    samples: np.ndarray
    t0: float = 0.0
    fs: float = NOMINAL_EMG_FS

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.size and samples.min() < 0:
            raise DataError("processed batch must be non-negative")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class SpectralMask:
    """Per-frequency-bin gain vector applied between forward and inverse FFT.

    ``gains[k]`` multiplies the bin centred at ``k * bin_resolution`` Hz;
    entry 0 is the DC bin.  Length must equal ``batch_size // 2 + 1`` of the
    batches it is applied to.
    """

    gains: np.ndarray
    bin_resolution: float = NOMINAL_EMG_FS / DEFAULT_BATCH_SIZE

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        object.__setattr__(self, "gains", gains)
        if gains.ndim != 1 or gains.size < 2:
            raise ConfigError("mask needs a 1-d gain vector with >= 2 bins")
        if gains.min() < 0:
            raise ConfigError("mask gains must be non-negative")
        if not self.bin_resolution > 0:
            raise ConfigError("bin resolution must be positive")

    def __len__(self) -> int:
        return self.gains.size

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.gains.size) * self.bin_resolution

    def for_batch(self, n_samples: int, fs: float) -> "SpectralMask":
        """Gain vector interpolated onto the bin grid of an ``n_samples`` batch.

        Used for the trailing short batch of a recording, which is
        transformed at its natural length and therefore has coarser bins.
        """
        n_bins = n_samples // 2 + 1
        if n_bins == self.gains.size:
            return self
        new_freqs = np.arange(n_bins) * (fs / n_samples)
        gains = np.interp(new_freqs, self.frequencies, self.gains)
        return SpectralMask(gains, fs / n_samples)


@dataclass(frozen=True)
class SmoothingParams:
    """Windowed exponential moving-average configuration.

    ``decay`` = 0 reduces to a simple trailing mean over ``window_size``
    samples; larger values weight recent samples more heavily.
    """

    window_size: int = 300
    decay: float = 0.0

    def __post_init__(self):
        if int(self.window_size) != self.window_size or self.window_size < 2:
            raise ConfigError("window size must be an integer >= 2")
        object.__setattr__(self, "window_size", int(self.window_size))
        if not 0.0 <= self.decay < 1.0:
            raise ConfigError("decay must lie in [0, 1)")

    def weights(self) -> np.ndarray:
        """Unnormalised lag weights, most recent sample first."""
        return (1.0 - self.decay) ** np.arange(self.window_size)


@dataclass(frozen=True)
class TimestampedSeries:
    """Paired (time, value) arrays with strictly increasing times."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or values.ndim != 1 or times.size != values.size:
            raise DataError("times and values must be 1-d arrays of equal length")
        if times.size >= 2 and not np.all(np.diff(times) > 0):
            raise DataError("times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0]) if len(self) else 0.0

    @property
    def rate(self) -> float:
        """Mean sampling rate in Hz."""
        if len(self) < 2:
            raise DataError("rate needs at least 2 samples")
        return (len(self) - 1) / self.span


def apply_spectral_mask(batch: RawEmgBatch, mask: SpectralMask) -> RawEmgBatch:
    """Multiply the batch spectrum bin-wise by the mask gains.

    Returns the real signal obtained by inverse FFT; output length equals
    input length.
    """
    x = batch.samples
    n_bins = x.size // 2 + 1
    if len(mask) != n_bins:
        raise ConfigError(
            f"mask has {len(mask)} bins but a {x.size}-sample batch needs {n_bins}"
        )
    spectrum = np.fft.rfft(x) * mask.gains
    y = np.fft.irfft(spectrum, n=x.size)
    return RawEmgBatch(y, batch.t0, batch.fs)


def rectify(batch: RawEmgBatch) -> RawEmgBatch:
    """Full-wave rectification (elementwise absolute value)."""
    return RawEmgBatch(np.abs(batch.samples), batch.t0, batch.fs)


def smooth_ema(
    batch: RawEmgBatch, prev_tail: np.ndarray, params: SmoothingParams
) -> RawEmgBatch:
    """Windowed exponential moving average with carry-over from ``prev_tail``.

    Output sample i averages the trailing ``window_size`` samples with
    weights (1 - decay)**k (k = 0 for the current sample), normalised to
    sum to one.  Samples before the start of the batch are read from
    ``prev_tail`` (zeros for the first batch of a recording).
    """
    w = params.weights()
    tail = np.asarray(prev_tail, dtype=float)
    need = params.window_size - 1
    if tail.size < need:
        raise DataError(
            f"previous tail has {tail.size} samples, window {params.window_size} needs {need}"
        )
    ext = np.concatenate([tail[tail.size - need :], batch.samples]) if need else batch.samples
    smoothed = np.convolve(ext, w, mode="valid") / w.sum()
    return RawEmgBatch(smoothed, batch.t0, batch.fs)


def process_batch(
    raw: RawEmgBatch,
    mask: SpectralMask,
    params: SmoothingParams,
    prev_tail: np.ndarray,
) -> tuple[ProcessedEmgBatch, np.ndarray]:
    """Run mask -> rectify -> smooth on one batch.

    Returns the processed batch together with the new tail (the last
    ``window_size - 1`` rectified-masked samples) to carry into the next
    batch.
    """
    rectified = rectify(apply_spectral_mask(raw, mask))
    smoothed = smooth_ema(rectified, prev_tail, params)
    need = params.window_size - 1
    tail_src = np.concatenate([np.asarray(prev_tail, dtype=float), rectified.samples])
    new_tail = tail_src[tail_src.size - need :] if need else tail_src[:0]
    return ProcessedEmgBatch(smoothed.samples, raw.t0, raw.fs), new_tail


class BatchProcessor:
    """Streaming wrapper that owns the smoothing tail for one EMG channel.

    One instance per recording channel; batches must be fed in order.
    """

    def __init__(self, mask: SpectralMask, params: SmoothingParams):
        self.mask = mask
        self.params = params
        self._tail = np.zeros(params.window_size - 1)

    def process(self, batch: RawEmgBatch) -> ProcessedEmgBatch:
        mask = self.mask.for_batch(len(batch), batch.fs)
        out, self._tail = process_batch(batch, mask, self.params, self._tail)
        return out


def process_recording(
    emg: TimestampedSeries,
    mask: SpectralMask,
    params: SmoothingParams,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """Process a whole EMG recording in fixed-size batches with tail carry.

    The trailing short batch is transformed at its natural length; a
    1-sample remainder is dropped.  Returns the concatenated envelope,
    aligned with ``emg.times`` (minus any dropped remainder).
    """
    proc = BatchProcessor(mask, params)
    x = emg.values
    t = emg.times
    fs = emg.rate
    out = []
    for start in range(0, x.size, batch_size):
        chunk = x[start : start + batch_size]
        if chunk.size < 2:
            break
        out.append(proc.process(RawEmgBatch(chunk, t[start], fs)).samples)
    if not out:
        raise DataError("recording too short to process")
    return np.concatenate(out)


def default_optimal_mask(
    batch_size: int = DEFAULT_BATCH_SIZE, fs: float = NOMINAL_EMG_FS
) -> SpectralMask:
    """Built-in grip-force mask for ~0.5 s batches of forearm EMG.

    Gain profile over the bin's nominal frequency (bins labelled on the
    2 Hz grid of the default batch length): DC and 2 Hz removed, linear
    rise to unity at 18 Hz, an inverted-U boost peaking at 1.5 over
    32-42 Hz, mains at 50 Hz held at 0.375, a linear 0.5 -> 4.5 ramp from
    52 to 110 Hz, a 4.375 plateau up to 202 Hz, and zero from 204 Hz up.
    """
    if batch_size % 2:
        raise ConfigError("batch size must be even")
    res = fs / batch_size
    f = np.arange(batch_size // 2 + 1) * res
    lab = 2.0 * np.round(f / 2.0)
    gains = np.zeros_like(f)

    ramp_lo = (lab > 2.0) & (lab <= 18.0)
    gains[ramp_lo] = (lab[ramp_lo] - 2.0) / 16.0
    bump = (lab >= 20.0) & (lab <= 48.0)
    gains[bump] = np.interp(lab[bump], [20.0, 32.0, 42.0, 48.0], [0.25, 1.5, 1.5, 0.25])
    gains[lab == 50.0] = 0.375
    ramp_mid = (lab >= 52.0) & (lab <= 110.0)
    gains[ramp_mid] = 0.5 + (lab[ramp_mid] - 52.0) * (4.0 / 58.0)
    gains[(lab > 110.0) & (lab <= 202.0)] = 4.375
    gains[lab >= 204.0] = 0.0
    return SpectralMask(gains, res)


def resample_linear(series: TimestampedSeries, target_times: np.ndarray) -> TimestampedSeries:
    """Piecewise-linear interpolation of the series at ``target_times``.

    Target times outside the source span are clamped to the end values.
    """
    if len(series) < 2:
        raise DataError("resampling needs at least 2 source points")
    target_times = np.asarray(target_times, dtype=float)
    values = np.interp(target_times, series.times, series.values)
    return TimestampedSeries(target_times, values)


def peak_cross_correlation(
    a: np.ndarray, b: np.ndarray, max_lag_samples: int
) -> tuple[float, int]:
    """Maximum lagged Pearson correlation between two aligned series.

    Lag ``l`` pairs ``a[i]`` with ``b[i + l]``, so a positive lag means
    ``b`` is delayed relative to ``a``.  Each lag's correlation is computed
    over the overlapping window only, mean-centred and variance-normalised
    on that window.  Returns (peak, lag) for the (signed) maximum.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    if b.size != n or n < 2:
        raise DataError("series must have equal length >= 2")
    max_lag = int(max_lag_samples)
    if max_lag < 0 or max_lag >= n:
        raise ConfigError("max lag must satisfy 0 <= lag < length")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise NumericError("constant input: correlation undefined")

    best = -np.inf
    best_lag = 0
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            x, y = a[: n - lag], b[lag:]
        else:
            x, y = a[-lag:], b[: n + lag]
        if x.size < 2:
            continue
        xc = x - x.mean()
        yc = y - y.mean()
        denom = np.sqrt((xc @ xc) * (yc @ yc))
        if denom == 0:
            continue
        r = float((xc @ yc) / denom)
        if r > best:
            best, best_lag = r, lag
    if not np.isfinite(best):
        raise NumericError("no lag produced a defined correlation")
    return best, best_lag
