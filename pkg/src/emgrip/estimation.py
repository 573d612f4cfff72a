"""Static Koopman-style estimation of grip force from the EMG envelope.

Both streams are downsampled, min-max scaled, and lifted: a Hankel block of
time-shifted copies plus, for the EMG side, binary indicator observables
marking which cell of a power-spaced grid the (base, tau1, tau2) delay
triple falls in.  A single matrix K mapping lifted EMG to lifted grip is
fitted by pseudoinverse on a calibration recording; at inference only the
base-state readout row is applied to the data under the batch window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationPolynomial, DEFAULT_CALIBRATION, MinMaxScaler
from .errors import ConfigError, DataError
from .processing import (
    DEFAULT_BATCH_SIZE,
    NOMINAL_EMG_FS,
    SmoothingParams,
    SpectralMask,
    TimestampedSeries,
    process_recording,
    resample_linear,
)


@dataclass(frozen=True)
class HankelParams:
    """Time-delay embedding depth and stream decimation factor."""

    delays: int = 60
    downsample: int = 8

    def __post_init__(self):
        if self.delays < 0:
            raise ConfigError("delay count must be >= 0")
        if self.downsample < 1:
            raise ConfigError("downsample factor must be >= 1")


@dataclass(frozen=True)
class IndicatorGrid:
    """Power-spaced partition of the unit cube over three delay coordinates.

    Edges are (i / divisions) ** exponent, so cells crowd toward zero where
    the scaled envelope spends most of its time.  Cells seen in less than
    ``min_density`` of training columns are dropped.
    """

    divisions: int = 22
    exponent: float = 1.8
    tau1: int = 29
    tau2: int = 59
    min_density: float = 0.001

    def __post_init__(self):
        if self.divisions < 1:
            raise ConfigError("divisions must be >= 1")
        if not self.exponent > 0:
            raise ConfigError("exponent must be positive")
        if not (1 <= self.tau1 < self.tau2):
            raise ConfigError("need 1 <= tau1 < tau2")
        if not 0.0 <= self.min_density <= 1.0:
            raise ConfigError("min_density must lie in [0, 1]")

    @property
    def edges(self) -> np.ndarray:
        return power_grid_bounds(self.divisions, self.exponent)


def hankel_lift(series: np.ndarray, delays: int) -> np.ndarray:
    """(delays+1) x (N-delays) matrix whose row r is the series shifted by r.

    Column n therefore holds the contiguous window series[n : n+delays+1].
    """
    x = np.ascontiguousarray(series, dtype=float)
    if x.ndim != 1:
        raise DataError("series must be 1-d")
    n_cols = x.size - delays
    if n_cols < 1:
        raise DataError(f"series of {x.size} samples cannot embed {delays} delays")
    view = np.lib.stride_tricks.sliding_window_view(x, n_cols)
    return np.ascontiguousarray(view)


def power_grid_bounds(divisions: int, exponent: float) -> np.ndarray:
    """Grid edges b_i = (i / divisions) ** exponent for i = 0..divisions."""
    if divisions < 1 or not exponent > 0:
        raise ConfigError("divisions >= 1 and exponent > 0 required")
    return (np.arange(divisions + 1) / divisions) ** exponent


def _cell_coordinates(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Per-dimension cell index for values in [0, 1]; -1 when outside.

    Points on a shared edge belong to the lower-index cell, keeping the
    cells disjoint.
    """
    idx = np.searchsorted(edges, values, side="left") - 1
    idx[values == edges[0]] = 0
    idx[(values < edges[0]) | (values > edges[-1]) | ~np.isfinite(values)] = -1
    return idx


def _flat_cells(hankel: np.ndarray, grid: IndicatorGrid) -> tuple[np.ndarray, np.ndarray]:
    """Flattened cell index per Hankel column, plus validity mask."""
    if hankel.shape[0] <= grid.tau2:
        raise ConfigError(
            f"grid taus ({grid.tau1}, {grid.tau2}) need at least {grid.tau2 + 1} Hankel rows"
        )
    edges = grid.edges
    div = grid.divisions
    i = _cell_coordinates(hankel[0], edges)
    j = _cell_coordinates(hankel[grid.tau1], edges)
    k = _cell_coordinates(hankel[grid.tau2], edges)
    valid = (i >= 0) & (j >= 0) & (k >= 0)
    flat = np.where(valid, (i * div + j) * div + k, -1)
    return flat, valid


def indicator_observables(
    hankel: np.ndarray, grid: IndicatorGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Binary observable rows for every sufficiently dense grid cell.

    Row r of the result marks the columns whose (base, tau1, tau2) triple
    falls in the r-th kept cell; cells covering fewer than ``min_density``
    of the columns are dropped.  Returns (rows, kept_flat_indices); flat
    indices run over divisions**3 candidate cells.
    """
    flat, valid = _flat_cells(hankel, grid)
    n_cols = hankel.shape[1]
    counts = np.bincount(flat[valid], minlength=grid.divisions**3)
    kept = np.flatnonzero(counts >= grid.min_density * n_cols)
    rows = _indicator_rows(flat, valid, kept, n_cols)
    return rows, kept


def _indicator_rows(flat, valid, kept, n_cols) -> np.ndarray:
    rows = np.zeros((kept.size, n_cols))
    if kept.size == 0:
        return rows
    pos = np.searchsorted(kept, flat[valid])
    cols = np.flatnonzero(valid)
    inside = (pos < kept.size) & (kept[np.minimum(pos, kept.size - 1)] == flat[valid])
    rows[pos[inside], cols[inside]] = 1.0
    return rows


def indicator_rows_for(hankel: np.ndarray, grid: IndicatorGrid, kept: np.ndarray) -> np.ndarray:
    """Indicator rows for a frozen set of kept cells (inference path).

    Columns landing in cells outside ``kept`` (or outside [0, 1]^3) get
    all-zero observables.
    """
    flat, valid = _flat_cells(hankel, grid)
    return _indicator_rows(flat, valid, np.asarray(kept), hankel.shape[1])


def build_lifted_matrices(
    emg_ds: np.ndarray,
    grip_ds: np.ndarray,
    emg_scaler: MinMaxScaler,
    grip_scaler: MinMaxScaler,
    params: HankelParams,
    grid: IndicatorGrid,
    kept: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scaled, lifted data matrices for fitting the static operator.

    E stacks the EMG Hankel block over its indicator rows; G stacks the
    grip Hankel block over matching zero rows.  Both inputs must already
    share timestamps (same downsampled grid).
    """
    emg_ds = np.asarray(emg_ds, dtype=float)
    grip_ds = np.asarray(grip_ds, dtype=float)
    if emg_ds.size != grip_ds.size:
        raise DataError("EMG and grip series must have equal length")
    he = hankel_lift(emg_scaler.apply(emg_ds), params.delays)
    hg = hankel_lift(grip_scaler.apply(grip_ds), params.delays)
    if kept is None:
        ind, kept = indicator_observables(he, grid)
    else:
        kept = np.asarray(kept)
        ind = indicator_rows_for(he, grid, kept)
    e = np.vstack([he, ind])
    g = np.vstack([hg, np.zeros_like(ind)])
    return e, g, kept


def fit_static_koopman(e: np.ndarray, g: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Frobenius-optimal linear map K with G ~= K E, via SVD pseudoinverse.

    Singular values below ``rcond`` times the largest are treated as zero,
    which keeps the sparse indicator rows from blowing up the solution.
    """
    e = np.asarray(e, dtype=float)
    g = np.asarray(g, dtype=float)
    if e.size == 0 or g.size == 0 or e.shape[1] != g.shape[1]:
        raise DataError("E and G must be non-empty with equal column counts")
    u, s, vt = np.linalg.svd(e, full_matrices=False)
    keep = s > rcond * s[0]
    return ((g @ vt[keep].T) / s[keep]) @ u[:, keep].T


@dataclass(frozen=True)
class EstimatorModel:
    """Fitted static operator plus everything needed to replay it."""

    k: np.ndarray
    emg_scaler: MinMaxScaler
    grip_scaler: MinMaxScaler
    hankel: HankelParams
    grid: IndicatorGrid
    kept: np.ndarray
    batch_size: int = DEFAULT_BATCH_SIZE
    fs: float = NOMINAL_EMG_FS
    calibration: CalibrationPolynomial = DEFAULT_CALIBRATION
    grip_floor: float = -1.0  # scaled units

    @property
    def lifted_dim(self) -> int:
        return self.hankel.delays + 1 + self.kept.size

    def min_window(self) -> int:
        return (self.hankel.delays + 1) * self.hankel.downsample


def fit_estimator(
    emg: TimestampedSeries,
    grip: TimestampedSeries,
    mask: SpectralMask,
    smoothing: SmoothingParams,
    hankel: HankelParams = HankelParams(),
    grid: IndicatorGrid = IndicatorGrid(),
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> EstimatorModel:
    """Train the static estimator on one calibration recording.

    The EMG stream is processed in batches with the given mask/smoothing,
    grip is resampled onto the EMG clock, both are decimated and min-max
    scaled on this recording, and the lifted matrices are solved in one
    shot.
    """
    if grid.tau2 > hankel.delays - 1:
        raise ConfigError("tau2 must be at most delays - 1")
    processed = process_recording(emg, mask, smoothing, batch_size)
    grip_on_emg = resample_linear(grip, emg.times[: processed.size]).values
    step = hankel.downsample
    emg_ds = processed[::step]
    grip_ds = grip_on_emg[::step]
    if emg_ds.size <= hankel.delays:
        raise DataError("calibration recording too short for the delay depth")
    emg_scaler = MinMaxScaler.fit(emg_ds)
    grip_scaler = MinMaxScaler.fit(grip_ds)
    e, g, kept = build_lifted_matrices(
        emg_ds, grip_ds, emg_scaler, grip_scaler, hankel, grid
    )
    k = fit_static_koopman(e, g)
    return EstimatorModel(
        k, emg_scaler, grip_scaler, hankel, grid, kept, batch_size, fs=emg.rate
    )


def estimate_window_scaled(model: EstimatorModel, window: np.ndarray) -> np.ndarray:
    """Scaled grip estimates for one window of processed EMG samples.

    The window is decimated, scaled, and lifted with the frozen grid; the
    estimate series comes from the base-state readout row and is floored
    at the model's scaled clamp.  Estimate i aligns with decimated window
    position i.
    """
    window = np.asarray(window, dtype=float)
    if window.size < model.min_window():
        raise DataError(
            f"window of {window.size} samples is shorter than {model.min_window()}"
        )
    ds = model.emg_scaler.apply(window[:: model.hankel.downsample])
    he = hankel_lift(ds, model.hankel.delays)
    ind = indicator_rows_for(he, model.grid, model.kept)
    lifted = np.vstack([he, ind])
    est = model.k[0] @ lifted
    return np.maximum(est, model.grip_floor)


def estimate_batch(model: EstimatorModel, window: np.ndarray) -> np.ndarray:
    """Grip estimates in newtons for one window of processed EMG samples."""
    return model.grip_scaler.invert(estimate_window_scaled(model, window))
