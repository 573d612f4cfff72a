"""Variance-based sensitivity analysis for the signal-processing decision vector.

The tunable space has 250 dimensions: 248 spectral-mask gains (DC excluded),
the smoothing window size, and the smoothing decay factor.  The objective is
1 minus the mean peak cross-correlation between processed EMG and grip force
over a set of recordings, so lower is better.

Provided machinery: Latin hypercube and Saltelli/radial samplers, grouped
Sobol first/total-order estimators with bootstrap confidence intervals, the
cheaper RBD-FAST first-order estimator, per-variable projection summaries,
and an append-only record of bounds-narrowing decisions (the narrowing
judgement itself stays manual).
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, DataError
from .processing import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_MAX_LAG_S,
    NOMINAL_EMG_FS,
    SmoothingParams,
    SpectralMask,
    peak_cross_correlation,
    process_recording,
    resample_linear,
)

N_MASK_VARS = DEFAULT_BATCH_SIZE // 2  # non-DC bins: 248


@dataclass(frozen=True)
class Bounds:
    """Per-variable (lower, upper) box, with optional names and group labels."""

    lower: np.ndarray
    upper: np.ndarray
    names: tuple[str, ...] | None = None
    groups: tuple[str, ...] | None = None

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ConfigError("lower/upper must be 1-d arrays of equal length")
        if np.any(lower > upper):
            raise ConfigError("lower bound exceeds upper bound")
        for attr in ("names", "groups"):
            val = getattr(self, attr)
            if val is not None:
                if len(val) != lower.size:
                    raise ConfigError(f"{attr} length must match dimension")
                object.__setattr__(self, attr, tuple(val))

    @property
    def dim(self) -> int:
        return self.lower.size

    def scale(self, unit: np.ndarray) -> np.ndarray:
        """Map samples from the unit hypercube into the box."""
        return self.lower + np.asarray(unit, dtype=float) * (self.upper - self.lower)

    def contains(self, other: "Bounds") -> bool:
        """True when ``other`` is nested inside (or equal to) this box."""
        return bool(
            other.dim == self.dim
            and np.all(other.lower >= self.lower)
            and np.all(other.upper <= self.upper)
        )

    def variable_names(self) -> tuple[str, ...]:
        if self.names is not None:
            return self.names
        return tuple(f"x{i}" for i in range(self.dim))


def default_decision_bounds(
    mask_hi: float = 5.0,
    window: tuple[float, float] = (2, 495),
    decay: tuple[float, float] = (0.0, 0.05),
    bin_resolution: float = NOMINAL_EMG_FS / DEFAULT_BATCH_SIZE,
) -> Bounds:
    """Initial search box for the 250-variable decision vector.

    Mask gains range over [0, mask_hi] per non-DC bin; variables are named
    by their nominal bin frequency.  Group labels support the coarse
    three-group analysis (mask / window / decay).
    """
    lower = np.concatenate([np.zeros(N_MASK_VARS), [window[0]], [decay[0]]])
    upper = np.concatenate([np.full(N_MASK_VARS, mask_hi), [window[1]], [decay[1]]])
    names = tuple(
        f"mask_{2 * round((k + 1) * bin_resolution / 2):d}hz" for k in range(N_MASK_VARS)
    ) + ("window_size", "decay")
    groups = ("mask",) * N_MASK_VARS + ("window_size", "decay")
    return Bounds(lower, upper, names, groups)


@dataclass(frozen=True)
class DecisionVector:
    """One candidate processing configuration: mask gains + smoothing."""

    mask_gains: np.ndarray
    window_size: int
    decay: float

    def __post_init__(self):
        gains = np.asarray(self.mask_gains, dtype=float)
        object.__setattr__(self, "mask_gains", gains)
        if gains.ndim != 1:
            raise ConfigError("mask gains must be a 1-d array")

    @classmethod
    def from_array(cls, x: np.ndarray) -> "DecisionVector":
        """Split a flat sample [mask..., window, decay]; window is rounded."""
        x = np.asarray(x, dtype=float)
        if x.size < 3:
            raise ConfigError("decision vector needs at least 3 entries")
        return cls(x[:-2], int(round(x[-2])), float(x[-1]))

    def to_mask(
        self, bin_resolution: float = NOMINAL_EMG_FS / DEFAULT_BATCH_SIZE
    ) -> SpectralMask:
        """Spectral mask with the DC gain pinned to zero."""
        return SpectralMask(np.concatenate([[0.0], self.mask_gains]), bin_resolution)

    def smoothing(self) -> SmoothingParams:
        return SmoothingParams(self.window_size, self.decay)


@dataclass(frozen=True)
class SensitivityResult:
    """First/total-order indices per variable or group, with optional CIs.

    Estimator noise can push indices slightly outside [0, 1]; values are
    reported as computed, never clipped.
    """

    names: tuple[str, ...]
    first_order: np.ndarray
    total_order: np.ndarray | None = None
    first_ci: np.ndarray | None = None  # (G, 2) percentile bounds
    total_ci: np.ndarray | None = None

    def out_of_unit_interval(self) -> np.ndarray:
        """Mask of first-order entries outside [0, 1] (noise flag)."""
        return (self.first_order < 0.0) | (self.first_order > 1.0)

    def to_text(self) -> str:
        cols = ["variable", "S1"]
        if self.first_ci is not None:
            cols += ["S1_lo", "S1_hi"]
        if self.total_order is not None:
            cols += ["ST"]
            if self.total_ci is not None:
                cols += ["ST_lo", "ST_hi"]
        lines = ["\t".join(cols)]
        for i, name in enumerate(self.names):
            row = [name, repr(float(self.first_order[i]))]
            if self.first_ci is not None:
                row += [repr(float(self.first_ci[i, 0])), repr(float(self.first_ci[i, 1]))]
            if self.total_order is not None:
                row += [repr(float(self.total_order[i]))]
                if self.total_ci is not None:
                    row += [repr(float(self.total_ci[i, 0])), repr(float(self.total_ci[i, 1]))]
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def _group_table(dim: int, groups) -> tuple[tuple[str, ...], list[np.ndarray]]:
    """Resolve per-variable labels into (names, column-index lists).

    ``groups`` may be None (every variable its own group) or a sequence of
    ``dim`` labels; group order follows first appearance.
    """
    if groups is None:
        return tuple(f"x{i}" for i in range(dim)), [np.array([i]) for i in range(dim)]
    if len(groups) != dim:
        raise ConfigError("group labels must cover every variable")
    names: list[str] = []
    for g in groups:
        if g not in names:
            names.append(str(g))
    cols = [np.flatnonzero([g == name for g in groups]) for name in names]
    return tuple(names), cols


def latin_hypercube(bounds: Bounds, n: int, seed=None) -> np.ndarray:
    """Stratified (n x dim) sample: one point per equal-probability stratum
    and variable, uniformly placed within its stratum."""
    if n < 1:
        raise ConfigError("need n >= 1 samples")
    rng = np.random.default_rng(seed)
    strata = np.tile(np.arange(n, dtype=float), (bounds.dim, 1))
    strata = rng.permuted(strata, axis=1).T
    unit = (strata + rng.random((n, bounds.dim))) / n
    return bounds.scale(unit)


def saltelli_sample(bounds: Bounds, n_base: int, groups=None, seed=None) -> np.ndarray:
    """Radial sample block [A; B; AB_1; ...; AB_G] for Sobol estimation.

    A and B come from a scrambled low-discrepancy sequence (deterministic
    under ``seed``); AB_g copies A with group g's columns swapped in from B.
    Total rows: n_base * (G + 2).  Powers of two for ``n_base`` keep the
    sequence balanced.
    """
    if n_base < 1:
        raise ConfigError("need n_base >= 1")
    if groups is None:
        groups = bounds.groups
    _, group_cols = _group_table(bounds.dim, groups)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        base = qmc.Sobol(d=2 * bounds.dim, scramble=True, seed=seed).random(n_base)
    a = bounds.scale(base[:, : bounds.dim])
    b = bounds.scale(base[:, bounds.dim :])
    blocks = [a, b]
    for cols in group_cols:
        ab = a.copy()
        ab[:, cols] = b[:, cols]
        blocks.append(ab)
    return np.vstack(blocks)


def _sobol_point_estimate(fa, fb, fab):
    """First-order (product estimator) and total-order (squared-difference
    estimator) indices from paired sample blocks."""
    pooled = np.concatenate([fa, fb])
    mean = pooled.mean()
    var = pooled.var()
    if var == 0:
        g = fab.shape[0]
        return np.zeros(g), np.zeros(g)
    fa_c, fb_c, fab_c = fa - mean, fb - mean, fab - mean
    s1 = (fb_c * (fab_c - fa_c)).mean(axis=1) / var
    st = 0.5 * ((fa_c - fab_c) ** 2).mean(axis=1) / var
    return s1, st


def _contain(ci: np.ndarray, point: np.ndarray) -> np.ndarray:
    """Widen percentile intervals just enough to contain the point estimate."""
    ci[:, 0] = np.minimum(ci[:, 0], point)
    ci[:, 1] = np.maximum(ci[:, 1], point)
    return ci


def sobol_indices(
    samples: np.ndarray,
    outputs: np.ndarray,
    groups=None,
    n_boot: int = 0,
    seed=None,
    names: tuple[str, ...] | None = None,
) -> SensitivityResult:
    """Grouped Sobol indices from outputs laid out as saltelli_sample rows.

    Bootstrap (when ``n_boot`` > 0) resamples base-sample indices, keeping
    each (A, B, AB_*) row triple paired, and reports percentile 95% CIs.
    """
    samples = np.asarray(samples, dtype=float)
    outputs = np.asarray(outputs, dtype=float).ravel()
    group_names, group_cols = _group_table(samples.shape[1], groups)
    g = len(group_cols)
    if samples.shape[0] != outputs.size or outputs.size % (g + 2):
        raise DataError("outputs do not match the sampler layout")
    n = outputs.size // (g + 2)
    fa = outputs[:n]
    fb = outputs[n : 2 * n]
    fab = outputs[2 * n :].reshape(g, n)

    s1, st = _sobol_point_estimate(fa, fb, fab)
    first_ci = total_ci = None
    if n_boot > 0:
        rng = np.random.default_rng(seed)
        s1_boot = np.empty((n_boot, g))
        st_boot = np.empty((n_boot, g))
        chunk = max(1, min(n_boot, int(2**22 // max(n, 1)) or 1))
        done = 0
        while done < n_boot:
            c = min(chunk, n_boot - done)
            idx = rng.integers(0, n, size=(c, n))
            for j in range(c):
                s1_boot[done + j], st_boot[done + j] = _sobol_point_estimate(
                    fa[idx[j]], fb[idx[j]], fab[:, idx[j]]
                )
            done += c
        first_ci = np.percentile(s1_boot, [2.5, 97.5], axis=0).T
        total_ci = np.percentile(st_boot, [2.5, 97.5], axis=0).T
        first_ci = _contain(first_ci, s1)
        total_ci = _contain(total_ci, st)

    return SensitivityResult(
        names or group_names, s1, st, first_ci, total_ci
    )


def rbdfast_sample(bounds: Bounds, n: int, seed=None) -> np.ndarray:
    """Design for RBD-FAST: each variable follows an independently permuted
    triangular sweep of [0, 1], scaled to its bounds."""
    if n < 2:
        raise ConfigError("need n >= 2 samples")
    rng = np.random.default_rng(seed)
    s = -np.pi + 2 * np.pi * np.arange(n) / n
    sweep = 0.5 + np.arcsin(np.sin(s)) / np.pi
    unit = np.empty((n, bounds.dim))
    for i in range(bounds.dim):
        unit[:, i] = sweep[rng.permutation(n)]
    return bounds.scale(unit)


def _rbdfast_point_estimate(x_col, y, harmonics):
    order = np.argsort(x_col, kind="stable")
    ordered = np.concatenate([order[0::2], order[1::2][::-1]])
    yp = y[ordered]
    n = yp.size
    var = yp.var()
    if var == 0:
        return 0.0
    spectrum = np.abs(np.fft.rfft(yp)) ** 2 / (n * n)
    s1 = 2.0 * spectrum[1 : harmonics + 1].sum() / var
    lam = 2.0 * harmonics / n  # small-sample bias correction
    return s1 - lam / (1.0 - lam) * (1.0 - s1)


def rbdfast_indices(
    samples: np.ndarray,
    outputs: np.ndarray,
    harmonics: int = 10,
    n_boot: int = 0,
    seed=None,
    names: tuple[str, ...] | None = None,
) -> SensitivityResult:
    """First-order indices by the random-balance-design Fourier method.

    Outputs are reordered per variable onto a periodic path; the index is
    the bias-corrected share of spectral power in the first ``harmonics``
    frequencies.  Bootstrap resamples points (keeping x/y rows paired)
    for percentile 95% CIs.
    """
    samples = np.asarray(samples, dtype=float)
    outputs = np.asarray(outputs, dtype=float).ravel()
    n, d = samples.shape
    if outputs.size != n:
        raise DataError("one output per sample row required")
    if harmonics < 1 or harmonics >= n // 2:
        raise ConfigError("harmonics must satisfy 1 <= M < n/2")

    s1 = np.array(
        [_rbdfast_point_estimate(samples[:, i], outputs, harmonics) for i in range(d)]
    )
    first_ci = None
    if n_boot > 0:
        rng = np.random.default_rng(seed)
        boot = np.empty((n_boot, d))
        for k in range(n_boot):
            idx = rng.integers(0, n, size=n)
            ys = outputs[idx]
            boot[k] = [
                _rbdfast_point_estimate(samples[idx, i], ys, harmonics) for i in range(d)
            ]
        first_ci = _contain(np.percentile(boot, [2.5, 97.5], axis=0).T, s1)

    return SensitivityResult(
        names or tuple(f"x{i}" for i in range(d)), s1, None, first_ci, None
    )


def objective(dataset, dv: DecisionVector, batch_size: int = DEFAULT_BATCH_SIZE) -> float:
    """1 minus the mean peak cross-correlation over a set of recordings.

    Each recording's EMG is processed in batches with the candidate mask
    and smoothing; grip force is resampled onto the EMG timestamps before
    correlating.  Near 0 for configurations that track grip well.
    """
    peaks = []
    for rec in dataset:
        emg, grip = (rec.emg, rec.grip) if hasattr(rec, "emg") else rec
        processed = process_recording(emg, dv.to_mask(emg.rate / batch_size), dv.smoothing(), batch_size)
        grip_on_emg = resample_linear(grip, emg.times[: processed.size]).values
        max_lag = int(round(DEFAULT_MAX_LAG_S * emg.rate))
        peak, _ = peak_cross_correlation(processed, grip_on_emg, max_lag)
        peaks.append(peak)
    if not peaks:
        raise DataError("empty dataset")
    return 1.0 - float(np.mean(peaks))


def map_objective(dataset, sample_matrix: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Evaluate the objective for every row of a sample matrix.

    Rows are independent; with ``workers`` set, evaluation runs in a thread
    pool while results keep sample order.
    """
    rows = [DecisionVector.from_array(x) for x in np.asarray(sample_matrix, dtype=float)]
    if workers:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(lambda dv: objective(dataset, dv), rows))
    else:
        vals = [objective(dataset, dv) for dv in rows]
    return np.asarray(vals)


@dataclass(frozen=True)
class ProjectionSummary:
    """Binned view of the objective along one variable."""

    centers: np.ndarray
    bin_means: np.ndarray
    trend: np.ndarray
    counts: np.ndarray


def projection_summary(
    samples: np.ndarray, outputs: np.ndarray, var_index: int, n_bins: int = 20
) -> ProjectionSummary:
    """Mean output per equal-width bin of one variable, plus a smoothed trend.

    The trend is a centred moving average (window 3) over the bin means,
    ignoring empty bins; the stand-in for scatterplot smoothers.
    """
    if n_bins < 2:
        raise ConfigError("need at least 2 bins")
    x = np.asarray(samples, dtype=float)[:, var_index]
    y = np.asarray(outputs, dtype=float).ravel()
    edges = np.linspace(x.min(), x.max(), n_bins + 1)
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(which, minlength=n_bins)
    sums = np.bincount(which, weights=y, minlength=n_bins)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    trend = np.full(n_bins, np.nan)
    for i in range(n_bins):
        window = means[max(0, i - 1) : i + 2]
        window = window[np.isfinite(window)]
        if window.size:
            trend[i] = window.mean()
    centers = 0.5 * (edges[:-1] + edges[1:])
    return ProjectionSummary(centers, means, trend, counts)


@dataclass(frozen=True)
class NarrowingStep:
    step: int
    bounds: Bounds
    top: tuple[tuple[str, float], ...]
    no_op: bool = False


class NarrowingRecord:
    """Append-only log of bounds-narrowing decisions.

    Each appended step must be nested inside the previous bounds; identical
    bounds are accepted but flagged as no-ops.  The judgement of where to
    narrow stays with the analyst; this object only records it.
    """

    def __init__(self, initial: Bounds):
        self.steps: list[NarrowingStep] = [NarrowingStep(0, initial, ())]

    @property
    def current(self) -> Bounds:
        return self.steps[-1].bounds

    def append(self, bounds: Bounds, top: list[tuple[str, float]] = ()) -> NarrowingStep:
        prev = self.current
        if not prev.contains(bounds):
            raise DataError("new bounds must be nested inside the previous step")
        no_op = bool(
            np.array_equal(prev.lower, bounds.lower)
            and np.array_equal(prev.upper, bounds.upper)
        )
        step = NarrowingStep(len(self.steps), bounds, tuple((str(n), float(v)) for n, v in top), no_op)
        self.steps.append(step)
        return step

    def to_text(self) -> str:
        lines = []
        for s in self.steps:
            lines.append(f"== step {s.step}{' (no-op)' if s.no_op else ''}")
            names = s.bounds.variable_names()
            for i in range(s.bounds.dim):
                lines.append(
                    f"{names[i]}\t{float(s.bounds.lower[i])!r}\t{float(s.bounds.upper[i])!r}"
                )
            if s.top:
                lines.append("top: " + ", ".join(f"{n}={v!r}" for n, v in s.top))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NarrowingRecord":
        record = None
        step_no = None
        names: list[str] = []
        lows: list[float] = []
        highs: list[float] = []
        tops: list[tuple[str, float]] = []
        no_op = False

        def flush():
            nonlocal record
            if step_no is None:
                return
            bounds = Bounds(np.array(lows), np.array(highs), tuple(names))
            if record is None:
                record = cls(bounds)
            else:
                record.append(bounds, tops)

        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("== step"):
                flush()
                no_op = "(no-op)" in line
                step_no = int(line.split()[2])
                names, lows, highs, tops = [], [], [], []
            elif line.startswith("top:"):
                for part in line[4:].split(","):
                    name, val = part.strip().rsplit("=", 1)
                    tops.append((name, float(val)))
            else:
                name, lo, hi = line.split("\t")
                names.append(name)
                lows.append(float(lo))
                highs.append(float(hi))
        flush()
        if record is None:
            raise DataError("empty narrowing record")
        return record
