"""Short-horizon grip-force forecasting from the estimated-grip stream.

Per incoming batch the latest estimates are LOWESS-smoothed, Hankel-lifted,
augmented with pairwise products of log-shifted entries, thinned to a
coarser snapshot grid, and decomposed into Ritz pairs by a residual-refined
DMD.  Mode amplitudes are refit by least squares and the modes are powered
forward to cover the next batch.  The model is retrained from scratch every
batch so it always reflects the latest dynamics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import linalg as sla

from .calibration import MinMaxScaler
from .errors import ConfigError, DataError, NumericError
from .estimation import hankel_lift

# condition number above which the normal-equations amplitude solve is
# swapped for a QR-based least squares
_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ForecastHyperparams:
    """Tuning knobs for the per-batch forecaster.

    Window sizes are expressed as multipliers of the decimated batch length
    (62 samples for the default stream): ``smooth_modifier`` sizes the
    LOWESS neighbourhood and ``window_modifier`` the training window.
    """

    window_modifier: float = 1.3
    smooth_modifier: float = 1.1
    thin_step: int = 7
    delays: int = 8
    n_modes: int = 4

    def __post_init__(self):
        if self.window_modifier < 1 or self.smooth_modifier < 1:
            raise ConfigError("window modifiers must be >= 1")
        if not 3 <= self.thin_step <= 8:
            raise ConfigError("thin step must lie in [3, 8]")
        if not 4 <= self.delays <= 10:
            raise ConfigError("delay count must lie in [4, 10]")
        if self.n_modes < 1:
            raise ConfigError("need at least one mode")


@dataclass
class DmdModel:
    """Ritz pairs of the one-step propagator on thinned snapshots."""

    ritz_values: np.ndarray       # complex, shape (l,)
    ritz_vectors: np.ndarray      # complex, shape (rows, l), unit columns
    residuals: np.ndarray         # per-mode ||A z - lambda z||
    dt_eff: float = 1.0           # seconds between thinned snapshots
    amplitudes: np.ndarray | None = None
    n_snapshots: int = 0

    @property
    def n_modes(self) -> int:
        return self.ritz_values.size


def lowess_smooth(values: np.ndarray, window: int, iterations: int = 0) -> np.ndarray:
    """Locally weighted linear smoothing on a uniformly indexed series.

    Each point is replaced by a tricube-weighted linear fit over its
    ``window`` nearest neighbours.  ``iterations`` > 0 adds bisquare
    robustness reweighting; the streaming pipeline runs with 0.  Series
    shorter than the window degrade to a single global linear fit.
    """
    y = np.asarray(values, dtype=float)
    n = y.size
    if window < 3:
        raise ConfigError("window must be >= 3 points")
    x = np.arange(n, dtype=float)
    if n <= window:
        if n < 2:
            return y.copy()
        coeffs = np.polyfit(x, y, 1)
        return np.polyval(coeffs, x)

    # pairwise distances on the index grid; bandwidth = window-th nearest
    dist = np.abs(x[:, None] - x[None, :])
    h = np.partition(dist, window - 1, axis=1)[:, window - 1]
    u = np.clip(dist / h[:, None], 0.0, 1.0)
    w = (1.0 - u**3) ** 3

    robust = np.ones(n)
    for _ in range(max(1, iterations + 1)):
        weights = w * robust[None, :]
        sw = weights.sum(axis=1)
        swx = weights @ x
        swy = weights @ y
        swxx = weights @ (x * x)
        swxy = weights @ (x * y)
        denom = sw * swxx - swx**2
        denom = np.where(denom == 0, 1.0, denom)
        slope = (sw * swxy - swx * swy) / denom
        intercept = (swy - slope * swx) / sw
        fitted = intercept + slope * x
        if iterations == 0:
            return fitted
        resid = y - fitted
        s = np.median(np.abs(resid))
        if s == 0:
            return fitted
        robust = np.clip(resid / (6.0 * s), -1.0, 1.0)
        robust = (1.0 - robust**2) ** 2
    return fitted


def log_interaction_lift(delay_block: np.ndarray) -> np.ndarray:
    """Pairwise products of ln(entry + 10) over all distinct delay-row pairs.

    Rows follow lexicographic pair order; C(rows, 2) output rows.  The +10
    shift keeps arguments positive for entries above -10.
    """
    h = np.asarray(delay_block, dtype=float)
    if h.ndim != 2 or h.shape[0] < 2:
        raise DataError("delay block needs at least 2 rows")
    if np.any(h <= -10.0):
        raise DataError("entries must exceed -10 for the log shift")
    logs = np.log(h + 10.0)
    pairs = list(combinations(range(h.shape[0]), 2))
    return np.vstack([logs[p] * logs[q] for p, q in pairs])


def thin(matrix: np.ndarray, step: int) -> np.ndarray:
    """Keep every ``step``-th column counting backward from the last.

    The newest snapshot is always retained; column order is preserved.
    """
    m = np.asarray(matrix)
    if step < 1:
        raise ConfigError("step must be >= 1")
    start = (m.shape[1] - 1) % step
    return m[:, start::step]


def _conjugate_units(eigvals: np.ndarray) -> list[list[int]]:
    """Group eigenvalue indices into conjugate pairs (or real singletons)."""
    units: list[list[int]] = []
    used = np.zeros(eigvals.size, dtype=bool)
    for i, lam in enumerate(eigvals):
        if used[i]:
            continue
        used[i] = True
        if abs(lam.imag) <= 1e-14 * max(1.0, abs(lam)):
            units.append([i])
            continue
        partner = None
        best = np.inf
        for j in range(i + 1, eigvals.size):
            if used[j]:
                continue
            gap = abs(np.conj(lam) - eigvals[j])
            if gap < best:
                best, partner = gap, j
        if partner is not None and best <= 1e-8 * max(1.0, abs(lam)):
            used[partner] = True
            units.append([i, partner])
        else:
            units.append([i])
    return units


def fit_dmd(snapshots: np.ndarray, n_modes: int, dt_eff: float = 1.0) -> DmdModel:
    """Residual-refined DMD of a snapshot sequence.

    The data are QR-compressed when tall, the shift operator is formed in
    the compressed coordinates through an SVD of the first snapshot block,
    and every eigenvalue's Ritz vector is refined to minimise the data-
    driven residual ||A z - lambda z||.  The ``n_modes`` modes with the
    smallest residuals are kept (ties broken by projected energy), with
    complex-conjugate pairs kept or dropped together so reconstructions
    stay real.
    """
    s = np.asarray(snapshots, dtype=float)
    if s.ndim != 2:
        raise DataError("snapshots must be a 2-d matrix")
    rows, m = s.shape
    if m < n_modes + 1:
        raise DataError(f"{m} snapshots cannot support {n_modes} modes")

    if rows > m:
        q, c = np.linalg.qr(s)
    else:
        q, c = None, s

    x, y = c[:, :-1], c[:, 1:]
    u, sv, vh = np.linalg.svd(x, full_matrices=False)
    tol = sv[0] * 1e-12 if sv.size and sv[0] > 0 else 0.0
    rank = max(1, int(np.sum(sv > tol)))
    u, sv, vh = u[:, :rank], sv[:rank], vh[:rank]
    b = (y @ vh.conj().T) / sv
    rayleigh = u.conj().T @ b
    eigvals = np.linalg.eigvals(rayleigh)

    vectors = np.empty((c.shape[0], eigvals.size), dtype=complex)
    residuals = np.empty(eigvals.size)
    for idx, lam in enumerate(eigvals):
        _, sig, wh = np.linalg.svd(b - lam * u, full_matrices=False)
        w = wh[-1].conj()
        residuals[idx] = sig[-1]
        vectors[:, idx] = u @ w

    energy = np.linalg.norm(vectors.conj().T @ c, axis=1)

    units = _conjugate_units(eigvals)
    units.sort(key=lambda unit: (residuals[list(unit)].min(), -energy[list(unit)].max()))
    chosen: list[int] = []
    for unit in units:
        if len(chosen) + len(unit) <= n_modes:
            chosen.extend(unit)
        if len(chosen) == n_modes:
            break
    order = np.argsort(residuals[chosen], kind="stable")
    chosen = [chosen[i] for i in order]

    z = vectors[:, chosen]
    if q is not None:
        z = q @ z
    return DmdModel(eigvals[chosen], z, residuals[chosen], dt_eff)


def fit_amplitudes(model: DmdModel, snapshots: np.ndarray) -> np.ndarray:
    """Mode amplitudes minimising the snapshot reconstruction error.

    Solves min_a sum_i ||s_i - Z diag(lambda^(i-1)) a||^2 through the
    Hadamard-structured normal equations; when those are ill-conditioned
    the dense system is handed to a QR-based least-squares solver.
    """
    s = np.asarray(snapshots, dtype=float)
    m = s.shape[1]
    lam = model.ritz_values
    z = model.ritz_vectors
    if m > 1 and np.all(lam == 0):
        raise NumericError("all-zero eigenvalues cannot fit multiple snapshots")

    vand = lam[None, :] ** np.arange(m)[:, None]          # (m, l)
    gram = (z.conj().T @ z) * (vand.conj().T @ vand)
    rhs = ((z.conj().T @ s) * vand.conj().T).sum(axis=1)
    cond = np.linalg.cond(gram)
    if np.isfinite(cond) and cond < _CONDITION_LIMIT:
        alpha = np.linalg.solve(gram, rhs)
    else:
        dense = np.vstack([z * vand[i][None, :] for i in range(m)])
        alpha, *_ = sla.lstsq(dense, s.T.reshape(-1), lapack_driver="gelsy")
    model.amplitudes = alpha
    model.n_snapshots = m
    return alpha


def forecast(
    model: DmdModel,
    n_ahead: int,
    readout_row: int = 0,
    scaler: MinMaxScaler | None = None,
    clamp: tuple[float, float] | None = None,
) -> np.ndarray:
    """Extrapolate the readout row ``n_ahead`` thinned steps past the data.

    Values are the real part of the mode sum; ``clamp`` bounds them (in
    pre-scaler units) and ``scaler`` optionally maps them back to newtons.
    """
    if model.amplitudes is None:
        raise DataError("fit amplitudes before forecasting")
    taus = np.arange(1, n_ahead + 1)
    powers = model.ritz_values[None, :] ** (model.n_snapshots - 1 + taus[:, None])
    vals = np.real(powers @ (model.ritz_vectors[readout_row] * model.amplitudes))
    if clamp is not None:
        vals = np.clip(vals, clamp[0], clamp[1])
    if scaler is not None:
        vals = scaler.invert(vals)
    return vals


def predict_batch(
    estimates_scaled: np.ndarray,
    hyper: ForecastHyperparams,
    scaler: MinMaxScaler,
    batch_samples: int = 62,
    dt_eff: float | None = None,
) -> np.ndarray | None:
    """Forecasts (newtons) covering the next batch, or None while warming up.

    The tail of the scaled estimate stream is smoothed (the LOWESS window
    reaches into the previous batches), the training window is lifted and
    thinned, a fresh DMD model is fitted, and the readout row holding the
    newest sample is powered forward.  Forecasts are clamped to the
    calibration grip range before inverse scaling.
    """
    est = np.asarray(estimates_scaled, dtype=float)
    n_pred = round(hyper.window_modifier * batch_samples)
    n_smooth = round(hyper.smooth_modifier * batch_samples)
    if est.size < n_pred:
        return None

    segment = est[-(n_pred + n_smooth):]
    smoothed = lowess_smooth(segment, n_smooth)
    window = smoothed[-n_pred:]

    delay_block = hankel_lift(window, hyper.delays)
    lifted = np.vstack([log_interaction_lift(delay_block), delay_block])
    thinned = thin(lifted, hyper.thin_step)

    model = fit_dmd(
        thinned,
        hyper.n_modes,
        dt_eff if dt_eff is not None else float(hyper.thin_step),
    )
    fit_amplitudes(model, thinned)
    n_ahead = math.ceil(batch_samples / hyper.thin_step)
    readout = lifted.shape[0] - 1  # newest-sample delay row
    return forecast(model, n_ahead, readout, scaler=scaler, clamp=(0.0, 1.0))


def grid_search(
    corpus,
    window_modifiers=(1.2, 1.3, 1.4),
    smooth_modifiers=(1.1, 1.2),
    thin_steps=(7, 8),
    delay_counts=(8,),
    mode_counts=(4,),
    evaluate=None,
):
    """Rank hyperparameter combinations by mean + median wMAPE on a corpus.

    ``evaluate(hyper) -> per-recording wMAPE array`` is injected by the
    caller (the streaming simulator provides one).  Ties in the score break
    lexicographically on the hyperparameter tuple, so the ranking is total
    and deterministic.  Returns rows of
    (hyper, mean_wmape, median_wmape, score) sorted best first.
    """
    if evaluate is None:
        raise ConfigError("an evaluate callback is required")
    combos = [
        ForecastHyperparams(wm, sm, ts, d, nm)
        for wm in window_modifiers
        for sm in smooth_modifiers
        for ts in thin_steps
        for d in delay_counts
        for nm in mode_counts
    ]
    if not combos:
        raise DataError("empty hyperparameter grid")
    rows = []
    for hyper in combos:
        wmapes = np.asarray(evaluate(hyper), dtype=float)
        mean = float(wmapes.mean())
        median = float(np.median(wmapes))
        rows.append((hyper, mean, median, mean + median))
    rows.sort(
        key=lambda r: (
            r[3],
            r[0].window_modifier,
            r[0].smooth_modifier,
            r[0].thin_step,
            r[0].delays,
            r[0].n_modes,
        )
    )
    return rows
