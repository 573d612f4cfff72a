"""Command-line surface tying the pipeline together.

Subcommands: synth, mask, process, xcorr, sa, fit, estimate, predict, tune,
evaluate, simulate.  Global flags: --seed, --config, --out.  Option
precedence is flag > config file > built-in default.  Exit codes: 0 ok,
1 usage, 2 input/format error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as eio
from .calibration import prepare_grip
from .errors import ConfigError, DataError, EmgripError, NumericError
from .estimation import HankelParams, IndicatorGrid, fit_estimator
from .forecasting import ForecastHyperparams, grid_search
from .metrics import anova_rbd, block_effects, summary_stats, wmape
from .processing import (
    DEFAULT_MAX_LAG_S,
    SmoothingParams,
    TimestampedSeries,
    default_optimal_mask,
    peak_cross_correlation,
    process_recording,
    resample_linear,
)
from .sensitivity import (
    default_decision_bounds,
    latin_hypercube,
    map_objective,
    projection_summary,
    rbdfast_indices,
    rbdfast_sample,
    saltelli_sample,
    sobol_indices,
)
from .simulate import evaluate_run, stream_simulate
from .synth import synth_corpus

USAGE_EXIT, INPUT_EXIT, NUMERIC_EXIT = 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # map argparse usage errors onto exit code 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="emgrip", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="RNG seed")
    parser.add_argument("--config", type=str, default=None, help="INI config file")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--subjects", type=int, default=1)
    p.add_argument("--replications", type=int, default=1)

    p = sub.add_parser("mask", help="built-in spectral mask")
    p.add_argument("action", choices=["default", "show"])
    p.add_argument("--file", type=str, default=None, help="mask file for 'show'")

    p = sub.add_parser("process", help="raw EMG file -> processed envelope file")
    p.add_argument("--emg", required=True)
    p.add_argument("--mask", default=None, help="mask file (default: built-in)")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--decay", type=float, default=None)

    p = sub.add_parser("xcorr", help="peak cross-correlation summary for a corpus")
    p.add_argument("--data", required=True, help="directory of *_emg.csv/*_grip.csv")
    p.add_argument("--mask", default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--decay", type=float, default=None)

    p = sub.add_parser("sa", help="sensitivity analysis on the corpus objective")
    p.add_argument("method", choices=["sobol", "rbdfast", "lh"])
    p.add_argument("--data", required=True)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--groups", choices=["coarse", "none"], default="coarse")
    p.add_argument("--bounds-file", default=None, help="narrowing record to resume from")
    p.add_argument("--boot", type=int, default=0)
    p.add_argument("--harmonics", type=int, default=10)

    p = sub.add_parser("fit", help="train the estimator on a calibration recording")
    p.add_argument("--emg", required=True)
    p.add_argument("--grip", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--decay", type=float, default=None)
    p.add_argument("--delays", type=int, default=None)
    p.add_argument("--raw-grip", action="store_true", help="zero + calibrate the grip stream")
    p.add_argument("--model", default=None, help="output model path")

    p = sub.add_parser("estimate", help="estimate grip force for a recording")
    p.add_argument("--model", required=True)
    p.add_argument("--emg", required=True)
    p.add_argument("--grip", default=None, help="measured grip for wMAPE")
    p.add_argument("--mask", default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--decay", type=float, default=None)

    p = sub.add_parser("predict", help="forecast grip force for a recording")
    p.add_argument("--model", required=True)
    p.add_argument("--emg", required=True)
    p.add_argument("--grip", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--decay", type=float, default=None)

    p = sub.add_parser("tune", help="hyperparameter grid search")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--decay", type=float, default=None)
    p.add_argument("--window-mods", default="1.2,1.3,1.4")
    p.add_argument("--smooth-mods", default="1.1")
    p.add_argument("--thin-steps", default="7")
    p.add_argument("--delay-counts", default="8")
    p.add_argument("--mode-counts", default="4")

    p = sub.add_parser("evaluate", help="effects + ANOVA from per-run metrics")
    p.add_argument("--runs", required=True, help="CSV of subject,position,replication,wmape")

    p = sub.add_parser("simulate", help="stream a recording through the pipeline")
    p.add_argument("--model", required=True)
    p.add_argument("--emg", required=True)
    p.add_argument("--grip", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--decay", type=float, default=None)
    p.add_argument("--realtime", action="store_true")
    return parser


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else eio.default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args):
    return eio.read_config(args.config) if args.config else None


def _smoothing(args, config) -> SmoothingParams:
    window = eio.resolve_option(args.window, config, "signal", "window_size", 300, int)
    decay = eio.resolve_option(args.decay, config, "signal", "decay", 0.0, float)
    return SmoothingParams(int(window), float(decay))


def _mask(args, config):
    path = eio.resolve_option(getattr(args, "mask", None), config, "signal", "mask_file", None, str)
    return eio.read_mask(path) if path else default_optimal_mask()


def _load_corpus(data_dir: str):
    root = Path(data_dir)
    pairs = sorted(root.glob("*_emg.csv"))
    if not pairs:
        raise DataError(f"no *_emg.csv recordings under {root}")
    recs = []
    for emg_path in pairs:
        grip_path = emg_path.with_name(emg_path.name.replace("_emg.csv", "_grip.csv"))
        if not grip_path.exists():
            raise DataError(f"missing grip stream for {emg_path}")
        recs.append(eio.read_recording(emg_path, grip_path))
    return recs


def _grip_series(args, path):
    series, _ = eio.read_series(path)
    if getattr(args, "raw_grip", False):
        series = prepare_grip(series)
    return series


def _cmd_synth(args, config):
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 0
    calibs, runs = synth_corpus(
        seed=seed, subjects=args.subjects, replications=args.replications
    )
    for rec in calibs + runs:
        eio.write_recording(out, rec)
    print(f"wrote {len(calibs)} calibration + {len(runs)} run recordings to {out}")
    return 0


def _cmd_mask(args, config):
    mask = eio.read_mask(args.file) if args.file else default_optimal_mask()
    if args.action == "default":
        path = _out_dir(args) / "mask.tsv"
        eio.write_mask(path, mask)
        print(f"wrote {path}")
    else:
        for f, g in zip(mask.frequencies, mask.gains):
            print(f"{f!r}\t{g!r}")
    return 0


def _cmd_process(args, config):
    emg, meta = eio.read_series(args.emg)
    processed = process_recording(emg, _mask(args, config), _smoothing(args, config))
    out = _out_dir(args) / (Path(args.emg).stem + "_processed.csv")
    eio.write_series(
        out,
        TimestampedSeries(emg.times[: processed.size], processed),
        {**meta, "stream": "processed_emg"},
    )
    print(f"wrote {out}")
    return 0


def _cmd_xcorr(args, config):
    mask = _mask(args, config)
    smoothing = _smoothing(args, config)
    peaks, lags_ms = [], []
    for rec in _load_corpus(args.data):
        processed = process_recording(rec.emg, mask, smoothing)
        grip = resample_linear(rec.grip, rec.emg.times[: processed.size]).values
        max_lag = int(round(DEFAULT_MAX_LAG_S * rec.emg.rate))
        peak, lag = peak_cross_correlation(processed, grip, max_lag)
        peaks.append(peak)
        # positive = envelope trails the measured force
        lags_ms.append(-1e3 * lag / rec.emg.rate)
    rows = []
    for name, vals in (("peak_xcorr", peaks), ("emg_lag_ms", lags_ms)):
        s = summary_stats(vals)
        rows.append((name,) + s.as_tuple())
    out = _out_dir(args) / "xcorr_summary.tsv"
    eio.write_table(out, ["metric", "min", "q1", "median", "mean", "q3", "max"], rows)
    print(f"wrote {out}")
    for row in rows:
        print("\t".join(str(v) for v in row))
    return 0


def _cmd_sa(args, config):
    corpus = _load_corpus(args.data)
    out = _out_dir(args)
    seed = args.seed
    if args.bounds_file:
        from .sensitivity import NarrowingRecord

        try:
            text = Path(args.bounds_file).read_text()
        except OSError as exc:
            raise DataError(f"cannot read {args.bounds_file}: {exc}") from exc
        bounds = NarrowingRecord.from_text(text).current
    else:
        bounds = default_decision_bounds()
    # "none" analyses every variable separately; unique names act as groups
    groups = bounds.groups if args.groups == "coarse" else bounds.variable_names()

    if args.method == "sobol":
        samples = saltelli_sample(bounds, args.samples, groups=groups, seed=seed)
        outputs = map_objective(corpus, samples)
        result = sobol_indices(samples, outputs, groups=groups, n_boot=args.boot, seed=seed)
        path = out / "sa_sobol.tsv"
    elif args.method == "rbdfast":
        samples = rbdfast_sample(bounds, args.samples, seed=seed)
        outputs = map_objective(corpus, samples)
        result = rbdfast_indices(
            samples, outputs, harmonics=args.harmonics,
            n_boot=args.boot, seed=seed, names=bounds.variable_names(),
        )
        path = out / "sa_rbdfast.tsv"
    else:
        samples = latin_hypercube(bounds, args.samples, seed=seed)
        outputs = map_objective(corpus, samples)
        rows = []
        names = bounds.variable_names()
        for name in (n for n in ("window_size", "decay") if n in names):
            idx = names.index(name)
            summary = projection_summary(samples, outputs, idx, n_bins=10)
            for c, m, t in zip(summary.centers, summary.bin_means, summary.trend):
                rows.append((name, float(c), float(m), float(t)))
        path = out / "sa_lh_projections.tsv"
        eio.write_table(path, ["variable", "bin_center", "bin_mean", "trend"], rows)
        print(f"wrote {path}")
        return 0
    path.write_text(result.to_text())
    print(f"wrote {path}")
    return 0


def _cmd_fit(args, config):
    emg, _ = eio.read_series(args.emg)
    grip = _grip_series(args, args.grip)
    delays = eio.resolve_option(args.delays, config, "estimator", "delays", 60, int)
    model = fit_estimator(
        emg, grip, _mask(args, config), _smoothing(args, config),
        HankelParams(delays=int(delays)), IndicatorGrid(),
    )
    path = Path(args.model) if args.model else _out_dir(args) / "model.txt"
    eio.write_model(path, model)
    print(f"wrote {path} (lifted dim {model.lifted_dim}, kept {model.kept.size} cells)")
    return 0


def _run_stream(args, config, hyper=None):
    model = eio.read_model(args.model)
    emg, _ = eio.read_series(args.emg)
    grip = _grip_series(args, args.grip) if args.grip else None
    # grip stream is only needed for metrics; reuse EMG as a placeholder
    rec = eio.Recording(emg, grip if grip is not None else emg)
    mask = _mask(args, config)
    smoothing = _smoothing(args, config)
    result = stream_simulate(
        rec, model, mask, smoothing,
        hyper or ForecastHyperparams(),
        real_time=getattr(args, "realtime", False),
    )
    return model, rec, mask, smoothing, result, grip


def _cmd_estimate(args, config):
    import time

    start = time.perf_counter()
    _, rec, _, _, result, grip = _run_stream(args, config)
    elapsed = time.perf_counter() - start
    out_dir = _out_dir(args)
    out = out_dir / "estimates.csv"
    eio.write_series(
        out,
        TimestampedSeries(result.estimate_times, result.estimates),
        {"stream": "grip_estimate_N"},
    )
    print(f"wrote {out}")
    rows = [("n_estimates", float(result.estimates.size)), ("runtime_s", elapsed)]
    if grip is not None:
        actual = resample_linear(grip, result.estimate_times).values
        err = wmape(actual, result.estimates)
        rows.insert(0, ("wmape_pct", err))
        print(f"estimation wMAPE: {err:.3f}%")
    eio.write_table(out_dir / "estimate_report.tsv", ["metric", "value"], rows)
    return 0


def _cmd_predict(args, config):
    _, rec, _, _, result, grip = _run_stream(args, config)
    out = _out_dir(args) / "forecasts.csv"
    eio.write_forecasts(out, result.forecast_rows())
    print(f"wrote {out}")
    report = [("n_forecasts", float(sum(b.values.size for b in result.forecasts)))]
    if grip is not None:
        rows = [(t, v) for _, t, v in result.forecast_rows() if t <= grip.times[-1]]
        if rows:
            t = np.array([r[0] for r in rows])
            v = np.array([r[1] for r in rows])
            actual = np.interp(t, grip.times, grip.values)
            err = wmape(actual, v)
            report.insert(0, ("wmape_pct", err))
            print(f"prediction wMAPE: {err:.3f}%")
    eio.write_table(_out_dir(args) / "predict_report.tsv", ["metric", "value"], report)
    return 0


def _cmd_tune(args, config):
    corpus = _load_corpus(args.data)
    model = eio.read_model(args.model)
    mask = _mask(args, config)
    smoothing = _smoothing(args, config)

    def evaluate(hyper):
        return [
            evaluate_run(rec, model, mask, smoothing, hyper).prediction_wmape
            for rec in corpus
        ]

    def _floats(s):
        return tuple(float(v) for v in s.split(","))

    def _ints(s):
        return tuple(int(v) for v in s.split(","))

    rows = grid_search(
        corpus,
        window_modifiers=_floats(args.window_mods),
        smooth_modifiers=_floats(args.smooth_mods),
        thin_steps=_ints(args.thin_steps),
        delay_counts=_ints(args.delay_counts),
        mode_counts=_ints(args.mode_counts),
        evaluate=evaluate,
    )
    table = [
        (h.window_modifier, h.smooth_modifier, h.thin_step, h.delays, h.n_modes,
         mean, median, score)
        for h, mean, median, score in rows
    ]
    out = _out_dir(args) / "tuning.tsv"
    eio.write_table(
        out,
        ["window_mod", "smooth_mod", "thin_step", "delays", "modes",
         "mean_wmape", "median_wmape", "score"],
        table,
    )
    best = rows[0][0]
    print(f"wrote {out}")
    print(
        f"best: window_mod={best.window_modifier} smooth_mod={best.smooth_modifier} "
        f"thin={best.thin_step} delays={best.delays} modes={best.n_modes}"
    )
    return 0


def _cmd_evaluate(args, config):
    records = eio.read_runs(args.runs)
    table = anova_rbd(records)
    out = _out_dir(args)
    rows = [
        (r.source, r.df, r.ss, r.ms,
         "" if r.f is None else r.f, "" if r.p is None else r.p)
        for r in table.rows
    ]
    eio.write_table(out / "anova.tsv", ["source", "df", "ss", "ms", "F", "p"], rows)
    for block_by in ("position", "subject"):
        eff = block_effects(records, block_by)
        eio.write_table(
            out / f"effects_{block_by}.tsv",
            [block_by, "mean", "effect"],
            [(b, float(m), float(e)) for b, m, e in zip(eff.blocks, eff.means, eff.effects)],
        )
    s = summary_stats([r.metric for r in records])
    eio.write_table(
        out / "wmape_summary.tsv",
        ["min", "q1", "median", "mean", "q3", "max"],
        [s.as_tuple()],
    )
    for r in table.rows:
        f = "" if r.f is None else f"{r.f:.4f}"
        p = "" if r.p is None else f"{r.p:.4f}"
        print(f"{r.source}\tdf={r.df}\tSS={r.ss:.4f}\tF={f}\tp={p}")
    return 0


def _cmd_simulate(args, config):
    model, rec, mask, smoothing, result, grip = _run_stream(args, config)
    out = _out_dir(args)
    eio.write_series(
        out / "estimates.csv",
        TimestampedSeries(result.estimate_times, result.estimates),
        {"stream": "grip_estimate_N"},
    )
    eio.write_forecasts(out / "forecasts.csv", result.forecast_rows())
    pct = result.latency.percentiles()
    eio.write_table(
        out / "latency.tsv",
        ["stage", "p50_ms", "p90_ms", "p99_ms"],
        [(k, v["p50"], v["p90"], v["p99"]) for k, v in pct.items()],
    )
    print(f"wrote estimates, forecasts, latency to {out}")
    print(f"median per-batch total: {pct['total']['p50']:.2f} ms")
    if grip is not None:
        ev = evaluate_run(rec, model, mask, smoothing, result=result)
        print(
            f"peak xcorr {ev.peak_xcorr:.3f}, estimation wMAPE {ev.estimation_wmape:.2f}%, "
            f"prediction wMAPE {ev.prediction_wmape:.2f}%"
        )
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "mask": _cmd_mask,
    "process": _cmd_process,
    "xcorr": _cmd_xcorr,
    "sa": _cmd_sa,
    "fit": _cmd_fit,
    "estimate": _cmd_estimate,
    "predict": _cmd_predict,
    "tune": _cmd_tune,
    "evaluate": _cmd_evaluate,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    try:
        config = _load_config(args)
        return _HANDLERS[args.command](args, config)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except (DataError, ConfigError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_EXIT
    except EmgripError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_EXIT


if __name__ == "__main__":
    sys.exit(main())
