import numpy as np
import pytest

from emgrip.errors import DataError
from emgrip.io import (
    Recording,
    read_forecasts,
    read_mask,
    read_model,
    read_recording,
    read_runs,
    read_series,
    resolve_option,
    write_forecasts,
    write_mask,
    write_model,
    write_recording,
    write_runs,
    write_series,
)
from emgrip.metrics import RunRecord
from emgrip.processing import TimestampedSeries, default_optimal_mask
from emgrip.synth import SynthProfile, grip_profile, synth_corpus, synth_recording


class TestSeriesFiles:
    def test_round_trip_byte_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        s = TimestampedSeries(np.sort(rng.uniform(0, 10, 50)), rng.standard_normal(50))
        p1 = write_series(tmp_path / "a.csv", s, {"subject": "s01"})
        s2, meta = read_series(p1)
        p2 = write_series(tmp_path / "b.csv", s2, meta)
        assert p1.read_bytes() == p2.read_bytes()
        assert meta["subject"] == "s01"

    def test_malformed_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t_s,value\n1.0,2.0,3.0\n")
        with pytest.raises(DataError):
            read_series(p)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DataError):
            read_series(tmp_path / "nope.csv")


class TestRecordingFiles:
    def test_round_trip(self, tmp_path):
        rec = synth_recording(SynthProfile(plateau_s=0.5, ramp_s=0.3, lead_s=0.2), seed=3)
        e1, g1 = write_recording(tmp_path, rec)
        rec2 = read_recording(e1, g1)
        sub = tmp_path / "again"
        sub.mkdir()
        e2, g2 = write_recording(sub, rec2)
        assert e1.read_bytes() == e2.read_bytes()
        assert g1.read_bytes() == g2.read_bytes()
        assert rec2.subject == rec.subject
        assert rec2.position == rec.position

    def test_non_overlapping_streams_rejected(self):
        a = TimestampedSeries([0.0, 1.0], [0.0, 1.0])
        b = TimestampedSeries([5.0, 6.0], [0.0, 1.0])
        with pytest.raises(DataError):
            Recording(a, b)


class TestMaskFile:
    def test_round_trip_byte_identical(self, tmp_path):
        mask = default_optimal_mask()
        p1 = write_mask(tmp_path / "m1.tsv", mask)
        mask2 = read_mask(p1)
        p2 = write_mask(tmp_path / "m2.tsv", mask2)
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(mask.gains, mask2.gains)
        assert mask2.bin_resolution == mask.bin_resolution
        assert len(p1.read_text().splitlines()) == 249


class TestModelFile:
    def test_malformed_model_rejected(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("delays 60\n")
        with pytest.raises(DataError):
            read_model(bad)

    def test_round_trip(self, tmp_path, model):
        p1 = write_model(tmp_path / "m1.txt", model)
        m2 = read_model(p1)
        p2 = write_model(tmp_path / "m2.txt", m2)
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(model.k, m2.k)
        assert np.array_equal(model.kept, m2.kept)
        assert m2.emg_scaler == model.emg_scaler
        assert m2.grid == model.grid
        assert m2.calibration == model.calibration


class TestTabularFiles:
    def test_forecast_rows_round_trip(self, tmp_path):
        rows = [(0, 1.25, 50.5), (1, 1.75, 49.0)]
        p1 = write_forecasts(tmp_path / "f.csv", rows)
        again = read_forecasts(p1)
        assert again == rows
        p2 = write_forecasts(tmp_path / "f2.csv", again)
        assert p1.read_bytes() == p2.read_bytes()

    def test_runs_round_trip(self, tmp_path):
        records = [RunRecord("ac", 1, 1, 4.4), RunRecord("dp", 2, 2, 5.1)]
        p1 = write_runs(tmp_path / "runs.csv", records)
        again = read_runs(p1)
        assert again == records
        p2 = write_runs(tmp_path / "runs2.csv", again)
        assert p1.read_bytes() == p2.read_bytes()


class TestResolveOption:
    def test_precedence_chain(self, tmp_path):
        import configparser

        cfg = configparser.ConfigParser()
        cfg.read_string("[signal]\nwindow_size = 250\n")
        assert resolve_option(200, cfg, "signal", "window_size", 300, int) == 200
        assert resolve_option(None, cfg, "signal", "window_size", 300, int) == 250
        assert resolve_option(None, None, "signal", "window_size", 300, int) == 300


class TestSynth:
    def test_deterministic_files(self, tmp_path):
        prof = SynthProfile(plateau_s=0.5, ramp_s=0.3, lead_s=0.2)
        a = synth_recording(prof, seed=11)
        b = synth_recording(prof, seed=11)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        d1.mkdir()
        d2.mkdir()
        ea, ga = write_recording(d1, a)
        eb, gb = write_recording(d2, b)
        assert ea.read_bytes() == eb.read_bytes()
        assert ga.read_bytes() == gb.read_bytes()

    def test_zero_force_gives_floor_plus_mains(self):
        prof = SynthProfile(plateau_s=0.5, ramp_s=0.3, lead_s=0.2, max_force_n=0.0)
        rec = synth_recording(prof, seed=1)
        assert np.all(rec.grip.values == 0.0)
        # amplitude stays near the noise floor + mains level everywhere
        floor = 1.0 / prof.noise_snr
        assert np.abs(rec.emg.values).max() < 10 * (floor + prof.mains_amplitude)

    def test_profile_levels_and_duration(self):
        prof = SynthProfile()
        t = np.arange(0, prof.duration_s, 0.005)
        g = grip_profile(prof, t)
        # every plateau level is held exactly somewhere in the trace
        for lv in prof.levels:
            assert np.any(np.isclose(g, lv, atol=1e-12))
        assert g[t < prof.lead_s].max() == 0.0

    def test_corpus_layout(self):
        prof = SynthProfile(plateau_s=0.3, ramp_s=0.2, lead_s=0.1)
        calibs, runs = synth_corpus(seed=4, subjects=2, positions=2, replications=2, profile=prof)
        assert len(calibs) == 2
        assert len(runs) == 8
        stems = {r.stem for r in runs}
        assert len(stems) == 8
