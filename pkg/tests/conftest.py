import numpy as np
import pytest

from emgrip.estimation import fit_estimator
from emgrip.processing import SmoothingParams, default_optimal_mask
from emgrip.simulate import stream_simulate
from emgrip.synth import synth_recording


@pytest.fixture(scope="session")
def mask():
    return default_optimal_mask()


@pytest.fixture(scope="session")
def smoothing():
    return SmoothingParams(300, 0.0)


@pytest.fixture(scope="session")
def calib_recording():
    return synth_recording(seed=42)


@pytest.fixture(scope="session")
def test_recording():
    return synth_recording(seed=43)


@pytest.fixture(scope="session")
def model(calib_recording, mask, smoothing):
    # warm the linear algebra backend so timing-sensitive tests measure the
    # algorithm, not library initialisation
    np.linalg.svd(np.random.default_rng(0).standard_normal((32, 32)))
    return fit_estimator(calib_recording.emg, calib_recording.grip, mask, smoothing)


@pytest.fixture(scope="session")
def stream_result(test_recording, model, mask, smoothing):
    return stream_simulate(test_recording, model, mask, smoothing)
