"""Train the static grip-force estimator and replay it batch by batch.

A calibration recording fits the lifted linear operator (Hankel delays plus
gridded indicator observables); a second recording from the same "subject"
is then estimated in streaming windows and scored against its true force.
"""
import numpy as np

from emgrip import (
    SmoothingParams,
    default_optimal_mask,
    estimate_batch,
    fit_estimator,
    process_recording,
    resample_linear,
    synth_recording,
    wmape,
)

calibration = synth_recording(seed=42)
test = synth_recording(seed=43)
mask = default_optimal_mask()
smoothing = SmoothingParams(300, 0.0)

import time

start = time.perf_counter()
model = fit_estimator(calibration.emg, calibration.grip, mask, smoothing)
print(f"trained in {time.perf_counter() - start:.2f} s: "
      f"{model.lifted_dim} lifted coordinates "
      f"({model.hankel.delays + 1} delays + {model.kept.size} grid cells kept "
      f"of {model.grid.divisions ** 3})")

envelope = process_recording(test.emg, mask, smoothing)
step = model.hankel.downsample
window = (model.hankel.delays + 62) * step  # one batch plus the delay depth

estimates, times = [], []
for end in range(window, envelope.size, 62 * step):
    est = estimate_batch(model, envelope[end - window : end])
    keep = min(62, est.size)
    estimates.extend(est[-keep:])
    # estimate k of the window aligns with decimated position start + k
    first = (end - window) // step + est.size - keep
    times.extend(test.emg.times[(first + np.arange(keep)) * step])

estimates = np.array(estimates)
truth = resample_linear(test.grip, np.array(times)).values
print(f"{estimates.size} estimates at {1 / (step / test.emg.rate):.1f} Hz")
print(f"estimation wMAPE vs measured grip: {wmape(truth, estimates):.2f}%")

print("\nsample of the trace (t, measured N, estimated N):")
for i in np.linspace(0, estimates.size - 1, 8, dtype=int):
    print(f"  t={times[i]:6.2f}s  measured {truth[i]:7.2f}  estimated {estimates[i]:7.2f}")
