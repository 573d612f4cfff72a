"""EMG envelope extraction with Koopman-style grip-force estimation and forecasting."""

from .calibration import (
    CalibrationPolynomial,
    DEFAULT_CALIBRATION,
    MinMaxScaler,
    calibrate_dynamometer,
    prepare_grip,
    zero_offset,
)
from .errors import ConfigError, DataError, EmgripError, NumericError
from .estimation import (
    EstimatorModel,
    HankelParams,
    IndicatorGrid,
    build_lifted_matrices,
    estimate_batch,
    fit_estimator,
    fit_static_koopman,
    hankel_lift,
    indicator_observables,
    power_grid_bounds,
)
from .forecasting import (
    DmdModel,
    ForecastHyperparams,
    fit_amplitudes,
    fit_dmd,
    forecast,
    grid_search,
    log_interaction_lift,
    lowess_smooth,
    predict_batch,
    thin,
)
from .io import Recording, read_recording, write_recording
from .metrics import (
    AnovaTable,
    RunRecord,
    anova_rbd,
    block_effects,
    summary_stats,
    wmape,
)
from .processing import (
    BatchProcessor,
    ProcessedEmgBatch,
    RawEmgBatch,
    SmoothingParams,
    SpectralMask,
    TimestampedSeries,
    apply_spectral_mask,
    default_optimal_mask,
    peak_cross_correlation,
    process_batch,
    process_recording,
    rectify,
    resample_linear,
    smooth_ema,
)
from .sensitivity import (
    Bounds,
    DecisionVector,
    NarrowingRecord,
    SensitivityResult,
    default_decision_bounds,
    latin_hypercube,
    map_objective,
    objective,
    projection_summary,
    rbdfast_indices,
    rbdfast_sample,
    saltelli_sample,
    sobol_indices,
)
from .simulate import LatencyReport, StreamResult, evaluate_run, stream_simulate
from .synth import SynthProfile, synth_corpus, synth_recording

__version__ = "0.1.0"
