"""Seismic clustering on log-warped spectrograms.

Pipeline: waveform segments -> STFT -> warped triangular filterbank -> dB
spectrogram -> random residual CNN -> z-scored features -> mini-batch GMM.
"""

from .augment import AugmentPolicy, augment_dataset, reflect_freq, reflect_time, translate
from .cluster import (
    GmmModel,
    TrainConfig,
    adjusted_rand_index,
    assign,
    assign_all,
    e_step,
    fit,
    m_step,
    nll,
    prune,
    purity,
)
from .features import CnnConfig, CnnModel, extract_features, forward, init_cnn
from .pipeline import FeatureScaler, PipelineSettings, run_pipeline
from .search import SearchConfig, evaluate_constants, refit_best, search_constants
from .signal_io import (
    Segment,
    SyntheticEvent,
    SyntheticSpec,
    TwoClassRecipe,
    Waveform,
    generate_synthetic,
    load_waveform,
    make_two_class_dataset,
    save_waveform,
    segment,
)
from .spectral import (
    LINEAR,
    MEL,
    FrequencyScale,
    Spectrogram,
    StftConfig,
    apply_filterbank,
    build_filterbank,
    compute_spectrogram,
    hz_to_warped,
    load_spectrogram_csv,
    log_compress,
    save_spectrogram_csv,
    stft,
    warped_to_hz,
    write_pgm,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentPolicy",
    "CnnConfig",
    "CnnModel",
    "FeatureScaler",
    "FrequencyScale",
    "GmmModel",
    "LINEAR",
    "MEL",
    "PipelineSettings",
    "SearchConfig",
    "Segment",
    "Spectrogram",
    "StftConfig",
    "SyntheticEvent",
    "SyntheticSpec",
    "TrainConfig",
    "TwoClassRecipe",
    "Waveform",
    "adjusted_rand_index",
    "apply_filterbank",
    "assign",
    "assign_all",
    "augment_dataset",
    "build_filterbank",
    "compute_spectrogram",
    "e_step",
    "evaluate_constants",
    "extract_features",
    "fit",
    "forward",
    "generate_synthetic",
    "hz_to_warped",
    "init_cnn",
    "load_spectrogram_csv",
    "load_waveform",
    "log_compress",
    "m_step",
    "make_two_class_dataset",
    "nll",
    "prune",
    "purity",
    "refit_best",
    "reflect_freq",
    "reflect_time",
    "run_pipeline",
    "save_spectrogram_csv",
    "save_waveform",
    "search_constants",
    "segment",
    "stft",
    "translate",
    "warped_to_hz",
    "write_pgm",
]
