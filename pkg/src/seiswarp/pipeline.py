"""End-to-end composition: segments -> spectrograms -> CNN features -> GMM."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .augment import AugmentPolicy, augment_dataset
from .cluster import GmmModel, TrainConfig, fit
from .errors import DataError
from .features import CnnConfig, CnnModel, extract_features, init_cnn
from .spectral import (
    DEFAULT_FLOOR_DB,
    Filterbank,
    FrequencyScale,
    StftConfig,
    build_filterbank,
    compute_spectrogram,
)


@dataclass(frozen=True)
class PipelineSettings:
    """Everything downstream of the frequency scale.

    ``cnn.input_shape`` is overwritten with the actual spectrogram shape.
    """

    stft: StftConfig = StftConfig()
    n_filters: int = 24
    fmin_hz: float = 0.0
    fmax_hz: Optional[float] = None
    filter_norm: str = "peak"
    floor_db: float = DEFAULT_FLOOR_DB
    cnn: CnnConfig = CnnConfig()
    train: TrainConfig = TrainConfig()
    augment: AugmentPolicy = AugmentPolicy()
    standardize: bool = True


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    """Per-dimension z-scoring of CNN features.

    Mixture likelihoods from different feature spaces are only comparable
    after the spread of each space is divided out; a zero-variance
    dimension is centred but not scaled.
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "FeatureScaler":
        std = features.std(axis=0)
        return cls(features.mean(axis=0), np.where(std > 0, std, 1.0))

    @classmethod
    def identity(cls, dim: int) -> "FeatureScaler":
        return cls(np.zeros(dim), np.ones(dim))

    def transform(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != self.mean.size:
            raise DataError(f"scaler expects dimension {self.mean.size}, got {features.shape[-1]}")
        return (features - self.mean) / self.std

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text("mean," + ",".join(repr(float(v)) for v in self.mean) + "\n"
                        + "std," + ",".join(repr(float(v)) for v in self.std) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "FeatureScaler":
        rows = {}
        for line in Path(path).read_text().splitlines():
            if line.strip():
                key, *vals = line.split(",")
                rows[key] = np.array(vals, dtype=np.float64)
        try:
            return cls(rows["mean"], rows["std"])
        except KeyError as exc:
            raise DataError(f"{path}: missing {exc} row") from None


@dataclass(eq=False)
class PipelineRun:
    filterbank: Filterbank
    spectrograms: list
    cnn: CnnModel
    scaler: FeatureScaler
    features: np.ndarray
    model: GmmModel
    loss_history: np.ndarray
    n_original: int = 0

    @property
    def final_loss(self) -> float:
        return float(self.loss_history[-1])


def _common_rate(segments) -> float:
    if not segments:
        raise DataError("dataset is empty")
    rates = {s.sample_rate for s in segments}
    lengths = {len(s) for s in segments}
    if len(rates) != 1 or len(lengths) != 1:
        raise DataError(f"segments must share one sample rate and length, got {rates}, {lengths}")
    return rates.pop()


def filterbank_for(scale: FrequencyScale, settings: PipelineSettings,
                   sample_rate: float) -> Filterbank:
    return build_filterbank(scale, settings.n_filters, settings.stft, sample_rate,
                            settings.fmin_hz, settings.fmax_hz, settings.filter_norm)


def make_spectrograms(segments, scale: FrequencyScale, settings: PipelineSettings) -> tuple:
    """Filterbank and one spectrogram per segment."""
    fb = filterbank_for(scale, settings, _common_rate(segments))
    specs = [compute_spectrogram(s, fb, settings.stft, settings.floor_db) for s in segments]
    return fb, specs


def cnn_for(settings: PipelineSettings, input_shape) -> CnnModel:
    return init_cnn(replace(settings.cnn, input_shape=tuple(input_shape)))


def featurize(segments, scale: FrequencyScale, settings: PipelineSettings,
              cnn: Optional[CnnModel] = None, scaler: Optional[FeatureScaler] = None) -> tuple:
    """Spectrograms (augmented per policy) and their scaled feature matrix.

    Returns ``(filterbank, spectrograms, cnn, scaler, features)``. The first
    ``len(segments)`` spectrograms and feature rows are the originals. A
    scaler is fitted on the whole set unless one is passed in.
    """
    fb, specs = make_spectrograms(segments, scale, settings)
    specs = augment_dataset(specs, settings.augment)
    if cnn is None:
        cnn = cnn_for(settings, specs[0].shape)
    raw = extract_features(cnn, specs)
    if scaler is None:
        scaler = FeatureScaler.fit(raw) if settings.standardize else FeatureScaler.identity(raw.shape[1])
    return fb, specs, cnn, scaler, scaler.transform(raw)


def run_pipeline(segments, scale: FrequencyScale, settings: PipelineSettings = PipelineSettings(),
                 cnn: Optional[CnnModel] = None) -> PipelineRun:
    """Spectrograms, features and a fitted mixture for ``segments`` under ``scale``."""
    fb, specs, cnn, scaler, feats = featurize(segments, scale, settings, cnn)
    model, history = fit(feats, settings.train)
    return PipelineRun(fb, specs, cnn, scaler, feats, model, history, len(segments))
