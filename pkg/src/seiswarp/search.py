"""Random search over the warp constants ``(c1, c2)``.

Each trial runs the whole pipeline with ``FrequencyScale.warped(c1, c2)`` and
scores it by the final full-data NLL of the mixture fit. Constants are drawn
log-uniformly because both span orders of magnitude.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError, DataError, NumericError, SeisWarpError
from .pipeline import PipelineSettings, run_pipeline
from .spectral import FrequencyScale


@dataclass(frozen=True)
class SearchConfig:
    c1_range: tuple = (100.0, 10000.0)
    c2_range: tuple = (0.1, 1000.0)
    n_trials: int = 30
    trials_seed: int = 0
    inner_max_epochs: int = 500
    settings: PipelineSettings = PipelineSettings()
    workers: int = 1

    def __post_init__(self):
        for name in ("c1_range", "c2_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must satisfy 0 < low <= high, got {(lo, hi)}")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.inner_max_epochs < 0 or self.workers < 1:
            raise ConfigError("inner_max_epochs must be >= 0 and workers >= 1")

    @property
    def inner_settings(self) -> PipelineSettings:
        train = replace(self.settings.train, max_epochs=self.inner_max_epochs)
        return replace(self.settings, train=train)


class Trial(NamedTuple):
    index: int
    c1: float
    c2: float
    loss: float
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


class SearchResult(NamedTuple):
    best_c1: float
    best_c2: float
    trial_log: list

    @property
    def best_loss(self) -> float:
        return min(t.loss for t in self.trial_log if t.ok)


class SearchFailedError(NumericError):
    def __init__(self, trials):
        causes = "; ".join(f"trial {t.index} (c1={t.c1:.4g}, c2={t.c2:.4g}): {t.error}" for t in trials)
        super().__init__(f"all {len(trials)} trials failed: {causes}")
        self.trials = trials


def evaluate_constants(c1: float, c2: float, dataset, settings: PipelineSettings = PipelineSettings()) -> float:
    """Final full-data NLL of the pipeline under ``warped(c1, c2)``."""
    if not dataset:
        raise DataError("dataset is empty")
    run = run_pipeline(dataset, FrequencyScale.warped(c1, c2), settings)
    return run.final_loss


def sample_constants(scfg: SearchConfig) -> np.ndarray:
    """``(n_trials, 2)`` log-uniform draws of ``(c1, c2)``."""
    rng = np.random.default_rng(scfg.trials_seed)
    lows = np.log([scfg.c1_range[0], scfg.c2_range[0]])
    highs = np.log([scfg.c1_range[1], scfg.c2_range[1]])
    draws = np.exp(rng.uniform(lows, highs, size=(scfg.n_trials, 2)))
    # exp(log(x)) can land one ulp outside the range
    draws[:, 0] = np.clip(draws[:, 0], *scfg.c1_range)
    draws[:, 1] = np.clip(draws[:, 1], *scfg.c2_range)
    return draws


def search_constants(dataset, scfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Try ``n_trials`` random constant pairs and keep the lowest loss.

    Failing trials (typically degenerate filterbanks for small ``c2``) are
    logged with their cause; the search only fails if every trial does.
    """
    settings = scfg.inner_settings
    draws = sample_constants(scfg)

    def run(i):
        c1, c2 = float(draws[i, 0]), float(draws[i, 1])
        try:
            return Trial(i, c1, c2, evaluate_constants(c1, c2, dataset, settings))
        except SeisWarpError as exc:
            return Trial(i, c1, c2, math.nan, f"{type(exc).__name__}: {exc}")

    if scfg.workers > 1:
        with ThreadPoolExecutor(scfg.workers) as pool:
            trials = list(pool.map(run, range(scfg.n_trials)))
    else:
        trials = [run(i) for i in range(scfg.n_trials)]

    good = [t for t in trials if t.ok]
    if not good:
        raise SearchFailedError(trials)
    best = min(good, key=lambda t: (t.loss, t.index))
    return SearchResult(best.c1, best.c2, trials)


def save_trial_log(trials, path) -> Path:
    path = Path(path)
    lines = ["trial,c1,c2,loss,error"]
    for t in trials:
        error = t.error.replace(",", ";").replace("\n", " ")
        lines.append(f"{t.index},{t.c1!r},{t.c2!r},{t.loss!r},{error}")
    path.write_text("\n".join(lines) + "\n")
    return path


def load_trial_log(path) -> list:
    trials = []
    for line in Path(path).read_text().splitlines()[1:]:
        if line:
            idx, c1, c2, loss, error = line.split(",", 4)
            trials.append(Trial(int(idx), float(c1), float(c2), float(loss), error))
    return trials


def refit_best(dataset, result: SearchResult, settings: Optional[PipelineSettings] = None):
    """Rerun the best pair at the full training budget of ``settings``."""
    settings = settings or PipelineSettings()
    return run_pipeline(dataset, FrequencyScale.warped(result.best_c1, result.best_c2), settings)
