"""Power spectrograms on linear, Mel and generalized log-warped frequency axes.

The warp is ``f' = c1 * log10(1 + f / c2)``. The classic Mel scale is the
special case ``c1 = 2595, c2 = 700``. Warping is applied the usual way: an
STFT power spectrum is mapped onto triangular bands whose break frequencies
are equally spaced on the warped axis, then log-compressed to decibels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from .errors import ConfigError, DataError, DegenerateFilterbankError, ShapeError
from .signal_io import Segment

#: base of the logarithm in the warp; 2595 is the Mel constant for base 10
LOG_BASE = 10.0
MEL_C1 = 2595.0
MEL_C2 = 700.0
#: guard added before taking the logarithm of band powers
LOG_EPS = 1e-12
DEFAULT_FLOOR_DB = -100.0

_LN_BASE = math.log(LOG_BASE)


@dataclass(frozen=True)
class FrequencyScale:
    """Either the linear Hz axis or a warped axis with constants ``c1, c2``."""

    kind: str = "linear"
    c1: Optional[float] = None
    c2: Optional[float] = None

    def __post_init__(self):
        if self.kind == "linear":
            if self.c1 is not None or self.c2 is not None:
                raise ConfigError("linear scale takes no constants")
        elif self.kind == "warped":
            if self.c1 is None or self.c2 is None:
                raise ConfigError("warped scale needs c1 and c2")
            c1, c2 = float(self.c1), float(self.c2)
            if not (c1 > 0 and c2 > 0 and math.isfinite(c1) and math.isfinite(c2)):
                raise ConfigError(f"warp constants must be positive, got c1={c1}, c2={c2}")
            object.__setattr__(self, "c1", c1)
            object.__setattr__(self, "c2", c2)
        else:
            raise ConfigError(f"unknown frequency scale {self.kind!r}")

    @classmethod
    def linear(cls) -> "FrequencyScale":
        return cls("linear")

    @classmethod
    def warped(cls, c1: float, c2: float) -> "FrequencyScale":
        return cls("warped", c1, c2)

    @classmethod
    def mel(cls) -> "FrequencyScale":
        return cls("warped", MEL_C1, MEL_C2)

    @classmethod
    def parse(cls, text: str) -> "FrequencyScale":
        """Parse ``linear``, ``mel`` or ``warped:<c1>,<c2>``."""
        text = text.strip().lower()
        if text == "linear":
            return cls.linear()
        if text == "mel":
            return cls.mel()
        if text.startswith("warped:"):
            try:
                c1, c2 = (float(v) for v in text[len("warped:"):].split(","))
            except ValueError:
                raise ConfigError(f"expected warped:<c1>,<c2>, got {text!r}") from None
            return cls.warped(c1, c2)
        raise ConfigError(f"unknown scale {text!r}; use linear, mel or warped:<c1>,<c2>")

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def __str__(self):
        if self.is_linear:
            return "linear"
        return f"warped:{self.c1!r},{self.c2!r}"


MEL = FrequencyScale.mel()
LINEAR = FrequencyScale.linear()


def hz_to_warped(f, scale: FrequencyScale = MEL):
    """Map frequencies in Hz onto the warped axis.

    The linear scale is the identity. Raises ``ValueError`` for negative input.
    """
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be >= 0")
    if scale.is_linear:
        out = f.copy()
    else:
        out = scale.c1 * np.log1p(f / scale.c2) / _LN_BASE
    return out[()] if out.ndim == 0 else out


def warped_to_hz(v, scale: FrequencyScale = MEL):
    """Inverse of :func:`hz_to_warped`."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("warped value must be >= 0")
    if scale.is_linear:
        out = v.copy()
    else:
        out = scale.c2 * np.expm1(v * _LN_BASE / scale.c1)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class StftConfig:
    n_fft: int = 256
    hop: int = 64
    window: str = "hann"

    def __post_init__(self):
        n = self.n_fft
        if not (isinstance(n, (int, np.integer)) and n >= 16 and n & (n - 1) == 0):
            raise ConfigError(f"n_fft must be a power of two >= 16, got {n!r}")
        if not 1 <= self.hop <= n:
            raise ConfigError(f"hop must lie in [1, n_fft], got {self.hop!r}")
        if self.window not in ("hann", "rectangular"):
            raise ConfigError(f"window must be 'hann' or 'rectangular', got {self.window!r}")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.n_fft:
            return 0
        return (n_samples - self.n_fft) // self.hop + 1

    def window_values(self) -> np.ndarray:
        if self.window == "rectangular":
            return np.ones(self.n_fft)
        return get_window("hann", self.n_fft, fftbins=True)

    def bin_frequencies(self, sample_rate: float) -> np.ndarray:
        return np.arange(self.n_bins) * sample_rate / self.n_fft


def stft(seg: Union[Segment, np.ndarray], cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Power spectrogram ``|X_k|^2`` of shape ``(n_frames, n_fft // 2 + 1)``.

    Frame ``t`` covers samples ``[t * hop, t * hop + n_fft)``.
    """
    x = seg.samples if isinstance(seg, Segment) else np.asarray(seg, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("stft expects a 1-D signal")
    if x.size < cfg.n_fft:
        raise DataError(f"segment has {x.size} samples, fewer than n_fft={cfg.n_fft}")
    frames = sliding_window_view(x, cfg.n_fft)[::cfg.hop]
    spectrum = np.fft.rfft(frames * cfg.window_values(), axis=1)
    return spectrum.real ** 2 + spectrum.imag ** 2


@dataclass(frozen=True, eq=False)
class Filterbank:
    """Triangular band filters over the non-negative FFT bins.

    ``weights`` has shape ``(n_filters, n_fft // 2 + 1)``; ``breaks_hz`` holds
    the ``n_filters + 2`` band edges, filter ``i`` peaking at ``breaks_hz[i + 1]``.
    """

    weights: np.ndarray
    scale: FrequencyScale
    fmin_hz: float
    fmax_hz: float
    sample_rate: float
    breaks_hz: np.ndarray

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]

    @property
    def n_bins(self) -> int:
        return self.weights.shape[1]

    @property
    def centers_hz(self) -> np.ndarray:
        return self.breaks_hz[1:-1]


def build_filterbank(scale: FrequencyScale, n_filters: int, cfg: StftConfig,
                     sample_rate: float, fmin_hz: float = 0.0,
                     fmax_hz: Optional[float] = None, norm: str = "peak") -> Filterbank:
    """Triangular filterbank with edges equally spaced on ``scale``.

    Parameters
    ----------
    scale : FrequencyScale
        Axis on which the ``n_filters + 2`` break points are equally spaced.
    n_filters : int
    cfg : StftConfig
        Supplies ``n_fft`` and hence the bin frequencies ``k * sample_rate / n_fft``.
    sample_rate : float
    fmin_hz, fmax_hz : float
        Band limits; ``fmax_hz`` defaults to Nyquist.
    norm : {'peak', 'area'}
        ``'peak'`` leaves each triangle with unit height, ``'area'`` scales
        it by ``2 / (upper - lower edge)`` in Hz.

    Raises
    ------
    DegenerateFilterbankError
        If any filter covers no FFT bin, e.g. when strong warping squeezes
        the lowest bands below the bin spacing.

    Notes
    -----
    ``c1`` only rescales the warped axis, so the break frequencies depend on
    ``c2`` alone.
    """
    nyquist = sample_rate / 2
    if fmax_hz is None:
        fmax_hz = nyquist
    if n_filters < 1:
        raise ConfigError("n_filters must be >= 1")
    if not 0 <= fmin_hz < fmax_hz <= nyquist + 1e-9:
        raise ConfigError(f"need 0 <= fmin < fmax <= {nyquist}, got {fmin_hz}, {fmax_hz}")
    if norm not in ("peak", "area"):
        raise ConfigError(f"norm must be 'peak' or 'area', got {norm!r}")

    lo, hi = hz_to_warped(fmin_hz, scale), hz_to_warped(fmax_hz, scale)
    breaks = warped_to_hz(np.linspace(lo, hi, n_filters + 2), scale)
    breaks[0], breaks[-1] = fmin_hz, fmax_hz

    freqs = cfg.bin_frequencies(sample_rate)
    left, center, right = breaks[:-2, None], breaks[1:-1, None], breaks[2:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        rising = (freqs - left) / (center - left)
        falling = (right - freqs) / (right - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights = np.nan_to_num(weights, nan=0.0, posinf=0.0, neginf=0.0)

    empty = np.flatnonzero(~(weights > 0).any(axis=1))
    if empty.size:
        raise DegenerateFilterbankError(
            f"{empty.size} of {n_filters} filters cover no FFT bin "
            f"(first: filter {empty[0]}, {breaks[empty[0]]:.4g}-{breaks[empty[0] + 2]:.4g} Hz; "
            f"bin spacing {sample_rate / cfg.n_fft:.4g} Hz) for scale {scale}"
        )
    if norm == "area":
        weights *= 2.0 / (breaks[2:] - breaks[:-2])[:, None]
    weights.setflags(write=False)
    breaks.setflags(write=False)
    return Filterbank(weights, scale, float(fmin_hz), float(fmax_hz), float(sample_rate), breaks)


def apply_filterbank(power: np.ndarray, fb: Filterbank) -> np.ndarray:
    """Band powers ``power @ fb.weights.T``, shape ``(n_frames, n_filters)``."""
    power = np.asarray(power, dtype=np.float64)
    if power.ndim != 2 or power.shape[1] != fb.n_bins:
        raise ShapeError(f"power has shape {power.shape}, filterbank expects (*, {fb.n_bins})")
    return power @ fb.weights.T


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Log-power spectrogram, ``values[frame, channel]`` in dB."""

    values: np.ndarray
    frame_times_s: np.ndarray
    channel_centers_hz: np.ndarray
    scale: FrequencyScale = LINEAR

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeError(f"spectrogram values must be a non-empty matrix, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("spectrogram contains non-finite values")
        times = np.asarray(self.frame_times_s, dtype=np.float64)
        centers = np.asarray(self.channel_centers_hz, dtype=np.float64)
        if times.shape != (values.shape[0],) or centers.shape != (values.shape[1],):
            raise ShapeError("axis metadata does not match the value matrix")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "frame_times_s", times)
        object.__setattr__(self, "channel_centers_hz", centers)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]


def log_compress(banded: np.ndarray, floor_db: float = DEFAULT_FLOOR_DB, *,
                 frame_times_s=None, channel_centers_hz=None,
                 scale: FrequencyScale = LINEAR) -> Spectrogram:
    """``max(10 log10(v + 1e-12), floor_db)`` wrapped as a :class:`Spectrogram`."""
    banded = np.asarray(banded, dtype=np.float64)
    if np.any(banded < 0):
        raise DataError("log_compress expects non-negative band powers")
    values = np.maximum(10.0 * np.log10(banded + LOG_EPS), floor_db)
    n_frames, n_ch = values.shape
    if frame_times_s is None:
        frame_times_s = np.arange(n_frames, dtype=np.float64)
    if channel_centers_hz is None:
        channel_centers_hz = np.arange(n_ch, dtype=np.float64)
    return Spectrogram(values, frame_times_s, channel_centers_hz, scale)


def compute_spectrogram(seg: Segment, fb: Filterbank, cfg: StftConfig = StftConfig(),
                        floor_db: float = DEFAULT_FLOOR_DB) -> Spectrogram:
    """STFT, filterbank and log compression in one call."""
    if seg.sample_rate != fb.sample_rate:
        raise DataError(
            f"segment sampled at {seg.sample_rate} Hz, filterbank built for {fb.sample_rate} Hz"
        )
    power = stft(seg, cfg)
    times = (np.arange(power.shape[0]) * cfg.hop + cfg.n_fft / 2) / seg.sample_rate
    return log_compress(apply_filterbank(power, fb), floor_db, frame_times_s=times,
                        channel_centers_hz=fb.centers_hz, scale=fb.scale)


# ---------------------------------------------------------------------------
# persistence


def _join(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def save_spectrogram_csv(spec: Spectrogram, path) -> Path:
    """One CSV row per frame behind a ``#`` metadata header."""
    path = Path(path)
    lines = [f"# scale={spec.scale.kind}"]
    if not spec.scale.is_linear:
        lines += [f"# c1={spec.scale.c1!r}", f"# c2={spec.scale.c2!r}"]
    lines.append(f"# frame_times={_join(spec.frame_times_s)}")
    lines.append(f"# channel_centers={_join(spec.channel_centers_hz)}")
    lines.extend(_join(row) for row in spec.values)
    path.write_text("\n".join(lines) + "\n")
    return path


def load_spectrogram_csv(path) -> Spectrogram:
    path = Path(path)
    meta = {}
    rows = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            meta[key.strip()] = val.strip()
        else:
            rows.append([float(v) for v in line.split(",")])
    try:
        if meta["scale"] == "linear":
            scale = LINEAR
        else:
            scale = FrequencyScale.warped(float(meta["c1"]), float(meta["c2"]))
        times = [float(v) for v in meta["frame_times"].split(",")]
        centers = [float(v) for v in meta["channel_centers"].split(",")]
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad spectrogram header ({exc})") from exc
    return Spectrogram(np.array(rows), np.array(times), np.array(centers), scale)


def spectrogram_to_image(spec: Spectrogram, floor_db: float = DEFAULT_FLOOR_DB) -> np.ndarray:
    """8-bit image, ``n_channels`` rows by ``n_frames`` columns, low frequencies at the bottom.

    Values map linearly from ``[floor_db, max]`` onto ``[0, 255]``.
    """
    top = float(spec.values.max())
    if top > floor_db:
        scaled = (spec.values - floor_db) / (top - floor_db) * 255.0
    else:
        scaled = np.zeros_like(spec.values)
    img = np.clip(np.round(scaled), 0, 255).astype(np.uint8)
    return np.ascontiguousarray(img.T[::-1])


def write_pgm(spec: Spectrogram, path, floor_db: float = DEFAULT_FLOOR_DB) -> Path:
    """Binary (P5) grayscale PGM of :func:`spectrogram_to_image`."""
    path = Path(path)
    img = spectrogram_to_image(spec, floor_db)
    height, width = img.shape
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + img.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM")
    width, height, maxval = (int(v) for v in fields[1:])
    if maxval != 255:
        raise DataError(f"{path}: only 8-bit PGM supported")
    # exactly one whitespace byte separates the header from the pixels
    pixels = np.frombuffer(data[pos + 1:pos + 1 + width * height], dtype=np.uint8)
    return pixels.reshape(height, width)
