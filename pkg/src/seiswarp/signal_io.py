"""Waveform input/output, synthetic seismic-like signals and windowing.

Two on-disk formats are supported:

* CSV: a ``# sample_rate=<float>`` line, optionally ``# channel=<text>`` and
  ``# start_time=<float>``, then one decimal sample per line.
* WAV: 16-bit PCM, mono. Samples are normalized as ``s / 32768`` so they lie
  in ``[-1, 1)``.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.signal.windows import tukey

from .errors import (
    ConfigError,
    DataError,
    EmptyWaveformError,
    MalformedHeaderError,
    NonFiniteSampleError,
    UnreadableFileError,
)

EVENT_KINDS = ("tremor", "burst", "noise")
BACKGROUND = "background"


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled scalar time series."""

    samples: np.ndarray
    sample_rate: float
    channel_id: str = ""
    start_time: Optional[float] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise DataError("waveform samples must be one-dimensional")
        if samples.size == 0:
            raise EmptyWaveformError("waveform has zero samples")
        if not np.all(np.isfinite(samples)):
            raise NonFiniteSampleError("waveform contains non-finite samples")
        if not self.sample_rate > 0:
            raise DataError(f"sample_rate must be > 0, got {self.sample_rate!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class SyntheticEvent:
    kind: str
    onset_s: float
    duration_s: float
    center_freq_hz: float = 1.0
    bandwidth_hz: float = 0.5
    amplitude: float = 1.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for :func:`generate_synthetic`."""

    duration_s: float
    sample_rate: float
    events: tuple = ()
    noise_floor: float = 0.0
    seed: int = 0
    channel_id: str = "SYN"

    def validate(self) -> None:
        if not self.duration_s > 0:
            raise ConfigError("duration_s must be > 0")
        if not self.sample_rate > 0:
            raise ConfigError("sample_rate must be > 0")
        if self.noise_floor < 0:
            raise ConfigError("noise_floor must be >= 0")
        nyquist = self.sample_rate / 2
        for ev in self.events:
            if ev.kind not in EVENT_KINDS:
                raise ConfigError(f"unknown event kind {ev.kind!r}")
            if ev.onset_s < 0 or ev.duration_s <= 0:
                raise ConfigError(f"event {ev} has negative onset or empty duration")
            if ev.onset_s + ev.duration_s > self.duration_s + 1e-9:
                raise ConfigError(f"event {ev} extends past {self.duration_s} s")
            if ev.kind != "noise":
                if not 0 <= ev.center_freq_hz < nyquist:
                    raise ConfigError(
                        f"center frequency {ev.center_freq_hz} Hz not below Nyquist {nyquist} Hz"
                    )
                if ev.bandwidth_hz <= 0:
                    raise ConfigError("bandwidth_hz must be > 0")
            if ev.amplitude < 0:
                raise ConfigError("amplitude must be >= 0")


@dataclass(frozen=True, eq=False)
class Segment:
    """Fixed-length slice of a waveform."""

    samples: np.ndarray
    sample_rate: float
    source_channel: str = ""
    offset_s: float = 0.0
    label: Optional[str] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise DataError("segment samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise NonFiniteSampleError("segment contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size


# ---------------------------------------------------------------------------
# file formats


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".wav":
        return "wav-pcm"
    if suffix in (".csv", ".txt"):
        return "csv"
    raise ConfigError(f"cannot infer waveform format from {path.name!r}")


def load_waveform(path, format: Optional[str] = None) -> Waveform:
    """Read a waveform from ``path``.

    Parameters
    ----------
    path : str or Path
        File to read.
    format : {'csv', 'wav-pcm'}, optional
        Inferred from the suffix when omitted.

    Raises
    ------
    UnreadableFileError, MalformedHeaderError, NonFiniteSampleError,
    EmptyWaveformError
        One class per failure kind so callers can tell them apart.
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt == "csv":
        return _load_csv(path)
    if fmt in ("wav", "wav-pcm"):
        return _load_wav(path)
    raise ConfigError(f"unsupported waveform format {fmt!r}")


def _load_csv(path: Path) -> Waveform:
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc

    meta = {}
    values = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if values:
                raise MalformedHeaderError(f"{path}:{lineno}: header line after samples")
            key, sep, val = line[1:].partition("=")
            if not sep:
                raise MalformedHeaderError(f"{path}:{lineno}: expected '# key=value'")
            meta[key.strip()] = val.strip()
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise DataError(f"{path}:{lineno}: cannot parse sample {line!r}") from None

    if "sample_rate" not in meta:
        raise MalformedHeaderError(f"{path}: missing '# sample_rate=' header")
    try:
        sample_rate = float(meta["sample_rate"])
    except ValueError:
        raise MalformedHeaderError(f"{path}: bad sample_rate {meta['sample_rate']!r}") from None
    if not (sample_rate > 0 and math.isfinite(sample_rate)):
        raise MalformedHeaderError(f"{path}: sample_rate must be positive and finite")
    start_time = None
    if "start_time" in meta:
        try:
            start_time = float(meta["start_time"])
        except ValueError:
            raise MalformedHeaderError(f"{path}: bad start_time") from None

    if not values:
        raise EmptyWaveformError(f"{path}: no samples")
    samples = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        bad = int(np.flatnonzero(~np.isfinite(samples))[0])
        raise NonFiniteSampleError(f"{path}: sample {bad} is not finite")
    return Waveform(samples, sample_rate, meta.get("channel", ""), start_time)


def _load_wav(path: Path) -> Waveform:
    try:
        with wave.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            comp = fh.getcomptype()
            frames = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise MalformedHeaderError(f"{path}: {exc}") from exc
    except (OSError, EOFError) as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc
    if n_channels != 1 or width != 2 or comp != "NONE":
        raise MalformedHeaderError(
            f"{path}: only 16-bit PCM mono is supported "
            f"(got {n_channels} channels, {8 * width}-bit, {comp})"
        )
    if rate <= 0:
        raise MalformedHeaderError(f"{path}: sample rate {rate}")
    pcm = np.frombuffer(frames, dtype="<i2")
    if pcm.size == 0:
        raise EmptyWaveformError(f"{path}: no samples")
    return Waveform(pcm.astype(np.float64) / 32768.0, float(rate), path.stem)


def save_waveform(w: Waveform, path, format: Optional[str] = None) -> Path:
    """Write ``w`` in CSV (lossless) or 16-bit WAV (quantized, clipped)."""
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt == "csv":
        lines = [f"# sample_rate={w.sample_rate!r}"]
        if w.channel_id:
            lines.append(f"# channel={w.channel_id}")
        if w.start_time is not None:
            lines.append(f"# start_time={w.start_time!r}")
        lines.extend(repr(float(v)) for v in w.samples)
        path.write_text("\n".join(lines) + "\n")
    elif fmt in ("wav", "wav-pcm"):
        if w.sample_rate != int(w.sample_rate):
            raise DataError("WAV needs an integer sample rate")
        pcm = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(2)
            fh.setframerate(int(w.sample_rate))
            fh.writeframes(pcm.tobytes())
    else:
        raise ConfigError(f"unsupported waveform format {fmt!r}")
    return path


# ---------------------------------------------------------------------------
# synthetic data


def burst_decay_s(bandwidth_hz: float) -> float:
    # exp(-t/tau) envelope has a Lorentzian line of FWHM 1/(pi*tau)
    return 1.0 / (math.pi * bandwidth_hz)


def _event_waveform(ev: SyntheticEvent, m: int, fs: float, rng: np.random.Generator):
    t = np.arange(m) / fs
    if ev.kind == "burst":
        env = ev.amplitude * np.exp(-t / burst_decay_s(ev.bandwidth_hz))
        return env * np.cos(2 * np.pi * ev.center_freq_hz * t), env
    if ev.kind == "noise":
        env = np.full(m, ev.amplitude)
        return ev.amplitude * rng.standard_normal(m), env
    # tremor: white noise masked to the band in the frequency domain
    white = rng.standard_normal(m)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(m, d=1.0 / fs)
    lo = ev.center_freq_hz - ev.bandwidth_hz / 2
    hi = ev.center_freq_hz + ev.bandwidth_hz / 2
    spectrum[(freqs < lo) | (freqs > hi)] = 0.0
    band = np.fft.irfft(spectrum, n=m)
    std = band.std()
    if std > 0:
        band *= ev.amplitude / std
    taper = tukey(m, alpha=0.2) if m > 2 else np.ones(m)
    return band * taper, ev.amplitude * taper


def generate_synthetic(spec: SyntheticSpec):
    """Render ``spec`` into a waveform and a per-sample label array.

    Events are summed on top of white Gaussian noise of standard deviation
    ``noise_floor``. Labels name the event with the largest envelope at each
    sample, or ``"background"`` where no event is active.
    """
    spec.validate()
    fs = spec.sample_rate
    n = int(round(spec.duration_s * fs))
    if n < 1:
        raise ConfigError("duration_s * sample_rate must give at least one sample")
    rng = np.random.default_rng(spec.seed)
    out = rng.standard_normal(n) * spec.noise_floor
    labels = np.full(n, BACKGROUND, dtype=object)
    best_env = np.zeros(n)
    for ev in spec.events:
        start = int(round(ev.onset_s * fs))
        m = min(int(round(ev.duration_s * fs)), n - start)
        if m <= 0:
            continue
        x, env = _event_waveform(ev, m, fs, rng)
        out[start:start + m] += x
        window = slice(start, start + m)
        wins = env > best_env[window]
        labels[window][wins] = ev.kind
        best_env[window] = np.maximum(best_env[window], env)
    return Waveform(out, fs, spec.channel_id), labels


def segment(w: Waveform, window_s: float, stride_s: float,
            labels: Optional[Sequence[str]] = None) -> list:
    """Cut ``w`` into windows of ``window_s`` seconds every ``stride_s`` seconds.

    The trailing partial window is dropped. When per-sample ``labels`` are
    given, each segment takes the most frequent non-background label in its
    window.
    """
    win = int(round(window_s * w.sample_rate))
    step = int(round(stride_s * w.sample_rate))
    if win < 1:
        raise ConfigError("window_s * sample_rate must be >= 1")
    if stride_s <= 0 or step < 1:
        raise ConfigError("stride_s must be > 0 and at least one sample")
    if labels is not None and len(labels) != len(w):
        raise DataError("labels must have one entry per sample")
    n = len(w)
    if n < win:
        return []
    count = (n - win) // step + 1
    segments = []
    for i in range(count):
        lo = i * step
        label = None
        if labels is not None:
            label = _dominant_label(labels[lo:lo + win])
        segments.append(Segment(w.samples[lo:lo + win], w.sample_rate, w.channel_id,
                                lo / w.sample_rate, label))
    return segments


def _dominant_label(window) -> str:
    kinds, counts = np.unique(np.asarray(window, dtype=str), return_counts=True)
    mask = kinds != BACKGROUND
    if not mask.any():
        return BACKGROUND
    return str(kinds[mask][np.argmax(counts[mask])])


@dataclass(frozen=True)
class TwoClassRecipe:
    """Parameters of :func:`make_two_class_dataset`.

    Both classes share a broadband tremor with random amplitude; they differ
    only in the frequency of a weak low-frequency tremor below 2 Hz.
    """

    n_per_class: int = 100
    duration_s: float = 40.0
    sample_rate: float = 100.0
    low_freqs_hz: tuple = (0.5, 1.4)
    low_bandwidth_hz: float = 0.3
    low_amplitude: float = 1.0
    broadband_center_hz: float = 20.0
    broadband_width_hz: float = 30.0
    broadband_amplitude: tuple = (0.8, 1.25)
    noise_floor: float = 0.05
    seed: int = 0
    class_names: tuple = field(default=("A", "B"))


def make_two_class_dataset(recipe: TwoClassRecipe = TwoClassRecipe()) -> list:
    """Labeled segments whose classes differ only in sub-2 Hz content."""
    rng = np.random.default_rng(recipe.seed)
    segments = []
    for i in range(recipe.n_per_class):
        for name, f_low in zip(recipe.class_names, recipe.low_freqs_hz):
            amp_lo, amp_hi = recipe.broadband_amplitude
            broadband = float(np.exp(rng.uniform(np.log(amp_lo), np.log(amp_hi))))
            spec = SyntheticSpec(
                duration_s=recipe.duration_s,
                sample_rate=recipe.sample_rate,
                events=(
                    SyntheticEvent("tremor", 0.0, recipe.duration_s,
                                   recipe.broadband_center_hz, recipe.broadband_width_hz,
                                   broadband),
                    SyntheticEvent("tremor", 0.0, recipe.duration_s, f_low,
                                   recipe.low_bandwidth_hz, recipe.low_amplitude),
                ),
                noise_floor=recipe.noise_floor,
                seed=int(rng.integers(2**31)),
                channel_id=f"{name}{i:03d}",
            )
            w, _ = generate_synthetic(spec)
            segments.append(Segment(w.samples, w.sample_rate, w.channel_id, 0.0, name))
    return segments
