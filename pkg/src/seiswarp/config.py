"""INI-style pipeline configuration.

One ``[section]`` per stage, ``key = value`` lines, ``#`` or ``;`` comments.
Lists are comma separated. Values given on the command line override the
file, which overrides the built-in defaults. See ``README.md`` for the full
key reference.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .augment import AugmentPolicy
from .cluster import TrainConfig
from .errors import ConfigError
from .features import CnnConfig
from .pipeline import PipelineSettings
from .search import SearchConfig
from .signal_io import SyntheticEvent, SyntheticSpec, TwoClassRecipe
from .spectral import FrequencyScale, StftConfig

SECTIONS = ("input", "synth", "two_class", "stft", "scale", "filterbank", "augment",
            "cnn", "train", "search", "compare", "assign", "output")


@dataclass(frozen=True)
class InputConfig:
    source: str = "two_class"
    paths: tuple = ()
    window_s: Optional[float] = None
    stride_s: Optional[float] = None


@dataclass(frozen=True)
class SynthConfig:
    spec: SyntheticSpec = SyntheticSpec(600.0, 100.0, noise_floor=0.05)
    channels: int = 1


@dataclass(frozen=True)
class CompareConfig:
    depths: tuple = (1, 2, 3)
    linear_scale: FrequencyScale = FrequencyScale.linear()


@dataclass(frozen=True)
class AssignConfig:
    model: Optional[str] = None
    scaler: Optional[str] = None
    cnn: Optional[str] = None


@dataclass(frozen=True)
class PipelineConfig:
    input: InputConfig = InputConfig()
    synth: SynthConfig = SynthConfig()
    two_class: TwoClassRecipe = TwoClassRecipe()
    scale: FrequencyScale = FrequencyScale.mel()
    spectrogram_scales: tuple = ()
    settings: PipelineSettings = PipelineSettings()
    cnn_weights: Optional[str] = None
    search: SearchConfig = SearchConfig()
    refit: bool = True
    compare: CompareConfig = CompareConfig()
    assign: AssignConfig = AssignConfig()
    out_dir: str = "out"


# ---------------------------------------------------------------------------
# value parsing


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _blocks(text: str) -> tuple:
    out = []
    for item in text.split(","):
        if item.strip():
            filters, _, stride = item.strip().partition(":")
            out.append((int(filters), int(stride or 1)))
    return tuple(out)


def _batch(text: str):
    return None if text.strip().lower() in ("full", "none", "all") else int(text)


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "none", "nyquist") else float(text)


def _event(text: str) -> SyntheticEvent:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 6:
        raise ConfigError(
            f"event needs 'kind, onset_s, duration_s, center_freq_hz, bandwidth_hz, amplitude', got {text!r}"
        )
    return SyntheticEvent(parts[0], *(float(p) for p in parts[1:]))


def _scales(text: str) -> tuple:
    return tuple(FrequencyScale.parse(v) for v in text.split(";") if v.strip())


def _apply(obj, section: dict, parsers: dict, where: str):
    """Copy recognised keys of ``section`` onto dataclass ``obj``."""
    changes = {}
    for key, raw in section.items():
        if key not in parsers:
            raise ConfigError(f"unknown key {key!r} in [{where}]")
        try:
            changes[key] = parsers[key](raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{where}] {key} = {raw!r}: {exc}") from None
    return replace(obj, **changes) if changes else obj


def _typed_parsers(cls, overrides: Optional[dict] = None) -> dict:
    """Parsers for the scalar fields of a dataclass, by annotation."""
    table = {"int": int, "float": float, "bool": _bool, "str": str}
    parsers = {}
    for f in fields(cls):
        kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
        if kind in table:
            parsers[f.name] = table[kind]
    parsers.update(overrides or {})
    return parsers


# ---------------------------------------------------------------------------


def read_sections(path=None, text: Optional[str] = None) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        if path is not None:
            with open(path) as fh:
                parser.read_file(fh, source=str(path))
        if text is not None:
            parser.read_string(text)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"bad config syntax: {exc}") from exc
    sections = {name: dict(parser[name]) for name in parser.sections()}
    unknown = set(sections) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return sections


def build_config(sections: dict) -> PipelineConfig:
    """Turn parsed sections into a validated :class:`PipelineConfig`."""
    s = {name: dict(sections.get(name, {})) for name in SECTIONS}

    inp = _apply(InputConfig(), s["input"], {
        "source": str, "paths": lambda v: tuple(p.strip() for p in v.split(",") if p.strip()),
        "window_s": _optional_float, "stride_s": _optional_float,
    }, "input")
    if inp.source not in ("synth", "files", "two_class"):
        raise ConfigError(f"[input] source must be synth, files or two_class, got {inp.source!r}")

    synth_sec = s["synth"]
    events = tuple(_event(synth_sec.pop(k)) for k in sorted(list(synth_sec)) if k.startswith("event"))
    channels = int(synth_sec.pop("channels", 1))
    spec = _apply(SyntheticSpec(600.0, 100.0, noise_floor=0.05), synth_sec,
                  _typed_parsers(SyntheticSpec), "synth")
    if events:
        spec = replace(spec, events=events)
    spec.validate()
    if channels < 1:
        raise ConfigError("[synth] channels must be >= 1")

    two_class = _apply(TwoClassRecipe(), s["two_class"], _typed_parsers(TwoClassRecipe, {
        "low_freqs_hz": _floats, "broadband_amplitude": _floats,
        "class_names": lambda v: tuple(p.strip() for p in v.split(",")),
    }), "two_class")

    scale_sec = s["scale"]
    scale = FrequencyScale.parse(scale_sec.pop("scale", "mel"))
    spec_scales = _scales(scale_sec.pop("spectrogram_scales", ""))
    if scale_sec:
        raise ConfigError(f"unknown keys in [scale]: {sorted(scale_sec)}")

    stft = _apply(StftConfig(), s["stft"], _typed_parsers(StftConfig), "stft")
    fb = s["filterbank"]
    settings_changes = _apply(_FilterbankKeys(), fb, {
        "n_filters": int, "fmin_hz": float, "fmax_hz": _optional_float,
        "norm": str, "floor_db": float,
    }, "filterbank")
    if settings_changes.norm not in ("peak", "area"):
        raise ConfigError("[filterbank] norm must be peak or area")

    augment = _apply(AugmentPolicy(), s["augment"], _typed_parsers(AugmentPolicy), "augment")

    cnn_sec = s["cnn"]
    weights = cnn_sec.pop("weights", None)
    standardize = _bool(cnn_sec.pop("standardize", "true"))
    cnn = _apply(CnnConfig(), cnn_sec, _typed_parsers(CnnConfig, {"blocks": _blocks}), "cnn")

    train = _apply(TrainConfig(), s["train"], _typed_parsers(TrainConfig, {"batch_size": _batch}), "train")

    settings = PipelineSettings(stft=stft, n_filters=settings_changes.n_filters,
                                fmin_hz=settings_changes.fmin_hz, fmax_hz=settings_changes.fmax_hz,
                                filter_norm=settings_changes.norm, floor_db=settings_changes.floor_db,
                                cnn=cnn, train=train, augment=augment,
                                standardize=standardize)

    search_sec = s["search"]
    refit = _bool(search_sec.pop("refit", "true"))
    search = _apply(SearchConfig(settings=settings), search_sec, _typed_parsers(SearchConfig, {
        "c1_range": _floats, "c2_range": _floats,
    }), "search")

    compare = _apply(CompareConfig(), s["compare"], {
        "depths": _ints, "linear_scale": FrequencyScale.parse,
    }, "compare")
    if not compare.depths or min(compare.depths) < 1:
        raise ConfigError("[compare] depths must list positive block counts")

    assign = _apply(AssignConfig(), s["assign"], {"model": str, "scaler": str, "cnn": str}, "assign")
    out = s["output"]
    out_dir = out.pop("dir", "out")
    if out:
        raise ConfigError(f"unknown keys in [output]: {sorted(out)}")

    return PipelineConfig(inp, SynthConfig(spec, channels), two_class, scale, spec_scales,
                          settings, weights, search, refit, compare, assign, out_dir)


@dataclass(frozen=True)
class _FilterbankKeys:
    n_filters: int = 24
    fmin_hz: float = 0.0
    fmax_hz: Optional[float] = None
    norm: str = "peak"
    floor_db: float = -100.0


def load_config(path=None, overrides=(), seed: Optional[int] = None,
                scale: Optional[str] = None, out: Optional[str] = None) -> tuple:
    """Read ``path`` and apply command-line overrides.

    ``overrides`` are ``section.key=value`` strings. ``seed`` replaces every
    seed in the configuration. Returns ``(config, sections)`` where
    ``sections`` is the effective key/value view, suitable for
    :func:`dump_sections`.
    """
    sections = read_sections(path) if path is not None else {}
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        sections.setdefault(section, {})[name.strip()] = value.strip()
    if seed is not None:
        for section, key in (("synth", "seed"), ("two_class", "seed"), ("augment", "seed"),
                             ("cnn", "seed"), ("train", "seed"), ("search", "trials_seed")):
            sections.setdefault(section, {})[key] = str(seed)
    if scale is not None:
        sections.setdefault("scale", {})["scale"] = scale
    if out is not None:
        sections.setdefault("output", {})["dir"] = out
    return build_config(sections), sections


def dump_sections(sections: dict) -> str:
    """Deterministic INI text of an effective configuration."""
    buf = io.StringIO()
    for name in SECTIONS:
        if sections.get(name):
            buf.write(f"[{name}]\n")
            for key in sorted(sections[name]):
                buf.write(f"{key} = {sections[name][key]}\n")
            buf.write("\n")
    return buf.getvalue()


def write_effective_config(sections: dict, path) -> Path:
    path = Path(path)
    path.write_text(dump_sections(sections))
    return path
