"""Image-style augmentation of spectrograms: circular shifts and flips.

Time reversal is the reflection about the vertical axis, the frequency flip
the reflection about the horizontal axis. Every transform permutes entries,
so the value multiset of a spectrogram is preserved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .spectral import Spectrogram


@dataclass(frozen=True)
class AugmentPolicy:
    enable_translate: bool = True
    max_shift_frames: int = 4
    enable_reflect_time: bool = True
    enable_reflect_freq: bool = False
    copies_per_item: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.copies_per_item < 0:
            raise ConfigError("copies_per_item must be >= 0")
        if self.max_shift_frames < 0:
            raise ConfigError("max_shift_frames must be >= 0")

    @property
    def enabled(self) -> tuple:
        names = []
        if self.enable_translate and self.max_shift_frames > 0:
            names.append("translate")
        if self.enable_reflect_time:
            names.append("reflect_time")
        if self.enable_reflect_freq:
            names.append("reflect_freq")
        return tuple(names)


def translate(s: Spectrogram, shift: int, mode: str = "circular") -> Spectrogram:
    """Rotate frames by ``shift`` along time; axis metadata stays in place."""
    if mode != "circular":
        raise ConfigError(f"only circular translation is supported, got {mode!r}")
    if abs(shift) > s.n_frames:
        raise ValueError(f"|shift|={abs(shift)} exceeds n_frames={s.n_frames}")
    # |shift| == n_frames is a full rotation and returns the input unchanged
    return replace(s, values=np.roll(s.values, shift, axis=0))


def reflect_time(s: Spectrogram) -> Spectrogram:
    return replace(s, values=s.values[::-1].copy())


def reflect_freq(s: Spectrogram) -> Spectrogram:
    """Flip the channel axis, carrying ``channel_centers_hz`` along."""
    return replace(s, values=s.values[:, ::-1].copy(),
                   channel_centers_hz=s.channel_centers_hz[::-1].copy())


def _variant(s: Spectrogram, policy: AugmentPolicy, rng: np.random.Generator) -> Spectrogram:
    names = policy.enabled
    # at least one transform per copy; each enabled one is applied with prob 1/2
    chosen = rng.random(len(names)) < 0.5
    if not chosen.any():
        chosen[rng.integers(len(names))] = True
    out = s
    for name, use in zip(names, chosen):
        if not use:
            continue
        if name == "translate":
            limit = min(policy.max_shift_frames, s.n_frames - 1)
            shift = int(rng.integers(1, limit + 1)) if limit >= 1 else 0
            if rng.random() < 0.5:
                shift = -shift
            out = translate(out, shift)
        elif name == "reflect_time":
            out = reflect_time(out)
        else:
            out = reflect_freq(out)
    return out


def augment_dataset(items, policy: AugmentPolicy) -> list:
    """Originals followed by ``copies_per_item`` random variants of each item.

    Output length is ``len(items) * (1 + copies_per_item)``: all originals in
    order, then the copies of item 0, item 1, and so on.
    """
    items = list(items)
    if policy.copies_per_item == 0:
        return items
    if not policy.enabled:
        raise ConfigError("copies_per_item > 0 but no augmentation transform is enabled")
    rng = np.random.default_rng(policy.seed)
    out = list(items)
    for s in items:
        if policy.enable_translate and policy.max_shift_frames >= s.n_frames:
            raise ConfigError(
                f"max_shift_frames={policy.max_shift_frames} must be below n_frames={s.n_frames}"
            )
        out.extend(_variant(s, policy, rng) for _ in range(policy.copies_per_item))
    return out
