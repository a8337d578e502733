"""Forward-only residual CNN that turns a spectrogram into a feature vector.

Tensors are laid out ``(height, width, channels)`` with height = frames and
width = frequency channels. Kernels are ``(k, k, in_channels, out_channels)``.
Weights are seeded random (He scaling); trained weights can be loaded from
the text tensor format handled by :func:`save_cnn` / :func:`load_cnn`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DataError, ShapeError, ShapeUnderflowError
from .spectral import Spectrogram

FORMAT_TAG = "seiswarp-cnn 1"


@dataclass(frozen=True)
class CnnConfig:
    input_shape: tuple = (59, 24)
    stem_filters: int = 8
    blocks: tuple = ((8, 1), (16, 2))
    kernel_size: int = 3
    feature_dim: int = 8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "blocks", tuple((int(f), int(s)) for f, s in self.blocks))
        if len(self.input_shape) != 2 or min(self.input_shape) < 1:
            raise ConfigError(f"input_shape must be two positive ints, got {self.input_shape}")
        if self.stem_filters < 1 or self.feature_dim < 1:
            raise ConfigError("stem_filters and feature_dim must be >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")
        for filters, stride in self.blocks:
            if filters < 1 or stride not in (1, 2):
                raise ConfigError(f"bad block (filters={filters}, stride={stride})")

    def stage_shapes(self) -> list:
        """Spatial shape after the stem pool and after each block."""
        h, w = self.input_shape
        if h < 2 or w < 2:
            raise ShapeUnderflowError(f"input {self.input_shape} is too small for 2x2 pooling")
        h, w = h // 2, w // 2
        shapes = [(h, w)]
        for _, stride in self.blocks:
            h, w = math.ceil(h / stride), math.ceil(w / stride)
            shapes.append((h, w))
        return shapes


@dataclass(eq=False)
class CnnModel:
    config: CnnConfig
    params: dict = field(default_factory=dict)

    def block_params(self, j: int) -> dict:
        prefix = f"block{j}."
        return {k[len(prefix):]: v for k, v in self.params.items() if k.startswith(prefix)}


def _param_shapes(cfg: CnnConfig) -> dict:
    k = cfg.kernel_size
    shapes = {"stem.w": (k, k, 1, cfg.stem_filters), "stem.b": (cfg.stem_filters,)}
    cin = cfg.stem_filters
    for j, (filters, stride) in enumerate(cfg.blocks):
        p = f"block{j}."
        shapes[p + "conv1.w"] = (k, k, cin, filters)
        shapes[p + "conv1.b"] = (filters,)
        shapes[p + "conv2.w"] = (k, k, filters, filters)
        shapes[p + "conv2.b"] = (filters,)
        if stride != 1 or cin != filters:
            shapes[p + "proj.w"] = (1, 1, cin, filters)
            shapes[p + "proj.b"] = (filters,)
        cin = filters
    shapes["head.w"] = (cin, cfg.feature_dim)
    shapes["head.b"] = (cfg.feature_dim,)
    return shapes


def init_cnn(cfg: CnnConfig) -> CnnModel:
    """He-initialized weights (std ``sqrt(2 / fan_in)``), zero biases."""
    cfg.stage_shapes()
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in _param_shapes(cfg).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[:-1]))
            params[name] = rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)
    return CnnModel(cfg, params)


def relu(x):
    return np.maximum(x, 0.0)


def _same_padding(size: int, k: int, stride: int) -> tuple:
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def conv2d(x: np.ndarray, kernel: np.ndarray, stride: int = 1, bias=None) -> np.ndarray:
    """Cross-correlation with 'same' zero padding; output is ``ceil(H/stride) x ceil(W/stride) x F``."""
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeError(f"conv2d expects HxWxC input and kxkxCxF kernel, got {x.shape}, {kernel.shape}")
    kh, kw, cin, cout = kernel.shape
    if cin != x.shape[2]:
        raise ShapeError(f"kernel expects {cin} input channels, input has {x.shape[2]}")
    pads = (_same_padding(x.shape[0], kh, stride), _same_padding(x.shape[1], kw, stride), (0, 0))
    xp = np.pad(x, pads)
    win = sliding_window_view(xp, (kh, kw), axis=(0, 1))[::stride, ::stride]
    # win: (H', W', C, kh, kw)
    out = np.tensordot(win, kernel.transpose(2, 0, 1, 3), axes=([2, 3, 4], [0, 1, 2]))
    if bias is not None:
        out = out + bias
    return out


def max_pool(x: np.ndarray, window: int = 2, stride: int = 2) -> np.ndarray:
    h, w = x.shape[:2]
    if h < window or w < window:
        raise ShapeUnderflowError(f"cannot max-pool {x.shape[:2]} with window {window}")
    win = sliding_window_view(x, (window, window), axis=(0, 1))[::stride, ::stride]
    return win.max(axis=(-2, -1))


def avg_pool_global(x: np.ndarray) -> np.ndarray:
    return x.mean(axis=(0, 1))


def residual_block(x: np.ndarray, params: dict, stride: int = 1) -> np.ndarray:
    """``relu(conv2(relu(conv1(x))) + shortcut(x))``.

    ``params`` holds ``conv1.w/b``, ``conv2.w/b`` and, when the stride or the
    channel count changes, a 1x1 projection ``proj.w/b`` for the shortcut.
    """
    h = relu(conv2d(x, params["conv1.w"], stride, params["conv1.b"]))
    h = conv2d(h, params["conv2.w"], 1, params["conv2.b"])
    if "proj.w" in params:
        shortcut = conv2d(x, params["proj.w"], stride, params["proj.b"])
    else:
        shortcut = x
    if shortcut.shape != h.shape:
        raise ShapeError(f"branch {h.shape} and shortcut {shortcut.shape} disagree")
    return relu(h + shortcut)


def forward(model: CnnModel, spec) -> np.ndarray:
    """Feature vector of length ``feature_dim`` for one spectrogram.

    stem conv, relu, 2x2 max pool, residual blocks, global average pool,
    linear head.
    """
    values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec, dtype=np.float64)
    cfg = model.config
    if values.shape != cfg.input_shape:
        raise ShapeError(f"expected input of shape {cfg.input_shape}, got {values.shape}")
    p = model.params
    x = relu(conv2d(values[:, :, None], p["stem.w"], 1, p["stem.b"]))
    x = max_pool(x)
    for j, (_, stride) in enumerate(cfg.blocks):
        x = residual_block(x, model.block_params(j), stride)
    return avg_pool_global(x) @ p["head.w"] + p["head.b"]


def extract_features(model: CnnModel, spectrograms) -> np.ndarray:
    """Stack :func:`forward` over a dataset into an ``(n, feature_dim)`` array."""
    return np.stack([forward(model, s) for s in spectrograms])


# ---------------------------------------------------------------------------
# text tensor format
#
#   # seiswarp-cnn 1
#   # config input_shape=59,24 stem_filters=8 blocks=8:1,16:2 kernel_size=3 feature_dim=8 seed=0
#   tensor <name> <dim> <dim> ...
#   <values of the last axis, space separated, one line per leading index>
#   ...


def _config_line(cfg: CnnConfig) -> str:
    blocks = ",".join(f"{f}:{s}" for f, s in cfg.blocks)
    return (f"# config input_shape={cfg.input_shape[0]},{cfg.input_shape[1]} "
            f"stem_filters={cfg.stem_filters} blocks={blocks} "
            f"kernel_size={cfg.kernel_size} feature_dim={cfg.feature_dim} seed={cfg.seed}")


def _parse_config_line(line: str) -> CnnConfig:
    fields = dict(item.split("=", 1) for item in line.split()[2:])
    blocks = tuple(tuple(int(v) for v in b.split(":")) for b in fields["blocks"].split(",") if b)
    return CnnConfig(
        input_shape=tuple(int(v) for v in fields["input_shape"].split(",")),
        stem_filters=int(fields["stem_filters"]),
        blocks=blocks,
        kernel_size=int(fields["kernel_size"]),
        feature_dim=int(fields["feature_dim"]),
        seed=int(fields["seed"]),
    )


def save_cnn(model: CnnModel, path) -> Path:
    path = Path(path)
    lines = [f"# {FORMAT_TAG}", _config_line(model.config)]
    for name, arr in model.params.items():
        lines.append("tensor " + name + " " + " ".join(str(d) for d in arr.shape))
        for row in arr.reshape(-1, arr.shape[-1]):
            lines.append(" ".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_cnn(path) -> CnnModel:
    """Read a model written by :func:`save_cnn` (or produced externally in that format)."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != f"# {FORMAT_TAG}":
        raise DataError(f"{path}: missing '# {FORMAT_TAG}' header")
    try:
        cfg = _parse_config_line(lines[1])
    except (IndexError, KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad config line ({exc})") from exc
    expected = _param_shapes(cfg)
    params = {}
    i = 2
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        head = lines[i].split()
        if head[0] != "tensor":
            raise DataError(f"{path}:{i + 1}: expected 'tensor <name> <shape>'")
        try:
            name, shape = head[1], tuple(int(d) for d in head[2:])
            n_rows = int(np.prod(shape[:-1])) if len(shape) > 1 else 1
            rows = [[float(v) for v in lines[i + 1 + r].split()] for r in range(n_rows)]
            params[name] = np.array(rows, dtype=np.float64).reshape(shape)
        except (IndexError, ValueError) as exc:
            raise DataError(f"{path}:{i + 1}: malformed tensor block ({exc})") from exc
        i += 1 + n_rows
    if set(params) != set(expected):
        raise DataError(f"{path}: tensors {sorted(set(params) ^ set(expected))} missing or unexpected")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise DataError(f"{path}: tensor {name} has shape {params[name].shape}, expected {shape}")
        if not np.all(np.isfinite(params[name])):
            raise DataError(f"{path}: tensor {name} has non-finite values")
    return CnnModel(cfg, {name: params[name] for name in expected})
