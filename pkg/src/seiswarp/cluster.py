"""Gaussian mixture clustering by mini-batch EM with weight-threshold pruning.

Training starts from ``K_init`` components and removes those whose mixture
weight falls below a threshold, so the surviving component count is the
inferred number of clusters. The loss is the full-data negative
log-likelihood in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import comb, logsumexp

from .errors import ConfigError, DataError, DegenerateModelError, NumericError, ShapeError

FORMAT_TAG = "seiswarp-gmm 1"
_LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class TrainConfig:
    K_init: int = 10
    max_epochs: int = 10000
    batch_size: Optional[int] = 64
    stagnation_epochs: int = 6000
    stagnation_rel_tol: float = 1e-4
    prune_weight_threshold: float = 1e-3
    covariance_mode: str = "full"
    reg_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.K_init < 1 or self.max_epochs < 0 or self.stagnation_epochs < 1:
            raise ConfigError("K_init, stagnation_epochs must be >= 1 and max_epochs >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be positive (or None for full batch)")
        if not 0 < self.stagnation_rel_tol < 1:
            raise ConfigError("stagnation_rel_tol must lie in (0, 1)")
        if not 0 < self.prune_weight_threshold <= 1 / self.K_init:
            raise ConfigError("prune_weight_threshold must lie in (0, 1/K_init]")
        if self.covariance_mode not in ("full", "diagonal"):
            raise ConfigError(f"covariance_mode must be 'full' or 'diagonal', got {self.covariance_mode!r}")
        if not self.reg_floor > 0:
            raise ConfigError("reg_floor must be > 0")


@dataclass(frozen=True, eq=False)
class GmmModel:
    """Mixture weights ``(K,)``, means ``(K, d)`` and covariances.

    Covariances are ``(K, d, d)`` in full mode and ``(K, d)`` variances in
    diagonal mode.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    covariance_mode: str = "full"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        cov = np.asarray(self.covariances, dtype=np.float64)
        K, d = mu.shape
        want = (K, d, d) if self.covariance_mode == "full" else (K, d)
        if self.covariance_mode not in ("full", "diagonal"):
            raise ConfigError(f"unknown covariance mode {self.covariance_mode!r}")
        if w.shape != (K,) or cov.shape != want:
            raise ShapeError(f"inconsistent GMM shapes: weights {w.shape}, means {mu.shape}, cov {cov.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)

    @property
    def K(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def full_covariances(self) -> np.ndarray:
        if self.covariance_mode == "full":
            return self.covariances
        return np.stack([np.diag(v) for v in self.covariances])


@dataclass(frozen=True)
class Assignment:
    cluster_id: int
    posterior: np.ndarray


def _as_data(data, model: Optional[GmmModel] = None) -> np.ndarray:
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None] if model is not None and model.dim == 1 else X[None, :]
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("data must be a non-empty (n, d) array")
    if model is not None and X.shape[1] != model.dim:
        raise ShapeError(f"data has dimension {X.shape[1]}, model has {model.dim}")
    return X


def component_log_density(model: GmmModel, X: np.ndarray) -> np.ndarray:
    """``log N(x_i; mu_k, Sigma_k)`` as an ``(n, K)`` array."""
    X = _as_data(X, model)
    n, d = X.shape
    out = np.empty((n, model.K))
    for k in range(model.K):
        diff = X - model.means[k]
        if model.covariance_mode == "diagonal":
            var = model.covariances[k]
            if np.any(var <= 0):
                raise NumericError(f"component {k} has a non-positive variance")
            maha = np.sum(diff ** 2 / var, axis=1)
            logdet = np.sum(np.log(var))
        else:
            try:
                L = np.linalg.cholesky(model.covariances[k])
            except np.linalg.LinAlgError:
                raise NumericError(f"covariance of component {k} is not positive definite") from None
            z = np.linalg.solve(L, diff.T)
            maha = np.sum(z ** 2, axis=0)
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
        out[:, k] = -0.5 * (d * _LOG_2PI + logdet + maha)
    return out


def _log_joint(model: GmmModel, X: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    return component_log_density(model, X) + log_w


def nll(model: GmmModel, data) -> float:
    """Negative log-likelihood of ``data`` under ``model`` (nats, summed over points)."""
    lj = _log_joint(model, data)
    return float(-np.sum(logsumexp(lj, axis=1)))


def e_step(model: GmmModel, batch) -> np.ndarray:
    """Responsibilities ``r_ik``; each row sums to one."""
    lj = _log_joint(model, batch)
    norm = logsumexp(lj, axis=1, keepdims=True)
    if not np.all(np.isfinite(norm)):
        raise DegenerateModelError("every component has zero density at some point")
    return np.exp(lj - norm)


def floor_covariance(cov: np.ndarray, reg_floor: float) -> np.ndarray:
    """Raise eigenvalues of a symmetric matrix to at least ``reg_floor``.

    Left untouched when already above the floor.
    """
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() >= reg_floor:
        return cov
    return (vecs * np.maximum(vals, reg_floor)) @ vecs.T


def m_step(model: GmmModel, batch, responsibilities, reg_floor: float = 1e-6) -> GmmModel:
    """Weighted maximum-likelihood update of weights, means and covariances.

    A component with zero total responsibility gets weight 0 and keeps its
    previous mean and covariance; :func:`prune` removes it.
    """
    X = _as_data(batch, model)
    R = np.asarray(responsibilities, dtype=np.float64)
    if R.shape != (X.shape[0], model.K):
        raise ShapeError(f"responsibilities shape {R.shape}, expected {(X.shape[0], model.K)}")
    n = X.shape[0]
    Nk = R.sum(axis=0)
    weights = Nk / n
    means = model.means.copy()
    covs = model.covariances.copy()
    for k in range(model.K):
        if Nk[k] <= 0:
            weights[k] = 0.0
            continue
        mu = R[:, k] @ X / Nk[k]
        diff = X - mu
        means[k] = mu
        if model.covariance_mode == "full":
            cov = (R[:, k, None] * diff).T @ diff / Nk[k]
            covs[k] = floor_covariance(cov, reg_floor)
        else:
            covs[k] = np.maximum(R[:, k] @ diff ** 2 / Nk[k], reg_floor)
    return GmmModel(weights, means, covs, model.covariance_mode)


def prune(model: GmmModel, threshold: float) -> GmmModel:
    """Drop components with weight below ``threshold`` and renormalize.

    The heaviest component always survives.
    """
    keep = model.weights >= threshold
    if keep.all():
        return model
    if not keep.any():
        keep[np.argmax(model.weights)] = True
    w = model.weights[keep]
    return GmmModel(w / w.sum(), model.means[keep], model.covariances[keep], model.covariance_mode)


def assign(model: GmmModel, x) -> Assignment:
    """Posterior over components for one point; ties go to the lowest index."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    post = e_step(model, x)[0]
    return Assignment(int(np.argmax(post)), post)


def assign_all(model: GmmModel, data) -> tuple:
    """Cluster ids and max posteriors for every row of ``data``."""
    R = e_step(model, data)
    return np.argmax(R, axis=1), R.max(axis=1)


def global_covariance(X: np.ndarray, mode: str, reg_floor: float) -> np.ndarray:
    diff = X - X.mean(axis=0)
    if mode == "diagonal":
        return np.maximum(np.mean(diff ** 2, axis=0), reg_floor)
    return floor_covariance(diff.T @ diff / X.shape[0], reg_floor)


def init_gmm(data, cfg: TrainConfig, rng: Optional[np.random.Generator] = None) -> GmmModel:
    """Means at ``K_init`` distinct random data points, global covariance, uniform weights."""
    X = _as_data(data)
    n = X.shape[0]
    if n < cfg.K_init:
        raise DataError(f"need at least K_init={cfg.K_init} points, got {n}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    idx = rng.choice(n, size=cfg.K_init, replace=False)
    cov = global_covariance(X, cfg.covariance_mode, cfg.reg_floor)
    covs = np.repeat(cov[None], cfg.K_init, axis=0)
    weights = np.full(cfg.K_init, 1.0 / cfg.K_init)
    return GmmModel(weights, X[idx].copy(), covs, cfg.covariance_mode)


def fit(data, cfg: TrainConfig = TrainConfig()) -> tuple:
    """Fit a mixture by mini-batch EM.

    Each epoch draws ``batch_size`` points without replacement, runs one
    E and M step on them, prunes light components and records the
    full-data NLL. Training stops early once the best NLL has not improved
    by ``stagnation_rel_tol`` (relative) for ``stagnation_epochs`` epochs.

    Returns
    -------
    model : GmmModel
        Model after the last epoch.
    loss_history : ndarray
        Full-data NLL; entry 0 is the initial model, entry ``e`` follows
        epoch ``e``.
    """
    X = _as_data(data)
    n = X.shape[0]
    if n < cfg.K_init:
        raise DataError(f"need at least K_init={cfg.K_init} points, got {n}")
    batch = n if cfg.batch_size is None else cfg.batch_size
    if batch > n:
        raise ConfigError(f"batch_size={batch} exceeds dataset size {n}")
    rng = np.random.default_rng(cfg.seed)
    model = init_gmm(X, cfg, rng)
    history = [nll(model, X)]
    ref = history[0]
    ref_epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        if batch < n:
            Xb = X[np.sort(rng.choice(n, size=batch, replace=False))]
        else:
            Xb = X
        model = m_step(model, Xb, e_step(model, Xb), cfg.reg_floor)
        model = prune(model, cfg.prune_weight_threshold)
        loss = nll(model, X)
        if not math.isfinite(loss):
            raise NumericError(f"non-finite NLL at epoch {epoch}")
        history.append(loss)
        if loss < ref - cfg.stagnation_rel_tol * abs(ref):
            ref, ref_epoch = loss, epoch
        elif epoch - ref_epoch >= cfg.stagnation_epochs:
            break
    return model, np.array(history)


# ---------------------------------------------------------------------------
# partition metrics


def adjusted_rand_index(labels_true, labels_pred) -> float:
    """Chance-corrected Rand index between two partitions."""
    _, a = np.unique(np.asarray(labels_true), return_inverse=True)
    _, b = np.unique(np.asarray(labels_pred), return_inverse=True)
    n = a.size
    table = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(table, (a, b), 1)
    sum_cells = comb(table, 2).sum()
    sum_a = comb(table.sum(axis=1), 2).sum()
    sum_b = comb(table.sum(axis=0), 2).sum()
    expected = sum_a * sum_b / comb(n, 2)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def purity(labels_true, labels_pred) -> float:
    """Fraction of points whose cluster's majority class matches their class."""
    _, a = np.unique(np.asarray(labels_true), return_inverse=True)
    _, b = np.unique(np.asarray(labels_pred), return_inverse=True)
    table = np.zeros((b.max() + 1, a.max() + 1))
    np.add.at(table, (b, a), 1)
    return float(table.max(axis=1).sum() / a.size)


# ---------------------------------------------------------------------------
# persistence
#
#   # seiswarp-gmm 1
#   K <int>
#   d <int>
#   covariance_mode full|diagonal
#   weights
#   <K values>
#   means
#   <K rows of d values>
#   covariances
#   <K*d rows of d values (full) or K rows of d values (diagonal)>


def _row(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_gmm(model: GmmModel, path) -> Path:
    path = Path(path)
    lines = [f"# {FORMAT_TAG}", f"K {model.K}", f"d {model.dim}",
             f"covariance_mode {model.covariance_mode}", "weights", _row(model.weights), "means"]
    lines += [_row(m) for m in model.means]
    lines.append("covariances")
    lines += [_row(r) for r in model.covariances.reshape(-1, model.dim)]
    path.write_text("\n".join(lines) + "\n")
    return path


def load_gmm(path) -> GmmModel:
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    try:
        if lines[0] != f"# {FORMAT_TAG}":
            raise DataError(f"{path}: missing '# {FORMAT_TAG}' header")
        K = int(lines[1].split()[1])
        d = int(lines[2].split()[1])
        mode = lines[3].split()[1]
        assert lines[4] == "weights"
        weights = np.array(lines[5].split(), dtype=np.float64)
        assert lines[6] == "means"
        means = np.array([ln.split() for ln in lines[7:7 + K]], dtype=np.float64)
        assert lines[7 + K] == "covariances"
        rows = K * d if mode == "full" else K
        cov = np.array([ln.split() for ln in lines[8 + K:8 + K + rows]], dtype=np.float64)
        cov = cov.reshape(K, d, d) if mode == "full" else cov.reshape(K, d)
    except (IndexError, ValueError, AssertionError) as exc:
        raise DataError(f"{path}: malformed GMM file ({exc!r})") from exc
    return GmmModel(weights, means.reshape(K, d), cov, mode)


def save_loss_history(history, path) -> Path:
    path = Path(path)
    lines = ["epoch,nll"] + [f"{e},{float(v)!r}" for e, v in enumerate(history)]
    path.write_text("\n".join(lines) + "\n")
    return path


def load_loss_history(path) -> np.ndarray:
    rows = Path(path).read_text().splitlines()[1:]
    return np.array([float(r.split(",")[1]) for r in rows if r])
