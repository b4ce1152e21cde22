"""Generator for synthetic longitudinal records, with a distribution gate.

The generator is conditional: it encodes a real record's time series into a
latent code, concatenates fresh noise, and decodes back to the full series.
A convolutional discriminator scores realism and exposes its hidden layer as
the feature map for feature matching.  Training alternates one discriminator
step with one generator step per batch; quality is judged by the maximum mean
discrepancy between held-out real series and their synthetic counterparts,
which must fall under a fixed threshold before the generator may be used
downstream.

All series are standardized per feature inside this module; the gate and the
public sampling API work in the raw data space.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .data import Cohort
from .errors import ConfigError, ContractError, TrainingError
from .nn import (
    Adam,
    LinearParams,
    MlpParams,
    init_linear,
    init_mlp,
    linear,
    load_checkpoint,
    load_params_into,
    mlp,
    save_checkpoint,
    trainable_tensors,
)
from .tensor import Tensor
from . import tensor as T

PROB_CLAMP = 1e-7
BANDWIDTH_SCALES = (0.5, 1.0, 2.0, 4.0, 8.0)


@dataclass
class GanLossWeights:
    dis: float = 1.0
    adv: float = 1.0
    fm: float = 10.0

    def __post_init__(self):
        if min(self.dis, self.adv, self.fm) < 0:
            raise ConfigError("loss weights must be non-negative")
        if max(self.dis, self.adv, self.fm) == 0:
            raise ConfigError("at least one loss weight must be positive")


@dataclass
class GanConfig:
    latent_dim: int = 16
    noise_dim: int = 16
    hidden_dim: int = 32
    conv_kernels: int = 16
    conv_width: int = 3
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    weights: GanLossWeights = field(default_factory=GanLossWeights)
    mmd_threshold: float = 0.68
    holdout_fraction: float = 0.2

    def __post_init__(self):
        for name in ("latent_dim", "noise_dim", "hidden_dim", "conv_kernels", "conv_width", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must lie strictly between 0 and 1")
        if self.mmd_threshold <= 0:
            raise ConfigError("mmd_threshold must be positive")


@dataclass
class GanParams:
    encoder: MlpParams  # feature means over time -> latent code
    decoder: MlpParams  # latent code + noise -> flattened series
    disc_conv: Tensor  # [kernels, width, features]
    disc_feature: LinearParams  # pooled conv activations -> feature map
    disc_out: LinearParams  # feature map -> realism logit
    feature_mean: Tensor  # [F], not trainable
    feature_std: Tensor  # [F], not trainable
    t_len: int
    feat_dim: int


def init_gan_params(rng: np.random.Generator, t_len: int, feat_dim: int, config: GanConfig) -> GanParams:
    if t_len < config.conv_width:
        raise ConfigError(
            f"series length {t_len} is shorter than the discriminator kernel width {config.conv_width}"
        )
    fan_in = config.conv_width * feat_dim
    limit = np.sqrt(6.0 / (fan_in + config.conv_kernels))
    return GanParams(
        encoder=init_mlp(rng, feat_dim, config.hidden_dim, config.latent_dim),
        decoder=init_mlp(rng, config.latent_dim + config.noise_dim, config.hidden_dim, t_len * feat_dim),
        disc_conv=Tensor(
            rng.uniform(-limit, limit, size=(config.conv_kernels, config.conv_width, feat_dim)),
            requires_grad=True,
        ),
        disc_feature=init_linear(rng, config.conv_kernels, config.hidden_dim),
        disc_out=init_linear(rng, config.hidden_dim, 1),
        feature_mean=Tensor(np.zeros(feat_dim)),
        feature_std=Tensor(np.ones(feat_dim)),
        t_len=t_len,
        feat_dim=feat_dim,
    )


def _constant_copy(obj):
    """Same parameter structure with gradient tracking stripped, so a forward
    pass through it contributes nothing to the tape."""
    if isinstance(obj, Tensor):
        return Tensor(obj.data)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return type(obj)(
            **{f.name: _constant_copy(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        )
    return obj


# ---------------------------------------------------------------------------
# network pieces
# ---------------------------------------------------------------------------


def encode(params: GanParams, series: Tensor) -> Tensor:
    """[N, T, F] standardized series -> [N, latent] codes."""
    return mlp(T.reduce_mean(series, axis=1), params.encoder)


def decode(params: GanParams, codes: Tensor, noise: Tensor) -> Tensor:
    """Latent codes plus noise -> [N, T, F] standardized series."""
    flat = mlp(T.concat([codes, noise], axis=1), params.decoder)
    return T.reshape(flat, (flat.shape[0], params.t_len, params.feat_dim))


def discriminate(params: GanParams, series: Tensor) -> tuple[Tensor, Tensor]:
    """Realism probabilities in [eps, 1-eps] and the feature-map activations."""
    pooled = T.reduce_mean(T.relu(T.conv1d(series, params.disc_conv)), axis=1)
    features = T.relu(linear(pooled, params.disc_feature))
    logits = linear(features, params.disc_out)
    probs = T.clip(T.sigmoid(logits), lo=PROB_CLAMP, hi=1.0 - PROB_CLAMP)
    return T.reshape(probs, (probs.shape[0],)), features


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def loss_dis(real_probs: Tensor, synth_probs: Tensor) -> Tensor:
    """Discriminator objective: penalize low scores on real and high scores on
    synthetic, averaged over the pooled batch."""
    real_probs, synth_probs = T._coerce(real_probs), T._coerce(synth_probs)
    n = real_probs.size + synth_probs.size
    if real_probs.size == 0 or synth_probs.size == 0:
        raise ContractError("discriminator loss needs non-empty real and synthetic batches")
    hit = T.reduce_sum(T.log(real_probs))
    miss = T.reduce_sum(T.log(T.sub(1.0, synth_probs)))
    return T.scale(T.add(hit, miss), -1.0 / n)


def loss_adv(synth_probs: Tensor) -> Tensor:
    """Generator objective: mean negative log score on synthetic samples."""
    synth_probs = T._coerce(synth_probs)
    if synth_probs.size == 0:
        raise ContractError("adversarial loss needs a non-empty synthetic batch")
    return T.scale(T.reduce_sum(T.log(synth_probs)), -1.0 / synth_probs.size)


def loss_fm(real_features: Tensor, synth_features: Tensor) -> Tensor:
    """Root mean squared gap between paired real and synthetic feature maps."""
    real_features, synth_features = T._coerce(real_features), T._coerce(synth_features)
    if real_features.size == 0:
        raise ContractError("feature matching needs non-empty batches")
    if real_features.shape != synth_features.shape:
        raise ContractError(
            f"feature matching pairs by index, got shapes "
            f"{real_features.shape} and {synth_features.shape}"
        )
    gap = T.sub(real_features, synth_features)
    return T.sqrt(T.reduce_mean(T.mul(gap, gap)))


def gan_total_loss(weights: GanLossWeights, l_dis: Tensor, l_adv: Tensor, l_fm: Tensor) -> Tensor:
    return T.add(
        T.add(T.scale(l_dis, weights.dis), T.scale(l_adv, weights.adv)),
        T.scale(l_fm, weights.fm),
    )


# ---------------------------------------------------------------------------
# distribution gate
# ---------------------------------------------------------------------------


def median_heuristic_bandwidths(a: np.ndarray, b: np.ndarray) -> list[float]:
    """Median pairwise distance over the pooled samples, scaled by the fixed
    multiplier ladder.  Falls back to unit bandwidth for degenerate pools."""
    pooled = np.concatenate([np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)])
    sq = np.sum(pooled**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * pooled @ pooled.T, 0.0)
    dists = np.sqrt(d2[np.triu_indices(len(pooled), k=1)])
    median = float(np.median(dists))
    if median <= 0.0:
        median = 1.0
    return [s * median for s in BANDWIDTH_SCALES]


def mmd(a: np.ndarray, b: np.ndarray, bandwidths=None) -> float:
    """Unbiased multi-bandwidth RBF MMD between two sample sets, clamped at
    zero and square-rooted.  Rows are flattened sample vectors."""
    a = np.asarray(a, dtype=np.float64).reshape(len(a), -1)
    b = np.asarray(b, dtype=np.float64).reshape(len(b), -1)
    if len(a) < 2 or len(b) < 2:
        raise ContractError("mmd needs at least two samples on each side")
    if a.shape[1] != b.shape[1]:
        raise ContractError(f"sample dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    if bandwidths is None:
        bandwidths = median_heuristic_bandwidths(a, b)

    def kernel_mean(x, y, skip_diagonal):
        # the multi-scale kernel is the sum over the ladder, so separated
        # distributions register at every scale they disagree on
        d2 = np.maximum(
            np.sum(x**2, axis=1)[:, None] + np.sum(y**2, axis=1)[None, :] - 2.0 * x @ y.T, 0.0
        )
        k = np.zeros_like(d2)
        for s in bandwidths:
            k += np.exp(-d2 / (2.0 * s * s))
        if skip_diagonal:
            np.fill_diagonal(k, 0.0)
            return float(k.sum()) / (len(x) * (len(x) - 1))
        return float(k.mean())

    estimate = (
        kernel_mean(a, a, True) + kernel_mean(b, b, True) - 2.0 * kernel_mean(a, b, False)
    )
    return float(np.sqrt(max(estimate, 0.0)))


@dataclass
class GateReport:
    mmd: float
    threshold: float
    passed: bool
    n_holdout: int
    bandwidths: list[float]
    disc_losses: list[float] = field(default_factory=list)
    gen_losses: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _standardize(series: np.ndarray, params: GanParams) -> np.ndarray:
    return (series - params.feature_mean.data) / params.feature_std.data


def _unstandardize(series: np.ndarray, params: GanParams) -> np.ndarray:
    return series * params.feature_std.data + params.feature_mean.data


def sample_series(params: GanParams, series: np.ndarray, rng: np.random.Generator, noise_dim: int) -> np.ndarray:
    """Synthetic counterparts for raw [N, T, F] series; returns raw space."""
    series = np.asarray(series, dtype=np.float64)
    squeeze = series.ndim == 2
    if squeeze:
        series = series[None]
    codes = encode(params, Tensor(_standardize(series, params)))
    noise = Tensor(rng.standard_normal((series.shape[0], noise_dim)))
    out = _unstandardize(decode(params, codes, noise).data, params)
    return out[0] if squeeze else out


def train_gan(cohort: Cohort, config: GanConfig, seed: int) -> tuple[GanParams, GateReport]:
    """Fit the generator on the cohort's training records.

    One RNG drives everything in a fixed order: parameter init, the holdout
    split, then per-epoch shuffles and noise draws.  Same seed, same cohort,
    same config -> identical parameters and gate report.
    """
    records = cohort.train_records()
    series = np.stack([r.longitudinal for r in records]).astype(np.float64)
    n, t_len, feat_dim = series.shape
    if n < 4:
        raise ContractError(f"gan training needs at least 4 records, got {n}")

    rng = np.random.default_rng(seed)
    params = init_gan_params(rng, t_len, feat_dim, config)

    n_holdout = min(max(2, round(config.holdout_fraction * n)), n - 2)
    order = rng.permutation(n)
    holdout_raw = series[order[:n_holdout]]
    fit_raw = series[order[n_holdout:]]

    params.feature_mean.data = fit_raw.reshape(-1, feat_dim).mean(axis=0)
    params.feature_std.data = np.maximum(fit_raw.reshape(-1, feat_dim).std(axis=0), 1e-8)
    fit = _standardize(fit_raw, params)

    disc_params = [params.disc_conv] + trainable_tensors(params.disc_feature) + trainable_tensors(params.disc_out)
    gen_params = trainable_tensors(params.encoder) + trainable_tensors(params.decoder)
    opt_d = Adam(disc_params, lr=config.learning_rate)
    opt_g = Adam(gen_params, lr=config.learning_rate)
    weights = config.weights

    disc_losses, gen_losses = [], []
    for epoch in range(config.epochs):
        epoch_order = rng.permutation(len(fit))
        epoch_d, epoch_g = [], []
        for start in range(0, len(fit), config.batch_size):
            batch = Tensor(fit[epoch_order[start : start + config.batch_size]])
            noise = rng.standard_normal((batch.shape[0], config.noise_dim))

            # discriminator step: synthetic batch built outside the tape
            frozen_g = _constant_copy(params)
            synth_const = decode(frozen_g, encode(frozen_g, Tensor(batch.data)), Tensor(noise))
            real_probs, _ = discriminate(params, batch)
            synth_probs, _ = discriminate(params, synth_const)
            l_d = T.scale(loss_dis(real_probs, synth_probs), weights.dis)
            T.backward(l_d)
            opt_d.step()
            opt_d.zero_grad()

            # generator step: same noise, discriminator frozen
            frozen_d = _constant_copy(params)
            synth = decode(params, encode(params, batch), Tensor(noise))
            synth_probs, synth_feats = discriminate(frozen_d, synth)
            _, real_feats = discriminate(frozen_d, Tensor(batch.data))
            l_g = T.add(
                T.scale(loss_adv(synth_probs), weights.adv),
                T.scale(loss_fm(real_feats, synth_feats), weights.fm),
            )
            T.backward(l_g)
            opt_g.step()
            opt_g.zero_grad()

            epoch_d.append(l_d.item())
            epoch_g.append(l_g.item())
        disc_losses.append(float(np.mean(epoch_d)))
        gen_losses.append(float(np.mean(epoch_g)))
        if not (np.isfinite(disc_losses[-1]) and np.isfinite(gen_losses[-1])):
            raise TrainingError(f"gan loss diverged at epoch {epoch}")

    holdout_synth = sample_series(params, holdout_raw, rng, config.noise_dim)
    flat_real = holdout_raw.reshape(n_holdout, -1)
    flat_synth = holdout_synth.reshape(n_holdout, -1)
    bandwidths = median_heuristic_bandwidths(flat_real, flat_synth)
    value = mmd(flat_real, flat_synth, bandwidths)
    report = GateReport(
        mmd=value,
        threshold=config.mmd_threshold,
        passed=value <= config.mmd_threshold,
        n_holdout=n_holdout,
        bandwidths=bandwidths,
        disc_losses=disc_losses,
        gen_losses=gen_losses,
    )
    return params, report


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_gan(path, params: GanParams, config: GanConfig, gate: GateReport) -> None:
    doc = dataclasses.asdict(config)
    doc["t_len"] = params.t_len
    doc["feat_dim"] = params.feat_dim
    save_checkpoint(path, params, config=doc, extra={"gate": gate.to_dict()})


def load_gan(path) -> tuple[GanParams, GanConfig, dict]:
    doc = load_checkpoint(path)
    meta = dict(doc["config"])
    t_len, feat_dim = meta.pop("t_len"), meta.pop("feat_dim")
    config = GanConfig(**{**meta, "weights": GanLossWeights(**meta["weights"])})
    params = init_gan_params(np.random.default_rng(0), t_len, feat_dim, config)
    load_params_into(params, doc["params"])
    return params, config, doc.get("gate", {})
