"""Classifier network: per-modality encoders, fusion, gate, softmax head.

Three encoders map demographics (one-hot plus scaled age), the longitudinal
series (conv, one transformer block, mean-pool over time), and the note
embedding into a shared width.  A fusion MLP joins them, a learned per-feature
sigmoid gate rescales the fused vector, and the classifier reads only the
gated real-path embedding.  The synthetic counterpart path reuses every
parameter, which is what makes the contrastive pairing meaningful.

A disabled modality contributes a zero embedding and its raw inputs are never
touched, so ablations are true dataflow cuts rather than masked values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .counterparts import CounterpartRecord
from .data import CATEGORICAL_ATTRIBUTES, CohortSchema, SensitiveAttributes
from .errors import ConfigError, ContractError, SchemaError
from .nn import (
    LinearParams,
    MlpParams,
    TransformerBlockParams,
    init_linear,
    init_mlp,
    init_transformer_block,
    linear,
    load_checkpoint,
    load_params_into,
    mlp,
    save_checkpoint,
    sinusoidal_positions,
    transformer_block,
)
from .tensor import Tensor
from . import tensor as T

MODALITIES = ("demographics", "longitudinal", "notes")


@dataclass
class ModelConfig:
    embed_dim: int = 32
    fused_dim: int = 64
    hidden_dim: int = 64
    conv_kernels: int = 32
    conv_width: int = 3
    heads: int = 2
    ff_hidden: int = 64
    use_positional_encoding: bool = False

    def __post_init__(self):
        for name in ("embed_dim", "fused_dim", "hidden_dim", "conv_kernels", "conv_width", "heads", "ff_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.conv_kernels % self.heads:
            raise ConfigError(
                f"conv_kernels ({self.conv_kernels}) must be divisible by heads ({self.heads})"
            )


@dataclass
class ModelParams:
    demo: MlpParams
    conv: Tensor  # [kernels, width, features]
    block: TransformerBlockParams
    longitudinal_out: LinearParams
    notes: LinearParams
    fusion: MlpParams
    gate: Tensor  # [fused_dim]
    classifier: MlpParams


def onehot_dim(schema: CohortSchema) -> int:
    return sum(len(schema.vocabularies[a]) for a in CATEGORICAL_ATTRIBUTES) + 1


def init_model_params(rng: np.random.Generator, schema: CohortSchema, config: ModelConfig) -> ModelParams:
    feat_dim = len(schema.feature_names)
    return ModelParams(
        demo=init_mlp(rng, onehot_dim(schema), config.hidden_dim, config.embed_dim),
        conv=Tensor(
            rng.uniform(
                -np.sqrt(6.0 / (config.conv_width * feat_dim + config.conv_kernels)),
                np.sqrt(6.0 / (config.conv_width * feat_dim + config.conv_kernels)),
                size=(config.conv_kernels, config.conv_width, feat_dim),
            ),
            requires_grad=True,
        ),
        block=init_transformer_block(rng, config.conv_kernels, config.ff_hidden),
        longitudinal_out=init_linear(rng, config.conv_kernels, config.embed_dim),
        notes=init_linear(rng, schema.note_dim, config.embed_dim),
        fusion=init_mlp(rng, 3 * config.embed_dim, config.hidden_dim, config.fused_dim),
        gate=Tensor(np.zeros(config.fused_dim), requires_grad=True),
        classifier=init_mlp(rng, config.fused_dim, config.hidden_dim, 2),
    )


# ---------------------------------------------------------------------------
# featurization
# ---------------------------------------------------------------------------


def featurize_attrs(attrs: SensitiveAttributes, schema: CohortSchema) -> np.ndarray:
    """One-hot per categorical attribute, in attribute order, plus age/100."""
    parts = []
    for attr in CATEGORICAL_ATTRIBUTES:
        vocab = schema.vocabularies[attr]
        value = getattr(attrs, attr)
        if value not in vocab:
            raise SchemaError(f"{attr} value {value!r} is not in the schema vocabulary")
        hot = np.zeros(len(vocab))
        hot[vocab.index(value)] = 1.0
        parts.append(hot)
    parts.append(np.array([attrs.age / 100.0]))
    return np.concatenate(parts)


@dataclass
class ModalityBatch:
    """Raw per-modality arrays for a batch; a disabled modality stays None."""

    n: int
    demographics: np.ndarray | None = None  # [N, onehot+1]
    longitudinal: np.ndarray | None = None  # [N, T, F]
    notes: np.ndarray | None = None  # [N, d_n]
    labels: np.ndarray | None = None  # [N]


def featurize_records(records, schema: CohortSchema, modalities=MODALITIES) -> ModalityBatch:
    for m in modalities:
        if m not in MODALITIES:
            raise ConfigError(f"unknown modality {m!r}; choose from {MODALITIES}")
    batch = ModalityBatch(n=len(records))
    if "demographics" in modalities:
        batch.demographics = np.stack([featurize_attrs(r.attrs, schema) for r in records])
    if "longitudinal" in modalities:
        batch.longitudinal = np.stack([r.longitudinal for r in records])
    if "notes" in modalities:
        notes = np.stack([r.note_embedding for r in records])
        if notes.shape[1] != schema.note_dim:
            raise SchemaError(f"note dimension {notes.shape[1]} != schema {schema.note_dim}")
        batch.notes = notes
    batch.labels = np.array([r.label for r in records], dtype=int)
    return batch


def featurize_counterparts(records, counterparts: dict[str, CounterpartRecord], schema: CohortSchema,
                           modalities=MODALITIES) -> ModalityBatch:
    """Counterpart batch aligned index-by-index with ``records``."""
    paired = []
    for r in records:
        cp = counterparts.get(r.id)
        if cp is None:
            raise ContractError(f"no counterpart for record {r.id!r}")
        if cp.source_id != r.id:
            raise ContractError(f"counterpart source {cp.source_id!r} does not match {r.id!r}")
        paired.append(cp)
    batch = ModalityBatch(n=len(records))
    if "demographics" in modalities:
        batch.demographics = np.stack([featurize_attrs(c.attrs, schema) for c in paired])
    if "longitudinal" in modalities:
        batch.longitudinal = np.stack([c.longitudinal for c in paired])
    if "notes" in modalities:
        batch.notes = np.stack([c.note_embedding for c in paired])
    batch.labels = np.array([r.label for r in records], dtype=int)
    return batch


# ---------------------------------------------------------------------------
# encoders
# ---------------------------------------------------------------------------


def encode_demographics(params: ModelParams, feats: Tensor) -> Tensor:
    return mlp(feats, params.demo)


def encode_longitudinal(params: ModelParams, series: Tensor, config: ModelConfig) -> Tensor:
    h = T.conv1d(series, params.conv)
    if config.use_positional_encoding:
        h = T.add(h, sinusoidal_positions(h.shape[1], h.shape[2]))
    h = transformer_block(h, params.block, config.heads)
    return linear(T.reduce_mean(h, axis=1), params.longitudinal_out)


def encode_notes(params: ModelParams, notes: Tensor) -> Tensor:
    if notes.shape[-1] != params.notes.weight.shape[0]:
        raise SchemaError(
            f"note dimension {notes.shape[-1]} does not match the projection "
            f"({params.notes.weight.shape[0]})"
        )
    return T.relu(linear(notes, params.notes))


def fuse(params: ModelParams, e_demo: Tensor, e_long: Tensor, e_notes: Tensor) -> Tensor:
    if not e_demo.shape == e_long.shape == e_notes.shape:
        raise ContractError(
            f"modality embeddings must share a shape, got "
            f"{e_demo.shape}, {e_long.shape}, {e_notes.shape}"
        )
    return mlp(T.concat([e_demo, e_long, e_notes], axis=1), params.fusion)


def dynamic_relevance(e: Tensor, gate: Tensor) -> Tensor:
    """Per-feature sigmoid gate; shrinks every coordinate toward zero."""
    e, gate = T._coerce(e), T._coerce(gate)
    if e.shape[-1] != gate.shape[-1] or gate.ndim != 1:
        raise ContractError(f"gate shape {gate.shape} does not match embedding {e.shape}")
    return T.mul(e, T.sigmoid(gate))


def classify(params: ModelParams, e_adj: Tensor) -> Tensor:
    return T.softmax(mlp(e_adj, params.classifier), axis=-1)


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingBundle:
    e: Tensor
    e_syn: Tensor | None
    e_adj: Tensor
    e_adj_syn: Tensor | None


def forward_fused(params: ModelParams, config: ModelConfig, batch: ModalityBatch) -> Tensor:
    """Fused embedding for one batch; absent modalities enter as zeros."""
    zero = Tensor(np.zeros((batch.n, params.demo.out.weight.shape[1])))
    e_demo = (
        encode_demographics(params, Tensor(batch.demographics))
        if batch.demographics is not None
        else zero
    )
    e_long = (
        encode_longitudinal(params, Tensor(batch.longitudinal), config)
        if batch.longitudinal is not None
        else zero
    )
    e_notes = encode_notes(params, Tensor(batch.notes)) if batch.notes is not None else zero
    return fuse(params, e_demo, e_long, e_notes)


def forward(params: ModelParams, config: ModelConfig, batch: ModalityBatch) -> tuple[Tensor, Tensor]:
    """Real-path forward: (gated embedding, class probabilities)."""
    e_adj = dynamic_relevance(forward_fused(params, config, batch), params.gate)
    return e_adj, classify(params, e_adj)


def forward_pair(params: ModelParams, config: ModelConfig, real: ModalityBatch,
                 synthetic: ModalityBatch) -> tuple[EmbeddingBundle, Tensor]:
    """Both paths under shared parameters; the classifier sees only the real
    gated embedding, so counterparts can never leak into predictions."""
    if real.n != synthetic.n:
        raise ContractError(f"paired batches differ in size: {real.n} vs {synthetic.n}")
    e = forward_fused(params, config, real)
    e_syn = forward_fused(params, config, synthetic)
    e_adj = dynamic_relevance(e, params.gate)
    e_adj_syn = dynamic_relevance(e_syn, params.gate)
    return EmbeddingBundle(e=e, e_syn=e_syn, e_adj=e_adj, e_adj_syn=e_adj_syn), classify(params, e_adj)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_model(path, params: ModelParams, config: ModelConfig, schema: CohortSchema) -> None:
    save_checkpoint(
        path,
        params,
        config=dataclasses.asdict(config),
        extra={"schema": dataclasses.asdict(schema)},
    )


def load_model(path) -> tuple[ModelParams, ModelConfig, CohortSchema]:
    doc = load_checkpoint(path)
    config = ModelConfig(**doc["config"])
    schema = CohortSchema(**doc["schema"])
    params = init_model_params(np.random.default_rng(0), schema, config)
    load_params_into(params, doc["params"])
    return params, config, schema
