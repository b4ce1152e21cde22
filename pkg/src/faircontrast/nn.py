"""Network building blocks and the optimizer, on top of the tensor engine.

Parameter containers are plain dataclasses of Tensors so checkpointing can
walk them by field name.  Initialisation is Glorot-uniform from a caller
supplied numpy Generator, which keeps runs reproducible bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError, DimensionError
from .tensor import Tensor
from . import tensor as T


@dataclass
class LinearParams:
    weight: Tensor  # [fan_in, fan_out]
    bias: Tensor  # [fan_out]


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int) -> LinearParams:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    weight = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    return LinearParams(
        weight=Tensor(weight, requires_grad=True),
        bias=Tensor(np.zeros(fan_out), requires_grad=True),
    )


def linear(x: Tensor, p: LinearParams) -> Tensor:
    """Affine map over the last axis: x @ W + b."""
    return x @ p.weight + p.bias


@dataclass
class MlpParams:
    hidden: LinearParams
    out: LinearParams


def init_mlp(rng: np.random.Generator, fan_in: int, hidden: int, fan_out: int) -> MlpParams:
    return MlpParams(hidden=init_linear(rng, fan_in, hidden), out=init_linear(rng, hidden, fan_out))


def mlp(x: Tensor, p: MlpParams) -> Tensor:
    """Two affine layers with a ReLU between them."""
    return linear(T.relu(linear(x, p.hidden)), p.out)


@dataclass
class LayerNormParams:
    gain: Tensor  # [d]
    bias: Tensor  # [d]


def init_layer_norm(d: int) -> LayerNormParams:
    return LayerNormParams(
        gain=Tensor(np.ones(d), requires_grad=True),
        bias=Tensor(np.zeros(d), requires_grad=True),
    )


def layer_norm(x: Tensor, p: LayerNormParams, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean and unit variance, then rescale."""
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return (centered / (var + eps).sqrt()) * p.gain + p.bias


@dataclass
class TransformerBlockParams:
    # query/key/value projections carry no bias: a key bias is exactly inert
    # through the softmax, and an inert parameter would defeat gradient checks
    norm_attn: LayerNormParams
    query: Tensor  # [d, d]
    key: Tensor  # [d, d]
    value: Tensor  # [d, d]
    attn_out: LinearParams
    norm_ff: LayerNormParams
    ff_hidden: LinearParams
    ff_out: LinearParams


def _init_weight(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True)


def init_transformer_block(rng: np.random.Generator, d: int, ff_hidden: int) -> TransformerBlockParams:
    return TransformerBlockParams(
        norm_attn=init_layer_norm(d),
        query=_init_weight(rng, d, d),
        key=_init_weight(rng, d, d),
        value=_init_weight(rng, d, d),
        attn_out=init_linear(rng, d, d),
        norm_ff=init_layer_norm(d),
        ff_hidden=init_linear(rng, d, ff_hidden),
        ff_out=init_linear(rng, ff_hidden, d),
    )


def _split_heads(x: Tensor, heads: int) -> Tensor:
    # [N, T, d] -> [N, heads, T, d/heads]
    n, t_len, d = x.shape
    return x.reshape((n, t_len, heads, d // heads)).transpose((0, 2, 1, 3))


def attention_sublayer(x: Tensor, p: TransformerBlockParams, heads: int) -> Tensor:
    """Pre-norm multi-head self-attention with a residual connection.

    No positional information is injected here; the sublayer is permutation
    equivariant over time steps.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = x.reshape((1,) + x.shape)
    if x.ndim != 3:
        raise DimensionError(f"attention input must be [T, d] or [N, T, d], got {x.shape}")
    n, t_len, d = x.shape
    if heads < 1 or d % heads:
        raise ConfigError(f"model dim {d} is not divisible by heads={heads}")
    head_dim = d // heads

    h = layer_norm(x, p.norm_attn)
    q = _split_heads(h @ p.query, heads)
    k = _split_heads(h @ p.key, heads)
    v = _split_heads(h @ p.value, heads)

    scores = T.scale(q @ k.transpose((0, 1, 3, 2)), 1.0 / np.sqrt(head_dim))
    weights = T.softmax(scores, axis=-1)
    context = (weights @ v).transpose((0, 2, 1, 3)).reshape((n, t_len, d))
    out = x + linear(context, p.attn_out)
    return out.reshape((t_len, d)) if squeeze else out


def feedforward_sublayer(x: Tensor, p: TransformerBlockParams) -> Tensor:
    return x + linear(T.relu(linear(layer_norm(x, p.norm_ff), p.ff_hidden)), p.ff_out)


def transformer_block(x: Tensor, p: TransformerBlockParams, heads: int) -> Tensor:
    """One pre-norm encoder block: self-attention + residual, then FFN + residual."""
    return feedforward_sublayer(attention_sublayer(x, p, heads), p)


def sinusoidal_positions(t_len: int, d: int) -> np.ndarray:
    """Classic fixed sine/cosine position table, [t_len, d]."""
    pos = np.arange(t_len, dtype=np.float64)[:, None]
    i = np.arange(d, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * np.floor(i / 2.0) / d)
    table = np.where(i % 2 == 0, np.sin(angles), np.cos(angles))
    return table


# ---------------------------------------------------------------------------
# parameter traversal / checkpoints
# ---------------------------------------------------------------------------


def named_tensors(obj, prefix: str = "") -> dict[str, Tensor]:
    """Walk dataclasses / dicts / sequences and collect Tensors by dotted path."""
    found: dict[str, Tensor] = {}
    if isinstance(obj, Tensor):
        found[prefix or "value"] = obj
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for field in dataclasses.fields(obj):
            sub = getattr(obj, field.name)
            key = f"{prefix}.{field.name}" if prefix else field.name
            found.update(named_tensors(sub, key))
    elif isinstance(obj, dict):
        for name in sorted(obj):
            key = f"{prefix}.{name}" if prefix else str(name)
            found.update(named_tensors(obj[name], key))
    elif isinstance(obj, (list, tuple)):
        for i, sub in enumerate(obj):
            found.update(named_tensors(sub, f"{prefix}[{i}]"))
    return found


def trainable_tensors(obj) -> list[Tensor]:
    return [t for t in named_tensors(obj).values() if t.requires_grad]


def params_to_dict(obj) -> dict:
    return {
        name: {"shape": list(t.shape), "data": t.data.reshape(-1).tolist()}
        for name, t in named_tensors(obj).items()
    }


def load_params_into(obj, payload: dict) -> None:
    """Overwrite every Tensor in ``obj`` from a params_to_dict payload."""
    tensors = named_tensors(obj)
    missing = sorted(set(tensors) - set(payload))
    extra = sorted(set(payload) - set(tensors))
    if missing or extra:
        raise ContractError(f"checkpoint mismatch: missing={missing} unexpected={extra}")
    for name, t in tensors.items():
        entry = payload[name]
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != t.data.shape:
            raise DimensionError(f"checkpoint tensor {name} has shape {arr.shape}, expected {t.data.shape}")
        t.data = arr


def save_checkpoint(path, params, config: dict, extra: dict | None = None) -> None:
    doc = {"config": config, "params": params_to_dict(params)}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_checkpoint(path) -> dict:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


class Adam:
    """Adam with the usual defaults (0.9 / 0.999, eps 1e-8) and bias correction."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / (1.0 - b1**self.t)
            v_hat = self.v[i] / (1.0 - b2**self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
