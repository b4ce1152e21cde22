"""Layer, transformer block, and optimizer tests."""

import numpy as np
import pytest

from faircontrast import nn, tensor as T
from faircontrast.errors import ConfigError, ContractError
from faircontrast.nn import Adam, Tensor

from oracles import check_grads


RNG = np.random.default_rng(11)


def test_layer_norm_normalises_last_axis():
    p = nn.init_layer_norm(6)
    x = Tensor(RNG.standard_normal((4, 6)) * 3.0 + 1.0)
    out = nn.layer_norm(x, p)
    np.testing.assert_allclose(out.data.mean(axis=-1), 0.0, atol=1e-10)
    np.testing.assert_allclose(out.data.std(axis=-1), 1.0, atol=1e-3)


def test_attention_single_step_is_value_plus_residual():
    # with one time step the softmax over keys is exactly 1, so the sublayer
    # reduces to x + out_proj(value_proj(layer_norm(x)))
    d = 8
    p = nn.init_transformer_block(np.random.default_rng(3), d, 16)
    x = Tensor(RNG.standard_normal((1, d)))
    out = nn.attention_sublayer(x, p, heads=2)

    h = nn.layer_norm(x, p.norm_attn)
    v = h @ p.value
    expected = x + nn.linear(v, p.attn_out)
    np.testing.assert_allclose(out.data, expected.data, atol=1e-12)


def test_transformer_block_permutation_equivariant():
    # no positional encoding: permuting time steps permutes the output rows
    d, t_len = 8, 5
    p = nn.init_transformer_block(np.random.default_rng(5), d, 16)
    x = RNG.standard_normal((t_len, d))
    perm = np.random.default_rng(9).permutation(t_len)
    out = nn.transformer_block(Tensor(x), p, heads=2).data
    out_perm = nn.transformer_block(Tensor(x[perm]), p, heads=2).data
    np.testing.assert_allclose(out_perm, out[perm], atol=1e-10)


def test_transformer_block_batch_matches_loop():
    d = 8
    p = nn.init_transformer_block(np.random.default_rng(5), d, 16)
    xs = RNG.standard_normal((3, 6, d))
    batched = nn.transformer_block(Tensor(xs), p, heads=2).data
    for i in range(3):
        single = nn.transformer_block(Tensor(xs[i]), p, heads=2).data
        np.testing.assert_allclose(batched[i], single, atol=1e-12)


def test_transformer_block_heads_must_divide_dim():
    p = nn.init_transformer_block(np.random.default_rng(0), 8, 16)
    with pytest.raises(ConfigError):
        nn.transformer_block(Tensor(np.zeros((4, 8))), p, heads=3)


def test_gradcheck_transformer_block():
    # seed chosen so no ffn pre-activation sits near relu's kink, where
    # central differences would disagree with the subgradient
    d = 8
    p = nn.init_transformer_block(np.random.default_rng(21), d, 12)
    x = np.random.default_rng(4).standard_normal((4, d)) * 0.5
    names = sorted(nn.named_tensors(p))
    tensors = [nn.named_tensors(p)[n] for n in names]

    tx = Tensor(x, requires_grad=True)
    T.backward(nn.transformer_block(tx, p, heads=2).sum())

    arrays = [x] + [t.data.copy() for t in tensors]
    grads = [tx.grad] + [t.grad for t in tensors]

    def fn(arrs):
        p2 = nn.init_transformer_block(np.random.default_rng(0), d, 12)
        for name, arr in zip(names, arrs[1:]):
            nn.named_tensors(p2)[name].data = arr
        return float(nn.transformer_block(Tensor(arrs[0]), p2, heads=2).data.sum())

    check_grads(fn, arrays, grads)


def test_gradcheck_layer_norm():
    p = nn.init_layer_norm(5)
    x = RNG.standard_normal((3, 5))
    tx = Tensor(x, requires_grad=True)
    T.backward((nn.layer_norm(tx, p) * nn.layer_norm(tx, p)).sum())

    def fn(arrs):
        mu = arrs[0].mean(axis=-1, keepdims=True)
        c = arrs[0] - mu
        var = (c * c).mean(axis=-1, keepdims=True)
        h = c / np.sqrt(var + 1e-5)
        return float((h * h).sum())

    check_grads(fn, [x], [tx.grad])


def test_sinusoidal_positions_shape_and_range():
    table = nn.sinusoidal_positions(10, 8)
    assert table.shape == (10, 8)
    assert np.all(np.abs(table) <= 1.0)
    assert not np.allclose(table[0], table[1])


def test_named_tensors_paths_and_checkpoint_roundtrip(tmp_path):
    p = nn.init_mlp(np.random.default_rng(1), 4, 6, 2)
    names = nn.named_tensors(p)
    assert set(names) == {"hidden.weight", "hidden.bias", "out.weight", "out.bias"}

    path = tmp_path / "ckpt.json"
    nn.save_checkpoint(path, p, config={"hidden": 6})
    p2 = nn.init_mlp(np.random.default_rng(99), 4, 6, 2)
    assert not np.allclose(p2.hidden.weight.data, p.hidden.weight.data)
    doc = nn.load_checkpoint(path)
    nn.load_params_into(p2, doc["params"])
    np.testing.assert_array_equal(p2.hidden.weight.data, p.hidden.weight.data)
    assert doc["config"] == {"hidden": 6}


def test_load_params_rejects_mismatched_names():
    p = nn.init_mlp(np.random.default_rng(1), 4, 6, 2)
    payload = nn.params_to_dict(p)
    payload.pop("out.bias")
    with pytest.raises(ContractError):
        nn.load_params_into(p, payload)


def test_adam_reduces_quadratic():
    w = Tensor(np.array([5.0, -3.0]), requires_grad=True)
    opt = Adam([w], lr=0.1)
    for _ in range(200):
        loss = (w * w).sum()
        T.backward(loss)
        opt.step()
        opt.zero_grad()
    assert np.all(np.abs(w.data) < 1e-2)


def test_adam_first_step_size_is_lr():
    # with bias correction the first update has magnitude ~lr per coordinate
    w = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([w], lr=0.5)
    T.backward((w * Tensor([7.0])).sum())
    opt.step()
    assert w.data[0] == pytest.approx(1.0 - 0.5, abs=1e-6)


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(4)
        w = Tensor(rng.standard_normal(3), requires_grad=True)
        opt = Adam([w], lr=0.05)
        for _ in range(20):
            T.backward((w * w).sum())
            opt.step()
            opt.zero_grad()
        return w.data.copy()

    np.testing.assert_array_equal(run(), run())
