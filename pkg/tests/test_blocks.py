from dataclasses import replace

import numpy as np
import pytest

from bitmosaic.blocks import (EmbedPosition, bi_mamba_forward,
                              bi_swin_forward, bmt_forward, window_partition,
                              window_reverse)
from bitmosaic.params import ParamStore
from bitmosaic.pipeline import ModelConfig, _build_bmt_block
from bitmosaic.tensor_ops import ShapeError


def make_block(seed=0, shift=False):
    cfg = ModelConfig(base_channels=16, d=8, m=4, window_size=4, embed_dim=6)
    store = ParamStore(seed=seed)
    blk = _build_bmt_block(store, "t", cfg, 16, shift=shift)
    store.finish()
    return blk


RNG = np.random.default_rng(100)
X = RNG.standard_normal((8, 12, 16)).astype(np.float32)
G = RNG.standard_normal(6).astype(np.float32)


def test_window_partition_roundtrip():
    x = RNG.standard_normal((8, 12, 5)).astype(np.float32)
    win = window_partition(x, 4)
    assert win.shape == (6, 16, 5)
    assert np.array_equal(window_reverse(win, 4, 8, 12), x)


def test_window_partition_needs_divisible_dims():
    with pytest.raises(ShapeError):
        window_partition(np.zeros((7, 8, 2)), 4)


def test_mamba_shape_and_determinism():
    blk = make_block().mamba
    y1 = bi_mamba_forward(blk, X[:, :, :8], G, EmbedPosition.B)
    y2 = bi_mamba_forward(blk, X[:, :, :8], G, EmbedPosition.B)
    assert y1.shape == (8, 12, 8)
    assert np.array_equal(y1, y2)
    assert np.all(np.isfinite(y1))


def test_mamba_zero_gate_is_exact_identity():
    blk = make_block().mamba
    gate = blk.gate_proj
    zeroed = replace(blk, gate_proj=replace(
        gate, scale=np.zeros_like(gate.scale)))
    y = bi_mamba_forward(zeroed, X[:, :, :8], G, EmbedPosition.ALL)
    assert np.array_equal(y, X[:, :, :8])


def test_mamba_channel_mismatch():
    blk = make_block().mamba
    with pytest.raises(ShapeError):
        bi_mamba_forward(blk, X, G, EmbedPosition.NONE)


def _probe(pos, g=G, seed=0):
    blk = make_block(seed).mamba
    probe = {}
    bi_mamba_forward(blk, X[:, :, :8], g, pos, probe=probe)
    return probe


def test_embed_position_targets_expected_projections():
    base = _probe(EmbedPosition.NONE)
    for pos, touched in [(EmbedPosition.B, {"B"}),
                         (EmbedPosition.C, {"C"}),
                         (EmbedPosition.DELTA, {"delta"}),
                         (EmbedPosition.ALL, {"B", "C", "delta"})]:
        got = _probe(pos)
        for key in base:
            stem = key.split(".")[1]
            same = np.array_equal(got[key], base[key])
            if stem in touched:
                assert not same, f"{pos} should perturb {key}"
            else:
                assert same, f"{pos} must not perturb {key}"


def test_embed_none_ignores_the_embedding():
    a = _probe(EmbedPosition.NONE, g=G)
    b = _probe(EmbedPosition.NONE, g=G + 10.0)
    for key in a:
        assert np.array_equal(a[key], b[key])


def test_swin_shape_determinism_and_padding():
    blk = make_block().swin
    x = RNG.standard_normal((7, 9, 8)).astype(np.float32)  # forces padding
    y1 = bi_swin_forward(blk, x)
    y2 = bi_swin_forward(blk, x)
    assert y1.shape == x.shape
    assert np.array_equal(y1, y2)
    assert np.all(np.isfinite(y1))


def test_swin_zero_projections_is_exact_identity():
    blk = make_block().swin
    zeroed = replace(
        blk,
        out_proj=replace(blk.out_proj, scale=np.zeros_like(blk.out_proj.scale)),
        mlp2=replace(blk.mlp2, scale=np.zeros_like(blk.mlp2.scale)))
    x = X[:, :, 8:]
    assert np.array_equal(bi_swin_forward(zeroed, x), x)


def test_swin_shift_changes_output():
    y_plain = bi_swin_forward(make_block(shift=False).swin, X[:, :, 8:])
    y_shift = bi_swin_forward(make_block(shift=True).swin, X[:, :, 8:])
    assert not np.array_equal(y_plain, y_shift)


def test_bmt_forward_is_residual_dual_branch():
    blk = make_block()
    probe = {}
    y = bmt_forward(blk, X, G, EmbedPosition.B, probe=probe)
    assert y.shape == X.shape
    assert probe["mamba_half"].shape == (8, 12, 8)
    assert probe["swin_half"].shape == (8, 12, 8)
    # zero fuse scale -> whole block is the identity
    zeroed = replace(blk, fuse=replace(blk.fuse,
                                       scale=np.zeros_like(blk.fuse.scale)))
    assert np.array_equal(bmt_forward(zeroed, X, G, EmbedPosition.B), X)


def test_bmt_forward_rejects_odd_channels():
    with pytest.raises(ShapeError):
        bmt_forward(make_block(), np.zeros((4, 4, 15), dtype=np.float32), G,
                    EmbedPosition.NONE)
