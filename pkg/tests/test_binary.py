import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitmosaic import binary
from bitmosaic.binary import (BConvLayer, BiLinearLayer, BinarizeError,
                              BitMatrix, bconv2d, bconv2d_reference,
                              bi_linear, bi_linear_reference, pack_bits,
                              sign_binarize_conv, sign_pm1, unpack_bits,
                              xnor_popcount_dot, xnor_popcount_matmul,
                              xnor_popcount_matmul_np)
from bitmosaic.tensor_ops import ShapeError


def test_sign_zero_maps_down():
    assert np.array_equal(sign_pm1(np.array([-2.0, 0.0, 3.0])),
                          np.array([-1, -1, 1], dtype=np.int8))


def test_rsign_tie_maps_down():
    a = np.array([[0.5, 0.5]])
    alpha = np.array([0.5, 0.4])
    assert np.array_equal(binary.rsign_pm1(a, alpha),
                          np.array([[-1, 1]], dtype=np.int8))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 300), st.integers(0, 2**31 - 1))
def test_pack_unpack_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    v = np.where(rng.random(n) > 0.5, 1, -1).astype(np.int8)
    assert np.array_equal(unpack_bits(pack_bits(v), n), v)


def test_pack_bits_rejects_non_pm1():
    with pytest.raises(BinarizeError):
        pack_bits(np.array([1, 0, -1]))


def test_pack_bits_lsb_first_encoding():
    # +1 at position 0 only -> word value 1
    v = -np.ones(64, dtype=np.int8)
    v[0] = 1
    assert pack_bits(v)[0] == np.uint64(1)
    v[1] = 1
    assert pack_bits(v)[0] == np.uint64(3)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**31 - 1))
def test_packed_dot_identity(n, seed):
    rng = np.random.default_rng(seed)
    a = np.where(rng.random(n) > 0.5, 1, -1)
    b = np.where(rng.random(n) > 0.5, 1, -1)
    got = xnor_popcount_dot(pack_bits(a), pack_bits(b), n)
    assert got == int(np.dot(a, b))


def test_dot_extremes():
    n = 70  # crosses a word boundary
    a = np.ones(n, dtype=np.int8)
    assert xnor_popcount_dot(pack_bits(a), pack_bits(a), n) == n
    assert xnor_popcount_dot(pack_bits(a), pack_bits(-a), n) == -n


def test_packed_matmul_variants_agree():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 300))
        a = pack_bits(np.where(rng.random((11, n)) > 0.5, 1, -1))
        b = pack_bits(np.where(rng.random((5, n)) > 0.5, 1, -1))
        jit = xnor_popcount_matmul(a, b, n)
        ref = xnor_popcount_matmul_np(a, b, n)
        assert np.array_equal(jit, ref)


def test_bitmatrix_roundtrip_and_readonly():
    w = np.random.default_rng(0).standard_normal((6, 40))
    bm = BitMatrix.from_float(w)
    assert np.array_equal(bm.to_pm1(), sign_pm1(w))
    with pytest.raises(ValueError):
        bm.words[0, 0] = np.uint64(0)


def _random_bi_linear(rng, c_in, c_out):
    return BiLinearLayer.from_float(rng.standard_normal((c_out, c_in)),
                                    rng.standard_normal(c_out),
                                    rng.standard_normal(c_in))


def test_bi_linear_packed_equals_reference_200_trials():
    # exact integer agreement pre-scale across random layer geometries
    rng = np.random.default_rng(42)
    for _ in range(200):
        c_in = int(rng.integers(1, 257))
        c_out = int(rng.integers(1, 257))
        layer = _random_bi_linear(rng, c_in, c_out)
        x = rng.standard_normal((int(rng.integers(1, 9)), c_in))
        ints = binary.bi_linear_int(layer, x)
        a = binary.rsign_pm1(x, layer.threshold).astype(np.int32)
        w = layer.weight_bits.to_pm1().astype(np.int32)
        assert np.array_equal(ints, a @ w.T)
        assert np.allclose(bi_linear(layer, x),
                           bi_linear_reference(layer, x), atol=1e-5)


def test_bi_linear_channel_mismatch():
    layer = _random_bi_linear(np.random.default_rng(0), 8, 4)
    with pytest.raises(ShapeError):
        bi_linear(layer, np.zeros((3, 7)))


def test_bi_linear_scale_is_per_output_channel():
    rng = np.random.default_rng(3)
    w = rng.standard_normal((4, 16))
    base = BiLinearLayer.from_float(w, np.ones(4), np.zeros(16))
    scaled = BiLinearLayer.from_float(w, np.array([1.0, 2.0, 0.5, -1.0]),
                                      np.zeros(16))
    x = rng.standard_normal((5, 16))
    y0, y1 = bi_linear(base, x), bi_linear(scaled, x)
    assert np.allclose(y1, y0 * np.array([1.0, 2.0, 0.5, -1.0]), atol=1e-6)


def test_conv_scale_is_mean_abs_weight():
    w = np.zeros((1, 1, 3, 3))
    w[0, 0] = np.array([[1.0, -2.0, 3.0], [0.0, 1.0, -1.0], [2.0, -2.0, 1.0]])
    layer = sign_binarize_conv(w)
    assert np.isclose(layer.scale[0], np.abs(w).mean())


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(3, 12),
       st.integers(3, 12), st.integers(0, 2**31 - 1))
def test_bconv2d_padding_matches_zero_pad_reference(c_in, c_out, h, w, seed):
    rng = np.random.default_rng(seed)
    layer = sign_binarize_conv(rng.standard_normal((c_out, c_in, 3, 3)),
                               rng.standard_normal(c_in), padding=1)
    x = rng.standard_normal((h, w, c_in)).astype(np.float32)
    assert np.allclose(bconv2d(layer, x), bconv2d_reference(layer, x),
                       atol=1e-4)


def test_bconv2d_stride_and_no_padding():
    rng = np.random.default_rng(11)
    layer = sign_binarize_conv(rng.standard_normal((5, 3, 3, 3)),
                               rng.standard_normal(3), stride=2)
    x = rng.standard_normal((9, 9, 3)).astype(np.float32)
    out = bconv2d(layer, x)
    assert out.shape == (4, 4, 5)
    assert np.allclose(out, bconv2d_reference(layer, x), atol=1e-4)


def test_bconv2d_depthwise_matches_reference():
    rng = np.random.default_rng(12)
    layer = sign_binarize_conv(rng.standard_normal((6, 1, 3, 3)),
                               rng.standard_normal(6), padding=1,
                               depthwise=True)
    x = rng.standard_normal((7, 8, 6)).astype(np.float32)
    assert np.allclose(bconv2d(layer, x), bconv2d_reference(layer, x),
                       atol=1e-4)


def test_bconv2d_rejects_small_input():
    layer = sign_binarize_conv(np.ones((1, 1, 3, 3)))
    with pytest.raises(ShapeError):
        bconv2d(layer, np.zeros((2, 2, 1), dtype=np.float32))
