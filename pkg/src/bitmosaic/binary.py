"""Bit-packed {+1,-1} kernels: sign/thresholded-sign binarization,
LSB-first word packing, and the XNOR+popcount linear / convolution paths.

Conventions (shared by every oracle and file format in this package):
  * bit 1 encodes +1, bit 0 encodes -1
  * packing is LSB-first within a 64-bit word, rows padded to a word
    boundary; padding bits are masked out of every popcount
  * a ±1 dot product of length n is 2*popcount(XNOR(a, b)) - n
  * x <= threshold binarizes to -1 (ties map down)
"""

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .tensor_ops import ShapeError, check_finite

WORD_BITS = 64

# rows per chunk in the packed matmul; bounds the xnor temp to
# ~chunk * rows_b * nwords * 8 bytes
_MM_CHUNK = 512


class BinarizeError(ValueError):
    """Raised on inputs that violate the ±1 / packing contracts."""


def sign_pm1(w: np.ndarray) -> np.ndarray:
    """Elementwise sign into int8 {+1,-1}; zero maps to -1."""
    check_finite(w, "sign input")
    return np.where(w > 0, 1, -1).astype(np.int8)


def rsign_pm1(a: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Per-channel thresholded sign over the last axis: +1 iff a > alpha."""
    check_finite(a, "rsign input")
    alpha = np.asarray(alpha)
    if alpha.ndim != 1 or a.shape[-1] != alpha.shape[0]:
        raise ShapeError(
            f"threshold length {alpha.shape} vs channels {a.shape[-1]}")
    return np.where(a > alpha, 1, -1).astype(np.int8)


def _tail_mask(cols: int) -> np.ndarray:
    """uint64 mask words with ones exactly on the `cols` valid bits."""
    nwords = (cols + WORD_BITS - 1) // WORD_BITS
    mask = np.full(nwords, np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    rem = cols % WORD_BITS
    if rem:
        mask[-1] = np.uint64((1 << rem) - 1)
    return mask


def _pack_bool(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean [rows, n] matrix (True -> bit 1) into uint64 words."""
    packed = np.packbits(bits, axis=-1, bitorder="little")
    pad = (-packed.shape[-1]) % 8
    if pad:
        packed = np.pad(packed, [(0, 0), (0, pad)])
    return np.ascontiguousarray(packed).view(np.uint64)


def pack_bits(v: np.ndarray) -> np.ndarray:
    """Pack rows of ±1 values into uint64 words, LSB-first, +1 -> bit 1.

    Accepts [n] or [rows, n]; returns [nwords] or [rows, nwords].
    """
    v = np.asarray(v)
    if not np.all(np.abs(v) == 1):
        raise BinarizeError("pack_bits input must be exactly ±1")
    squeeze = v.ndim == 1
    mat = v[None, :] if squeeze else v
    words = _pack_bool(mat > 0)
    return words[0] if squeeze else words


def unpack_bits(words: np.ndarray, n: int) -> np.ndarray:
    """Inverse of pack_bits: words -> ±1 int8 of length n (last axis)."""
    squeeze = words.ndim == 1
    w = words[None, :] if squeeze else words
    by = np.ascontiguousarray(w).view(np.uint8)
    bits = np.unpackbits(by, axis=-1, bitorder="little")[..., :n]
    pm1 = np.where(bits > 0, 1, -1).astype(np.int8)
    return pm1[0] if squeeze else pm1


def xnor_popcount_dot(a: np.ndarray, b: np.ndarray, n: int) -> int:
    """±1 dot product of two packed rows of length n."""
    if a.shape != b.shape:
        raise ShapeError(f"packed row shapes differ: {a.shape} vs {b.shape}")
    xnor = np.bitwise_not(np.bitwise_xor(a, b)) & _tail_mask(n)
    agree = int(np.bitwise_count(xnor).sum())
    return 2 * agree - n


@njit(cache=True, parallel=True)
def _packed_matmul_kernel(a_words, b_words, mask, n):
    # SWAR popcount; numba has no bitwise_count
    m1 = np.uint64(0x5555555555555555)
    m2 = np.uint64(0x3333333333333333)
    m4 = np.uint64(0x0F0F0F0F0F0F0F0F)
    h01 = np.uint64(0x0101010101010101)
    na, nw = a_words.shape
    nb = b_words.shape[0]
    out = np.empty((na, nb), dtype=np.int32)
    for i in prange(na):
        for j in range(nb):
            agree = np.uint64(0)
            for k in range(nw):
                x = ~(a_words[i, k] ^ b_words[j, k]) & mask[k]
                x = x - ((x >> np.uint64(1)) & m1)
                x = (x & m2) + ((x >> np.uint64(2)) & m2)
                x = (x + (x >> np.uint64(4))) & m4
                agree += (x * h01) >> np.uint64(56)
            out[i, j] = 2 * np.int32(agree) - n
    return out


def xnor_popcount_matmul_np(a_words: np.ndarray, b_words: np.ndarray,
                            n: int) -> np.ndarray:
    """Pure-numpy packed matmul, chunked over the left rows to keep the
    xnor temporary bounded. Kept as a cross-check for the jitted kernel."""
    mask = _tail_mask(n)
    na = a_words.shape[0]
    out = np.empty((na, b_words.shape[0]), dtype=np.int32)
    for i0 in range(0, na, _MM_CHUNK):
        i1 = min(i0 + _MM_CHUNK, na)
        xnor = np.bitwise_not(
            np.bitwise_xor(a_words[i0:i1, None, :], b_words[None, :, :]))
        xnor &= mask
        agree = np.bitwise_count(xnor).sum(axis=-1, dtype=np.int32)
        out[i0:i1] = 2 * agree - n
    return out


def xnor_popcount_matmul(a_words: np.ndarray, b_words: np.ndarray,
                         n: int) -> np.ndarray:
    """All-pairs ±1 dot products: [Na, w] x [Nb, w] -> int32 [Na, Nb]."""
    return _packed_matmul_kernel(np.ascontiguousarray(a_words),
                                 np.ascontiguousarray(b_words),
                                 _tail_mask(n), n)


@dataclass(frozen=True)
class BitMatrix:
    """Bit-packed ±1 matrix, one row per output unit."""
    rows: int
    cols: int
    words: np.ndarray  # uint64 [rows, nwords]

    @classmethod
    def from_pm1(cls, mat: np.ndarray) -> "BitMatrix":
        mat = np.atleast_2d(mat)
        words = pack_bits(mat)
        words.setflags(write=False)
        return cls(mat.shape[0], mat.shape[1], words)

    @classmethod
    def from_float(cls, w: np.ndarray) -> "BitMatrix":
        return cls.from_pm1(sign_pm1(np.atleast_2d(w)))

    def to_pm1(self) -> np.ndarray:
        return unpack_bits(self.words, self.cols)


@dataclass(frozen=True)
class BiLinearLayer:
    """Binary linear layer: y_o = S_o * sum_i W^b_oi * RSign(x)_i."""
    weight_bits: BitMatrix      # [C_out, C_in]
    scale: np.ndarray           # [C_out] float32
    threshold: np.ndarray       # [C_in] float32

    @classmethod
    def from_float(cls, w: np.ndarray, scale: np.ndarray,
                   threshold: np.ndarray) -> "BiLinearLayer":
        check_finite(w, "bi-linear weights")
        check_finite(scale, "bi-linear scale")
        scale = np.asarray(scale, dtype=np.float32)
        threshold = np.asarray(threshold, dtype=np.float32)
        if scale.shape != (w.shape[0],) or threshold.shape != (w.shape[1],):
            raise ShapeError("scale/threshold lengths do not match weights")
        scale.setflags(write=False)
        threshold.setflags(write=False)
        return cls(BitMatrix.from_float(w), scale, threshold)

    @property
    def c_in(self) -> int:
        return self.weight_bits.cols

    @property
    def c_out(self) -> int:
        return self.weight_bits.rows


def bi_linear_int(layer: BiLinearLayer, x: np.ndarray) -> np.ndarray:
    """Pre-scale integer path: binarize activations, packed dot per output."""
    if x.shape[-1] != layer.c_in:
        raise ShapeError(f"input channels {x.shape[-1]} != {layer.c_in}")
    flat = x.reshape(-1, layer.c_in)
    check_finite(flat, "bi-linear input")
    a_bits = _pack_bool(flat > layer.threshold)
    ints = xnor_popcount_matmul(a_bits, layer.weight_bits.words, layer.c_in)
    return ints.reshape(x.shape[:-1] + (layer.c_out,))


def bi_linear(layer: BiLinearLayer, x: np.ndarray) -> np.ndarray:
    return (bi_linear_int(layer, x) * layer.scale).astype(np.float32)


def bi_linear_reference(layer: BiLinearLayer, x: np.ndarray) -> np.ndarray:
    """Float ±1 path (unpacked matmul); the oracle the packed path must
    match exactly pre-scale."""
    a = rsign_pm1(x.reshape(-1, layer.c_in), layer.threshold)
    w = layer.weight_bits.to_pm1()
    ints = a.astype(np.int32) @ w.astype(np.int32).T
    y = ints * layer.scale
    return y.reshape(x.shape[:-1] + (layer.c_out,)).astype(np.float32)


@dataclass(frozen=True)
class BConvLayer:
    """Binary 2D convolution; scale fixed at construction from the float
    weights (mean of |w| per output channel), not independently learned."""
    weight_bits: BitMatrix      # [C_out, C_in*k*k] (depthwise: [C, k*k])
    scale: np.ndarray           # [C_out]
    threshold: np.ndarray       # [C_in]
    kernel_size: int
    stride: int = 1
    padding: int = 0
    depthwise: bool = False

    @property
    def c_out(self) -> int:
        return self.weight_bits.rows

    @property
    def c_in(self) -> int:
        return len(self.threshold)


def sign_binarize_conv(w: np.ndarray, threshold: np.ndarray | None = None,
                       stride: int = 1, padding: int = 0,
                       depthwise: bool = False) -> BConvLayer:
    """Build a BConvLayer from float weights [C_out, C_in, k, k].

    Scale per output channel is mean(|w|): the raw mean collapses for
    symmetric weights, so the magnitude mean is used (XNOR-Net style).
    Depthwise weights are [C, 1, k, k].
    """
    check_finite(w, "conv weights")
    c_out, c_in_g, k, k2 = w.shape
    if k != k2:
        raise ShapeError("only square kernels supported")
    if depthwise and c_in_g != 1:
        raise ShapeError("depthwise conv expects [C, 1, k, k] weights")
    flat = w.reshape(c_out, -1)
    scale = np.abs(flat).mean(axis=1).astype(np.float32)
    c_in = c_out if depthwise else c_in_g
    if threshold is None:
        threshold = np.zeros(c_in, dtype=np.float32)
    threshold = np.asarray(threshold, dtype=np.float32)
    if threshold.shape != (c_in,):
        raise ShapeError("threshold length must equal input channels")
    scale.setflags(write=False)
    threshold.setflags(write=False)
    return BConvLayer(BitMatrix.from_float(flat), scale, threshold,
                      kernel_size=k, stride=stride, padding=padding,
                      depthwise=depthwise)


def _im2col(a: np.ndarray, k: int, stride: int, padding: int,
            pad_value: int) -> tuple[np.ndarray, np.ndarray]:
    """Patches [L, C*k*k] of a ±1 int8 map with the pad fill given, plus a
    {0,1} pad-position mask of the same shape. Patch order is (C, ky, kx),
    matching sign_binarize_conv's weight flattening."""
    h, w, c = a.shape
    padded = np.pad(a, [(padding, padding), (padding, padding), (0, 0)],
                    constant_values=pad_value)
    is_pad = np.zeros(padded.shape[:2], dtype=np.int8)
    if padding:
        is_pad[:padding] = is_pad[-padding:] = 1
        is_pad[:, :padding] = is_pad[:, -padding:] = 1
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    win = win[::stride, ::stride]                      # [H', W', C, k, k]
    pwin = np.lib.stride_tricks.sliding_window_view(is_pad, (k, k))
    pwin = pwin[::stride, ::stride]                    # [H', W', k, k]
    hp, wp = win.shape[:2]
    patches = win.reshape(hp * wp, c * k * k)
    pad_mask = np.broadcast_to(pwin[:, :, None, :, :],
                               (hp, wp, c, k, k)).reshape(hp * wp, c * k * k)
    return patches, pad_mask


def bconv2d_int(layer: BConvLayer, x: np.ndarray) -> np.ndarray:
    """Pre-scale integer conv: packed XNOR dot per window, with the zero
    padding compensated arithmetically (pad pixels contribute 0 to the ±1
    dot, not -1)."""
    h, w, c = x.shape
    if c != layer.c_in:
        raise ShapeError(f"input channels {c} != {layer.c_in}")
    k, s, p = layer.kernel_size, layer.stride, layer.padding
    if h + 2 * p < k or w + 2 * p < k:
        raise ShapeError("spatial dims smaller than kernel")
    a = rsign_pm1(x, layer.threshold)
    hp = (h + 2 * p - k) // s + 1
    wp = (w + 2 * p - k) // s + 1
    w_pm1 = layer.weight_bits.to_pm1().astype(np.int32)
    if layer.depthwise:
        out = np.empty((hp * wp, c), dtype=np.int32)
        for ch in range(c):
            patches, pad_mask = _im2col(a[:, :, ch:ch + 1], k, s, p, -1)
            full = patches.astype(np.int32) @ w_pm1[ch]
            out[:, ch] = full + pad_mask.astype(np.int32) @ w_pm1[ch]
        return out.reshape(hp, wp, c)
    patches, pad_mask = _im2col(a, k, s, p, -1)
    a_bits = pack_bits(patches)
    full = xnor_popcount_matmul(a_bits, layer.weight_bits.words,
                                patches.shape[1])
    # pad entries were coded -1 in the packed dot; true contribution is 0,
    # so add back sum of weights over pad positions
    if p:
        corr = pad_mask.astype(np.int32) @ w_pm1.T
        full = full + corr
    return full.reshape(hp, wp, layer.c_out)


def bconv2d(layer: BConvLayer, x: np.ndarray) -> np.ndarray:
    return (bconv2d_int(layer, x) * layer.scale).astype(np.float32)


def bconv2d_reference(layer: BConvLayer, x: np.ndarray) -> np.ndarray:
    """Float oracle: true zero padding of the ±1 activation map, dense dot."""
    a = rsign_pm1(x, layer.threshold).astype(np.float32)
    k, s, p = layer.kernel_size, layer.stride, layer.padding
    patches, _ = _im2col_f(a, k, s, p)
    w = layer.weight_bits.to_pm1().astype(np.float32)
    hp = (x.shape[0] + 2 * p - k) // s + 1
    wp = (x.shape[1] + 2 * p - k) // s + 1
    if layer.depthwise:
        pk = patches.reshape(-1, x.shape[2], k * k)
        out = np.einsum("lck,ck->lc", pk, w)
    else:
        out = patches @ w.T
    return (out * layer.scale).reshape(hp, wp, layer.c_out).astype(np.float32)


def _im2col_f(a: np.ndarray, k: int, stride: int, padding: int) -> tuple:
    padded = np.pad(a, [(padding, padding), (padding, padding), (0, 0)])
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    win = win[::stride, ::stride]
    hp, wp, c = win.shape[:3]
    return win.reshape(hp * wp, c * k * k), None
