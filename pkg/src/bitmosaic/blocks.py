"""Block assemblies: the binarized Mamba branch, the binarized Swin
branch, and the dual-branch block that fuses them.

All projections are binary (XNOR+popcount); the scan recurrence, softmax
attention, norms, and gating stay full precision. A global scalar derived
from the visual embedding can be injected into the B / C / delta
projections through an extra concat slot; the slot is fed zero when the
corresponding position is disabled, which makes the "none" setting the
exact degenerate case of the others.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .binary import BConvLayer, BiLinearLayer, bconv2d, bi_linear
from .scan import (SCAN_KINDS, apply_scan, discretize, invert_scan,
                   merge_scans, selective_scan)
from .tensor_ops import ShapeError, layer_norm, silu, softmax, softplus

DELTA_FLOOR = 1e-6  # softplus underflow guard; discretize requires delta > 0


class EmbedPosition(enum.Enum):
    NONE = "none"
    B = "b"
    C = "c"
    DELTA = "delta"
    ALL = "all"

    def targets_b(self) -> bool:
        return self in (EmbedPosition.B, EmbedPosition.ALL)

    def targets_c(self) -> bool:
        return self in (EmbedPosition.C, EmbedPosition.ALL)

    def targets_delta(self) -> bool:
        return self in (EmbedPosition.DELTA, EmbedPosition.ALL)


@dataclass(frozen=True)
class SsmDirection:
    """Per-direction scan parameters."""
    kind: str
    c_proj: BiLinearLayer       # (d+1) -> m
    delta_proj: BiLinearLayer   # (d+1) -> d
    b_proj: BiLinearLayer       # (d+1) -> m
    A_log: np.ndarray           # [d, m]; A = -exp(A_log), so A_bar in (0, 1]
    D: np.ndarray               # [d]


@dataclass(frozen=True)
class BiMambaBlock:
    """Binarized Mamba block. Hidden dim equals the channel count so the
    gated output adds straight onto the residual."""
    channels: int
    state_dim: int
    in_proj: BiLinearLayer          # C -> C
    dw_conv: BConvLayer             # depthwise 3x3
    gate_proj: BiLinearLayer        # C -> C
    directions: tuple[SsmDirection, ...]
    norm_gain: np.ndarray
    norm_bias: np.ndarray
    adapter: BiLinearLayer          # embed_dim -> 1


def _augment(seq: np.ndarray, slot: float) -> np.ndarray:
    col = np.full((seq.shape[0], 1), slot, dtype=seq.dtype)
    return np.concatenate([seq, col], axis=1)


def bi_mamba_forward(block: BiMambaBlock, x: np.ndarray, g: np.ndarray,
                     pos: EmbedPosition, probe: dict | None = None) -> np.ndarray:
    """x [H, W, C] -> [H, W, C] with residual. `probe`, when given, is
    filled with the per-direction projection activations."""
    h, w, c = x.shape
    if c != block.channels:
        raise ShapeError(f"channels {c} != block width {block.channels}")
    s_val = float(bi_linear(block.adapter, g[None, :])[0, 0])

    xp = silu(bconv2d(block.dw_conv, bi_linear(block.in_proj, x)))
    outputs = []
    for d_idx, direc in enumerate(block.directions):
        xi = apply_scan(direc.kind, xp)
        ci = bi_linear(direc.c_proj,
                       _augment(xi, s_val if pos.targets_c() else 0.0))
        delta = softplus(bi_linear(
            direc.delta_proj,
            _augment(xi, s_val if pos.targets_delta() else 0.0)))
        delta = np.maximum(delta, DELTA_FLOOR)
        bi = bi_linear(direc.b_proj,
                       _augment(xi, s_val if pos.targets_b() else 0.0))
        if probe is not None:
            probe[f"dir{d_idx}.C"] = ci
            probe[f"dir{d_idx}.delta"] = delta
            probe[f"dir{d_idx}.B"] = bi
        a_bar, b_bar = discretize(-np.exp(direc.A_log), bi, delta)
        yi = selective_scan(a_bar, b_bar, ci, direc.D, xi)
        outputs.append(invert_scan(direc.kind, yi, h, w))
    merged = merge_scans(outputs, block.norm_gain, block.norm_bias)
    gated = merged * silu(bi_linear(block.gate_proj, x))
    return x + gated.astype(np.float32)


@dataclass(frozen=True)
class BiSwinBlock:
    """Binarized Swin block: window attention with binary projections and
    full-precision softmax, plus a binary two-layer MLP."""
    channels: int
    window_size: int
    n_heads: int
    shift: bool
    qkv_proj: BiLinearLayer     # C -> 3C
    out_proj: BiLinearLayer     # C -> C
    mlp1: BiLinearLayer         # C -> 2C
    mlp2: BiLinearLayer         # 2C -> C
    norm1_gain: np.ndarray
    norm1_bias: np.ndarray
    norm2_gain: np.ndarray
    norm2_bias: np.ndarray


def window_partition(x: np.ndarray, ws: int) -> np.ndarray:
    """[H, W, C] -> [nW, ws*ws, C]; H, W must be multiples of ws."""
    h, w, c = x.shape
    if h % ws or w % ws:
        raise ShapeError("window_partition needs dims divisible by window")
    x = x.reshape(h // ws, ws, w // ws, ws, c)
    return x.transpose(0, 2, 1, 3, 4).reshape(-1, ws * ws, c)


def window_reverse(win: np.ndarray, ws: int, h: int, w: int) -> np.ndarray:
    c = win.shape[-1]
    x = win.reshape(h // ws, w // ws, ws, ws, c)
    return x.transpose(0, 2, 1, 3, 4).reshape(h, w, c)


def _shift_mask(h: int, w: int, ws: int, shift: int) -> np.ndarray:
    """Standard shifted-window attention mask: -inf between pixels that came
    from different image regions after the roll."""
    region = np.zeros((h, w), dtype=np.int32)
    cnt = 0
    for hs in (slice(0, -ws), slice(-ws, -shift), slice(-shift, None)):
        for wsl in (slice(0, -ws), slice(-ws, -shift), slice(-shift, None)):
            region[hs, wsl] = cnt
            cnt += 1
    ids = window_partition(region[:, :, None].astype(np.float32), ws)[:, :, 0]
    diff = ids[:, :, None] != ids[:, None, :]
    return np.where(diff, -1e9, 0.0).astype(np.float32)


def _pad_to_multiple(x: np.ndarray, ws: int) -> np.ndarray:
    h, w, _ = x.shape
    ph, pw = (-h) % ws, (-w) % ws
    if ph or pw:
        x = np.pad(x, [(0, ph), (0, pw), (0, 0)], mode="reflect")
    return x


def bi_swin_forward(block: BiSwinBlock, x: np.ndarray) -> np.ndarray:
    h0, w0, c = x.shape
    if c != block.channels:
        raise ShapeError(f"channels {c} != block width {block.channels}")
    ws = block.window_size
    x = _pad_to_multiple(x, ws)
    h, w, _ = x.shape
    shift = ws // 2 if (block.shift and min(h, w) > ws) else 0

    t = layer_norm(x, block.norm1_gain, block.norm1_bias)
    if shift:
        t = np.roll(t, (-shift, -shift), axis=(0, 1))
    tokens = window_partition(t, ws)                     # [nW, T, C]
    nw, ntok, _ = tokens.shape
    qkv = bi_linear(block.qkv_proj, tokens)
    q, k, v = np.split(qkv, 3, axis=-1)
    nh = block.n_heads
    dh = c // nh

    def heads(a):
        return a.reshape(nw, ntok, nh, dh).transpose(0, 2, 1, 3)

    q, k, v = heads(q), heads(k), heads(v)
    attn = np.einsum("whtd,whsd->whts", q, k) / np.sqrt(dh)
    if shift:
        attn = attn + _shift_mask(h, w, ws, shift)[:, None, :, :]
    attn = softmax(attn, axis=-1)
    out = np.einsum("whts,whsd->whtd", attn, v)
    out = out.transpose(0, 2, 1, 3).reshape(nw, ntok, c)
    out = bi_linear(block.out_proj, out)
    out = window_reverse(out, ws, h, w)
    if shift:
        out = np.roll(out, (shift, shift), axis=(0, 1))
    x = x + out

    t = layer_norm(x, block.norm2_gain, block.norm2_bias)
    x = x + bi_linear(block.mlp2, silu(bi_linear(block.mlp1, t)))
    return x[:h0, :w0].astype(np.float32)


@dataclass(frozen=True)
class BmtBlock:
    """Dual-branch block: Mamba on one channel half, Swin on the other,
    binary fusion, residual over the whole block."""
    channels: int
    mamba: BiMambaBlock
    swin: BiSwinBlock
    fuse: BiLinearLayer  # C -> C


def bmt_forward(block: BmtBlock, x: np.ndarray, g: np.ndarray,
                pos: EmbedPosition, probe: dict | None = None) -> np.ndarray:
    h, w, c = x.shape
    if c % 2:
        raise ShapeError("dual-branch block needs an even channel count")
    half = c // 2
    ym = bi_mamba_forward(block.mamba, x[:, :, :half], g, pos, probe=probe)
    ys = bi_swin_forward(block.swin, x[:, :, half:])
    if probe is not None:
        probe["mamba_half"] = ym
        probe["swin_half"] = ys
    fused = bi_linear(block.fuse, np.concatenate([ym, ys], axis=-1))
    return (x + fused).astype(np.float32)
