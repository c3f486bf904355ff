"""Compact binarized visual encoder for single-channel Quad Bayer RAW.

Four stride-2 binary convolutions, global average pooling, and a binary
head. Ships with deterministic seeded weights (no pretraining in this
package); a raw float32 file can substitute a real embedding.

Per-channel centering before each interior conv keeps the zero-threshold
binarization informative (post-activation features are one-sided, so an
uncentered sign would saturate).
"""

import os
from dataclasses import dataclass

import numpy as np

from .binary import BConvLayer, BiLinearLayer, bconv2d, bi_linear
from .params import ParamStore, make_bconv, make_bi_linear
from .tensor_ops import ShapeError, check_finite, silu

STEM_WIDTHS = (16, 32, 64, 64)


class FrozenEncoderError(RuntimeError):
    pass


@dataclass(frozen=True)
class VisualEncoder:
    stem: tuple[BConvLayer, ...]
    head: BiLinearLayer
    embed_dim: int
    frozen: bool = True

    def set_weights(self, *_args, **_kw):
        if self.frozen:
            raise FrozenEncoderError("encoder is frozen; weights are immutable")
        raise NotImplementedError


def build_visual_encoder(store: ParamStore, embed_dim: int,
                         prefix: str = "visual") -> VisualEncoder:
    stem = []
    c_prev = 1
    for i, c in enumerate(STEM_WIDTHS):
        stem.append(make_bconv(store, f"{prefix}.stem{i}", c_prev, c, 3,
                               stride=2, padding=1))
        c_prev = c
    head = make_bi_linear(store, f"{prefix}.head", c_prev, embed_dim)
    return VisualEncoder(tuple(stem), head, embed_dim)


def encode(enc: VisualEncoder, raw: np.ndarray) -> np.ndarray:
    """[H, W, 1] in [0, 1] -> deterministic embedding [embed_dim]."""
    if raw.ndim != 3 or raw.shape[2] != 1:
        raise ShapeError(f"encoder expects [H, W, 1], got {raw.shape}")
    check_finite(raw, "encoder input")
    x = raw.astype(np.float32) - 0.5  # center [0,1] around the threshold
    for conv in enc.stem:
        x = silu(bconv2d(conv, x))
        x = x - x.mean(axis=(0, 1))   # keep the next sign split informative
    pooled = x.mean(axis=(0, 1))
    g = bi_linear(enc.head, pooled[None, :])[0]
    check_finite(g, "embedding")
    return g


def load_external_embedding(path: str, embed_dim: int) -> np.ndarray:
    if not os.path.exists(path):
        raise FileNotFoundError(f"embedding file not found: {path}")
    g = np.fromfile(path, dtype="<f4")
    if g.shape[0] != embed_dim:
        raise ShapeError(
            f"embedding length {g.shape[0]} != embed_dim {embed_dim} ({path})")
    return g.astype(np.float32)
