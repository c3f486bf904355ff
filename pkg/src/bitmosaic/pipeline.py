"""Two-stage demosaicing network: a binary-conv inpainting subnet, a
U-shaped main net of dual-branch blocks with full-precision down/up
sampling, plus the weight-container file format and full-image inference
(whole or tiled).
"""

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .binary import (BConvLayer, BiLinearLayer, BitMatrix, bconv2d,
                     bi_linear)
from .blocks import (BiMambaBlock, BiSwinBlock, BmtBlock, EmbedPosition,
                     SsmDirection, bmt_forward)
from .encoder import VisualEncoder, build_visual_encoder, encode
from .params import (ParamStore, WeightFormatError, make_bconv,
                     make_bi_linear, make_norm)
from .scan import SCAN_KINDS
from .tensor_ops import ShapeError, check_finite

WEIGHT_MAGIC = b"BMTW"
WEIGHT_VERSION = 1
DOWN_FACTOR = 4  # two stride-2 stages


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters. The Mamba hidden dim per block always
    equals its branch width (the gated output feeds the residual
    directly), so `d` pins the base-stage branch width."""
    base_channels: int = 224
    depths: tuple[int, int, int] = (1, 1, 1)   # enc0, enc1, bottleneck
    d: int = 112                               # base-stage Mamba hidden dim
    m: int = 4                                 # SSM state dim
    n_scans: int = 4
    window_size: int = 4
    embed_dim: int = 64
    embed_position: EmbedPosition = EmbedPosition.B
    n1_depth: int = 4
    n1_channels: int = 32
    fp_updown: bool = True                     # must stay full precision
    mamba_precision: str = "binary"            # "binary" | "float" (accounting)

    def __post_init__(self):
        if self.base_channels % 2:
            raise ValueError("base_channels must be even")
        if self.d != self.base_channels // 2:
            raise ValueError("d must equal base_channels // 2 "
                             "(Mamba width is the branch width)")
        if not 1 <= self.n_scans <= len(SCAN_KINDS):
            raise ValueError(f"n_scans must be in 1..{len(SCAN_KINDS)}")
        if self.mamba_precision not in ("binary", "float"):
            raise ValueError("mamba_precision must be 'binary' or 'float'")
        if not self.fp_updown:
            raise ValueError("only full-precision up/down sampling is supported")
        for v in (self.base_channels, self.m, self.window_size,
                  self.embed_dim, self.n1_depth, self.n1_channels):
            if v <= 0:
                raise ValueError("config values must be positive")

    @property
    def stage_channels(self) -> tuple[int, int, int]:
        # space-to-depth quadruples channels per down step; the bottleneck
        # is reduced to 8c by a binary 1x1 to keep its Mamba share in check
        c = self.base_channels
        return (c, 4 * c, 8 * c)


def parse_config_file(path: str) -> ModelConfig:
    """Human-readable `key = value` config text."""
    kw = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key == "depths":
                kw[key] = tuple(int(v) for v in val.split(","))
            elif key == "embed_position":
                kw[key] = EmbedPosition(val.lower())
            elif key in ("mamba_precision",):
                kw[key] = val
            elif key == "fp_updown":
                kw[key] = val.lower() in ("1", "true", "yes")
            else:
                kw[key] = int(val)
    return ModelConfig(**kw)


def format_config(cfg: ModelConfig) -> str:
    lines = []
    for name in ("base_channels", "depths", "d", "m", "n_scans",
                 "window_size", "embed_dim", "embed_position", "n1_depth",
                 "n1_channels", "fp_updown", "mamba_precision"):
        v = getattr(cfg, name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, EmbedPosition):
            v = v.value
        lines.append(f"{name} = {v}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# full-precision helpers

@dataclass(frozen=True)
class FpConv:
    weight: np.ndarray  # [C_out, C_in, k, k]
    bias: np.ndarray    # [C_out]
    stride: int = 1
    padding: int = 0


def fp_conv2d(layer: FpConv, x: np.ndarray) -> np.ndarray:
    c_out, c_in, k, _ = layer.weight.shape
    if x.shape[2] != c_in:
        raise ShapeError(f"fp conv channels {x.shape[2]} != {c_in}")
    p, s = layer.padding, layer.stride
    padded = np.pad(x, [(p, p), (p, p), (0, 0)])
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    win = win[::s, ::s]                               # [H', W', C, k, k]
    out = np.tensordot(win, layer.weight, axes=([2, 3, 4], [1, 2, 3]))
    return (out + layer.bias).astype(np.float32)


def pixel_shuffle(x: np.ndarray, r: int) -> np.ndarray:
    h, w, c = x.shape
    if c % (r * r):
        raise ShapeError("pixel_shuffle channel count not divisible by r^2")
    co = c // (r * r)
    x = x.reshape(h, w, r, r, co)
    return x.transpose(0, 2, 1, 3, 4).reshape(h * r, w * r, co)


def space_to_depth(x: np.ndarray, r: int) -> np.ndarray:
    """Exact inverse of pixel_shuffle; the full-precision, parameter-free
    downsampling path."""
    h, w, c = x.shape
    if h % r or w % r:
        raise ShapeError("space_to_depth needs dims divisible by r")
    x = x.reshape(h // r, r, w // r, r, c)
    return x.transpose(0, 2, 1, 3, 4).reshape(h // r, w // r, r * r * c)


def make_fp_conv(store: ParamStore, name: str, c_in: int, c_out: int, k: int,
                 stride: int = 1, padding: int = 0) -> FpConv:
    fan_in = c_in * k * k
    w = store.get(f"{name}.weight", (c_out, c_in, k, k), value=fan_in ** -0.5)
    b = store.get(f"{name}.bias", (c_out,), init="const", value=0.0)
    return FpConv(w, b, stride=stride, padding=padding)


# ---------------------------------------------------------------------------
# model assembly

@dataclass(frozen=True)
class InpaintNet:
    conv_in: FpConv
    blocks: tuple[BConvLayer, ...]
    amps: np.ndarray        # per-block full-precision residual amplitude
    conv_out: FpConv


@dataclass(frozen=True)
class MainNet:
    """U-shape with space-to-depth down / pixel-shuffle up (both FP and
    parameter-free); skip connections concatenate and reduce via FP 1x1."""
    conv_in: FpConv
    enc_stages: tuple[tuple[BmtBlock, ...], ...]
    bottleneck: tuple[BmtBlock, ...]
    reduce2: BiLinearLayer            # 16c -> 8c after the second down step
    expand2: BiLinearLayer            # 8c -> 16c before the first up step
    skips: tuple[BiLinearLayer, ...]  # 1x1 concat reducers (dec1 then dec0)
    dec_stages: tuple[tuple[BmtBlock, ...], ...]
    conv_out: FpConv


@dataclass(frozen=True)
class Model:
    config: ModelConfig
    visual: VisualEncoder
    n1: InpaintNet
    n2: MainNet
    tensors: dict[str, np.ndarray] = field(repr=False, default=None)

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int) -> "Model":
        store = ParamStore(seed=seed)
        return _build(config, store)

    @classmethod
    def from_weights(cls, config: ModelConfig,
                     tensors: dict[str, np.ndarray]) -> "Model":
        store = ParamStore(tensors=tensors)
        model = _build(config, store)
        store.finish()
        return model


def _pick_heads(c: int, max_heads: int = 8) -> int:
    """Largest head count <= min(c//16, max_heads) that divides c."""
    for nh in range(min(max(c // 16, 1), max_heads), 1, -1):
        if c % nh == 0:
            return nh
    return 1


def _build_bmt_block(store: ParamStore, name: str, cfg: ModelConfig,
                     channels: int, shift: bool) -> BmtBlock:
    half = channels // 2
    m = cfg.m
    dirs = []
    for i in range(cfg.n_scans):
        dname = f"{name}.mamba.dir{i}"
        dirs.append(SsmDirection(
            kind=SCAN_KINDS[i],
            c_proj=make_bi_linear(store, f"{dname}.c_proj", half + 1, m),
            delta_proj=make_bi_linear(store, f"{dname}.delta_proj",
                                      half + 1, half),
            b_proj=make_bi_linear(store, f"{dname}.b_proj", half + 1, m),
            A_log=store.get(f"{dname}.A_log", (half, m), init="ssm_a_log"),
            D=store.get(f"{dname}.D", (half,), init="const", value=1.0),
        ))
    gain, bias = make_norm(store, f"{name}.mamba.out_norm", half)
    mamba = BiMambaBlock(
        channels=half, state_dim=m,
        in_proj=make_bi_linear(store, f"{name}.mamba.in_proj", half, half),
        dw_conv=make_bconv(store, f"{name}.mamba.dw_conv", half, half, 3,
                           padding=1, depthwise=True),
        gate_proj=make_bi_linear(store, f"{name}.mamba.gate_proj", half, half),
        directions=tuple(dirs), norm_gain=gain, norm_bias=bias,
        adapter=make_bi_linear(store, f"{name}.mamba.adapter",
                               cfg.embed_dim, 1))
    n1g, n1b = make_norm(store, f"{name}.swin.norm1", half)
    n2g, n2b = make_norm(store, f"{name}.swin.norm2", half)
    swin = BiSwinBlock(
        channels=half, window_size=cfg.window_size,
        n_heads=_pick_heads(half), shift=shift,
        qkv_proj=make_bi_linear(store, f"{name}.swin.qkv", half, 3 * half),
        out_proj=make_bi_linear(store, f"{name}.swin.out_proj", half, half),
        mlp1=make_bi_linear(store, f"{name}.swin.mlp1", half, 2 * half),
        mlp2=make_bi_linear(store, f"{name}.swin.mlp2", 2 * half, half),
        norm1_gain=n1g, norm1_bias=n1b, norm2_gain=n2g, norm2_bias=n2b)
    fuse = make_bi_linear(store, f"{name}.fuse", channels, channels)
    return BmtBlock(channels, mamba, swin, fuse)


def _build_stage(store, name, cfg, channels, depth):
    return tuple(_build_bmt_block(store, f"{name}.block{i}", cfg, channels,
                                  shift=bool(i % 2)) for i in range(depth))


def _build(cfg: ModelConfig, store: ParamStore) -> Model:
    visual = build_visual_encoder(store, cfg.embed_dim)

    n1c = cfg.n1_channels
    n1 = InpaintNet(
        conv_in=make_fp_conv(store, "n1.conv_in", 1, n1c, 3, padding=1),
        blocks=tuple(make_bconv(store, f"n1.block{i}", n1c, n1c, 3, padding=1)
                     for i in range(cfg.n1_depth)),
        amps=store.get("n1.amps", (cfg.n1_depth,), init="const", value=0.1),
        conv_out=make_fp_conv(store, "n1.conv_out", n1c, 1, 3, padding=1))

    c0, c1, c2 = cfg.stage_channels
    d0, d1, d2 = cfg.depths
    n2 = MainNet(
        conv_in=make_fp_conv(store, "n2.conv_in", 1, c0, 3, padding=1),
        enc_stages=(_build_stage(store, "n2.enc0", cfg, c0, d0),
                    _build_stage(store, "n2.enc1", cfg, c1, d1)),
        bottleneck=_build_stage(store, "n2.mid", cfg, c2, d2),
        reduce2=make_bi_linear(store, "n2.reduce2", 4 * c1, c2),
        expand2=make_bi_linear(store, "n2.expand2", c2, 4 * c1),
        skips=(make_bi_linear(store, "n2.skip1", 2 * c1, c1),
               make_bi_linear(store, "n2.skip0", 2 * c0, c0)),
        dec_stages=(_build_stage(store, "n2.dec1", cfg, c1, d1),
                    _build_stage(store, "n2.dec0", cfg, c0, d0)),
        conv_out=make_fp_conv(store, "n2.conv_out", c0, 3, 3, padding=1))
    return Model(cfg, visual, n1, n2, tensors=dict(store.tensors))


# ---------------------------------------------------------------------------
# forward passes

def n1_inpaint(model: Model, raw: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Binary-conv residual stack; non-event pixels pass through via the
    mask-gated blend."""
    if raw.shape[:2] != mask.shape:
        raise ShapeError("mask/raw shape mismatch")
    n1 = model.n1
    f = fp_conv2d(n1.conv_in, raw)
    for amp, blk in zip(n1.amps, n1.blocks):
        f = f + amp * bconv2d(blk, f)
    pred = fp_conv2d(n1.conv_out, f)
    m = mask[:, :, None].astype(raw.dtype)
    return raw * (1.0 - m) + pred * m


def _run_stage(blocks, x, g, pos, probe=None):
    for i, blk in enumerate(blocks):
        p = None
        if probe is not None:
            p = {}
            probe.append(p)
        x = bmt_forward(blk, x, g, pos, probe=p)
    return x


def n2_demosaic(model: Model, raw: np.ndarray, g: np.ndarray,
                probe: list | None = None) -> np.ndarray:
    """U-shaped main net; input H, W must be multiples of the total
    downsampling factor (run_pipeline handles padding)."""
    cfg = model.config
    h, w = raw.shape[:2]
    if h % DOWN_FACTOR or w % DOWN_FACTOR:
        raise ShapeError(f"H, W must be multiples of {DOWN_FACTOR}")
    pos = cfg.embed_position
    n2 = model.n2
    x0 = _run_stage(n2.enc_stages[0], fp_conv2d(n2.conv_in, raw), g, pos, probe)
    x1 = _run_stage(n2.enc_stages[1], space_to_depth(x0, 2), g, pos, probe)
    xm = bi_linear(n2.reduce2, space_to_depth(x1, 2))
    xm = _run_stage(n2.bottleneck, xm, g, pos, probe)
    u1 = pixel_shuffle(bi_linear(n2.expand2, xm), 2)
    u1 = bi_linear(n2.skips[0], np.concatenate([u1, x1], axis=-1))
    u1 = _run_stage(n2.dec_stages[0], u1, g, pos, probe)
    u0 = pixel_shuffle(u1, 2)
    u0 = bi_linear(n2.skips[1], np.concatenate([u0, x0], axis=-1))
    u0 = _run_stage(n2.dec_stages[1], u0, g, pos, probe)
    out = fp_conv2d(n2.conv_out, u0)
    check_finite(out, "main-net output")
    return out


def run_pipeline(model: Model, raw: np.ndarray, mask: np.ndarray,
                 g: np.ndarray | None = None,
                 probe: list | None = None) -> np.ndarray:
    """encode -> inpaint -> demosaic; output [H, W, 3] clamped to [0, 1]."""
    if raw.ndim == 2:
        raw = raw[:, :, None]
    h, w = raw.shape[:2]
    if g is None:
        g = encode(model.visual, raw)
    inp = n1_inpaint(model, raw, mask)
    ph, pw = (-h) % DOWN_FACTOR, (-w) % DOWN_FACTOR
    if ph or pw:
        inp = np.pad(inp, [(0, ph), (0, pw), (0, 0)], mode="reflect")
    rgb = n2_demosaic(model, inp, g, probe=probe)[:h, :w]
    return np.clip(rgb, 0.0, 1.0).astype(np.float32)


def run_pipeline_tiled(model: Model, raw: np.ndarray, mask: np.ndarray,
                       tile: int, overlap: int = 16) -> np.ndarray:
    """Tiled inference with overlap; keeps each tile's central region.
    The global embedding is computed once from the whole RAW so tiles see
    the same conditioning as the whole-image path."""
    h, w = raw.shape[:2]
    if tile % DOWN_FACTOR or overlap % DOWN_FACTOR:
        raise ValueError("tile and overlap must be multiples of the "
                         "downsampling factor")
    g = encode(model.visual, raw)
    out = np.zeros((h, w, 3), dtype=np.float32)
    step = tile - 2 * overlap
    if step <= 0:
        raise ValueError("tile too small for the requested overlap")
    for y0 in range(0, h, step):
        for x0 in range(0, w, step):
            ty0, tx0 = max(0, y0 - overlap), max(0, x0 - overlap)
            ty1, tx1 = min(h, y0 + step + overlap), min(w, x0 + step + overlap)
            tout = run_pipeline(model, raw[ty0:ty1, tx0:tx1],
                                mask[ty0:ty1, tx0:tx1], g=g)
            cy1, cx1 = min(h, y0 + step), min(w, x0 + step)
            out[y0:cy1, x0:cx1] = tout[y0 - ty0:cy1 - ty0, x0 - tx0:cx1 - tx0]
    return out


# ---------------------------------------------------------------------------
# weight container I/O

def save_weights(tensors: dict, path: str) -> None:
    """Binary container: magic, version, then named tensors (float32 or
    packed-bit). Lossless for both kinds."""
    with open(path, "wb") as f:
        f.write(WEIGHT_MAGIC)
        f.write(struct.pack("<HI", WEIGHT_VERSION, len(tensors)))
        for name, t in tensors.items():
            nb = name.encode()
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            if isinstance(t, BitMatrix):
                f.write(struct.pack("<BB", 1, 2))
                f.write(struct.pack("<II", t.rows, t.cols))
                f.write(np.ascontiguousarray(t.words, "<u8").tobytes())
            else:
                arr = np.ascontiguousarray(t, dtype="<f4")
                f.write(struct.pack("<BB", 0, arr.ndim))
                f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                f.write(arr.tobytes())


def load_weights(path: str) -> dict:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != WEIGHT_MAGIC:
        raise WeightFormatError(f"bad weight-container magic in {path}")
    version, count = struct.unpack_from("<HI", data, 4)
    if version != WEIGHT_VERSION:
        raise WeightFormatError(f"unsupported container version {version}")
    pos = 10
    tensors: dict = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + nlen].decode()
            pos += nlen
            dtype, rank = struct.unpack_from("<BB", data, pos)
            pos += 2
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            if name in tensors:
                raise WeightFormatError(f"duplicate tensor name {name!r}")
            if dtype == 1:
                rows, cols = dims
                nwords = (cols + 63) // 64
                nbytes = rows * nwords * 8
                if pos + nbytes > len(data):
                    raise WeightFormatError(f"truncated container {path}")
                words = np.frombuffer(data, "<u8", rows * nwords,
                                      offset=pos).reshape(rows, nwords)
                tensors[name] = BitMatrix(rows, cols, words.copy())
                pos += nbytes
            elif dtype == 0:
                n = int(np.prod(dims)) if dims else 1
                if pos + 4 * n > len(data):
                    raise WeightFormatError(f"truncated container {path}")
                tensors[name] = np.frombuffer(
                    data, "<f4", n, offset=pos).reshape(dims).copy()
                pos += 4 * n
            else:
                raise WeightFormatError(f"unknown tensor dtype {dtype}")
    except struct.error as e:
        raise WeightFormatError(f"truncated container {path}") from e
    return tensors
