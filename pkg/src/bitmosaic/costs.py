"""Parameter and operation accounting plus PSNR/SSIM metrics.

Counting rules:
  * binary layers: effective params = raw/32, effective ops = raw/64;
    the per-channel scale and threshold sidecars stay full precision and
    are counted as such (they run in FP at inference)
  * full-precision layers: raw counts, no division
  * one multiply-accumulate = 2 operations, applied uniformly before the
    /64 division so every ratio is convention-independent; absolute OPs
    totals carry a x2 ambiguity versus conventions that count MAC = 1
"""

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve

from .pipeline import ModelConfig
from .encoder import STEM_WIDTHS
from .tensor_ops import ShapeError


@dataclass
class CostRow:
    name: str
    float_params: float = 0.0
    binary_params_eff: float = 0.0
    float_ops: float = 0.0
    binary_ops_eff: float = 0.0

    @property
    def params(self) -> float:
        return self.float_params + self.binary_params_eff

    @property
    def ops(self) -> float:
        return self.float_ops + self.binary_ops_eff


@dataclass
class CostReport:
    rows: list[CostRow]
    resolution: tuple[int, int]

    @property
    def params_total(self) -> float:
        return sum(r.params for r in self.rows)

    @property
    def ops_total(self) -> float:
        return sum(r.ops for r in self.rows)

    def summary(self) -> str:
        return (f"Params(M) = {self.params_total / 1e6:.3f}, "
                f"OPs(G) = {self.ops_total / 1e9:.3f} "
                f"@ {self.resolution[0]}x{self.resolution[1]} "
                f"(MAC=2 convention; binary /32 params, /64 ops)")

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf)
        wr.writerow(["name", "float_params", "binary_params_eff",
                     "float_ops", "binary_ops_eff", "params", "ops"])
        for r in self.rows:
            wr.writerow([r.name, r.float_params, r.binary_params_eff,
                         r.float_ops, r.binary_ops_eff, r.params, r.ops])
        wr.writerow(["TOTAL", "", "", "", "", self.params_total,
                     self.ops_total])
        return buf.getvalue()


def bi_linear_cost(name: str, c_in: int, c_out: int, n_pos: float,
                   binary: bool = True) -> CostRow:
    """One (possibly binarized) linear layer applied at n_pos positions."""
    raw_params = c_in * c_out
    raw_ops = 2.0 * raw_params * n_pos
    if binary:
        return CostRow(name,
                       float_params=c_in + c_out,           # alpha, S
                       binary_params_eff=raw_params / 32.0,
                       float_ops=n_pos * (c_in + c_out),    # compares + scales
                       binary_ops_eff=raw_ops / 64.0)
    return CostRow(name, float_params=raw_params, float_ops=raw_ops)


def conv_cost(name: str, c_in: int, c_out: int, k: int, n_pos: float,
              binary: bool = True, depthwise: bool = False,
              bias: bool = False) -> CostRow:
    cin_g = 1 if depthwise else c_in
    raw_params = c_out * cin_g * k * k
    raw_ops = 2.0 * raw_params * n_pos
    if binary:
        return CostRow(name,
                       float_params=c_in + c_out,
                       binary_params_eff=raw_params / 32.0,
                       float_ops=n_pos * (c_in + c_out),
                       binary_ops_eff=raw_ops / 64.0)
    return CostRow(name, float_params=raw_params + (c_out if bias else 0),
                   float_ops=raw_ops + (n_pos * c_out if bias else 0))


def norm_cost(name: str, c: int, n_pos: float) -> CostRow:
    return CostRow(name, float_params=2 * c, float_ops=6.0 * c * n_pos)


def _mamba_cost(name: str, half: int, m: int, n_scans: int, embed_dim: int,
                n_pos: float, binary: bool) -> list[CostRow]:
    rows = [
        bi_linear_cost(f"{name}.in_proj", half, half, n_pos, binary),
        conv_cost(f"{name}.dw_conv", half, half, 3, n_pos, binary,
                  depthwise=True),
        bi_linear_cost(f"{name}.gate_proj", half, half, n_pos, binary),
        bi_linear_cost(f"{name}.adapter", embed_dim, 1, 1, binary),
    ]
    for i in range(n_scans):
        rows += [
            bi_linear_cost(f"{name}.dir{i}.c_proj", half + 1, m, n_pos, binary),
            bi_linear_cost(f"{name}.dir{i}.delta_proj", half + 1, half,
                           n_pos, binary),
            bi_linear_cost(f"{name}.dir{i}.b_proj", half + 1, m, n_pos, binary),
        ]
        # A_log, D and the FP scan core: discretize (3 ops per d*m entry)
        # plus the recurrence (fused multiply-adds over d*m and the skip)
        scan_ops = n_pos * (3.0 * half * m + 6.0 * half * m + 2.0 * half
                            + 2.0 * half)        # + softplus on delta
        rows.append(CostRow(f"{name}.dir{i}.scan",
                            float_params=half * m + half,
                            float_ops=scan_ops))
    rows.append(norm_cost(f"{name}.out_norm", half, n_pos))
    # SiLU gate product
    rows.append(CostRow(f"{name}.gate_mul", float_ops=4.0 * half * n_pos))
    return rows


def _swin_cost(name: str, half: int, window: int, n_pos: float) -> list[CostRow]:
    rows = [
        norm_cost(f"{name}.norm1", half, n_pos),
        bi_linear_cost(f"{name}.qkv", half, 3 * half, n_pos),
        bi_linear_cost(f"{name}.out_proj", half, half, n_pos),
        norm_cost(f"{name}.norm2", half, n_pos),
        bi_linear_cost(f"{name}.mlp1", half, 2 * half, n_pos),
        bi_linear_cost(f"{name}.mlp2", 2 * half, half, n_pos),
    ]
    # FP attention: QK^T and attn*V, each 2*T*half ops per token, + softmax
    t = window * window
    rows.append(CostRow(f"{name}.attention",
                        float_ops=n_pos * (4.0 * t * half + 3.0 * t)))
    return rows


def _bmt_cost(name: str, cfg: ModelConfig, channels: int,
              n_pos: float) -> list[CostRow]:
    half = channels // 2
    mamba_binary = cfg.mamba_precision == "binary"
    rows = _mamba_cost(f"{name}.mamba", half, cfg.m, cfg.n_scans,
                       cfg.embed_dim, n_pos, mamba_binary)
    rows += _swin_cost(f"{name}.swin", half, cfg.window_size, n_pos)
    rows.append(bi_linear_cost(f"{name}.fuse", channels, channels, n_pos))
    return rows


def account(config: ModelConfig,
            resolution: tuple[int, int] = (256, 256)) -> CostReport:
    """Walk the model graph and count parameters/ops at the evaluation
    resolution (256x256 unless overridden)."""
    h, w = resolution
    if h <= 0 or w <= 0:
        raise ValueError("resolution must be positive")
    n_full = float(h * w)
    rows: list[CostRow] = []

    # visual encoder (binary stem + head; runs once per image)
    c_prev, n_enc = 1, n_full
    for i, c in enumerate(STEM_WIDTHS):
        n_enc /= 4.0
        rows.append(conv_cost(f"visual.stem{i}", c_prev, c, 3, n_enc))
        c_prev = c
    rows.append(bi_linear_cost("visual.head", c_prev, config.embed_dim, 1))

    # inpainting subnet
    n1c = config.n1_channels
    rows.append(conv_cost("n1.conv_in", 1, n1c, 3, n_full, binary=False,
                          bias=True))
    for i in range(config.n1_depth):
        rows.append(conv_cost(f"n1.block{i}", n1c, n1c, 3, n_full))
        rows.append(CostRow(f"n1.amp{i}", float_params=1,
                            float_ops=2.0 * n1c * n_full))
    rows.append(conv_cost("n1.conv_out", n1c, 1, 3, n_full, binary=False,
                          bias=True))

    # main net: space-to-depth down / pixel-shuffle up (param-free, FP)
    c0, c1, c2 = config.stage_channels
    d0, d1, d2 = config.depths
    n0, n1_, n2_ = n_full, n_full / 4.0, n_full / 16.0
    rows.append(conv_cost("n2.conv_in", 1, c0, 3, n_full, binary=False,
                          bias=True))
    for i in range(d0):
        rows += _bmt_cost(f"n2.enc0.block{i}", config, c0, n0)
    for i in range(d1):
        rows += _bmt_cost(f"n2.enc1.block{i}", config, c1, n1_)
    rows.append(bi_linear_cost("n2.reduce2", 4 * c1, c2, n2_))
    for i in range(d2):
        rows += _bmt_cost(f"n2.mid.block{i}", config, c2, n2_)
    rows.append(bi_linear_cost("n2.expand2", c2, 4 * c1, n2_))
    rows.append(bi_linear_cost("n2.skip1", 2 * c1, c1, n1_))
    for i in range(d1):
        rows += _bmt_cost(f"n2.dec1.block{i}", config, c1, n1_)
    rows.append(bi_linear_cost("n2.skip0", 2 * c0, c0, n0))
    for i in range(d0):
        rows += _bmt_cost(f"n2.dec0.block{i}", config, c0, n0)
    rows.append(conv_cost("n2.conv_out", c0, 3, 3, n_full, binary=False,
                          bias=True))
    return CostReport(rows, (h, w))


def compare_costs(a: CostReport, b: CostReport) -> dict:
    """Reduction of b relative to a, in percent per metric."""
    if a.resolution != b.resolution:
        raise ValueError("cost reports evaluated at different resolutions")
    return {
        "param_reduction_pct": (1.0 - b.params_total / a.params_total) * 100.0,
        "ops_reduction_pct": (1.0 - b.ops_total / a.ops_total) * 100.0,
    }


# ---------------------------------------------------------------------------
# image quality metrics

PSNR_CAP_DB = 100.0


def psnr(a: np.ndarray, b: np.ndarray, max_val: float = 1.0) -> float:
    """10*log10(max^2 / MSE), capped at 100 dB for identical images."""
    if a.shape != b.shape:
        raise ShapeError(f"psnr shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(max_val * max_val / mse))


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def ssim(a: np.ndarray, b: np.ndarray, max_val: float = 1.0) -> float:
    """Structural similarity with the standard constants (k1=0.01,
    k2=0.03, 11x11 Gaussian window, sigma 1.5); mean over channels."""
    if a.shape != b.shape:
        raise ShapeError(f"ssim shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    kern = _gaussian_kernel()
    c1 = (0.01 * max_val) ** 2
    c2 = (0.03 * max_val) ** 2
    vals = []
    for c in range(a.shape[2]):
        x = a[:, :, c].astype(np.float64)
        y = b[:, :, c].astype(np.float64)
        mu_x = convolve(x, kern, mode="nearest")
        mu_y = convolve(y, kern, mode="nearest")
        var_x = convolve(x * x, kern, mode="nearest") - mu_x ** 2
        var_y = convolve(y * y, kern, mode="nearest") - mu_y ** 2
        cov = convolve(x * y, kern, mode="nearest") - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))
