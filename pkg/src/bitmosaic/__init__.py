"""Binarized Mamba-Transformer demosaicing for Quad Bayer HybridEVS RAW."""

from .binary import (BConvLayer, BiLinearLayer, BitMatrix, bconv2d, bi_linear,
                     pack_bits, sign_pm1, unpack_bits, xnor_popcount_matmul)
from .costs import account, compare_costs, psnr, ssim
from .pipeline import (Model, ModelConfig, load_weights, parse_config_file,
                       run_pipeline, run_pipeline_tiled, save_weights)
from .scan import SCAN_KINDS, selective_scan, selective_scan_adjoint
from .simulator import (bilinear_demosaic, inject_events, make_event_mask,
                        mosaic, synthesize_pair)

__version__ = "0.1.0"

__all__ = [
    "BConvLayer", "BiLinearLayer", "BitMatrix", "Model", "ModelConfig",
    "SCAN_KINDS", "account", "bconv2d", "bi_linear", "bilinear_demosaic",
    "compare_costs", "inject_events", "load_weights", "make_event_mask",
    "mosaic", "pack_bits", "parse_config_file", "psnr", "run_pipeline",
    "run_pipeline_tiled", "save_weights", "selective_scan",
    "selective_scan_adjoint", "sign_pm1", "ssim", "synthesize_pair",
    "unpack_bits", "xnor_popcount_matmul",
]
