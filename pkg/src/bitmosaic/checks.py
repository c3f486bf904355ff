"""Self-check suites for the `check` CLI subcommand.

Each suite returns (name, ok, detail) triples; the CLI exits 3 if any
check fails. These are quick spot-checks of the same invariants the test
suite covers in depth — useful on a fresh install or unfamiliar machine.
"""

import numpy as np

from . import binary, scan, simulator
from .blocks import EmbedPosition, bi_mamba_forward, bi_swin_forward
from .params import ParamStore
from .pipeline import ModelConfig, _build_bmt_block


def _make_block(seed, channels=16):
    cfg = ModelConfig(base_channels=16, d=8, m=4, window_size=4, embed_dim=6)
    store = ParamStore(seed=seed)
    blk = _build_bmt_block(store, "chk", cfg, channels, shift=False)
    store.finish()
    return blk


def check_kernels(seed=0):
    rng = np.random.default_rng(seed)
    out = []

    ok = True
    for _ in range(25):
        n = int(rng.integers(1, 200))
        v = np.where(rng.random(n) > 0.5, 1, -1).astype(np.int8)
        ok &= np.array_equal(binary.unpack_bits(binary.pack_bits(v), n), v)
    out.append(("pack/unpack roundtrip", bool(ok), "25 random lengths"))

    ok = True
    for _ in range(25):
        c_in = int(rng.integers(1, 150))
        c_out = int(rng.integers(1, 64))
        w = rng.standard_normal((c_out, c_in))
        layer = binary.BiLinearLayer.from_float(
            w, rng.standard_normal(c_out), rng.standard_normal(c_in))
        x = rng.standard_normal((7, c_in)).astype(np.float32)
        ref = binary.bi_linear_reference(layer, x)
        got = binary.bi_linear(layer, x)
        ok &= np.allclose(ref, got, atol=1e-5)
    out.append(("packed bi_linear vs float oracle", bool(ok), "25 layers"))

    ok = True
    for _ in range(10):
        c = int(rng.integers(1, 12))
        co = int(rng.integers(1, 12))
        layer = binary.sign_binarize_conv(
            rng.standard_normal((co, c, 3, 3)), rng.standard_normal(c),
            padding=1)
        x = rng.standard_normal((9, 11, c)).astype(np.float32)
        ok &= np.allclose(binary.bconv2d(layer, x),
                          binary.bconv2d_reference(layer, x), atol=1e-4)
    out.append(("bconv2d zero-pad correction", bool(ok), "10 convs"))
    return out


def check_scan(seed=0):
    rng = np.random.default_rng(seed)
    out = []

    # cumulative sum: A_bar=1, B_bar=1, C=[1,0..], D=0
    L, d, m = 40, 3, 2
    x = rng.standard_normal((L, d))
    a_bar = np.ones((L, d, m))
    b_bar = np.zeros((L, d, m)); b_bar[:, :, 0] = 1.0
    C = np.zeros((L, m)); C[:, 0] = 1.0
    y = scan.selective_scan(a_bar, b_bar, C, np.zeros(d), x)
    out.append(("cumulative-sum degenerate case",
                bool(np.allclose(y, np.cumsum(x, axis=0), atol=1e-6)),
                f"L={L}"))

    y = scan.selective_scan(a_bar, np.zeros((L, d, m)), C, np.ones(d), x)
    out.append(("pure-skip degenerate case",
                bool(np.array_equal(y, x)), "B_bar=0, D=1"))

    ok = True
    for kind in scan.SCAN_KINDS:
        h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
        v = rng.standard_normal((h, w, 3))
        seq = scan.apply_scan(kind, v)
        ok &= np.array_equal(scan.invert_scan(kind, seq, h, w), v)
    out.append(("scan-order roundtrips", bool(ok), "all four kinds"))
    return out


def check_blocks(seed=0):
    rng = np.random.default_rng(seed)
    out = []
    blk = _make_block(seed)
    x = rng.standard_normal((8, 8, 16)).astype(np.float32)
    g = rng.standard_normal(6).astype(np.float32)

    y1 = bi_mamba_forward(blk.mamba, x[:, :, :8], g, EmbedPosition.B)
    y2 = bi_mamba_forward(blk.mamba, x[:, :, :8], g, EmbedPosition.B)
    out.append(("mamba block deterministic", bool(np.array_equal(y1, y2)),
                "8x8x8 input"))
    out.append(("mamba block finite+shaped",
                bool(y1.shape == (8, 8, 8) and np.all(np.isfinite(y1))),
                str(y1.shape)))

    y3 = bi_swin_forward(blk.swin, x[:, :, 8:])
    out.append(("swin block finite+shaped",
                bool(y3.shape == (8, 8, 8) and np.all(np.isfinite(y3))),
                str(y3.shape)))
    return out


def check_sim(seed=0):
    rng = np.random.default_rng(seed)
    out = []

    probe = np.zeros((4, 4, 3), dtype=np.float32)
    probe[:, :, 0], probe[:, :, 1], probe[:, :, 2] = 0.9, 0.5, 0.2
    raw = simulator.mosaic(probe, simulator.quad_bayer())
    want = np.array([[0.9, 0.9, 0.5, 0.5],
                     [0.9, 0.9, 0.5, 0.5],
                     [0.5, 0.5, 0.2, 0.2],
                     [0.5, 0.5, 0.2, 0.2]], dtype=np.float32)
    out.append(("quad bayer tile layout",
                bool(np.array_equal(raw[:, :, 0], want)),
                "constant-color probe"))

    rgb = rng.random((32, 32, 3)).astype(np.float32)
    raw1, mask1, _ = simulator.synthesize_pair(rgb, 3, 0.1)
    raw2, mask2, _ = simulator.synthesize_pair(rgb, 3, 0.1)
    out.append(("seeded synthesis reproducible",
                bool(np.array_equal(raw1, raw2)
                     and np.array_equal(mask1.mask, mask2.mask)), "seed=3"))
    out.append(("event pixels exactly zero",
                bool(np.all(raw1[mask1.mask] == 0.0)),
                f"{int(mask1.mask.sum())} events"))
    return out


SUITES = {
    "kernels": check_kernels,
    "scan": check_scan,
    "blocks": check_blocks,
    "sim": check_sim,
}


def run_suites(which="all", seed=0):
    names = list(SUITES) if which == "all" else [which]
    results = []
    for name in names:
        for item in SUITES[name](seed):
            results.append((name,) + item)
    return results
