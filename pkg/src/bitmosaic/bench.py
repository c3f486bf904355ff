"""Microbenchmarks: packed XNOR-popcount GEMM vs a naive float GEMM, and
the selective-scan recurrence.

The float baseline is a jitted triple loop on purpose — both kernels get
the same compiler and threading, so the ratio reflects the bit-packing
win rather than BLAS tuning.
"""

import time

import numpy as np
from numba import njit, prange

from .binary import _packed_matmul_kernel, _tail_mask, pack_bits
from .scan import selective_scan


@njit(cache=True, parallel=True)
def _float_gemm(a, b):
    n, k = a.shape
    m = b.shape[0]
    out = np.zeros((n, m), dtype=np.float32)
    for i in prange(n):
        for j in range(m):
            acc = np.float32(0.0)
            for t in range(k):
                acc += a[i, t] * b[j, t]
            out[i, j] = acc
    return out


def _time(fn, min_seconds=0.2):
    """Best-of wall time plus the last result. Repeats until the total
    exceeds min_seconds, but a single slow run is not re-run."""
    best, total, out = np.inf, 0.0, None
    while True:
        t0 = time.perf_counter()
        out = fn()
        dt = time.perf_counter() - t0
        best = min(best, dt)
        total += dt
        if total >= min_seconds:
            return best, out


def bench_xnor_gemm(sizes=(256, 1024, 4096), seed=0):
    """Square n x n ±1 GEMM at each size; returns one dict per row.

    Validates that the packed kernel reproduces the float product exactly
    (±1 entries, so the float result is integral).
    """
    rng = np.random.default_rng(seed)
    # compile both kernels outside the timed region
    warm = np.ones((8, 8), dtype=np.float32)
    _float_gemm(warm, warm)
    _packed_matmul_kernel(pack_bits(warm), pack_bits(warm), _tail_mask(8), 8)
    rows = []
    for n in sizes:
        a = np.where(rng.random((n, n)) > 0.5, 1, -1).astype(np.float32)
        b = np.where(rng.random((n, n)) > 0.5, 1, -1).astype(np.float32)
        aw, bw = pack_bits(a), pack_bits(b)
        mask = _tail_mask(n)
        t_f, out_f = _time(lambda: _float_gemm(a, b))
        t_p, out_p = _time(lambda: _packed_matmul_kernel(aw, bw, mask, n))
        if not np.array_equal(out_p, out_f.astype(np.int32)):
            raise AssertionError(f"packed GEMM mismatch at n={n}")
        macs = float(n) ** 3
        rows.append({
            "size": n,
            "float_s": t_f,
            "packed_s": t_p,
            "float_gmacs": macs / t_f / 1e9,
            "packed_gmacs": macs / t_p / 1e9,
            "speedup": t_f / t_p,
        })
    return rows


def bench_scan(sizes=(256, 1024, 4096), d=64, m=16, seed=0):
    """Selective-scan throughput over sequence length L at fixed d, m."""
    rng = np.random.default_rng(seed)
    rows = []
    for L in sizes:
        a_bar = rng.uniform(0.5, 0.99, (L, d, m)).astype(np.float32)
        b_bar = rng.standard_normal((L, d, m)).astype(np.float32)
        C = rng.standard_normal((L, m)).astype(np.float32)
        D = rng.standard_normal(d).astype(np.float32)
        x = rng.standard_normal((L, d)).astype(np.float32)
        selective_scan(a_bar, b_bar, C, D, x)  # compile/warm
        t, _ = _time(lambda: selective_scan(a_bar, b_bar, C, D, x))
        rows.append({
            "size": L,
            "seconds": t,
            "melems": L * d * m / t / 1e6,
        })
    return rows


def format_xnor_table(rows):
    lines = [f"{'n':>6} {'float(s)':>10} {'packed(s)':>10} "
             f"{'float GMAC/s':>13} {'packed GMAC/s':>14} {'speedup':>8}"]
    for r in rows:
        lines.append(f"{r['size']:>6} {r['float_s']:>10.4f} "
                     f"{r['packed_s']:>10.4f} {r['float_gmacs']:>13.2f} "
                     f"{r['packed_gmacs']:>14.2f} {r['speedup']:>7.1f}x")
    return "\n".join(lines)


def format_scan_table(rows):
    lines = [f"{'L':>6} {'seconds':>10} {'Melem/s':>10}"]
    for r in rows:
        lines.append(f"{r['size']:>6} {r['seconds']:>10.4f} "
                     f"{r['melems']:>10.1f}")
    return "\n".join(lines)
