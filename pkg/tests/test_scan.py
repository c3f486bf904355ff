import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitmosaic.scan import (SCAN_KINDS, apply_scan, discretize, invert_scan,
                            merge_scans, selective_scan,
                            selective_scan_adjoint)
from bitmosaic.tensor_ops import ShapeError


def _random_instance(rng, L, d, m, dtype=np.float64):
    a_bar = rng.uniform(0.1, 0.999, (L, d, m)).astype(dtype)
    b_bar = rng.standard_normal((L, d, m)).astype(dtype)
    C = rng.standard_normal((L, m)).astype(dtype)
    D = rng.standard_normal(d).astype(dtype)
    x = rng.standard_normal((L, d)).astype(dtype)
    return a_bar, b_bar, C, D, x


def test_discretize_shapes_and_values():
    rng = np.random.default_rng(0)
    A = -rng.uniform(0.1, 2.0, (3, 2))
    B = rng.standard_normal((5, 2))
    delta = rng.uniform(0.01, 1.0, (5, 3))
    a_bar, b_bar = discretize(A, B, delta)
    assert a_bar.shape == (5, 3, 2) and b_bar.shape == (5, 3, 2)
    assert np.allclose(a_bar, np.exp(delta[:, :, None] * A[None]))
    assert np.allclose(b_bar, delta[:, :, None] * B[:, None, :])
    # negative A + positive delta keeps the propagator in (0, 1)
    assert np.all(a_bar > 0) and np.all(a_bar < 1)


def test_discretize_rejects_nonpositive_delta():
    with pytest.raises(ValueError):
        discretize(-np.ones((1, 1)), np.ones((2, 1)), np.zeros((2, 1)))


def test_scan_cumulative_sum_case():
    rng = np.random.default_rng(1)
    L, d, m = 50, 4, 3
    x = rng.standard_normal((L, d))
    a_bar = np.ones((L, d, m))
    b_bar = np.zeros((L, d, m)); b_bar[:, :, 0] = 1.0
    C = np.zeros((L, m)); C[:, 0] = 1.0
    y = selective_scan(a_bar, b_bar, C, np.zeros(d), x)
    assert np.allclose(y, np.cumsum(x, axis=0), atol=1e-9)


def test_scan_pure_skip_case():
    rng = np.random.default_rng(2)
    L, d, m = 20, 3, 2
    x = rng.standard_normal((L, d))
    y = selective_scan(np.full((L, d, m), 0.5), np.zeros((L, d, m)),
                       rng.standard_normal((L, m)), np.ones(d), x)
    assert np.array_equal(y, x)


def test_scan_matches_explicit_recurrence():
    rng = np.random.default_rng(3)
    a_bar, b_bar, C, D, x = _random_instance(rng, 12, 3, 2)
    y = selective_scan(a_bar, b_bar, C, D, x)
    h = np.zeros((3, 2))
    for k in range(12):
        h = a_bar[k] * h + b_bar[k] * x[k, :, None]
        want = (C[k][None, :] * h).sum(axis=1) + D * x[k]
        assert np.allclose(y[k], want, atol=1e-10)


def test_scan_shape_errors():
    with pytest.raises(ShapeError):
        selective_scan(np.ones((4, 2, 3)), np.ones((4, 2, 2)),
                       np.ones((4, 3)), np.ones(2), np.ones((4, 2)))


def test_adjoint_vs_finite_differences():
    # >= 50 random instances, float64, central differences h = 1e-5
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        L = int(rng.integers(1, 17))
        d = int(rng.integers(1, 5))
        m = int(rng.integers(1, 5))
        inst = _random_instance(rng, L, d, m)
        dy = rng.standard_normal((L, d))
        grads = selective_scan_adjoint(*inst, dy)

        def loss(args):
            return float((dy * selective_scan(*args)).sum())

        h = 1e-5
        for ti, g in enumerate(grads):
            t = inst[ti]
            # probe a handful of coordinates per tensor
            flat = t.reshape(-1)
            for j in rng.choice(flat.size, size=min(4, flat.size),
                                replace=False):
                bump = np.zeros_like(flat)
                bump[j] = h
                args_p = list(inst)
                args_p[ti] = (flat + bump).reshape(t.shape)
                args_m = list(inst)
                args_m[ti] = (flat - bump).reshape(t.shape)
                fd = (loss(args_p) - loss(args_m)) / (2 * h)
                ref = max(abs(fd), abs(g.reshape(-1)[j]), 1e-3)
                worst = max(worst, abs(fd - g.reshape(-1)[j]) / ref)
    assert worst < 1e-6, f"max relative gradient error {worst:.2e}"


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(SCAN_KINDS), st.integers(1, 32), st.integers(1, 32),
       st.integers(0, 2**31 - 1))
def test_scan_order_roundtrip(kind, h, w, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((h, w, 3))
    assert np.array_equal(invert_scan(kind, apply_scan(kind, x), h, w), x)


def test_scan_orders_are_distinct():
    x = np.arange(12.0).reshape(3, 4, 1)
    seqs = [apply_scan(k, x)[:, 0] for k in SCAN_KINDS]
    assert np.array_equal(seqs[0], np.arange(12.0))
    assert np.array_equal(seqs[1], np.arange(12.0)[::-1])
    assert seqs[2][1] == 4.0  # column-forward walks down a column first
    for i in range(4):
        for j in range(i + 1, 4):
            assert not np.array_equal(seqs[i], seqs[j])


def test_merge_scans_sum_then_norm():
    rng = np.random.default_rng(5)
    outs = [rng.standard_normal((4, 8)) for _ in range(3)]
    gain, bias = np.ones(8), np.zeros(8)
    merged = merge_scans(outs, gain, bias)
    total = outs[0] + outs[1] + outs[2]
    assert np.allclose(merged.mean(axis=-1), 0.0, atol=1e-6)
    centered = total - total.mean(-1, keepdims=True)
    assert np.allclose(merged / np.abs(merged).max(),
                       centered / np.sqrt(total.var(-1, keepdims=True) + 1e-5)
                       / np.abs(merged).max(), atol=1e-6)
