"""Dense-tensor substrate: shape algebra and the small set of float ops
every other module leans on.

Tensors are plain numpy arrays, row-major, channel-last for images
(H, W, C). float32 is the default compute dtype; float64 is only used
by the gradient-check paths.
"""

import numpy as np

LN_EPS = 1e-5


class ShapeError(ValueError):
    """Raised when tensor shapes are inconsistent with an operation."""


class NumericsError(FloatingPointError):
    """Raised when an operation sees or produces non-finite values."""


def check_finite(t: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise NumericsError(f"non-finite values in {what}")
    return t


def reshape(t: np.ndarray, shape) -> np.ndarray:
    """Row-major relabeling; data order untouched."""
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != t.size:
        raise ShapeError(f"cannot reshape size {t.size} into {shape}")
    return t.reshape(shape)


def matmul_f(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Float matrix product; the reference path the packed kernels are
    checked against."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul dims {a.shape} x {b.shape}")
    return a @ b


def matmul_naive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop oracle for matmul_f. Test-only; O(m*n*k) python loops."""
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.result_type(a, b))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for p in range(k):
                acc += a[i, p] * b[p, j]
            out[i, j] = acc
    return out


def sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t, dtype=t.dtype if t.dtype.kind == "f" else np.float32)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def silu(t: np.ndarray) -> np.ndarray:
    check_finite(t, "silu input")
    return t * sigmoid(t)


def softplus(t: np.ndarray) -> np.ndarray:
    # log1p(exp(x)) with the standard overflow-safe split
    return np.where(t > 20.0, t, np.log1p(np.exp(np.minimum(t, 20.0))))


def layer_norm(t: np.ndarray, gain: np.ndarray, bias: np.ndarray,
               axis: int = -1) -> np.ndarray:
    """Zero-mean unit-variance along `axis`, then per-element affine.

    Constant input along the axis gives exactly zero pre-affine (the
    epsilon absorbs the zero-variance case).
    """
    check_finite(t, "layer_norm input")
    mean = t.mean(axis=axis, keepdims=True)
    var = t.var(axis=axis, keepdims=True)
    normed = (t - mean) / np.sqrt(var + LN_EPS)
    return normed * gain + bias


def softmax(t: np.ndarray, axis: int = -1) -> np.ndarray:
    check_finite(t, "softmax input")
    shifted = t - t.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)
