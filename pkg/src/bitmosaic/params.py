"""Named-parameter store shared by model construction and weight I/O.

One code path builds the model both ways: in init mode the store invents
seeded tensors and records them; in load mode it serves tensors from a
container and complains about anything missing, misshapen, or left over.
"""

import numpy as np

from .binary import BConvLayer, BiLinearLayer, sign_binarize_conv
from .tensor_ops import ShapeError


class WeightFormatError(ValueError):
    """Container/parameter mismatch: missing, duplicate, or wrong-shape."""


class ParamStore:
    def __init__(self, tensors: dict[str, np.ndarray] | None = None,
                 seed: int | None = None):
        if (tensors is None) == (seed is None):
            raise ValueError("pass exactly one of tensors / seed")
        self.init_mode = tensors is None
        self.tensors: dict[str, np.ndarray] = {} if self.init_mode else dict(tensors)
        self.rng = np.random.default_rng(seed) if self.init_mode else None
        self._used: set[str] = set()

    def get(self, name: str, shape: tuple, init: str = "normal",
            value: float = 0.02) -> np.ndarray:
        if self.init_mode:
            if name in self.tensors:
                raise WeightFormatError(f"duplicate parameter name {name!r}")
            if init == "normal":
                t = self.rng.normal(0.0, value, size=shape)
            elif init == "const":
                t = np.full(shape, value)
            elif init == "ssm_a_log":
                # classic S4 init: states 1..m, broadcast over channels
                d, m = shape
                t = np.log(np.tile(np.arange(1, m + 1, dtype=np.float64),
                                   (d, 1)))
            else:
                raise ValueError(f"unknown init {init!r}")
            t = t.astype(np.float32)
            self.tensors[name] = t
        else:
            if name not in self.tensors:
                raise WeightFormatError(f"missing parameter {name!r}")
            t = self.tensors[name]
            if tuple(t.shape) != tuple(shape):
                raise WeightFormatError(
                    f"parameter {name!r} has shape {t.shape}, expected {shape}")
        self._used.add(name)
        return self.tensors[name]

    def finish(self) -> None:
        """In load mode, reject containers with unconsumed tensors."""
        extra = sorted(set(self.tensors) - self._used)
        if extra and not self.init_mode:
            raise WeightFormatError(f"unknown tensor names in container: {extra}")


def make_bi_linear(store: ParamStore, name: str, c_in: int,
                   c_out: int) -> BiLinearLayer:
    w = store.get(f"{name}.weight", (c_out, c_in))
    scale = store.get(f"{name}.scale", (c_out,), init="const",
                      value=1.0 / c_in)
    thr = store.get(f"{name}.threshold", (c_in,), init="const", value=0.0)
    return BiLinearLayer.from_float(w, scale, thr)


def make_bconv(store: ParamStore, name: str, c_in: int, c_out: int, k: int,
               stride: int = 1, padding: int = 0,
               depthwise: bool = False) -> BConvLayer:
    if depthwise and c_in != c_out:
        raise ShapeError("depthwise conv needs c_in == c_out")
    wshape = (c_out, 1, k, k) if depthwise else (c_out, c_in, k, k)
    w = store.get(f"{name}.weight", wshape)
    thr = store.get(f"{name}.threshold", (c_in,), init="const", value=0.0)
    return sign_binarize_conv(w, threshold=thr, stride=stride,
                              padding=padding, depthwise=depthwise)


def make_norm(store: ParamStore, name: str, c: int):
    gain = store.get(f"{name}.gain", (c,), init="const", value=1.0)
    bias = store.get(f"{name}.bias", (c,), init="const", value=0.0)
    return gain, bias
