"""Image and sidecar file I/O: 8/16-bit PNG, binary PPM/PGM, 16-bit PGM
RAW output, and the packed 1-bit event-mask sidecar."""

import struct

import numpy as np
from PIL import Image


class FileFormatError(ValueError):
    pass


MASK_MAGIC = b"EVM1"


def read_rgb(path: str) -> np.ndarray:
    """Load an RGB image as float [H, W, 3] in [0, 1]."""
    img = Image.open(path)
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.shape[2] == 4:
        arr = arr[:, :, :3]
    maxv = 65535.0 if arr.dtype == np.uint16 else 255.0
    return (arr.astype(np.float32) / maxv).clip(0.0, 1.0)


def write_rgb_png(path: str, img: np.ndarray) -> None:
    """Write float [H, W, 3] in [0, 1] as 8-bit PNG."""
    u8 = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path)


def write_pgm16(path: str, img: np.ndarray) -> None:
    """Write float [H, W] or [H, W, 1] in [0, 1] as binary 16-bit PGM
    (big-endian sample order per the PGM spec)."""
    if img.ndim == 3:
        img = img[:, :, 0]
    h, w = img.shape
    u16 = np.round(np.clip(img, 0.0, 1.0) * 65535.0).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode())
        f.write(u16.tobytes())


def read_pgm16(path: str) -> np.ndarray:
    """Read binary PGM (8 or 16 bit) as float [H, W, 1] in [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise FileFormatError(f"not a binary PGM file: {path}")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    dtype = ">u2" if maxval > 255 else np.uint8
    img = np.frombuffer(data, dtype=dtype, count=h * w, offset=pos)
    return (img.reshape(h, w, 1).astype(np.float32) / maxval).clip(0.0, 1.0)


def write_mask(path: str, mask: np.ndarray) -> None:
    """Packed 1-bit-per-pixel mask sidecar with an H, W header."""
    h, w = mask.shape
    packed = np.packbits(mask.astype(np.uint8).reshape(-1), bitorder="little")
    with open(path, "wb") as f:
        f.write(MASK_MAGIC)
        f.write(struct.pack("<II", h, w))
        f.write(packed.tobytes())


def read_mask(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MASK_MAGIC:
        raise FileFormatError(f"bad mask magic in {path}")
    h, w = struct.unpack("<II", data[4:12])
    nbytes = (h * w + 7) // 8
    if len(data) < 12 + nbytes:
        raise FileFormatError(f"truncated mask file {path}")
    bits = np.unpackbits(np.frombuffer(data, np.uint8, nbytes, offset=12),
                         bitorder="little")[:h * w]
    return bits.reshape(h, w).astype(bool)
