"""Quad Bayer HybridEVS degradation simulator: CFA mosaicking, event-pixel
color loss, a classical bilinear demosaic baseline, and seeded pair
synthesis.

Quad Bayer tile (4x4 period), per the sensor layout:
    rows 0-1: R R G G
    rows 2-3: G G B B
Event pixels lose their color sample entirely; they are modeled as value 0
in the RAW with the positions recorded in a mask sidecar.
"""

from dataclasses import dataclass

import numpy as np

from .tensor_ops import ShapeError

QUAD_TILE = np.array([[0, 0, 1, 1],
                      [0, 0, 1, 1],
                      [1, 1, 2, 2],
                      [1, 1, 2, 2]], dtype=np.int64)

BAYER_TILE = np.array([[0, 1],
                       [1, 2]], dtype=np.int64)

# fixed in-tile coordinate for the per-tile event pixel layout
TILE_EVENT_POS = (3, 3)


@dataclass(frozen=True)
class CfaPattern:
    kind: str
    tile: np.ndarray

    @property
    def period(self) -> int:
        return self.tile.shape[0]


def quad_bayer() -> CfaPattern:
    return CfaPattern("QuadBayer", QUAD_TILE)


def bayer() -> CfaPattern:
    return CfaPattern("Bayer", BAYER_TILE)


def pattern_by_name(name: str) -> CfaPattern:
    table = {"quad": quad_bayer(), "quadbayer": quad_bayer(),
             "bayer": bayer()}
    key = name.lower().replace("-", "").replace("_", "")
    if key not in table:
        raise ValueError(f"unknown CFA pattern {name!r}")
    return table[key]


def channel_map(pattern: CfaPattern, h: int, w: int) -> np.ndarray:
    """Per-pixel selected channel index [H, W]."""
    p = pattern.period
    return pattern.tile[np.ix_(np.arange(h) % p, np.arange(w) % p)]


def mosaic(img: np.ndarray, pattern: CfaPattern) -> np.ndarray:
    """[H, W, 3] -> RAW [H, W, 1]: keep the tile-selected channel."""
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"mosaic expects [H, W, 3], got {img.shape}")
    cmap = channel_map(pattern, img.shape[0], img.shape[1])
    return np.take_along_axis(img, cmap[:, :, None], axis=2)


@dataclass(frozen=True)
class EventMask:
    mask: np.ndarray  # bool [H, W]


def make_event_mask(h: int, w: int, density: float, seed: int) -> EventMask:
    """Seeded event layout: round(density*H*W) pixels total. The fixed
    per-tile position fills first (one event per 4x4 tile); any surplus
    spreads randomly over the remaining pixels."""
    if not 0.0 <= density <= 1.0:
        raise ValueError("event density must be in [0, 1]")
    total = int(round(density * h * w))
    mask = np.zeros((h, w), dtype=bool)
    if total == 0:
        return EventMask(mask)
    rng = np.random.default_rng(seed)
    ty, tx = np.meshgrid(np.arange(TILE_EVENT_POS[0], h, 4),
                         np.arange(TILE_EVENT_POS[1], w, 4), indexing="ij")
    tile_flat = (ty * w + tx).reshape(-1)
    rng.shuffle(tile_flat)
    chosen = tile_flat[:total]
    if total > tile_flat.size:
        rest = np.setdiff1d(np.arange(h * w), tile_flat, assume_unique=False)
        extra = rng.choice(rest, size=total - tile_flat.size, replace=False)
        chosen = np.concatenate([tile_flat, extra])
    mask.reshape(-1)[chosen] = True
    return EventMask(mask)


def inject_events(raw: np.ndarray, mask: EventMask) -> np.ndarray:
    """Zero out the event positions (color loss)."""
    m = mask.mask
    if raw.shape[:2] != m.shape:
        raise ShapeError(f"mask shape {m.shape} vs raw {raw.shape[:2]}")
    return raw * (~m[:, :, None])


def bilinear_demosaic(raw: np.ndarray, pattern: CfaPattern,
                      mask: np.ndarray | None = None) -> np.ndarray:
    """Classical baseline: per-channel separable linear interpolation from
    same-channel samples (exact on constants and on axis-aligned ramps in
    the interior). Pixels flagged in `mask` (event positions) are treated
    as missing samples."""
    if raw.ndim == 3:
        plane = raw[:, :, 0]
    else:
        plane = raw
    h, w = plane.shape
    cmap = channel_map(pattern, h, w)
    out = np.zeros((h, w, 3), dtype=np.float64)
    cols_idx = np.arange(w, dtype=np.float64)
    for c in range(3):
        known = cmap == c
        if mask is not None:
            known = known & ~mask
        chan = np.zeros((h, w), dtype=np.float64)
        rows_with = np.where(known.any(axis=1))[0]
        for r in rows_with:
            cols = np.where(known[r])[0]
            chan[r] = np.interp(cols_idx, cols, plane[r, cols])
        # vertical pass for rows with no samples of this channel
        for r in np.where(~known.any(axis=1))[0]:
            j = np.searchsorted(rows_with, r)
            lo = rows_with[max(j - 1, 0)]
            hi = rows_with[min(j, rows_with.size - 1)]
            if lo == hi:
                chan[r] = chan[lo]
            else:
                t = (r - lo) / (hi - lo)
                chan[r] = (1 - t) * chan[lo] + t * chan[hi]
        out[:, :, c] = chan
    return out.astype(np.float32)


def add_sensor_noise(raw: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Optional synthetic Gaussian read noise, clipped back to [0, 1]."""
    rng = np.random.default_rng(seed)
    return np.clip(raw + rng.normal(0.0, sigma, raw.shape), 0.0, 1.0)


def synthesize_pair(rgb: np.ndarray, seed: int, event_density: float,
                    pattern: CfaPattern | None = None,
                    noise_sigma: float = 0.0):
    """Ground-truth RGB -> (degraded RAW, event mask, RGB). Deterministic
    for a given seed; noise is applied before event injection so event
    positions stay exactly zero."""
    pattern = pattern or quad_bayer()
    raw = mosaic(rgb, pattern)
    if noise_sigma > 0:
        raw = add_sensor_noise(raw, noise_sigma, seed + 1)
    mask = make_event_mask(raw.shape[0], raw.shape[1], event_density, seed)
    raw = inject_events(raw, mask)
    return raw.astype(np.float32), mask, rgb
