"""Core raster container plus the shared normalization / resampling primitives.

Every stage of the pipeline exchanges `Raster` values: row-major float32
arrays with 1 or 3 channels. Color decomposition into luminance/saturation
and the clamped bicubic resampler also live here because they are shared by
the enhancement, feature, and synthesis stages.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# Saturation denominator guard so S is defined at black pixels.
SAT_EPSILON = 1e-6

# Rec.601 luminance weights for the RGB -> L decomposition.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class Raster:
    """Row-major float32 raster with 1 (shape HxW) or 3 (HxWx3) channels."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim == 2:
            pass
        elif a.ndim == 3 and a.shape[2] == 3:
            pass
        else:
            raise ValueError(f"raster must be HxW or HxWx3, got shape {a.shape}")
        if a.size == 0:
            raise ValueError("raster must be non-empty")
        if not np.isfinite(a).all():
            raise ValueError("raster contains non-finite values")
        object.__setattr__(self, "data", np.ascontiguousarray(a))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3


@dataclass(frozen=True)
class LumaSat:
    """Luminance and saturation channels of one frame, both in [0, 1]."""

    luminance: Raster
    saturation: Raster

    def __post_init__(self):
        if self.luminance.data.shape != self.saturation.data.shape:
            raise ValueError("luminance/saturation dimensions differ")


def minmax_normalize(m: Raster) -> Raster:
    """Affinely map a single-channel raster onto [0, 1].

    A constant raster maps to all zeros: a featureless component carries no
    anomaly signal, and the raw min/max is recorded elsewhere for diagnostics.
    """
    if m.channels != 1:
        raise ValueError("minmax_normalize expects a single-channel raster")
    a = m.data.astype(np.float64)
    lo = float(a.min())
    hi = float(a.max())
    if hi == lo:
        return Raster(np.zeros_like(m.data))
    return Raster(((a - lo) / (hi - lo)).astype(np.float32))


def rgb_to_luma_sat(img: Raster) -> LumaSat:
    """Decompose an RGB raster in [0,1] into Rec.601 luminance and HSV-style saturation."""
    if img.channels != 3:
        raise ValueError("rgb_to_luma_sat expects a 3-channel raster")
    a = img.data.astype(np.float64)
    wr, wg, wb = LUMA_WEIGHTS
    luma = wr * a[:, :, 0] + wg * a[:, :, 1] + wb * a[:, :, 2]
    cmax = a.max(axis=2)
    cmin = a.min(axis=2)
    sat = (cmax - cmin) / (cmax + SAT_EPSILON)
    return LumaSat(Raster(luma.astype(np.float32)), Raster(sat.astype(np.float32)))


def _cubic_kernel(t: np.ndarray) -> np.ndarray:
    """Keys bicubic convolution kernel with a = -0.5."""
    t = np.abs(t)
    t2 = t * t
    t3 = t2 * t
    out = np.zeros_like(t)
    near = t <= 1.0
    far = (t > 1.0) & (t < 2.0)
    out[near] = 1.5 * t3[near] - 2.5 * t2[near] + 1.0
    out[far] = -0.5 * t3[far] + 2.5 * t2[far] - 4.0 * t[far] + 2.0
    return out


def _resample_matrix(n_src: int, n_dst: int) -> np.ndarray:
    """Dense (n_dst, n_src) bicubic resampling operator along one axis."""
    scale = n_src / n_dst
    dst = np.arange(n_dst, dtype=np.float64)
    src = (dst + 0.5) * scale - 0.5
    base = np.floor(src).astype(np.int64)
    frac = src - base
    mat = np.zeros((n_dst, n_src), dtype=np.float64)
    for k in range(-1, 3):
        idx = np.clip(base + k, 0, n_src - 1)
        w = _cubic_kernel(frac - k)
        np.add.at(mat, (dst.astype(np.int64), idx), w)
    # Kernel taps sum to 1 analytically; renormalize to kill rounding drift.
    mat /= mat.sum(axis=1, keepdims=True)
    return mat


def resize_bicubic(img: Raster, width: int, height: int) -> Raster:
    """Bicubic resample to (width, height), clamped to the source value range.

    Clamping removes ringing overshoot so downstream exponentials never see
    out-of-range intensities.
    """
    if width < 4 or height < 4:
        raise ValueError(f"target dims must be >= 4, got {width}x{height}")
    if width == img.width and height == img.height:
        return img
    wy = _resample_matrix(img.height, height)
    wx = _resample_matrix(img.width, width)
    a = img.data.astype(np.float64)

    def one(ch: np.ndarray) -> np.ndarray:
        return np.clip(wy @ ch @ wx.T, float(ch.min()), float(ch.max()))

    if img.channels == 1:
        out = one(a)
    else:
        out = np.stack([one(a[:, :, c]) for c in range(3)], axis=2)
    return Raster(out.astype(np.float32))


def read_png(path: str | Path) -> Raster:
    """Read an 8/16-bit PNG as a [0,1] float raster (grayscale or RGB)."""
    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B"):
            arr = np.asarray(im.convert("I"), dtype=np.float64) / 65535.0
        elif im.mode == "L":
            arr = np.asarray(im, dtype=np.float64) / 255.0
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return Raster(arr.astype(np.float32))


def write_png(raster: Raster, path: str | Path, bit_depth: int = 8) -> None:
    """Write a [0,1] raster as PNG. 16-bit output is supported for 1-channel maps."""
    a = np.clip(raster.data.astype(np.float64), 0.0, 1.0)
    if bit_depth == 16:
        if raster.channels != 1:
            raise ValueError("16-bit PNG output only supported for single-channel rasters")
        q = np.round(a * 65535.0).astype(np.uint16)
        Image.fromarray(q).save(path)
    elif bit_depth == 8:
        q = np.round(a * 255.0).astype(np.uint8)
        mode = "L" if raster.channels == 1 else "RGB"
        Image.fromarray(q, mode=mode).save(path)
    else:
        raise ValueError("bit_depth must be 8 or 16")


def read_png_raw16(path: str | Path) -> np.ndarray:
    """Read a 16-bit grayscale PNG as raw uint16 counts (no [0,1] scaling)."""
    with Image.open(path) as im:
        if im.mode not in ("I", "I;16", "I;16B"):
            raise ValueError(f"expected a 16-bit grayscale PNG, got mode {im.mode}")
        return np.asarray(im.convert("I"), dtype=np.uint16)
