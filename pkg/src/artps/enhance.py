"""Input enhancement chain: bilateral denoise, CLAHE, adaptive gamma, unsharp.

Steps run in a fixed order (resize, bilateral, CLAHE, gamma, unsharp) and each
can be toggled independently so ablations are pure config switches. All steps
map [0,1] rasters to [0,1] rasters and keep raster dimensions (except resize).

For RGB input, the chain processes the Rec.601 luminance and carries chroma
through by per-pixel ratio scaling; anomaly cues downstream consume the
luminance while L/S suppression statistics come from the rescaled RGB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from artps.raster import LUMA_WEIGHTS, Raster, rgb_to_luma_sat

GAMMA_MIN = 0.2
GAMMA_MAX = 5.0

CLAHE_BINS = 256


@dataclass(frozen=True)
class BilateralParams:
    window: int = 5          # odd, >= 3
    sigma_s: float = 3.0     # spatial Gaussian, pixels
    sigma_r: float = 0.1     # range Gaussian, intensity units


@dataclass(frozen=True)
class ClaheParams:
    clip_limit: float = 2.0
    tile_grid: tuple[int, int] = (8, 8)


@dataclass(frozen=True)
class UnsharpParams:
    radius: float = 3.0      # Gaussian sigma of the blur, pixels
    amount: float = 0.5


@dataclass(frozen=True)
class EnhanceSteps:
    resize: bool = True
    bilateral: bool = True
    clahe: bool = True
    gamma: bool = True
    unsharp: bool = True


@dataclass(frozen=True)
class EnhanceParams:
    bilateral: BilateralParams = field(default_factory=BilateralParams)
    clahe: ClaheParams = field(default_factory=ClaheParams)
    gamma_epsilon: float = 1e-6
    unsharp: UnsharpParams = field(default_factory=UnsharpParams)
    steps: EnhanceSteps = field(default_factory=EnhanceSteps)
    resize_to: tuple[int, int] | None = None   # (width, height); None keeps dims

    def __post_init__(self):
        b = self.bilateral
        if b.window < 3 or b.window % 2 == 0:
            raise ValueError(f"bilateral window must be odd and >= 3, got {b.window}")
        if b.sigma_s <= 0 or b.sigma_r <= 0:
            raise ValueError("bilateral sigmas must be positive")
        if self.clahe.clip_limit <= 0:
            raise ValueError("clip_limit must be positive")
        gy, gx = self.clahe.tile_grid
        if gy < 2 or gx < 2:
            raise ValueError(f"tile_grid must be >= (2,2), got {self.clahe.tile_grid}")
        if self.gamma_epsilon <= 0:
            raise ValueError("gamma_epsilon must be positive")
        if self.unsharp.radius <= 0:
            raise ValueError("unsharp radius must be positive")


def bilateral_filter(img: Raster, p: EnhanceParams) -> Raster:
    """Edge-preserving bilateral filter.

    out(p) = (1/W_p) * sum_q img(q) * w_s(p,q) * w_r(img(p),img(q)) over the
    square window, with Gaussian spatial and range kernels. Out-of-image
    neighbors are excluded, matching the explicit double-sum definition.
    """
    if img.channels != 1:
        raise ValueError("bilateral_filter expects a single-channel raster")
    w = p.bilateral.window
    if w > min(img.height, img.width):
        raise ValueError(f"window {w} larger than image {img.width}x{img.height}")
    half = w // 2
    a = img.data.astype(np.float64)
    pad = np.pad(a, half, mode="constant")
    valid = np.pad(np.ones_like(a), half, mode="constant")
    inv_2ss = 1.0 / (2.0 * p.bilateral.sigma_s ** 2)
    inv_2sr = 1.0 / (2.0 * p.bilateral.sigma_r ** 2)
    h, wd = a.shape
    num = np.zeros_like(a)
    den = np.zeros_like(a)
    for dy in range(-half, half + 1):
        for dx in range(-half, half + 1):
            sh = pad[half + dy : half + dy + h, half + dx : half + dx + wd]
            va = valid[half + dy : half + dy + h, half + dx : half + dx + wd]
            ws = math.exp(-(dy * dy + dx * dx) * inv_2ss)
            wr = np.exp(-((sh - a) ** 2) * inv_2sr)
            wt = ws * wr * va
            num += sh * wt
            den += wt
    return Raster((num / den).astype(np.float32))


def _clahe_tile_lut(tile: np.ndarray, clip_limit: float) -> np.ndarray:
    """Clipped-histogram equalization LUT for one tile, range-stretched to [0,1].

    The LUT is the clipped CDF rescaled so the tile's lowest occupied bin maps
    to 0 and its highest to 1; a single-bin tile yields an identity LUT.
    """
    bins = np.minimum((tile * CLAHE_BINS).astype(np.int64), CLAHE_BINS - 1)
    hist = np.bincount(bins.ravel(), minlength=CLAHE_BINS).astype(np.float64)
    occupied = np.nonzero(hist)[0]
    b_lo, b_hi = occupied[0], occupied[-1]
    limit = max(clip_limit * tile.size / CLAHE_BINS, 1.0)
    for _ in range(16):
        excess = np.maximum(hist - limit, 0.0).sum()
        if excess <= 0.0:
            break
        hist = np.minimum(hist, limit) + excess / CLAHE_BINS
    cdf = np.cumsum(hist)
    cdf /= cdf[-1]
    if b_hi == b_lo:
        centers = (np.arange(CLAHE_BINS) + 0.5) / CLAHE_BINS
        return centers  # constant tile: identity mapping
    lut = (cdf - cdf[b_lo]) / (cdf[b_hi] - cdf[b_lo])
    return np.clip(lut, 0.0, 1.0)


def clahe(img: Raster, p: EnhanceParams) -> Raster:
    """Contrast-limited adaptive histogram equalization with bilinear tile blending."""
    if img.channels != 1:
        raise ValueError("clahe expects a single-channel raster")
    gy, gx = p.clahe.tile_grid
    h, w = img.height, img.width
    if h < gy or w < gx:
        raise ValueError(f"image {w}x{h} smaller than tile grid {gx}x{gy}")
    a = np.clip(img.data.astype(np.float64), 0.0, 1.0)
    ys = np.linspace(0, h, gy + 1).astype(np.int64)
    xs = np.linspace(0, w, gx + 1).astype(np.int64)
    luts = np.empty((gy, gx, CLAHE_BINS), dtype=np.float64)
    for ty in range(gy):
        for tx in range(gx):
            tile = a[ys[ty] : ys[ty + 1], xs[tx] : xs[tx + 1]]
            luts[ty, tx] = _clahe_tile_lut(tile, p.clahe.clip_limit)

    bins = np.minimum((a * CLAHE_BINS).astype(np.int64), CLAHE_BINS - 1)
    cy = (ys[:-1] + ys[1:]) / 2.0  # tile center rows
    cx = (xs[:-1] + xs[1:]) / 2.0
    # Fractional tile coordinates per pixel center, clamped to the center lattice.
    fy = np.interp(np.arange(h) + 0.5, cy, np.arange(gy))
    fx = np.interp(np.arange(w) + 0.5, cx, np.arange(gx))
    ty0 = np.floor(fy).astype(np.int64)
    tx0 = np.floor(fx).astype(np.int64)
    ty1 = np.minimum(ty0 + 1, gy - 1)
    tx1 = np.minimum(tx0 + 1, gx - 1)
    wy = (fy - ty0)[:, None]
    wx = (fx - tx0)[None, :]

    ty0g = ty0[:, None]
    ty1g = ty1[:, None]
    tx0g = tx0[None, :]
    tx1g = tx1[None, :]
    v00 = luts[ty0g, tx0g, bins]
    v01 = luts[ty0g, tx1g, bins]
    v10 = luts[ty1g, tx0g, bins]
    v11 = luts[ty1g, tx1g, bins]
    out = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11)
    return Raster(out.astype(np.float32))


def adaptive_gamma(img: Raster, p: EnhanceParams) -> Raster:
    """Gamma correction with exponent log(0.5)/log(mean + eps), clamped to [0.2, 5]."""
    if img.channels != 1:
        raise ValueError("adaptive_gamma expects a single-channel raster")
    a = np.clip(img.data.astype(np.float64), 0.0, 1.0)
    mu = float(a.mean())
    denom = math.log(mu + p.gamma_epsilon)
    if denom >= 0.0:
        # mean at or above 1: push as dark as the clamp allows
        gamma = GAMMA_MAX
    else:
        gamma = math.log(0.5) / denom
    gamma = min(max(gamma, GAMMA_MIN), GAMMA_MAX)
    return Raster(np.power(a, gamma).astype(np.float32))


def gaussian_blur(a: np.ndarray, sigma: float) -> np.ndarray:
    return ndimage.gaussian_filter(a.astype(np.float64), sigma=sigma, mode="nearest")


def unsharp_mask(img: Raster, p: EnhanceParams) -> Raster:
    """out = clamp(img + amount * (img - gaussian_blur(img, radius)), 0, 1)."""
    if img.channels != 1:
        raise ValueError("unsharp_mask expects a single-channel raster")
    if p.unsharp.amount == 0.0:
        return img
    a = img.data.astype(np.float64)
    blurred = gaussian_blur(a, p.unsharp.radius)
    out = np.clip(a + p.unsharp.amount * (a - blurred), 0.0, 1.0)
    return Raster(out.astype(np.float32))


def _apply_luma_chain(luma: Raster, p: EnhanceParams) -> Raster:
    out = luma
    if p.steps.bilateral:
        out = bilateral_filter(out, p)
    if p.steps.clahe:
        out = clahe(out, p)
    if p.steps.gamma:
        out = adaptive_gamma(out, p)
    if p.steps.unsharp:
        out = unsharp_mask(out, p)
    return out


def enhance_pipeline(img: Raster, p: EnhanceParams) -> Raster:
    """Run the enabled enhancement steps in order: resize, bilateral, CLAHE, gamma, unsharp."""
    from artps.raster import resize_bicubic

    out = img
    if p.steps.resize and p.resize_to is not None:
        out = resize_bicubic(out, p.resize_to[0], p.resize_to[1])
    chain_on = p.steps.bilateral or p.steps.clahe or p.steps.gamma or p.steps.unsharp
    if not chain_on:
        return out
    if out.channels == 1:
        return _apply_luma_chain(out, p)
    ls = rgb_to_luma_sat(out)
    luma_new = _apply_luma_chain(ls.luminance, p)
    old = ls.luminance.data.astype(np.float64)
    new = luma_new.data.astype(np.float64)
    ratio = new / np.maximum(old, 1e-6)
    rgb = np.clip(out.data.astype(np.float64) * ratio[:, :, None], 0.0, 1.0)
    return Raster(rgb.astype(np.float32))


def to_grayscale(img: Raster) -> Raster:
    """Rec.601 luminance for 3-channel input; identity for single-channel."""
    if img.channels == 1:
        return img
    a = img.data.astype(np.float64)
    wr, wg, wb = LUMA_WEIGHTS
    return Raster((wr * a[:, :, 0] + wg * a[:, :, 1] + wb * a[:, :, 2]).astype(np.float32))
