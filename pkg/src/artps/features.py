"""Anomaly component maps: image cues, suppression terms, and patch models.

Image cues are Sobel gradient, multi-scale Laplacian, and
difference-of-Gaussians. Patch-statistics scoring fits a Gaussian model over
handcrafted patch descriptors and scores Mahalanobis distance; reconstruction
error comes from patch-PCA. Both patch models train from reference tiles
(designated normal-terrain crops, or the image's own tiles). Every component
is min-max normalized to [0,1] with its raw range recorded.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.linalg import solve_triangular

from artps.depth import DepthMap, depth_gradient, depth_laplacian
from artps.raster import LumaSat, Raster, minmax_normalize

SIGMA_FLOOR = 1e-3

MODEL_MAGIC = b"APM1"

# Component ids produced by this module.
IMAGE_CUE_IDS = ("gradient", "mslap", "dog", "recon")
DEPTH_CUE_IDS = ("depth_grad", "depth_lap")


@dataclass(frozen=True)
class ComponentMap:
    """A named anomaly component, normalized to [0,1], with its raw range."""

    name: str
    map: Raster
    raw_range: tuple[float, float]

    def __post_init__(self):
        if self.map.channels != 1:
            raise ValueError("component maps are single-channel")

    def denormalized(self) -> np.ndarray:
        lo, hi = self.raw_range
        return self.map.data.astype(np.float64) * (hi - lo) + lo


def make_component(name: str, raw: np.ndarray) -> ComponentMap:
    r = Raster(np.asarray(raw, dtype=np.float32))
    lo = float(r.data.min())
    hi = float(r.data.max())
    return ComponentMap(name=name, map=minmax_normalize(r), raw_range=(lo, hi))


# ---------------------------------------------------------------------------
# image cues

def sobel_magnitude(a: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude with edge-replicated borders."""
    a = a.astype(np.float64)
    p = np.pad(a, 1, mode="edge")
    gx = (
        (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    return np.sqrt(gx * gx + gy * gy)


def sobel_xy(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = a.astype(np.float64)
    p = np.pad(a, 1, mode="edge")
    gx = (
        (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    return gx, gy


def gradient_magnitude(img: Raster) -> ComponentMap:
    if img.channels != 1:
        raise ValueError("gradient_magnitude expects a single-channel raster")
    return make_component("gradient", sobel_magnitude(img.data))


def multiscale_laplacian(img: Raster, scales: tuple[float, ...] = (1.0, 2.0, 4.0)) -> ComponentMap:
    """Mean of |LoG| responses across Gaussian scales."""
    if img.channels != 1:
        raise ValueError("multiscale_laplacian expects a single-channel raster")
    if not scales:
        raise ValueError("at least one scale required")
    a = img.data.astype(np.float64)
    acc = np.zeros_like(a)
    for s in scales:
        acc += np.abs(ndimage.gaussian_laplace(a, sigma=s, mode="nearest"))
    return make_component("mslap", acc / len(scales))


def difference_of_gaussians(img: Raster, sigma1: float = 1.0, sigma2: float = 2.0) -> ComponentMap:
    if img.channels != 1:
        raise ValueError("difference_of_gaussians expects a single-channel raster")
    if sigma1 > sigma2:
        raise ValueError(f"sigma1 must be <= sigma2, got {sigma1} > {sigma2}")
    a = img.data.astype(np.float64)
    g1 = ndimage.gaussian_filter(a, sigma=sigma1, mode="nearest")
    g2 = ndimage.gaussian_filter(a, sigma=sigma2, mode="nearest")
    return make_component("dog", np.abs(g1 - g2))


# ---------------------------------------------------------------------------
# shadow / specular suppression terms

@dataclass(frozen=True)
class SuppressionMaps:
    shadow: Raster
    specular: Raster
    stats: tuple[float, float, float, float]  # (mu_L, sigma_L, mu_S, sigma_S)


def suppression_maps(ls: LumaSat) -> SuppressionMaps:
    """Gaussian affinity to the frame's mean luminance and saturation.

    Value 1 exactly where the channel equals its mean; deviations (shadow and
    glare pixels) fall off smoothly. Sigmas are frame statistics floored at
    1e-3 so constant channels yield all-ones maps.
    """
    lum = ls.luminance.data.astype(np.float64)
    sat = ls.saturation.data.astype(np.float64)
    mu_l = float(lum.mean())
    sd_l = max(float(lum.std()), SIGMA_FLOOR)
    mu_s = float(sat.mean())
    sd_s = max(float(sat.std()), SIGMA_FLOOR)
    shadow = np.exp(-((lum - mu_l) ** 2) / (2.0 * sd_l * sd_l))
    specular = np.exp(-((sat - mu_s) ** 2) / (2.0 * sd_s * sd_s))
    return SuppressionMaps(
        shadow=Raster(shadow.astype(np.float32)),
        specular=Raster(specular.astype(np.float32)),
        stats=(mu_l, sd_l, mu_s, sd_s),
    )


# ---------------------------------------------------------------------------
# patch descriptors and Gaussian patch-statistics model

@dataclass(frozen=True)
class PatchRecipe:
    """Handcrafted patch descriptor: [mean, std, orientation histogram bins]."""

    patch: int = 8
    stride: int = 4
    bins: int = 4
    ridge_scale: float = 0.01

    def __post_init__(self):
        if self.patch < 2 or self.stride < 1 or self.bins < 1:
            raise ValueError("invalid patch recipe")
        if self.ridge_scale < 0:
            raise ValueError("ridge_scale must be >= 0")

    @property
    def dim(self) -> int:
        return 2 + self.bins


def _grid_positions(extent: int, patch: int, stride: int) -> np.ndarray:
    if extent < patch:
        raise ValueError(f"image extent {extent} smaller than patch {patch}")
    pos = list(range(0, extent - patch + 1, stride))
    if pos[-1] != extent - patch:
        pos.append(extent - patch)  # flush-edge patch for full coverage
    return np.array(pos, dtype=np.int64)


def patch_descriptors(a: np.ndarray, recipe: PatchRecipe) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Descriptors over the patch grid. Returns (ys, xs, feats[n, dim])."""
    a = a.astype(np.float64)
    h, w = a.shape
    p = recipe.patch
    ys = _grid_positions(h, p, recipe.stride)
    xs = _grid_positions(w, p, recipe.stride)
    gx, gy = sobel_xy(a)
    mag = np.sqrt(gx * gx + gy * gy)
    # Unsigned orientation in [0, pi), quantized to the recipe's bins.
    ang = np.arctan2(gy, gx) % np.pi
    bin_idx = np.minimum((ang / np.pi * recipe.bins).astype(np.int64), recipe.bins - 1)

    grid = np.ix_(ys, xs)
    tiles = np.lib.stride_tricks.sliding_window_view(a, (p, p))[grid]
    mags = np.lib.stride_tricks.sliding_window_view(mag, (p, p))[grid]
    bins = np.lib.stride_tricks.sliding_window_view(bin_idx, (p, p))[grid]
    n = len(ys) * len(xs)
    feats = np.empty((n, recipe.dim))
    feats[:, 0] = tiles.mean(axis=(2, 3)).ravel()
    feats[:, 1] = tiles.std(axis=(2, 3)).ravel()
    inv_area = 1.0 / (p * p)
    for b in range(recipe.bins):
        feats[:, 2 + b] = (
            np.where(bins == b, mags, 0.0).sum(axis=(2, 3)).ravel() * inv_area
        )
    return ys, xs, feats


@dataclass(frozen=True)
class PatchStatsModel:
    mu: np.ndarray
    sigma: np.ndarray          # ridged covariance (SPD)
    chol: np.ndarray           # lower Cholesky factor of sigma
    recipe: PatchRecipe
    n_reference: int

    @property
    def underdetermined(self) -> bool:
        return self.n_reference < self.recipe.dim + 1


def fit_patch_stats(reference_tiles: list[np.ndarray], recipe: PatchRecipe) -> PatchStatsModel:
    """Fit mean/covariance of patch descriptors over reference tiles.

    The covariance always receives a relative ridge (ridge_scale * trace/dim)
    before inversion; a singular raw covariance is never inverted directly.
    """
    blocks = []
    for tile in reference_tiles:
        t = np.asarray(tile, dtype=np.float64)
        if t.shape[0] < recipe.patch or t.shape[1] < recipe.patch:
            continue
        blocks.append(patch_descriptors(t, recipe)[2])
    if not blocks:
        raise ValueError("no reference tile large enough for the patch size")
    feats = np.concatenate(blocks, axis=0)
    mu = feats.mean(axis=0)
    diff = feats - mu
    sigma = diff.T @ diff / feats.shape[0]
    d = recipe.dim
    lam = recipe.ridge_scale * np.trace(sigma) / d
    if lam <= 0:
        lam = 1e-12  # degenerate all-identical tiles: keep sigma SPD
    sigma = sigma + lam * np.eye(d)
    chol = np.linalg.cholesky(sigma)
    return PatchStatsModel(mu=mu, sigma=sigma, chol=chol, recipe=recipe, n_reference=feats.shape[0])


def mahalanobis_distances(feats: np.ndarray, model: PatchStatsModel) -> np.ndarray:
    """Mahalanobis distance per descriptor row via Cholesky solve."""
    diff = feats - model.mu
    z = solve_triangular(model.chol, diff.T, lower=True)
    return np.sqrt((z * z).sum(axis=0))


def _grid_to_full(grid: np.ndarray, ys: np.ndarray, xs: np.ndarray, patch: int, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear upsample of a patch-grid score field to full resolution."""
    h, w = shape
    cy = ys + (patch - 1) / 2.0
    cx = xs + (patch - 1) / 2.0
    fy = np.interp(np.arange(h), cy, np.arange(len(ys)))
    fx = np.interp(np.arange(w), cx, np.arange(len(xs)))
    coords = np.meshgrid(fy, fx, indexing="ij")
    return ndimage.map_coordinates(grid, coords, order=1, mode="nearest")


def mahalanobis_map(img: Raster, model: PatchStatsModel) -> ComponentMap:
    if img.channels != 1:
        raise ValueError("mahalanobis_map expects a single-channel raster")
    ys, xs, feats = patch_descriptors(img.data, model.recipe)
    m = mahalanobis_distances(feats, model).reshape(len(ys), len(xs))
    full = _grid_to_full(m, ys, xs, model.recipe.patch, img.data.shape)
    return make_component("patch_stats", full)


# ---------------------------------------------------------------------------
# patch-PCA reconstruction error

@dataclass(frozen=True)
class PcaReconModel:
    mean: np.ndarray
    basis: np.ndarray          # (k, patch*patch), orthonormal rows
    patch: int
    stride: int

    @property
    def k(self) -> int:
        return self.basis.shape[0]


def _raw_patches(a: np.ndarray, patch: int, stride: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h, w = a.shape
    ys = _grid_positions(h, patch, stride)
    xs = _grid_positions(w, patch, stride)
    tiles = np.lib.stride_tricks.sliding_window_view(a, (patch, patch))[np.ix_(ys, xs)]
    return ys, xs, tiles.reshape(len(ys) * len(xs), patch * patch).astype(np.float64)


def fit_patch_pca(reference_tiles: list[np.ndarray], k: int, patch: int = 8, stride: int = 4) -> PcaReconModel:
    dim = patch * patch
    if k < 0 or k > dim:
        raise ValueError(f"k must be in [0, {dim}], got {k}")
    blocks = []
    for tile in reference_tiles:
        t = np.asarray(tile, dtype=np.float64)
        if t.shape[0] < patch or t.shape[1] < patch:
            continue
        blocks.append(_raw_patches(t, patch, stride)[2])
    if not blocks:
        raise ValueError("no reference tile large enough for the patch size")
    data = np.concatenate(blocks, axis=0)
    mean = data.mean(axis=0)
    if k == 0:
        basis = np.zeros((0, dim))
    else:
        _, _, vt = np.linalg.svd(data - mean, full_matrices=(k > min(data.shape)))
        basis = vt[:k]
    return PcaReconModel(mean=mean, basis=basis, patch=patch, stride=stride)


def recon_error_map(img: Raster, model: PcaReconModel) -> ComponentMap:
    """Per-pixel reconstruction error |I - I_hat| averaged over covering patches."""
    if img.channels != 1:
        raise ValueError("recon_error_map expects a single-channel raster")
    a = img.data.astype(np.float64)
    ys, xs, patches = _raw_patches(a, model.patch, model.stride)
    centered = patches - model.mean
    recon = model.mean + centered @ model.basis.T @ model.basis
    err = np.abs(patches - recon).reshape(len(ys), len(xs), model.patch, model.patch)
    acc = np.zeros_like(a)
    cnt = np.zeros_like(a)
    p = model.patch
    # Scatter per window offset: each (dy, dx) touches a disjoint index grid,
    # so plain fancy-indexed += is safe.
    for dy in range(p):
        for dx in range(p):
            sel = np.ix_(ys + dy, xs + dx)
            acc[sel] += err[:, :, dy, dx]
            cnt[sel] += 1.0
    return make_component("recon", acc / np.maximum(cnt, 1.0))


# ---------------------------------------------------------------------------
# depth cues

def depth_components(d: DepthMap) -> list[ComponentMap]:
    grad = depth_gradient(d)
    lap = depth_laplacian(d)
    return [
        make_component("depth_grad", grad.data),
        make_component("depth_lap", np.abs(lap.data)),
    ]


# ---------------------------------------------------------------------------
# model serialization: versioned binary blob, magic APM1

def _pack_array(a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(a, dtype="<f8")
    header = json.dumps({"shape": list(a.shape)}).encode()
    return struct.pack("<I", len(header)) + header + a.tobytes()


def _unpack_array(buf: bytes, off: int) -> tuple[np.ndarray, int]:
    (hlen,) = struct.unpack_from("<I", buf, off)
    off += 4
    meta = json.loads(buf[off : off + hlen].decode())
    off += hlen
    shape = tuple(meta["shape"])
    n = int(np.prod(shape)) if shape else 1
    a = np.frombuffer(buf, dtype="<f8", count=n, offset=off).reshape(shape)
    return a.copy(), off + 8 * n


def save_patch_models(
    path: str | Path,
    stats: PatchStatsModel | None = None,
    pca: PcaReconModel | None = None,
) -> None:
    """Serialize patch models into one versioned APM1 blob."""
    meta: dict = {"version": 1}
    arrays: list[np.ndarray] = []
    if stats is not None:
        meta["stats"] = {
            "recipe": {
                "patch": stats.recipe.patch,
                "stride": stats.recipe.stride,
                "bins": stats.recipe.bins,
                "ridge_scale": stats.recipe.ridge_scale,
            },
            "n_reference": stats.n_reference,
        }
        arrays += [stats.mu, stats.sigma]
    if pca is not None:
        meta["pca"] = {"patch": pca.patch, "stride": pca.stride, "k": pca.k}
        arrays += [pca.mean, pca.basis]
    head = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<I", len(head)))
        f.write(head)
        for a in arrays:
            f.write(_pack_array(a))


def load_patch_models(path: str | Path) -> tuple[PatchStatsModel | None, PcaReconModel | None]:
    buf = Path(path).read_bytes()
    if buf[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: not an APM1 model blob")
    (hlen,) = struct.unpack_from("<I", buf, 4)
    off = 8 + hlen
    meta = json.loads(buf[8 : 8 + hlen].decode())
    if meta.get("version") != 1:
        raise ValueError(f"{path}: unsupported model version {meta.get('version')}")
    stats = pca = None
    if "stats" in meta:
        mu, off = _unpack_array(buf, off)
        sigma, off = _unpack_array(buf, off)
        r = meta["stats"]["recipe"]
        recipe = PatchRecipe(patch=r["patch"], stride=r["stride"], bins=r["bins"], ridge_scale=r["ridge_scale"])
        stats = PatchStatsModel(
            mu=mu, sigma=sigma, chol=np.linalg.cholesky(sigma),
            recipe=recipe, n_reference=meta["stats"]["n_reference"],
        )
    if "pca" in meta:
        mean, off = _unpack_array(buf, off)
        basis, off = _unpack_array(buf, off)
        pca = PcaReconModel(mean=mean, basis=basis, patch=meta["pca"]["patch"], stride=meta["pca"]["stride"])
    return stats, pca
