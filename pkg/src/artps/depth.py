"""Depth-map ingestion and post-processing.

The depth estimate itself comes from an external producer (a file); this
module loads it and runs the refinement chain: edge-guided attenuation of the
depth-gradient field where image edges are strong, gradient-domain smoothing
(an iterative Poisson solve with the attenuated field as divergence source),
and guided weighted-median filtering. Depth discontinuity cues (gradient
magnitude, Laplacian) for the anomaly stage are computed here too.

Depth file formats:
  * 16-bit grayscale PNG, raw counts multiplied by a scale factor;
  * "ARD1" raw: magic bytes ``ARD1``, u32 LE width, u32 LE height, then
    width*height float32 LE values, row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from artps.raster import Raster, read_png_raw16, resize_bicubic

ARD1_MAGIC = b"ARD1"


@dataclass(frozen=True)
class DepthMap:
    """Positive single-channel depth raster with a unit tag.

    ``valid_mask`` marks trustworthy pixels; None means fully valid. Invalid
    pixels are excluded from every window/stencil and preserved untouched.
    """

    data: np.ndarray
    unit: str = "relative"          # "relative" | "meters"
    valid_mask: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim != 2 or a.size == 0:
            raise ValueError(f"depth must be a non-empty HxW array, got shape {a.shape}")
        if self.unit not in ("relative", "meters"):
            raise ValueError(f"unknown depth unit {self.unit!r}")
        mask = self.valid_mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != a.shape:
                raise ValueError("valid_mask dimensions differ from depth")
            if mask.all():
                mask = None
        check = a if mask is None else a[mask]
        if check.size and (not np.isfinite(check).all() or (check <= 0).any()):
            raise ValueError("valid depth values must be positive and finite")
        object.__setattr__(self, "data", np.ascontiguousarray(a))
        object.__setattr__(self, "valid_mask", mask)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def mask_or_full(self) -> np.ndarray:
        if self.valid_mask is None:
            return np.ones(self.data.shape, dtype=bool)
        return self.valid_mask


@dataclass(frozen=True)
class PoissonParams:
    max_iters: int = 120
    tolerance: float = 2e-3

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class WmfParams:
    window: int = 5
    guide: str = "image"            # "image" | "depth"
    sigma_g: float = 0.1

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"wmf window must be odd, got {self.window}")
        if self.guide not in ("image", "depth"):
            raise ValueError(f"unknown wmf guide {self.guide!r}")
        if self.sigma_g <= 0:
            raise ValueError("wmf sigma_g must be positive")


@dataclass(frozen=True)
class DepthPostParams:
    alpha: float = 8.0              # edge-guidance strength
    poisson: PoissonParams = field(default_factory=PoissonParams)
    wmf: WmfParams = field(default_factory=WmfParams)

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass(frozen=True)
class PoissonResult:
    converged: bool
    iterations: int
    residual: float
    residual_history: tuple[float, ...]


# ---------------------------------------------------------------------------
# file I/O

def write_ard1(depth: DepthMap, path: str | Path) -> None:
    a = depth.data.astype("<f4")
    with open(path, "wb") as f:
        f.write(ARD1_MAGIC)
        f.write(struct.pack("<II", depth.width, depth.height))
        f.write(a.tobytes(order="C"))


def read_ard1(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != ARD1_MAGIC:
        raise ValueError(f"{path}: not an ARD1 depth file")
    w, h = struct.unpack("<II", raw[4:12])
    expected = 12 + 4 * w * h
    if len(raw) != expected:
        raise ValueError(f"{path}: ARD1 payload size mismatch ({len(raw)} != {expected})")
    return np.frombuffer(raw, dtype="<f4", offset=12).reshape(h, w).astype(np.float32)


def load_depth(
    path: str | Path,
    expected_dims: tuple[int, int] | None = None,
    *,
    scale: float = 1.0,
    unit: str | None = None,
    resample: bool = False,
) -> DepthMap:
    """Load a depth file (ARD1 or 16-bit PNG) as a validated DepthMap.

    ``expected_dims`` is (width, height); a mismatch either raises or, with
    ``resample``, triggers a clamped bicubic resample. Non-positive values are
    masked invalid rather than rejected.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    if p.suffix.lower() in (".ard1", ".ard"):
        arr = read_ard1(p)
        if unit is None:
            unit = "relative"
    elif p.suffix.lower() == ".png":
        arr = read_png_raw16(p).astype(np.float32) * float(scale)
        if unit is None:
            unit = "meters" if scale != 1.0 else "relative"
    else:
        raise ValueError(f"unsupported depth format: {p.suffix}")
    valid = np.isfinite(arr) & (arr > 0)
    if expected_dims is not None:
        w, h = expected_dims
        if arr.shape != (h, w):
            if not resample:
                raise ValueError(
                    f"{p}: depth dims {arr.shape[1]}x{arr.shape[0]} do not match "
                    f"expected {w}x{h} and resampling is off"
                )
            if not valid.all():
                raise ValueError(f"{p}: cannot resample a depth map with invalid pixels")
            arr = resize_bicubic(Raster(arr), w, h).data
            valid = np.ones(arr.shape, dtype=bool)
    arr = np.where(valid, arr, 1.0).astype(np.float32)
    return DepthMap(arr, unit=unit, valid_mask=valid if not valid.all() else None)


# ---------------------------------------------------------------------------
# gradient field machinery (forward differences, staggered grid)

def forward_gradients(d: DepthMap) -> np.ndarray:
    """Forward-difference gradient field, shape (H, W, 2) as (gx, gy).

    gx[i, j] spans pixels (i, j) -> (i, j+1); differences touching an invalid
    or out-of-grid pixel are zero, which keeps the divergence source
    compatible on the valid region.
    """
    a = d.data.astype(np.float64)
    m = d.mask_or_full()
    gx = np.zeros_like(a)
    gy = np.zeros_like(a)
    ok_x = m[:, :-1] & m[:, 1:]
    ok_y = m[:-1, :] & m[1:, :]
    gx[:, :-1] = np.where(ok_x, a[:, 1:] - a[:, :-1], 0.0)
    gy[:-1, :] = np.where(ok_y, a[1:, :] - a[:-1, :], 0.0)
    return np.stack([gx, gy], axis=2)


def divergence(grad: np.ndarray) -> np.ndarray:
    """Backward-difference divergence of a forward-difference gradient field."""
    gx = grad[:, :, 0]
    gy = grad[:, :, 1]
    div = gx.copy()
    div[:, 1:] -= gx[:, :-1]
    div += gy
    div[1:, :] -= gy[:-1, :]
    return div


def edge_guided_attenuation(d: DepthMap, img_edges: Raster, alpha: float) -> np.ndarray:
    """Attenuate the depth-gradient field where image edges are strong.

    Returns the field g(p) = grad_D(p) * exp(-alpha * |E_I(p)|); the depth map
    itself is untouched. The attenuated field feeds the Poisson smoothing step
    and the discontinuity cues.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if img_edges.channels != 1 or img_edges.data.shape != d.data.shape:
        raise ValueError("image edge raster dims must match depth")
    grad = forward_gradients(d)
    factor = np.exp(-alpha * img_edges.data.astype(np.float64))
    return grad * factor[:, :, None]


def _valid_neighbor_count(mask: np.ndarray) -> np.ndarray:
    k = np.zeros(mask.shape, dtype=np.float64)
    k[1:, :] += mask[:-1, :]
    k[:-1, :] += mask[1:, :]
    k[:, 1:] += mask[:, :-1]
    k[:, :-1] += mask[:, 1:]
    return k * mask


def _neighbor_sum(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    xm = x * mask
    s = np.zeros_like(x)
    s[1:, :] += xm[:-1, :]
    s[:-1, :] += xm[1:, :]
    s[:, 1:] += xm[:, :-1]
    s[:, :-1] += xm[:, 1:]
    return s


def fast_global_smooth(
    d: DepthMap,
    guided_grad: np.ndarray | None = None,
    p: DepthPostParams | None = None,
    residual_every: int = 8,
) -> tuple[DepthMap, PoissonResult]:
    """Gradient-domain smoothing: solve laplacian(D') = div(g) iteratively.

    Red-black Gauss-Seidel with Neumann boundaries, initialized at the input
    depth and anchored to the input mean per connected valid component (the
    Poisson solution is defined only up to a constant). Stops when the
    max-abs residual drops below tolerance, otherwise returns the best
    iterate with ``converged=False``. The residual is evaluated every
    ``residual_every`` sweeps (it costs as much as a sweep), so up to
    ``residual_every - 1`` extra sweeps may run past the tolerance.
    """
    p = p or DepthPostParams()
    if residual_every < 1:
        raise ValueError("residual_every must be >= 1")
    if guided_grad is None:
        guided_grad = forward_gradients(d)
    if guided_grad.shape != d.data.shape + (2,):
        raise ValueError("guided gradient field dims must match depth (H, W, 2)")
    mask = d.mask_or_full()
    b = divergence(guided_grad)
    k = _valid_neighbor_count(mask)
    solvable = mask & (k > 0)
    x = d.data.astype(np.float64).copy()

    yy, xx = np.indices(mask.shape)
    colors = [(solvable & ((yy + xx) % 2 == 0)), (solvable & ((yy + xx) % 2 == 1))]
    inv_k = np.where(k > 0, 1.0, 0.0) / np.where(k > 0, k, 1.0)
    full = bool(mask.all())

    def nsum(arr: np.ndarray) -> np.ndarray:
        if full:
            s = np.zeros_like(arr)
            s[1:, :] += arr[:-1, :]
            s[:-1, :] += arr[1:, :]
            s[:, 1:] += arr[:, :-1]
            s[:, :-1] += arr[:, 1:]
            return s
        return _neighbor_sum(arr, mask)

    def residual_inf() -> float:
        r = nsum(x) - k * x - b
        return float(np.abs(r[solvable]).max()) if solvable.any() else 0.0

    history = []
    res = residual_inf()
    history.append(res)
    it = 0
    while res >= p.poisson.tolerance and it < p.poisson.max_iters:
        for _ in range(min(residual_every, p.poisson.max_iters - it)):
            for color in colors:
                x = np.where(color, (nsum(x) - b) * inv_k, x)
            it += 1
        res = residual_inf()
        history.append(res)

    # Per-component mean anchoring back to the input depth.
    labels, n = ndimage.label(solvable)
    src = d.data.astype(np.float64)
    for lbl in range(1, n + 1):
        comp = labels == lbl
        x[comp] += src[comp].mean() - x[comp].mean()
    out = np.where(solvable, x, src)
    out = np.maximum(out, 1e-6)  # smoothing must not produce non-positive depth
    result = PoissonResult(
        converged=res < p.poisson.tolerance,
        iterations=it,
        residual=res,
        residual_history=tuple(history),
    )
    return DepthMap(out.astype(np.float32), unit=d.unit, valid_mask=d.valid_mask), result


# ---------------------------------------------------------------------------
# weighted median

def weighted_median_filter(
    d: DepthMap, guide: Raster, window: int, sigma_g: float = 0.1
) -> DepthMap:
    """Per-pixel weighted median over a square window.

    Weights are Gaussian affinities in the guide channel. The output value at
    each pixel is always a member of its window (selection filter). Ties
    resolve to the lowest value whose cumulative weight reaches half the
    total, which is deterministic.
    """
    if window % 2 == 0 or window < 1:
        raise ValueError(f"window must be odd, got {window}")
    if window > min(d.height, d.width):
        raise ValueError(f"window {window} larger than depth {d.width}x{d.height}")
    if guide.channels != 1 or guide.data.shape != d.data.shape:
        raise ValueError("guide dims must match depth")
    half = window // 2
    a = d.data.astype(np.float64)
    g = guide.data.astype(np.float64)
    mask = d.mask_or_full()
    h, w = a.shape
    pad_a = np.pad(a, half, mode="constant")
    pad_g = np.pad(g, half, mode="constant")
    pad_m = np.pad(mask.astype(np.float64), half, mode="constant")
    n_off = window * window
    vals = np.empty((n_off, h, w))
    wts = np.empty((n_off, h, w))
    inv = 1.0 / (2.0 * sigma_g * sigma_g)
    i = 0
    for dy in range(-half, half + 1):
        for dx in range(-half, half + 1):
            sv = pad_a[half + dy : half + dy + h, half + dx : half + dx + w]
            sg = pad_g[half + dy : half + dy + h, half + dx : half + dx + w]
            sm = pad_m[half + dy : half + dy + h, half + dx : half + dx + w]
            vals[i] = sv
            wts[i] = np.exp(-((sg - g) ** 2) * inv) * sm
            i += 1
    order = np.argsort(vals, axis=0, kind="stable")
    vals_sorted = np.take_along_axis(vals, order, axis=0)
    wts_sorted = np.take_along_axis(wts, order, axis=0)
    cum = np.cumsum(wts_sorted, axis=0)
    total = cum[-1]
    # First sorted index whose cumulative weight reaches half the total.
    target = 0.5 * total
    pick = np.argmax(cum >= target[None, :, :], axis=0)
    out = np.take_along_axis(vals_sorted, pick[None, :, :], axis=0)[0]
    out = np.where(mask & (total > 0), out, a)
    return DepthMap(out.astype(np.float32), unit=d.unit, valid_mask=d.valid_mask)


# ---------------------------------------------------------------------------
# discontinuity cues

def depth_gradient(d: DepthMap) -> Raster:
    """Central-difference gradient magnitude (one-sided at borders/mask edges)."""
    a = d.data.astype(np.float64)
    m = d.mask_or_full()

    def axis_grad(axis: int) -> np.ndarray:
        fwd = np.empty_like(a)
        bwd = np.empty_like(a)
        okf = np.zeros(a.shape, dtype=bool)
        okb = np.zeros(a.shape, dtype=bool)
        if axis == 1:
            fwd[:, :-1] = a[:, 1:]
            okf[:, :-1] = m[:, 1:]
            bwd[:, 1:] = a[:, :-1]
            okb[:, 1:] = m[:, :-1]
        else:
            fwd[:-1, :] = a[1:, :]
            okf[:-1, :] = m[1:, :]
            bwd[1:, :] = a[:-1, :]
            okb[1:, :] = m[:-1, :]
        hi = np.where(okf, fwd, a)
        lo = np.where(okb, bwd, a)
        span = okf.astype(np.float64) + okb.astype(np.float64)
        return (hi - lo) / np.maximum(span, 1.0)

    gx = axis_grad(1)
    gy = axis_grad(0)
    mag = np.sqrt(gx * gx + gy * gy)
    mag[~m] = 0.0
    return Raster(mag.astype(np.float32))


def depth_laplacian(d: DepthMap) -> Raster:
    """4-neighbor Laplacian with replicated (Neumann) borders; invalid pixels excluded."""
    a = d.data.astype(np.float64)
    m = d.mask_or_full()
    lap = np.zeros_like(a)
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        nb = np.roll(a, shift, axis=axis)
        ok = np.roll(m, shift, axis=axis)
        if axis == 0 and shift == 1:
            nb[0, :] = a[0, :]
            ok[0, :] = m[0, :]
        elif axis == 0 and shift == -1:
            nb[-1, :] = a[-1, :]
            ok[-1, :] = m[-1, :]
        elif axis == 1 and shift == 1:
            nb[:, 0] = a[:, 0]
            ok[:, 0] = m[:, 0]
        else:
            nb[:, -1] = a[:, -1]
            ok[:, -1] = m[:, -1]
        lap += np.where(ok, nb, a) - a
    lap[~m] = 0.0
    return Raster(lap.astype(np.float32))
