"""Deterministic synthetic terrain scenes with ground truth.

Scenes are built from hash-based value noise plus placed primitives: rocks and
bright rocks (albedo change + a dome pushed toward the camera in the depth
map), ripples (banded luminance with faint corrugation), shadow patches
(luminance drop, depth untouched), and specular spots (white saturation,
depth untouched). Every random draw comes from splitmix64 so bundles are
bit-identical across platforms and languages for the same (spec, seed).

splitmix64 constants: increment 0x9E3779B97F4A7C15, mix multipliers
0xBF58476D1CE4E5B9 and 0x94D049BB133111EB, shifts 30/27/31.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from artps.depth import DepthMap, write_ard1
from artps.localize import RotatedBox, min_area_rect
from artps.raster import Raster, write_png

MASK64 = (1 << 64) - 1
_SM_INC = 0x9E3779B97F4A7C15
_SM_MUL1 = 0xBF58476D1CE4E5B9
_SM_MUL2 = 0x94D049BB133111EB

RELEVANCE_BY_KIND = {
    "bright_rock": 3,
    "rock": 2,
    "ripple": 1,
    "shadow_patch": 0,
    "specular_spot": 0,
}
ANOMALY_KINDS = ("rock", "bright_rock", "ripple")
NUISANCE_KINDS = ("shadow_patch", "specular_spot")

PLACEMENT_RETRIES = 40

# Thresholds deciding when a primitive's effect on a pixel is large enough
# to count as ground-truth anomalous (blend weight, luminance delta, depth delta).
MATERIAL_BLEND = 0.05
MATERIAL_LUM = 0.02
MATERIAL_DEPTH = 0.01

# Fixed warm albedo tint applied to the luminance field.
_TINT = np.array([1.0, 0.78, 0.60])


class SplitMix64:
    """Scalar splitmix64 stream over plain Python integers (wrap-safe)."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _SM_INC) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _SM_MUL1) & MASK64
        z = ((z ^ (z >> 27)) * _SM_MUL2) & MASK64
        return (z ^ (z >> 31)) & MASK64

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) / float(1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] (simple modulo; spans here are tiny)."""
        if hi < lo:
            raise ValueError("empty integer range")
        return lo + self.next_u64() % (hi - lo + 1)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_SM_MUL1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_SM_MUL2)
    z ^= z >> np.uint64(31)
    return z


def _lattice_hash(seed: int, xi: np.ndarray, yi: np.ndarray) -> np.ndarray:
    """Unit-interval hash of integer lattice coordinates."""
    key = (
        np.uint64(seed & MASK64)
        ^ (xi.astype(np.uint64) * np.uint64(_SM_INC))
        ^ (yi.astype(np.uint64) * np.uint64(_SM_MUL2))
    )
    h = _mix64_array(key)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(seed: int, h: int, w: int, scale: float) -> np.ndarray:
    """Bilinear value noise on a lattice of the given pixel spacing, in [0,1]."""
    if scale <= 0:
        raise ValueError("noise scale must be positive")
    ys = np.arange(h, dtype=np.float64) / scale
    xs = np.arange(w, dtype=np.float64) / scale
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    # smoothstep fade for C1 continuity across lattice cells
    fy = fy * fy * (3.0 - 2.0 * fy)
    fx = fx * fx * (3.0 - 2.0 * fx)
    yg0, xg0 = np.meshgrid(y0, x0, indexing="ij")
    c00 = _lattice_hash(seed, xg0, yg0)
    c01 = _lattice_hash(seed, xg0 + 1, yg0)
    c10 = _lattice_hash(seed, xg0, yg0 + 1)
    c11 = _lattice_hash(seed, xg0 + 1, yg0 + 1)
    top = c00 * (1.0 - fx) + c01 * fx
    bot = c10 * (1.0 - fx) + c11 * fx
    return top * (1.0 - fy) + bot * fy


def fractal_noise(seed: int, h: int, w: int, base_scale: float, octaves: int) -> np.ndarray:
    """Octave sum of value noise with persistence 0.5, renormalized to [0,1]."""
    if octaves < 1:
        raise ValueError("need at least one octave")
    total = np.zeros((h, w))
    amp_sum = 0.0
    for o in range(octaves):
        amp = 0.5**o
        scale = max(base_scale / (2**o), 1.0)
        total += amp * value_noise((seed + o) & MASK64, h, w, scale)
        amp_sum += amp
    return total / amp_sum


@dataclass(frozen=True)
class AnomalySpec:
    kind: str
    count: int
    size_range: tuple[float, float] = (16.0, 48.0)
    contrast_range: tuple[float, float] = (0.25, 0.6)

    def __post_init__(self):
        if self.kind not in RELEVANCE_BY_KIND:
            raise ValueError(f"unknown anomaly kind {self.kind!r}")
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        lo, hi = self.size_range
        if lo < 2 or hi < lo:
            raise ValueError("sizes must be >= 2 px with lo <= hi")
        clo, chi = self.contrast_range
        if not (0 <= clo <= chi <= 1):
            raise ValueError("contrast range must satisfy 0 <= lo <= hi <= 1")


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    dims: tuple[int, int] = (512, 512)  # (height, width)
    noise_octaves: int = 4
    noise_amplitude: float = 0.35
    noise_scale: float = 96.0
    anomalies: tuple[AnomalySpec, ...] = field(
        default_factory=lambda: (
            AnomalySpec("rock", 6, (16.0, 48.0), (0.25, 0.6)),
            AnomalySpec("bright_rock", 2, (12.0, 32.0), (0.3, 0.7)),
            AnomalySpec("ripple", 1, (60.0, 140.0), (0.15, 0.3)),
            AnomalySpec("shadow_patch", 2, (30.0, 80.0), (0.4, 0.7)),
            AnomalySpec("specular_spot", 1, (8.0, 20.0), (0.5, 0.9)),
        )
    )
    depth_base: float = 2.5
    depth_slope: float = 0.8
    depth_bump: float = 0.08

    def __post_init__(self):
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must fit in 64 bits")
        h, w = self.dims
        if h < 32 or w < 32:
            raise ValueError("scene dims must be at least 32x32")
        if self.depth_base <= 0:
            raise ValueError("depth base must be positive")

    @staticmethod
    def from_dict(doc: dict) -> "SceneSpec":
        anomalies = tuple(
            AnomalySpec(
                kind=a["kind"],
                count=int(a["count"]),
                size_range=tuple(a.get("size_range", (16.0, 48.0))),
                contrast_range=tuple(a.get("contrast_range", (0.25, 0.6))),
            )
            for a in doc.get("anomalies", [])
        )
        kwargs = {}
        if anomalies:
            kwargs["anomalies"] = anomalies
        for key in (
            "dims",
            "noise_octaves",
            "noise_amplitude",
            "noise_scale",
            "depth_base",
            "depth_slope",
            "depth_bump",
        ):
            if key in doc:
                val = doc[key]
                kwargs[key] = tuple(val) if key == "dims" else val
        return SceneSpec(seed=int(doc["seed"]), **kwargs)


@dataclass(frozen=True)
class TruthRegion:
    kind: str
    box: RotatedBox
    relevance: int
    area_px: int


@dataclass(frozen=True)
class SceneBundle:
    image: Raster
    depth: DepthMap
    anomaly_mask: np.ndarray
    shadow_mask: np.ndarray
    truth: tuple[TruthRegion, ...]
    warnings: tuple[str, ...] = ()


def _elliptical_rho(
    h: int, w: int, cx: float, cy: float, rx: float, ry: float, angle_rad: float
) -> tuple[np.ndarray, np.ndarray, slice, slice]:
    """Normalized elliptical radius and along-axis coordinate on a local window."""
    pad = max(rx, ry) + 2.0
    y0 = max(int(np.floor(cy - pad)), 0)
    y1 = min(int(np.ceil(cy + pad)) + 1, h)
    x0 = max(int(np.floor(cx - pad)), 0)
    x1 = min(int(np.ceil(cx + pad)) + 1, w)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dx = xx - cx
    dy = yy - cy
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    rho = np.sqrt((u / rx) ** 2 + (v / ry) ** 2)
    return rho, u, slice(y0, y1), slice(x0, x1)


def _truth_box(cx: float, cy: float, rx: float, ry: float, angle_rad: float) -> RotatedBox:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    corners = []
    for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        u, v = su * rx, sv * ry
        corners.append((cx + c * u - s * v, cy + s * u + c * v))
    return min_area_rect(np.array(corners))


def generate_scene(spec: SceneSpec) -> SceneBundle:
    """Render a scene and its ground truth; pure function of the spec."""
    h, w = spec.dims
    rng = SplitMix64(spec.seed)

    terrain = fractal_noise(spec.seed, h, w, spec.noise_scale, spec.noise_octaves)
    lum = 0.5 + spec.noise_amplitude * (terrain - 0.5)

    rows = np.arange(h, dtype=np.float64)[:, None]
    depth = np.full((h, w), spec.depth_base) + spec.depth_slope * rows / max(h - 1, 1)
    depth = depth + spec.depth_bump * (
        fractal_noise((spec.seed ^ 0xD1FF) & MASK64, h, w, spec.noise_scale * 1.7, 3) - 0.5
    )

    anomaly_mask = np.zeros((h, w), dtype=bool)
    shadow_mask = np.zeros((h, w), dtype=bool)
    truth: list[TruthRegion] = []
    warnings: list[str] = []
    placed: list[tuple[float, float, float]] = []

    for aspec in spec.anomalies:
        for _ in range(aspec.count):
            size = rng.uniform(*aspec.size_range)
            contrast = rng.uniform(*aspec.contrast_range)
            aspect = rng.uniform(0.55, 0.95)
            angle = rng.uniform(-np.pi / 2, np.pi / 2)
            rx = size / 2.0
            ry = max(rx * aspect, 1.0)
            r_eff = max(rx, ry)
            ok = False
            cx = cy = 0.0
            for _try in range(PLACEMENT_RETRIES):
                cx = rng.uniform(r_eff + 2.0, w - r_eff - 2.0) if w > 2 * (r_eff + 2) else w / 2.0
                cy = rng.uniform(r_eff + 2.0, h - r_eff - 2.0) if h > 2 * (r_eff + 2) else h / 2.0
                if all(
                    np.hypot(cx - px, cy - py) > 0.9 * (r_eff + pr)
                    for px, py, pr in placed
                ):
                    ok = True
                    break
            if not ok:
                warnings.append(f"placement_truncated:{aspec.kind}")
                continue
            placed.append((cx, cy, r_eff))

            rho, u, ys, xs = _elliptical_rho(h, w, cx, cy, rx, ry, angle)
            core = rho <= 1.0
            dome = np.where(core, np.cos(np.clip(rho, 0.0, 1.0) * np.pi / 2.0) ** 2, 0.0)

            if aspec.kind in ("rock", "bright_rock"):
                if aspec.kind == "rock":
                    # Rocks read as modest albedo shifts plus strong relief;
                    # deep darkness is the signature of shadows, not rocks.
                    target = lum[ys, xs] * (1.0 - 0.35 * contrast)
                else:
                    target = lum[ys, xs] + 0.9 * contrast * (1.0 - lum[ys, xs])
                blend = np.clip(dome * 1.6, 0.0, 1.0)
                lum[ys, xs] = lum[ys, xs] * (1.0 - blend) + target * blend
                height = 0.12 + 0.5 * contrast * min(r_eff, 40.0) / 40.0
                depth[ys, xs] -= height * dome
                # Ground truth marks pixels the primitive materially changed;
                # the outer rim of the dome tapers to an unmodified surface.
                anomaly_mask[ys, xs] |= core & (
                    (blend >= MATERIAL_BLEND) | (height * dome >= MATERIAL_DEPTH)
                )
            elif aspec.kind == "ripple":
                period = max(size / 6.0, 4.0)
                bands = np.sin(2.0 * np.pi * u / period)
                lum[ys, xs] += contrast * dome * bands
                depth[ys, xs] -= 0.04 * dome * bands
                anomaly_mask[ys, xs] |= core & (
                    np.abs(contrast * dome * bands) >= MATERIAL_LUM
                )
            elif aspec.kind == "shadow_patch":
                soft = np.clip(dome * 1.4, 0.0, 1.0)
                lum[ys, xs] *= 1.0 - contrast * soft
                shadow_mask[ys, xs] |= core
            else:  # specular_spot
                soft = np.clip(dome * 1.8, 0.0, 1.0)
                lum[ys, xs] += contrast * soft * (1.0 - lum[ys, xs])
                shadow_mask[ys, xs] |= core

            truth.append(
                TruthRegion(
                    kind=aspec.kind,
                    box=_truth_box(cx, cy, rx, ry, angle),
                    relevance=RELEVANCE_BY_KIND[aspec.kind],
                    area_px=int(np.count_nonzero(core)),
                )
            )

    lum = np.clip(lum, 0.0, 1.0)
    rgb = np.clip(lum[:, :, None] * _TINT[None, None, :], 0.0, 1.0)
    # Specular spots should read as white, not tinted: re-blend toward luminance.
    if any(a.kind == "specular_spot" for a in spec.anomalies):
        white_w = np.clip((lum - 0.85) / 0.15, 0.0, 1.0)[:, :, None]
        rgb = rgb * (1.0 - white_w) + lum[:, :, None] * white_w
    depth = np.maximum(depth, 0.05)

    return SceneBundle(
        image=Raster(rgb.astype(np.float32)),
        depth=DepthMap(depth.astype(np.float32), unit="relative"),
        anomaly_mask=anomaly_mask,
        shadow_mask=shadow_mask,
        truth=tuple(truth),
        warnings=tuple(warnings),
    )


def truth_to_json(bundle: SceneBundle) -> dict:
    return {
        "regions": [
            {
                "kind": t.kind,
                "relevance": t.relevance,
                "area_px": t.area_px,
                "box": {
                    "cx": t.box.cx,
                    "cy": t.box.cy,
                    "w": t.box.w,
                    "h": t.box.h,
                    "angle_deg": t.box.angle_deg,
                },
            }
            for t in bundle.truth
        ],
        "warnings": list(bundle.warnings),
    }


def write_bundle(bundle: SceneBundle, outdir: str, stem: str = "scene") -> dict[str, str]:
    """Write image PNG, ARD1 depth, mask PNGs, and truth JSON; returns paths."""
    import os

    os.makedirs(outdir, exist_ok=True)
    paths = {
        "image": os.path.join(outdir, f"{stem}_image.png"),
        "depth": os.path.join(outdir, f"{stem}_depth.ard1"),
        "anomaly_mask": os.path.join(outdir, f"{stem}_anomaly_mask.png"),
        "shadow_mask": os.path.join(outdir, f"{stem}_shadow_mask.png"),
        "truth": os.path.join(outdir, f"{stem}_truth.json"),
    }
    write_png(bundle.image, paths["image"], bit_depth=8)
    write_ard1(bundle.depth, paths["depth"])
    write_png(
        Raster(bundle.anomaly_mask.astype(np.float32)), paths["anomaly_mask"], bit_depth=8
    )
    write_png(
        Raster(bundle.shadow_mask.astype(np.float32)), paths["shadow_mask"], bit_depth=8
    )
    with open(paths["truth"], "w") as fh:
        json.dump(truth_to_json(bundle), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
