"""Component fusion and candidate-region extraction.

Normalized component maps are optionally damped by the shadow/specular
suppression terms, fused by a renormalized weighted sum, binarized with
hysteresis thresholding, cleaned by morphological open/close, and labeled
into candidate regions whose confidences are reweighted by component
consistency and depth-topography alignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from artps.features import ComponentMap, IMAGE_CUE_IDS, SuppressionMaps
from artps.raster import Raster

EIGHT_CONN = np.ones((3, 3), dtype=bool)

DEFAULT_WEIGHTS = {
    "gradient": 0.15,
    "mslap": 0.15,
    "dog": 0.15,
    "recon": 0.15,
    "patch_stats": 0.2,
    "depth_grad": 0.1,
    "depth_lap": 0.1,
}

# Components that receive shadow/specular suppression (depth cues and the
# covariance-normalized patch statistics are left untouched).
SUPPRESSED_IDS = frozenset(IMAGE_CUE_IDS)


@dataclass(frozen=True)
class SuppressionConfig:
    enabled: bool = True
    mode: str = "both"            # "both" | "shadow" | "specular"
    strength: float = 1.0         # beta in [0, 1]

    def __post_init__(self):
        if self.mode not in ("both", "shadow", "specular"):
            raise ValueError(f"unknown suppression mode {self.mode!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("suppression strength must be in [0, 1]")


@dataclass(frozen=True)
class HysteresisConfig:
    tau_low: float = 0.3
    tau_high: float = 0.6

    def __post_init__(self):
        if not (0.0 <= self.tau_low < self.tau_high <= 1.0):
            raise ValueError(
                f"require 0 <= tau_low < tau_high <= 1, got ({self.tau_low}, {self.tau_high})"
            )


@dataclass(frozen=True)
class MorphologyConfig:
    open_radius: int = 1
    close_radius: int = 1

    def __post_init__(self):
        if self.open_radius < 0 or self.close_radius < 0:
            raise ValueError("morphology radii must be >= 0")


@dataclass(frozen=True)
class FusionConfig:
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    suppression: SuppressionConfig = field(default_factory=SuppressionConfig)
    hysteresis: HysteresisConfig = field(default_factory=HysteresisConfig)
    morphology: MorphologyConfig = field(default_factory=MorphologyConfig)
    min_region_area: int = 24

    def __post_init__(self):
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("fusion weights must be >= 0")
        if sum(self.weights.values()) <= 0:
            raise ValueError("fusion weights must sum to a positive value")
        if self.min_region_area < 1:
            raise ValueError("min_region_area must be >= 1")


@dataclass(frozen=True)
class LabeledRegions:
    """Connected candidate regions. Labels are 1..count, ordered by descending area."""

    label_map: np.ndarray            # int32, 0 = background
    count: int
    pixels: tuple[np.ndarray, ...]   # per-label (n_i, 2) arrays of (row, col)

    def areas(self) -> list[int]:
        return [len(p) for p in self.pixels]


def weighted_fusion(components: list[ComponentMap], cfg: FusionConfig) -> Raster:
    """Weighted sum of normalized components, weights renormalized to sum 1."""
    if not components:
        raise ValueError("no components to fuse")
    shape = components[0].map.data.shape
    for c in components:
        if c.map.data.shape != shape:
            raise ValueError(f"component {c.name!r} dims differ")
    missing = [c.name for c in components if c.name not in cfg.weights]
    if missing:
        raise ValueError(f"no fusion weight configured for component(s): {missing}")
    weights = np.array([cfg.weights[c.name] for c in components], dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        raise ValueError("all active component weights are zero")
    weights /= total
    out = np.zeros(shape, dtype=np.float64)
    for w, c in zip(weights, components):
        out += w * c.map.data.astype(np.float64)
    return Raster(out.astype(np.float32))


def effective_weights(components: list[ComponentMap], cfg: FusionConfig) -> dict[str, float]:
    """Renormalized weight actually applied to each provided component."""
    weights = {c.name: cfg.weights[c.name] for c in components}
    total = sum(weights.values())
    return {k: v / total for k, v in weights.items()}


def apply_suppression(
    components: list[ComponentMap], sup: SuppressionMaps, cfg: FusionConfig
) -> list[ComponentMap]:
    """Damp image-cue components where luminance/saturation deviate from frame means.

    Each suppressed map is multiplied per-pixel by 1 - beta*(1 - s) with s the
    product of the enabled suppression terms. The factor is in [0, 1], so the
    outputs stay normalized; they are deliberately not re-stretched, which
    would scale surviving noise back up and could raise the response inside
    the very regions being suppressed. beta = 0 is a bit-exact no-op, making
    the ablation toggle a pure config switch.
    """
    beta = cfg.suppression.strength
    if cfg.suppression.mode == "shadow":
        s = sup.shadow.data.astype(np.float64)
    elif cfg.suppression.mode == "specular":
        s = sup.specular.data.astype(np.float64)
    else:
        s = sup.shadow.data.astype(np.float64) * sup.specular.data.astype(np.float64)
    factor = 1.0 - beta * (1.0 - s)
    out = []
    for c in components:
        if c.name in SUPPRESSED_IDS:
            damped = Raster((c.map.data.astype(np.float64) * factor).astype(np.float32))
            out.append(ComponentMap(name=c.name, map=damped, raw_range=c.raw_range))
        else:
            out.append(c)
    return out


def hysteresis_threshold(m: Raster, tau_low: float, tau_high: float) -> np.ndarray:
    """Dual-threshold binarization: weak pixels survive only when 8-connected to a seed."""
    if not (0.0 <= tau_low <= tau_high <= 1.0):
        raise ValueError(f"require 0 <= tau_low <= tau_high <= 1, got ({tau_low}, {tau_high})")
    if m.channels != 1:
        raise ValueError("hysteresis_threshold expects a single-channel raster")
    a = m.data
    strong = a >= tau_high
    weak = a >= tau_low
    if not strong.any():
        return np.zeros_like(weak)
    labels, _ = ndimage.label(weak, structure=EIGHT_CONN)
    keep = np.unique(labels[strong])
    return np.isin(labels, keep[keep > 0])


def disk_footprint(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (yy * yy + xx * xx) <= r * r


def morphology_open_close(mask: np.ndarray, cfg: MorphologyConfig) -> np.ndarray:
    """Opening then closing with disk structuring elements.

    Pixels beyond the image border count as foreground for erosion and
    background for dilation, so a full mask stays full.
    """
    out = mask.astype(bool)
    if cfg.open_radius > 0:
        fp = disk_footprint(cfg.open_radius)
        out = ndimage.binary_erosion(out, structure=fp, border_value=1)
        out = ndimage.binary_dilation(out, structure=fp, border_value=0)
    if cfg.close_radius > 0:
        fp = disk_footprint(cfg.close_radius)
        out = ndimage.binary_dilation(out, structure=fp, border_value=0)
        out = ndimage.binary_erosion(out, structure=fp, border_value=1)
    return out


def label_regions(mask: np.ndarray, min_area: int) -> LabeledRegions:
    """8-connected labeling; regions below min_area are dropped and labels
    renumbered by descending area (ties keep first-encountered order)."""
    raw, n = ndimage.label(mask.astype(bool), structure=EIGHT_CONN)
    if n == 0:
        return LabeledRegions(np.zeros(mask.shape, dtype=np.int32), 0, ())
    areas = np.bincount(raw.ravel(), minlength=n + 1)
    keep = [lbl for lbl in range(1, n + 1) if areas[lbl] >= min_area]
    keep.sort(key=lambda lbl: (-int(areas[lbl]), lbl))
    remap = np.zeros(n + 1, dtype=np.int32)
    for new, old in enumerate(keep, start=1):
        remap[old] = new
    label_map = remap[raw]
    pixels = []
    for new, old in enumerate(keep, start=1):
        ys, xs = np.nonzero(raw == old)
        pixels.append(np.stack([ys, xs], axis=1))
    return LabeledRegions(label_map, len(keep), tuple(pixels))


def consistency_reweight(
    regions: LabeledRegions,
    components: list[ComponentMap],
    fused: Raster,
    depth_grad_component: ComponentMap | None,
) -> np.ndarray:
    """Per-region confidence in [0, 1].

    confidence = (mean fused score) * (1 - dispersion of per-component region
    means) * (mean normalized depth-gradient in the region). Without depth the
    alignment factor is omitted.
    """
    conf = np.zeros(regions.count, dtype=np.float64)
    fused_a = fused.data.astype(np.float64)
    comp_maps = [c.map.data.astype(np.float64) for c in components]
    dg = depth_grad_component.map.data.astype(np.float64) if depth_grad_component is not None else None
    for i, pix in enumerate(regions.pixels):
        ys, xs = pix[:, 0], pix[:, 1]
        base = fused_a[ys, xs].mean()
        means = np.array([cm[ys, xs].mean() for cm in comp_maps])
        dispersion = float(means.std()) if len(means) else 0.0
        c = base * (1.0 - dispersion)
        if dg is not None:
            c *= dg[ys, xs].mean()
        conf[i] = c
    return conf
