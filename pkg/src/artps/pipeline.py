"""End-to-end frame pipeline: enhance, refine depth, build anomaly components,
fuse with illumination suppression, localize rotated-box regions, and rank by
curiosity with per-region diagnostics.

Reports are deterministic: the same config and inputs give byte-identical
JSON once timings are excluded. Region ids are assigned in ranking order
(1 is the most curious region) so overlay numbering, report rows, and console
tables always agree.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from artps.config import PipelineConfig, config_hash
from artps.curiosity import (
    CuriosityModel,
    ScoredRegion,
    compute_region_features,
    default_model,
    fit_normalization,
    known_value_provider,
    normalize_features,
    rank_regions,
    score,
    uncertainty,
)
from artps.depth import (
    DepthMap,
    DepthPostParams,
    edge_guided_attenuation,
    fast_global_smooth,
    weighted_median_filter,
)
from artps.enhance import enhance_pipeline, to_grayscale
from artps.features import (
    ComponentMap,
    depth_components,
    difference_of_gaussians,
    fit_patch_pca,
    fit_patch_stats,
    gradient_magnitude,
    mahalanobis_map,
    multiscale_laplacian,
    recon_error_map,
    sobel_magnitude,
    suppression_maps,
)
from artps.fuse import (
    FusionConfig,
    LabeledRegions,
    apply_suppression,
    consistency_reweight,
    effective_weights,
    hysteresis_threshold,
    label_regions,
    morphology_open_close,
    weighted_fusion,
)
from artps.localize import (
    RegionHypothesis,
    cluster_centers,
    hypotheses_from_canny,
    hypotheses_from_regions,
    merge_by_distance,
    min_area_rect,
    nms,
)
from artps.raster import (
    LumaSat,
    Raster,
    minmax_normalize,
    read_png,
    resize_bicubic,
    rgb_to_luma_sat,
    write_png,
)

REPORT_SCHEMA_VERSION = 1


@dataclass
class PipelineResult:
    report: dict
    fused: Raster
    components: list[ComponentMap]
    enhanced: Raster
    regions: LabeledRegions
    scored: tuple[ScoredRegion, ...]
    depth_refined: DepthMap | None
    warnings: tuple[str, ...] = ()
    timings: dict[str, float] = field(default_factory=dict)

    def component(self, name: str) -> ComponentMap | None:
        for c in self.components:
            if c.name == name:
                return c
        return None


def refine_depth(depth: DepthMap, gray: Raster, params: DepthPostParams) -> DepthMap:
    """Edge-guided gradient attenuation, screened gradient-domain smoothing,
    then an image-guided weighted median pass."""
    edges = minmax_normalize(Raster(sobel_magnitude(gray.data).astype(np.float32)))
    g = edge_guided_attenuation(depth, edges, params.alpha)
    smoothed, _ = fast_global_smooth(depth, g, params)
    if params.wmf.guide == "image":
        guide = gray
    else:
        guide = minmax_normalize(Raster(smoothed.data))
    return weighted_median_filter(smoothed, guide, params.wmf.window, params.wmf.sigma_g)


def build_components(
    gray: Raster, depth: DepthMap | None, cfg: PipelineConfig
) -> list[ComponentMap]:
    """All anomaly cue maps in canonical order. Patch statistics and the PCA
    reconstruction are fitted on the frame itself: anomalies are rare, so the
    frame doubles as its own reference distribution."""
    comps = [
        gradient_magnitude(gray),
        multiscale_laplacian(gray, cfg.scales),
        difference_of_gaussians(gray, cfg.dog_sigmas[0], cfg.dog_sigmas[1]),
    ]
    recipe = cfg.patch_recipe
    stats = fit_patch_stats([gray.data], recipe)
    comps.append(mahalanobis_map(gray, stats))
    pca = fit_patch_pca([gray.data], cfg.pca_components, recipe.patch, recipe.stride)
    comps.append(recon_error_map(gray, pca))
    if depth is not None:
        comps.extend(depth_components(depth))
    return comps


def _merge_with_pixels(
    kept: list[RegionHypothesis], regions: LabeledRegions, d_max: float
) -> tuple[list[RegionHypothesis], list[np.ndarray]]:
    """Merge nearby kept hypotheses and union their source pixel sets."""
    if not kept:
        return [], []
    centers = np.array([[h.box.cx, h.box.cy] for h in kept])
    merged: list[RegionHypothesis] = []
    pixel_sets: list[np.ndarray] = []
    for group in cluster_centers(centers, d_max):
        members = [kept[i] for i in group]
        pix = np.concatenate([regions.pixels[m.label - 1] for m in members], axis=0)
        if len(members) == 1:
            merged.append(members[0])
        else:
            corners = np.concatenate([m.box.corners() for m in members], axis=0)
            box = min_area_rect(corners)
            lead = min(members, key=lambda m: (-m.score, m.id))
            merged.append(
                RegionHypothesis(
                    id=min(m.id for m in members),
                    box=box,
                    aabb=box.aabb(),
                    score=max(m.score for m in members),
                    label=lead.label,
                )
            )
        pixel_sets.append(pix)
    order = sorted(range(len(merged)), key=lambda i: merged[i].id)
    return [merged[i] for i in order], [pixel_sets[i] for i in order]


def _rasterize_box(box, shape) -> np.ndarray:
    """Integer pixel set covered by a rotated box (for edge-fragment regions)."""
    x0, y0, x1, y1 = box.aabb()
    ys = np.arange(max(int(np.floor(y0)), 0), min(int(np.ceil(y1)) + 1, shape[0]))
    xs = np.arange(max(int(np.floor(x0)), 0), min(int(np.ceil(x1)) + 1, shape[1]))
    if len(ys) == 0 or len(xs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    c = np.cos(np.radians(box.angle_deg))
    s = np.sin(np.radians(box.angle_deg))
    dx = xx - box.cx
    dy = yy - box.cy
    u = c * dx + s * dy
    v = -s * dx + c * dy
    inside = (np.abs(u) <= box.w / 2.0) & (np.abs(v) <= box.h / 2.0)
    pts = np.stack([yy[inside], xx[inside]], axis=1).astype(np.int64)
    if len(pts) == 0:
        pts = np.array([[int(round(box.cy)), int(round(box.cx))]], dtype=np.int64)
        pts[:, 0] = np.clip(pts[:, 0], 0, shape[0] - 1)
        pts[:, 1] = np.clip(pts[:, 1], 0, shape[1] - 1)
    return pts


def run_pipeline(
    image: Raster,
    depth: DepthMap | None,
    cfg: PipelineConfig,
    model: CuriosityModel | None = None,
    known_sidecar: np.ndarray | None = None,
    frame_id: str = "frame",
    include_timings: bool = True,
) -> PipelineResult:
    warnings: list[str] = []
    timings: dict[str, float] = {}

    def clock(name: str, start: float) -> None:
        timings[name] = time.perf_counter() - start

    if model is None:
        model = default_model()

    t0 = time.perf_counter()
    enhanced = enhance_pipeline(image, cfg.enhance)
    gray = to_grayscale(enhanced)
    clock("enhance", t0)

    depth_refined: DepthMap | None = None
    t0 = time.perf_counter()
    if depth is not None and cfg.depth_enabled:
        if depth.data.shape != gray.data.shape:
            raise ValueError(
                "depth dims must match the (possibly resized) image dims"
            )
        depth_refined = refine_depth(depth, gray, cfg.depth_params)
    elif depth is None:
        warnings.append("depth_absent_fallback")
    else:
        warnings.append("depth_disabled_by_config")
    clock("depth", t0)

    t0 = time.perf_counter()
    components = build_components(gray, depth_refined, cfg)
    clock("components", t0)

    t0 = time.perf_counter()
    # Photometric suppression indicators come from the resize-only image:
    # contrast equalization pulls large shadows back toward the frame mean,
    # which would erase exactly the luminance signature being measured.
    photometric = image
    if cfg.enhance.steps.resize and cfg.enhance.resize_to is not None:
        rw, rh = cfg.enhance.resize_to
        photometric = resize_bicubic(image, rw, rh)
    if photometric.channels == 3:
        ls = rgb_to_luma_sat(photometric)
    else:
        ls = LumaSat(photometric, Raster(np.zeros_like(photometric.data)))
    fusion_cfg: FusionConfig = cfg.fusion
    if fusion_cfg.suppression.enabled:
        sup = suppression_maps(ls)
        components = apply_suppression(components, sup, fusion_cfg)
    weights = effective_weights(components, fusion_cfg)
    fused_raw = weighted_fusion(components, fusion_cfg)
    # Hysteresis taus and region features are defined on the normalized
    # combined map, mirroring the per-component normalization convention.
    fused_range = (float(fused_raw.data.min()), float(fused_raw.data.max()))
    fused = minmax_normalize(fused_raw)
    clock("fuse", t0)

    t0 = time.perf_counter()
    mask = hysteresis_threshold(
        fused, fusion_cfg.hysteresis.tau_low, fusion_cfg.hysteresis.tau_high
    )
    mask = morphology_open_close(mask, fusion_cfg.morphology)
    regions = label_regions(mask, fusion_cfg.min_region_area)
    depth_grad_comp = next((c for c in components if c.name == "depth_grad"), None)

    diag_len = float(np.hypot(*fused.data.shape))
    d_max = cfg.merge_dist_frac * diag_len
    if cfg.localize_mode == "canny":
        hyps = hypotheses_from_canny(
            fused, cfg.canny_tau_low, cfg.canny_tau_high, cfg.canny_min_pixels
        )
        kept = nms(hyps, cfg.nms_iou)
        final_hyps = merge_by_distance(kept, d_max)
        pixel_sets = [_rasterize_box(h.box, fused.data.shape) for h in final_hyps]
    else:
        confidences = consistency_reweight(regions, components, fused, depth_grad_comp)
        hyps = hypotheses_from_regions(regions, confidences)
        kept = nms(hyps, cfg.nms_iou)
        final_hyps, pixel_sets = _merge_with_pixels(kept, regions, d_max)
    clock("localize", t0)

    t0 = time.perf_counter()
    recon_comp = next((c for c in components if c.name == "recon"), None)
    recon_raw = recon_comp.denormalized() if recon_comp is not None else None
    raw_feats = []
    for pix in pixel_sets:
        s_known = known_value_provider(pix, cfg.known_value, known_sidecar)
        raw_feats.append(
            compute_region_features(
                pix, recon_raw, fused.data, depth_refined, s_known
            )
        )

    norm_source = "model"
    ranges = model.feature_ranges
    if ranges is None:
        norm_source = "frame"
        if raw_feats:
            ranges = fit_normalization(np.stack([f.as_vector() for f in raw_feats]))
        else:
            ranges = tuple((0.0, 1.0) for _ in range(5))

    scored: list[ScoredRegion] = []
    for h, pix, feats in zip(final_hyps, pixel_sets, raw_feats):
        x = normalize_features(feats, ranges)
        diag_means = {
            c.name: float(
                c.map.data.astype(np.float64)[pix[:, 0], pix[:, 1]].mean()
            )
            for c in components
        }
        u = uncertainty(np.array([diag_means[k] for k in sorted(diag_means)]))
        scored.append(
            ScoredRegion(
                hypothesis=h,
                features=feats,
                normalized=tuple(float(v) for v in x),
                curiosity=score(x, model),
                uncertainty=u,
                diagnostics=diag_means,
            )
        )

    ranked = rank_regions(scored)
    # Reassign ids in rank order so report rows and overlay numbers coincide.
    final_scored = tuple(
        dataclasses.replace(s, hypothesis=dataclasses.replace(s.hypothesis, id=i + 1))
        for i, s in enumerate(ranked)
    )
    clock("curiosity", t0)

    if not final_scored:
        warnings.append("no_regions")

    report = build_report(
        frame_id=frame_id,
        cfg=cfg,
        components=components,
        weights=weights,
        scored=final_scored,
        depth_used=depth_refined is not None,
        norm_source=norm_source,
        model=model,
        warnings=warnings,
        timings=timings if include_timings else None,
        fused_range=fused_range,
    )
    return PipelineResult(
        report=report,
        fused=fused,
        components=components,
        enhanced=enhanced,
        regions=regions,
        scored=final_scored,
        depth_refined=depth_refined,
        warnings=tuple(warnings),
        timings=timings,
    )


def _region_to_json(s: ScoredRegion) -> dict:
    b = s.hypothesis.box
    return {
        "id": s.hypothesis.id,
        "box": {"cx": b.cx, "cy": b.cy, "w": b.w, "h": b.h, "angle_deg": b.angle_deg},
        "aabb": list(s.hypothesis.aabb),
        "confidence": s.hypothesis.score,
        "features": {
            "s_known": s.features.s_known,
            "s_recon": s.features.s_recon,
            "s_anom": s.features.s_anom,
            "depth_var": s.features.depth_var,
            "roughness": s.features.roughness,
            "depth_valid": s.features.depth_valid,
        },
        "normalized": list(s.normalized),
        "curiosity": s.curiosity,
        "uncertainty": s.uncertainty,
        "diagnostics": {k: s.diagnostics[k] for k in sorted(s.diagnostics)},
    }


def build_report(
    frame_id: str,
    cfg: PipelineConfig,
    components: list[ComponentMap],
    weights: dict[str, float],
    scored: tuple[ScoredRegion, ...],
    depth_used: bool,
    norm_source: str,
    model: CuriosityModel,
    warnings: list[str],
    timings: dict[str, float] | None,
    fused_range: tuple[float, float] = (0.0, 0.0),
) -> dict:
    semantic_cfg = {k: v for k, v in cfg.raw.items() if k != "io"}
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "frame": frame_id,
        "config_hash": config_hash(cfg),
        "config": semantic_cfg,
        "depth_used": depth_used,
        "feature_norm_source": norm_source,
        "fused_range": list(fused_range),
        "model": {"alpha": list(model.alpha), "lambda": model.lam},
        "components": [
            {
                "name": c.name,
                "raw_range": list(c.raw_range),
                "weight": weights.get(c.name, 0.0),
            }
            for c in components
        ],
        "regions": [_region_to_json(s) for s in scored],
        "ranking": [s.hypothesis.id for s in scored],
        "warnings": list(warnings),
    }
    if timings is not None:
        report["timings"] = {k: round(v, 6) for k, v in timings.items()}
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Artifacts

_PALETTE = [
    (255, 64, 64),
    (255, 160, 32),
    (255, 224, 64),
    (128, 255, 128),
    (96, 192, 255),
    (208, 128, 255),
]


def render_overlay(result: PipelineResult):
    """Numbered rotated-box overlay on the enhanced image (PIL RGB image)."""
    from PIL import Image, ImageDraw

    base = result.enhanced.data
    if base.ndim == 2:
        base = np.stack([base] * 3, axis=-1)
    img = Image.fromarray((np.clip(base, 0.0, 1.0) * 255.0).round().astype(np.uint8))
    draw = ImageDraw.Draw(img)
    for s in result.scored:
        color = _PALETTE[(s.hypothesis.id - 1) % len(_PALETTE)]
        cs = s.hypothesis.box.corners()
        pts = [(float(x), float(y)) for x, y in cs]
        draw.polygon(pts, outline=color)
        tx = min(p[0] for p in pts)
        ty = min(p[1] for p in pts) - 10
        draw.text((max(tx, 0), max(ty, 0)), str(s.hypothesis.id), fill=color)
    return img


def overlay_annotations(result: PipelineResult) -> dict:
    """Sidecar geometry for the overlay so tests can audit the numbering."""
    return {
        "regions": [
            {
                "id": s.hypothesis.id,
                "corners": [
                    [float(x), float(y)] for x, y in s.hypothesis.box.corners()
                ],
            }
            for s in result.scored
        ]
    }


def write_artifacts(
    result: PipelineResult, out_dir: str, write_components: bool = False
) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "report": os.path.join(out_dir, "report.json"),
        "fused": os.path.join(out_dir, "fused.png"),
        "overlay": os.path.join(out_dir, "overlay.png"),
        "annotations": os.path.join(out_dir, "overlay_annotations.json"),
    }
    with open(paths["report"], "w") as fh:
        fh.write(report_json(result.report))
    if result.depth_refined is not None:
        from artps.depth import write_ard1

        paths["depth_refined"] = os.path.join(out_dir, "depth_refined.ard1")
        write_ard1(result.depth_refined, paths["depth_refined"])
    write_png(minmax_normalize(result.fused), paths["fused"], bit_depth=8)
    render_overlay(result).save(paths["overlay"])
    with open(paths["annotations"], "w") as fh:
        json.dump(overlay_annotations(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if write_components:
        for c in result.components:
            p = os.path.join(out_dir, f"component_{c.name}.png")
            write_png(c.map, p, bit_depth=8)
            paths[f"component_{c.name}"] = p
    return paths


def load_inputs(
    image_path: str, depth_path: str | None, cfg: PipelineConfig
) -> tuple[Raster, DepthMap | None]:
    from artps.depth import load_depth

    image = read_png(image_path)
    depth = None
    if depth_path is not None:
        h, w = image.data.shape[:2]
        expected = (w, h) if cfg.enhance.resize_to is None else None
        depth = load_depth(depth_path, expected_dims=expected)
    return image, depth
