"""Rotated-box localization: hypotheses from labeled regions or fused-map
edges, IoU-based non-maximum suppression, and center-distance merging.

Boxes are canonical: w >= h, angle in [-90, 90) degrees, pixel coordinates
with x right and y down. Extents are floored at one pixel so degenerate
point sets still yield a positive-area box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from artps.fuse import LabeledRegions, label_regions
from artps.raster import Raster, minmax_normalize


@dataclass(frozen=True)
class RotatedBox:
    cx: float
    cy: float
    w: float
    h: float
    angle_deg: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h", "angle_deg"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.w <= 0 or self.h <= 0:
            raise ValueError("box extents must be positive")
        if self.w < self.h:
            raise ValueError("canonical boxes require w >= h")
        if not -90.0 <= self.angle_deg < 90.0:
            raise ValueError(f"angle must be in [-90, 90), got {self.angle_deg}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> np.ndarray:
        """4x2 array of (x, y) corners in consistent winding order."""
        c = math.cos(math.radians(self.angle_deg))
        s = math.sin(math.radians(self.angle_deg))
        hw, hh = self.w / 2.0, self.h / 2.0
        local = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.cx, self.cy])

    def aabb(self) -> tuple[float, float, float, float]:
        cs = self.corners()
        return (float(cs[:, 0].min()), float(cs[:, 1].min()),
                float(cs[:, 0].max()), float(cs[:, 1].max()))


@dataclass(frozen=True)
class RegionHypothesis:
    id: int
    box: RotatedBox
    aabb: tuple[float, float, float, float]
    score: float
    label: int

    def __post_init__(self):
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "score", float(self.score))
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(
            self, "aabb", tuple(float(v) for v in self.aabb)
        )
        if not math.isfinite(self.score):
            raise ValueError("hypothesis score must be finite")


def _canonical_box(cx: float, cy: float, du: float, dv: float, theta: float) -> RotatedBox:
    w = max(du, 1.0)
    h = max(dv, 1.0)
    deg = math.degrees(theta)
    if w < h:
        w, h = h, w
        deg += 90.0
    deg = ((deg + 90.0) % 180.0) - 90.0
    return RotatedBox(cx=cx, cy=cy, w=w, h=h, angle_deg=deg)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns hull vertices in CCW order (math sense)."""
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts
    # unique() sorts lexicographically already
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def min_area_rect(points: np.ndarray) -> RotatedBox:
    """Minimum-area enclosing rotated rectangle (convex hull + rotating calipers).

    A single point yields a degenerate 1x1 box; collinear sets get their thin
    extent floored to one pixel.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("min_area_rect requires at least one point")
    hull = convex_hull(pts)
    if len(hull) == 1:
        return RotatedBox(float(hull[0, 0]), float(hull[0, 1]), 1.0, 1.0, 0.0)
    best = None
    n = len(hull)
    for i in range(n):
        edge = hull[(i + 1) % n] - hull[i]
        norm = math.hypot(edge[0], edge[1])
        if norm < 1e-12:
            continue
        theta = math.atan2(edge[1], edge[0])
        u = np.array([math.cos(theta), math.sin(theta)])
        v = np.array([-u[1], u[0]])
        pu = hull @ u
        pv = hull @ v
        du = pu.max() - pu.min()
        dv = pv.max() - pv.min()
        area = du * dv
        if best is None or area < best[0] - 1e-12:
            cu = (pu.max() + pu.min()) / 2.0
            cv = (pv.max() + pv.min()) / 2.0
            center = cu * u + cv * v
            best = (area, center, du, dv, theta)
    assert best is not None
    _, center, du, dv, theta = best
    return _canonical_box(float(center[0]), float(center[1]), du, dv, theta)


def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area (absolute value)."""
    if len(poly) < 3:
        return 0.0
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _orient_ccw(poly: np.ndarray) -> np.ndarray:
    x = poly[:, 0]
    y = poly[:, 1]
    signed = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    return poly if signed >= 0 else poly[::-1]


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clipping of a polygon by a convex polygon."""
    clip = _orient_ccw(clip)
    out = list(np.asarray(subject, dtype=np.float64))
    m = len(clip)
    for i in range(m):
        a = clip[i]
        b = clip[(i + 1) % m]
        if not out:
            break
        inp = out
        out = []
        ex, ey = b[0] - a[0], b[1] - a[1]

        def inside(p):
            # Interior of a CCW polygon lies to the left of each directed
            # edge, where the cross product with the edge vector is >= 0.
            return ex * (p[1] - a[1]) - ey * (p[0] - a[0]) >= -1e-12

        def intersect(p, q):
            dx, dy = q[0] - p[0], q[1] - p[1]
            denom = ex * dy - ey * dx
            t = (ex * (a[1] - p[1]) - ey * (a[0] - p[0])) / denom
            return np.array([p[0] + t * dx, p[1] + t * dy])

        prev = inp[-1]
        prev_in = inside(prev)
        for cur in inp:
            cur_in = inside(cur)
            if cur_in:
                if not prev_in:
                    out.append(intersect(prev, cur))
                out.append(cur)
            elif prev_in:
                out.append(intersect(prev, cur))
            prev, prev_in = cur, cur_in
    return np.array(out) if out else np.zeros((0, 2))


def iou(b1: RotatedBox, b2: RotatedBox) -> float:
    """Rotated-box intersection-over-union via convex polygon clipping."""
    p1 = b1.corners()
    p2 = b2.corners()
    inter = polygon_area(clip_polygon(p1, p2))
    union = b1.area + b2.area - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def nms(hyps: list[RegionHypothesis], iou_threshold: float) -> list[RegionHypothesis]:
    """Greedy non-maximum suppression by descending score.

    Ties break by larger box area, then lower id; scores are untouched and the
    result is a subset of the input, making the operation idempotent.
    """
    order = sorted(hyps, key=lambda h: (-h.score, -h.box.area, h.id))
    kept: list[RegionHypothesis] = []
    for h in order:
        if all(iou(h.box, k.box) <= iou_threshold for k in kept):
            kept.append(h)
    kept.sort(key=lambda h: h.id)
    return kept


def cluster_centers(centers: np.ndarray, d_max: float) -> list[list[int]]:
    """Single-linkage index clusters of points within d_max of each other."""
    n = len(centers)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if np.hypot(*(centers[i] - centers[j])) <= d_max:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [groups[k] for k in sorted(groups)]


def merge_by_distance(hyps: list[RegionHypothesis], d_max: float) -> list[RegionHypothesis]:
    """Single-linkage merge of hypotheses whose centers lie within d_max.

    Each cluster collapses to the minimum-area rect over member corners; the
    merged score is the max member score, so coverage never shrinks.
    """
    if not hyps:
        return []
    centers = np.array([[h.box.cx, h.box.cy] for h in hyps])
    out: list[RegionHypothesis] = []
    for group in cluster_centers(centers, d_max):
        members = [hyps[i] for i in group]
        if len(members) == 1:
            out.append(members[0])
            continue
        corners = np.concatenate([m.box.corners() for m in members], axis=0)
        box = min_area_rect(corners)
        lead = min(members, key=lambda m: (-m.score, m.id))
        out.append(
            RegionHypothesis(
                id=min(m.id for m in members),
                box=box,
                aabb=box.aabb(),
                score=max(m.score for m in members),
                label=lead.label,
            )
        )
    out.sort(key=lambda h: h.id)
    return out


# ---------------------------------------------------------------------------
# Canny edge path

_DIRS = np.array([[0, 1], [1, 1], [1, 0], [1, -1]])  # (dy, dx) per sector


def edges_canny(fused: Raster, tau_low: float, tau_high: float) -> np.ndarray:
    """Canny on the fused map: Sobel gradient, directional non-max suppression,
    then hysteresis linking. Thresholds apply to the normalized magnitude."""
    from artps.features import sobel_xy
    from artps.fuse import hysteresis_threshold

    if not (0.0 <= tau_low <= tau_high <= 1.0):
        raise ValueError("invalid Canny thresholds")
    gx, gy = sobel_xy(fused.data)
    mag = np.sqrt(gx * gx + gy * gy)
    if mag.max() <= 0:
        return np.zeros(mag.shape, dtype=bool)
    h, w = mag.shape
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    sector = np.floor(((ang + 22.5) % 180.0) / 45.0).astype(np.int64) % 4
    dy = _DIRS[sector][..., 0]
    dx = _DIRS[sector][..., 1]
    # Forward direction follows the gradient sign along the sector axis.
    sign = np.sign(gx * dx + gy * dy)
    sign[sign == 0] = 1
    fy = (dy * sign).astype(np.int64)
    fx = (dx * sign).astype(np.int64)
    yy, xx = np.indices(mag.shape)

    def sample(oy, ox):
        sy = np.clip(yy + oy, 0, h - 1)
        sx = np.clip(xx + ox, 0, w - 1)
        return mag[sy, sx]

    ahead = sample(fy, fx)
    behind = sample(-fy, -fx)
    keep = (mag > ahead) & (mag >= behind) & (mag > 0)
    thinned = np.where(keep, mag, 0.0)
    thin_norm = minmax_normalize(Raster(thinned.astype(np.float32)))
    return hysteresis_threshold(thin_norm, tau_low, tau_high)


def hypotheses_from_regions(
    regions: LabeledRegions, confidences: np.ndarray
) -> list[RegionHypothesis]:
    """One rotated-box hypothesis per labeled region (pixel centers as points)."""
    out = []
    for i, pix in enumerate(regions.pixels):
        pts = np.stack([pix[:, 1], pix[:, 0]], axis=1).astype(np.float64)  # (x, y)
        box = min_area_rect(pts)
        out.append(
            RegionHypothesis(
                id=i + 1,
                box=box,
                aabb=box.aabb(),
                score=float(confidences[i]),
                label=i + 1,
            )
        )
    return out


def hypotheses_from_canny(
    fused: Raster, tau_low: float, tau_high: float, min_pixels: int = 8
) -> list[RegionHypothesis]:
    """Alternative box source: connected Canny edge fragments of the fused map."""
    mask = edges_canny(fused, tau_low, tau_high)
    frags = label_regions(mask, min_pixels)
    fused_a = fused.data.astype(np.float64)
    scores = np.array(
        [fused_a[p[:, 0], p[:, 1]].mean() for p in frags.pixels], dtype=np.float64
    )
    return hypotheses_from_regions(frags, scores)
