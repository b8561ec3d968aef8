/** Hit testing for the rotated-box overlay.
 *
 * The service reports each region's box as four corner points in image
 * coordinates; the console only ever needs point-in-polygon tests and
 * centroids, so that is all this module provides.
 */

import type { AnnotationRegion } from "./model.js";

export type Point = [number, number];

/** True when p lies inside or on the boundary of a convex polygon.
 *
 * Corners may wind either way; containment holds when the cross products of
 * consecutive edges against the point all share one sign (or vanish on the
 * boundary).
 */
export function polygonContains(corners: Point[], p: Point, eps = 1e-9): boolean {
  const n = corners.length;
  if (n < 3) return false;
  let positive = false;
  let negative = false;
  for (let i = 0; i < n; i++) {
    const a = corners[i]!;
    const b = corners[(i + 1) % n]!;
    const cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if (cross > eps) positive = true;
    else if (cross < -eps) negative = true;
    if (positive && negative) return false;
  }
  return true;
}

export function centroid(corners: Point[]): Point {
  let sx = 0;
  let sy = 0;
  for (const [x, y] of corners) {
    sx += x;
    sy += y;
  }
  return [sx / corners.length, sy / corners.length];
}

/** Region id under a click, or null.
 *
 * Annotations arrive in ranking order, so when boxes overlap the click
 * resolves to the better-ranked region, matching the drawn numbering.
 */
export function hitRegion(regions: AnnotationRegion[], p: Point): number | null {
  for (const region of regions) {
    if (polygonContains(region.corners as Point[], p)) return region.id;
  }
  return null;
}
