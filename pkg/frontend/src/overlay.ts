/** Canvas rendering for the numbered rotated-box overlay.
 *
 * Boxes are drawn in ranking order with their rank number, so the numbers on
 * screen always equal the report's ranking. Regions whose uncertainty
 * exceeds the configured level get a dashed amber emphasis; the selected
 * region gets a heavier stroke.
 */

import type { Annotations, RegionRow, Report } from "./model.js";

export interface BoxStyle {
  stroke: string;
  lineWidth: number;
  dash: number[];
}

export function isEmphasized(region: RegionRow, uncertaintyLevel: number): boolean {
  return region.uncertainty > uncertaintyLevel;
}

export function styleFor(selected: boolean, emphasized: boolean): BoxStyle {
  return {
    stroke: emphasized ? "#ffb020" : selected ? "#ffffff" : "#46d46c",
    lineWidth: selected ? 3 : 1.5,
    dash: emphasized ? [6, 3] : [],
  };
}

export interface OverlayOptions {
  selectedId: number | null;
  uncertaintyLevel: number;
  /** Canvas pixels per image pixel. */
  scale: number;
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  report: Report,
  annotations: Annotations,
  opts: OverlayOptions,
): void {
  const regionById = new Map(report.regions.map((r) => [r.id, r]));
  annotations.regions.forEach((ann, i) => {
    const region = regionById.get(ann.id);
    if (region === undefined || ann.corners.length === 0) return;
    const emphasized = isEmphasized(region, opts.uncertaintyLevel);
    const style = styleFor(ann.id === opts.selectedId, emphasized);

    ctx.beginPath();
    ann.corners.forEach(([x, y], j) => {
      if (j === 0) ctx.moveTo(x * opts.scale, y * opts.scale);
      else ctx.lineTo(x * opts.scale, y * opts.scale);
    });
    ctx.closePath();
    ctx.strokeStyle = style.stroke;
    ctx.lineWidth = style.lineWidth;
    ctx.setLineDash(style.dash);
    ctx.stroke();
    ctx.setLineDash([]);

    const [lx, ly] = ann.corners[0]!;
    const label = String(i + 1);
    ctx.font = "bold 13px sans-serif";
    const pad = 3;
    const w = ctx.measureText(label).width + 2 * pad;
    const x = lx * opts.scale;
    const y = ly * opts.scale - 16;
    ctx.fillStyle = "rgba(10, 14, 12, 0.85)";
    ctx.fillRect(x, y, w, 16);
    ctx.fillStyle = style.stroke;
    ctx.fillText(label, x + pad, y + 12);
  });
}
