/** Fabricated service payloads for unit tests. Shapes mirror the service;
 * values are arbitrary but internally consistent (ids 1..n in rank order).
 */

import type {
  Annotations,
  ConfigDoc,
  Report,
  RegionRow,
} from "../src/model.js";
import type { RunRecord } from "../src/state.js";

export function makeRegion(
  id: number,
  over: Partial<RegionRow> = {},
): RegionRow {
  const cx = over.box?.cx ?? id * 30;
  const cy = over.box?.cy ?? id * 20;
  return {
    id,
    box: { cx, cy, w: 12, h: 8, angle_deg: 0 },
    aabb: [cx - 6, cy - 4, cx + 6, cy + 4],
    confidence: 0.8,
    features: {
      s_known: 0.5,
      s_recon: 0.4,
      s_anom: 0.6,
      depth_var: 0.1,
      roughness: 0.2,
      depth_valid: true,
    },
    normalized: [0.5, 0.4, 0.6, 0.1, 0.2],
    curiosity: 1 / id,
    uncertainty: 0.1,
    diagnostics: { gradient: 0.3 },
    ...over,
  };
}

export function makeReport(regions: RegionRow[], over: Partial<Report> = {}): Report {
  return {
    schema_version: 1,
    frame: "frame",
    config_hash: "0".repeat(64),
    config: { seed: 0 },
    depth_used: true,
    feature_norm_source: "frame",
    fused_range: [0, 2.5],
    model: { alpha: [0.2, 0.2, 0.2, 0.2, 0.2], lambda: 0 },
    components: [
      { name: "gradient", raw_range: [0, 1], weight: 0.5 },
      { name: "dog", raw_range: [0, 1], weight: 0.5 },
    ],
    regions,
    ranking: regions.map((r) => r.id),
    warnings: [],
    ...over,
  };
}

export function makeAnnotations(report: Report): Annotations {
  return {
    regions: report.regions.map((r) => ({
      id: r.id,
      corners: [
        [r.box.cx - r.box.w / 2, r.box.cy - r.box.h / 2],
        [r.box.cx + r.box.w / 2, r.box.cy - r.box.h / 2],
        [r.box.cx + r.box.w / 2, r.box.cy + r.box.h / 2],
        [r.box.cx - r.box.w / 2, r.box.cy + r.box.h / 2],
      ] as [number, number][],
    })),
  };
}

export function makeRecord(report: Report, runId = "run0"): RunRecord {
  return { runId, report, annotations: makeAnnotations(report) };
}

export function defaultsDoc(): ConfigDoc {
  return {
    fusion: {
      weights: { gradient: 0.5, dog: 0.5 },
      suppression: { strength: 1.0 },
      hysteresis: { tau_low: 0.3, tau_high: 0.6 },
    },
    seed: 0,
  };
}
