/** Compare mode: rank deltas between the current run and a baseline run.
 *
 * Region ids are assigned per run (1..n in rank order), so the same physical
 * region can carry different ids in the two reports. Regions are therefore
 * matched geometrically, by box-center proximity, with a greedy
 * nearest-first assignment. Identical re-runs match every region at
 * distance zero, which is what makes "no change" show up as all-zero
 * deltas.
 */

import type { Report } from "./model.js";

export interface RankDelta {
  /** Region id in the current report. */
  id: number;
  /** 1-based rank in the current report. */
  rank: number;
  /** 1-based rank of the matched baseline region, or null if unmatched. */
  baselineRank: number | null;
  /** baselineRank - rank: positive means the region climbed. */
  delta: number | null;
}

export interface Comparison {
  rows: RankDelta[];
  /** Baseline region ids that no current region matched. */
  droppedBaselineIds: number[];
}

interface Candidate {
  cur: number;
  base: number;
  dist: number;
}

export function compareReports(
  current: Report,
  baseline: Report,
  maxCenterDist = 24,
): Comparison {
  const candidates: Candidate[] = [];
  current.regions.forEach((cr, ci) => {
    baseline.regions.forEach((br, bi) => {
      const dist = Math.hypot(cr.box.cx - br.box.cx, cr.box.cy - br.box.cy);
      if (dist <= maxCenterDist) candidates.push({ cur: ci, base: bi, dist });
    });
  });
  candidates.sort(
    (a, b) => a.dist - b.dist || a.cur - b.cur || a.base - b.base,
  );

  const baseFor = new Map<number, number>();
  const usedBase = new Set<number>();
  for (const c of candidates) {
    if (baseFor.has(c.cur) || usedBase.has(c.base)) continue;
    baseFor.set(c.cur, c.base);
    usedBase.add(c.base);
  }

  const rows: RankDelta[] = current.regions.map((cr, ci) => {
    const bi = baseFor.get(ci);
    if (bi === undefined) {
      return { id: cr.id, rank: ci + 1, baselineRank: null, delta: null };
    }
    return { id: cr.id, rank: ci + 1, baselineRank: bi + 1, delta: bi - ci };
  });
  const droppedBaselineIds = baseline.regions
    .filter((_, bi) => !usedBase.has(bi))
    .map((br) => br.id);
  return { rows, droppedBaselineIds };
}
