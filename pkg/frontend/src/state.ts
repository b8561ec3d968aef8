/** Console state: one plain object, updated immutably through a small store.
 *
 * The store holds the active frame, the editable config mirror, the last run
 * (report plus box annotations), an optional comparison snapshot, the
 * selected region, layer toggles, and the uncertainty emphasis level. It
 * also enforces the concurrency rule: at most one run in flight, and the
 * run control stays disabled until the service answers.
 */

import type { RunRequest } from "./api.js";
import type { Annotations, ConfigDoc, Report } from "./model.js";
import { FEATURE_NAMES } from "./model.js";
import { setPath } from "./controls.js";

export interface RunRecord {
  runId: string;
  report: Report;
  annotations: Annotations;
}

export interface ServiceFailure {
  status: number;
  detail: string;
}

export interface ConsoleState {
  frameId: string | null;
  /** Editable mirror of the run config; starts as the service defaults. */
  config: ConfigDoc;
  /** Curiosity weights override, or null to run with the service model. */
  alpha: number[] | null;
  current: RunRecord | null;
  /** Baseline snapshot for compare mode. */
  comparison: RunRecord | null;
  selectedRegion: number | null;
  rasterLayer: string;
  showBoxes: boolean;
  uncertaintyLevel: number;
  inFlight: boolean;
  lastError: ServiceFailure | null;
}

/** Map region id to its 0-based rank position in the report. */
export function rankIndexById(report: Report): Map<number, number> {
  const index = new Map<number, number>();
  report.ranking.forEach((id, i) => index.set(id, i));
  return index;
}

/** Region id at a 0-based rank position, or null when out of range. */
export function idAtRankIndex(report: Report, index: number): number | null {
  const id = report.ranking[index];
  return id === undefined ? null : id;
}

export class ConsoleStore {
  private state: ConsoleState;
  private listeners: Array<(s: ConsoleState) => void> = [];

  constructor(defaults: ConfigDoc) {
    this.state = {
      frameId: null,
      config: structuredClone(defaults),
      alpha: null,
      current: null,
      comparison: null,
      selectedRegion: null,
      rasterLayer: "image",
      showBoxes: true,
      uncertaintyLevel: 0.25,
      inFlight: false,
      lastError: null,
    };
  }

  get(): ConsoleState {
    return this.state;
  }

  subscribe(fn: (s: ConsoleState) => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }

  private set(patch: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
  }

  /** A new frame invalidates runs, comparisons, and the selection. */
  setFrame(frameId: string): void {
    this.set({
      frameId,
      current: null,
      comparison: null,
      selectedRegion: null,
      lastError: null,
    });
  }

  updateConfig(path: string[], value: unknown): void {
    this.set({ config: setPath(this.state.config, path, value) });
  }

  resetConfig(defaults: ConfigDoc): void {
    this.set({ config: structuredClone(defaults) });
  }

  setAlpha(index: number, value: number): void {
    if (index < 0 || index >= FEATURE_NAMES.length) {
      throw new Error(`alpha index ${index} out of range`);
    }
    const alpha =
      this.state.alpha !== null
        ? this.state.alpha.slice()
        : new Array<number>(FEATURE_NAMES.length).fill(1 / FEATURE_NAMES.length);
    alpha[index] = value;
    this.set({ alpha });
  }

  clearAlphaOverride(): void {
    this.set({ alpha: null });
  }

  /** Claim the single run slot. Returns false when a run is already in
   * flight or no frame is loaded; the caller must not start a request then.
   */
  beginRun(): boolean {
    if (this.state.inFlight || this.state.frameId === null) return false;
    this.set({ inFlight: true, lastError: null });
    return true;
  }

  completeRun(record: RunRecord): void {
    const stillThere =
      this.state.selectedRegion !== null &&
      record.report.ranking.includes(this.state.selectedRegion);
    this.set({
      current: record,
      inFlight: false,
      selectedRegion: stillThere ? this.state.selectedRegion : null,
    });
  }

  failRun(status: number, detail: string): void {
    this.set({ inFlight: false, lastError: { status, detail } });
  }

  /** Select a region by id; unknown ids clear the selection so the overlay
   * and the table can never disagree about what is highlighted.
   */
  select(id: number | null): void {
    if (id === null || this.state.current === null) {
      this.set({ selectedRegion: null });
      return;
    }
    const known = this.state.current.report.ranking.includes(id);
    this.set({ selectedRegion: known ? id : null });
  }

  setUncertaintyLevel(level: number): void {
    this.set({ uncertaintyLevel: level });
  }

  setRasterLayer(layer: string): void {
    this.set({ rasterLayer: layer });
  }

  toggleBoxes(): void {
    this.set({ showBoxes: !this.state.showBoxes });
  }

  /** Copy the current run into the comparison slot (compare mode baseline). */
  snapshotComparison(): boolean {
    if (this.state.current === null) return false;
    this.set({ comparison: this.state.current });
    return true;
  }

  clearComparison(): void {
    this.set({ comparison: null });
  }

  /** The exact request body for POST /api/run: the config mirror as-is,
   * plus the curiosity weights only when the operator has touched them.
   */
  buildRunRequest(): RunRequest {
    if (this.state.frameId === null) throw new Error("no frame loaded");
    const req: RunRequest = {
      frame_id: this.state.frameId,
      config: this.state.config,
    };
    if (this.state.alpha !== null) {
      req.model = { alpha: this.state.alpha.slice() };
    }
    return req;
  }
}
