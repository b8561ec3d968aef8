/** JSON shapes exchanged with the prioritization service.
 *
 * These mirror the service responses field for field; the console treats the
 * service as the single source of numerical truth and never recomputes any
 * pipeline quantity from pixels.
 */

export interface RegionBox {
  cx: number;
  cy: number;
  w: number;
  h: number;
  angle_deg: number;
}

export interface RegionFeatures {
  s_known: number;
  s_recon: number;
  s_anom: number;
  depth_var: number;
  roughness: number;
  depth_valid: boolean;
}

export interface RegionRow {
  id: number;
  box: RegionBox;
  aabb: [number, number, number, number];
  confidence: number;
  features: RegionFeatures;
  normalized: number[];
  curiosity: number;
  uncertainty: number;
  diagnostics: Record<string, number>;
}

export interface ComponentInfo {
  name: string;
  raw_range: [number, number];
  weight: number;
}

/** Pipeline config documents are free-form JSON validated server-side. */
export type ConfigDoc = Record<string, unknown>;

export interface Report {
  schema_version: number;
  frame: string;
  config_hash: string;
  config: ConfigDoc;
  depth_used: boolean;
  feature_norm_source: string;
  fused_range: [number, number];
  model: { alpha: number[]; lambda: number };
  components: ComponentInfo[];
  regions: RegionRow[];
  ranking: number[];
  warnings: string[];
}

export interface RunResponse {
  run_id: string;
  report: Report;
}

export interface AnnotationRegion {
  id: number;
  corners: [number, number][];
}

export interface Annotations {
  regions: AnnotationRegion[];
}

export interface ConfigInfo {
  default: ConfigDoc;
  schema: Record<string, unknown>;
}

export interface HealthInfo {
  status: string;
  version: string;
}

/** Names of the per-region curiosity features, in scoring order. */
export const FEATURE_NAMES = [
  "s_known",
  "s_recon",
  "s_anom",
  "depth_var",
  "roughness",
] as const;
