/** Editable-parameter catalog for the config mirror.
 *
 * Slider definitions are derived from the service's own default config
 * document, so a new fusion component automatically grows a weight slider
 * and the console never hardcodes the weight list. Config edits go through
 * immutable path updates; the document keeps exactly the server's shape,
 * which is what lets it round-trip through a run without semantic change.
 */

import { FEATURE_NAMES, type ConfigDoc } from "./model.js";

export interface SliderSpec {
  /** DOM-safe identifier, unique per slider. */
  id: string;
  /** Human label shown next to the slider. */
  label: string;
  /** Path into the config document, e.g. ["fusion", "weights", "dog"]. */
  path: string[];
  min: number;
  max: number;
  step: number;
}

export function getPath(doc: unknown, path: string[]): unknown {
  let node: unknown = doc;
  for (const key of path) {
    if (typeof node !== "object" || node === null) return undefined;
    node = (node as Record<string, unknown>)[key];
  }
  return node;
}

/** Return a copy of doc with path set to value; doc itself is untouched. */
export function setPath(doc: ConfigDoc, path: string[], value: unknown): ConfigDoc {
  if (path.length === 0) throw new Error("empty config path");
  const [head, ...rest] = path as [string, ...string[]];
  const copy: ConfigDoc = { ...doc };
  if (rest.length === 0) {
    copy[head] = value;
    return copy;
  }
  const child = doc[head];
  if (typeof child !== "object" || child === null || Array.isArray(child)) {
    throw new Error(`config path ${path.join("/")} does not address an object`);
  }
  copy[head] = setPath(child as ConfigDoc, rest, value);
  return copy;
}

/** Sliders for every tunable the console exposes on the run config:
 * one per fusion weight, the suppression strength, and both hysteresis
 * thresholds.
 */
export function configSliders(defaults: ConfigDoc): SliderSpec[] {
  const weights = getPath(defaults, ["fusion", "weights"]);
  if (typeof weights !== "object" || weights === null) {
    throw new Error("default config has no fusion.weights section");
  }
  const specs: SliderSpec[] = [];
  for (const name of Object.keys(weights as Record<string, unknown>).sort()) {
    specs.push({
      id: `w-${name}`,
      label: `weight ${name}`,
      path: ["fusion", "weights", name],
      min: 0,
      max: 1,
      step: 0.01,
    });
  }
  specs.push({
    id: "suppression-strength",
    label: "suppression strength",
    path: ["fusion", "suppression", "strength"],
    min: 0,
    max: 1,
    step: 0.01,
  });
  specs.push({
    id: "tau-low",
    label: "tau low",
    path: ["fusion", "hysteresis", "tau_low"],
    min: 0,
    max: 0.98,
    step: 0.01,
  });
  specs.push({
    id: "tau-high",
    label: "tau high",
    path: ["fusion", "hysteresis", "tau_high"],
    min: 0.01,
    max: 0.99,
    step: 0.01,
  });
  return specs;
}

export interface AlphaSliderSpec {
  id: string;
  label: string;
  /** Index into the model alpha vector. */
  index: number;
  min: number;
  max: number;
  step: number;
}

/** One slider per curiosity weight, in feature order. */
export function alphaSliders(): AlphaSliderSpec[] {
  return FEATURE_NAMES.map((name, index) => ({
    id: `alpha-${name}`,
    label: `alpha ${name}`,
    index,
    min: 0,
    max: 1,
    step: 0.01,
  }));
}
