/** DOM bootstrap: wires the store, the API client, and the widgets.
 *
 * All numerical work happens server-side; this module only moves JSON into
 * widgets and clicks back into state.
 */

import { ApiClient, ServiceError } from "./api.js";
import { compareReports } from "./compare.js";
import { alphaSliders, configSliders, getPath } from "./controls.js";
import { hitRegion } from "./geometry.js";
import type { ConfigDoc } from "./model.js";
import { drawOverlay, isEmphasized } from "./overlay.js";
import { executeRun } from "./runner.js";
import { ConsoleStore } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const baseUrl = el<HTMLInputElement>("base-url");
const connectBtn = el<HTMLButtonElement>("connect-btn");
const healthSpan = el<HTMLSpanElement>("health");
const imageFile = el<HTMLInputElement>("image-file");
const depthFile = el<HTMLInputElement>("depth-file");
const uploadBtn = el<HTMLButtonElement>("upload-btn");
const runBtn = el<HTMLButtonElement>("run-btn");
const baselineBtn = el<HTMLButtonElement>("baseline-btn");
const errorBanner = el<HTMLDivElement>("error-banner");
const canvas = el<HTMLCanvasElement>("view-canvas");
const layerSelect = el<HTMLSelectElement>("layer-select");
const boxesToggle = el<HTMLInputElement>("boxes-toggle");
const uncertaintyInput = el<HTMLInputElement>("uncertainty-level");
const runMeta = el<HTMLDivElement>("run-meta");
const warningsDiv = el<HTMLDivElement>("warnings");
const configSlidersDiv = el<HTMLDivElement>("config-sliders");
const alphaSlidersDiv = el<HTMLDivElement>("alpha-sliders");
const alphaReset = el<HTMLButtonElement>("alpha-reset");
const rankingDiv = el<HTMLDivElement>("ranking-table");
const compareDiv = el<HTMLDivElement>("compare-table");

let client = new ApiClient(baseUrl.value);
let store: ConsoleStore | null = null;
const imageCache = new Map<string, HTMLImageElement>();

function showError(err: unknown): void {
  if (err instanceof ServiceError) {
    errorBanner.textContent = `HTTP ${err.status}: ${err.detail}`;
  } else {
    errorBanner.textContent = String(err);
  }
  errorBanner.style.display = "block";
}

function clearError(): void {
  errorBanner.style.display = "none";
  errorBanner.textContent = "";
}

function sliderRow(
  label: string,
  id: string,
  min: number,
  max: number,
  step: number,
  value: number,
  onInput: (v: number) => void,
): HTMLDivElement {
  const row = document.createElement("div");
  row.className = "slider-row";
  const lab = document.createElement("label");
  lab.textContent = label;
  lab.htmlFor = id;
  const input = document.createElement("input");
  input.type = "range";
  input.id = id;
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  input.value = String(value);
  const out = document.createElement("output");
  out.textContent = value.toFixed(2);
  input.addEventListener("input", () => {
    const v = Number(input.value);
    out.textContent = v.toFixed(2);
    onInput(v);
  });
  row.append(lab, input, out);
  return row;
}

function buildConfigSliders(defaults: ConfigDoc): void {
  const s = store!;
  configSlidersDiv.replaceChildren();
  for (const spec of configSliders(defaults)) {
    const value = Number(getPath(s.get().config, spec.path) ?? 0);
    configSlidersDiv.append(
      sliderRow(spec.label, spec.id, spec.min, spec.max, spec.step, value, (v) =>
        s.updateConfig(spec.path, v),
      ),
    );
  }
}

function buildAlphaSliders(): void {
  const s = store!;
  alphaSlidersDiv.replaceChildren();
  for (const spec of alphaSliders()) {
    const alpha = s.get().alpha;
    const value = alpha !== null ? (alpha[spec.index] ?? 0.2) : 0.2;
    alphaSlidersDiv.append(
      sliderRow(spec.label, spec.id, spec.min, spec.max, spec.step, value, (v) =>
        s.setAlpha(spec.index, v),
      ),
    );
  }
}

function layerOptions(): void {
  const s = store!.get();
  const options: Array<[string, string]> = [["image", "image"]];
  if (s.current !== null) {
    options.push(["fused", "fused"]);
    for (const comp of s.current.report.components) {
      options.push([`component:${comp.name}`, `component ${comp.name}`]);
    }
  }
  layerSelect.replaceChildren(
    ...options.map(([value, label]) => {
      const opt = document.createElement("option");
      opt.value = value;
      opt.textContent = label;
      return opt;
    }),
  );
  layerSelect.value = options.some(([v]) => v === s.rasterLayer)
    ? s.rasterLayer
    : "image";
}

function rasterUrl(): string | null {
  const s = store!.get();
  if (s.frameId === null) return null;
  if (s.rasterLayer === "image" || s.current === null) {
    return client.frameImageUrl(s.frameId);
  }
  if (s.rasterLayer === "fused") return client.fusedUrl(s.current.runId);
  if (s.rasterLayer.startsWith("component:")) {
    return client.componentUrl(s.current.runId, s.rasterLayer.slice(10));
  }
  return client.frameImageUrl(s.frameId);
}

function loadImage(url: string): Promise<HTMLImageElement> {
  const cached = imageCache.get(url);
  if (cached !== undefined) return Promise.resolve(cached);
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.crossOrigin = "anonymous";
    img.onload = () => {
      imageCache.set(url, img);
      resolve(img);
    };
    img.onerror = () => reject(new Error(`failed to load ${url}`));
    img.src = url;
  });
}

async function paint(): Promise<void> {
  const s = store!.get();
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  const url = rasterUrl();
  if (url === null) {
    ctx.fillStyle = "#000";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    return;
  }
  let img: HTMLImageElement;
  try {
    img = await loadImage(url);
  } catch (err) {
    showError(err);
    return;
  }
  const scale = Math.max(1, Math.floor(768 / img.naturalWidth));
  canvas.width = img.naturalWidth * scale;
  canvas.height = img.naturalHeight * scale;
  canvas.dataset.scale = String(scale);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
  if (s.showBoxes && s.current !== null) {
    drawOverlay(ctx, s.current.report, s.current.annotations, {
      selectedId: s.selectedRegion,
      uncertaintyLevel: s.uncertaintyLevel,
      scale,
    });
  }
}

function renderTable(): void {
  const s = store!.get();
  if (s.current === null) {
    rankingDiv.textContent = "no run yet";
    return;
  }
  const report = s.current.report;
  const table = document.createElement("table");
  const head = document.createElement("thead");
  head.innerHTML =
    "<tr><th>#</th><th>id</th><th>curiosity</th><th>uncertainty</th>" +
    "<th>confidence</th><th>s_anom</th><th>s_recon</th></tr>";
  const body = document.createElement("tbody");
  report.regions.forEach((region, i) => {
    const tr = document.createElement("tr");
    tr.dataset.regionId = String(region.id);
    if (region.id === s.selectedRegion) tr.classList.add("selected");
    if (isEmphasized(region, s.uncertaintyLevel)) tr.classList.add("uncertain");
    tr.innerHTML =
      `<td>${i + 1}</td><td>${region.id}</td>` +
      `<td>${region.curiosity.toFixed(4)}</td>` +
      `<td class="unc">${region.uncertainty.toFixed(4)}</td>` +
      `<td>${region.confidence.toFixed(4)}</td>` +
      `<td>${region.features.s_anom.toFixed(4)}</td>` +
      `<td>${region.features.s_recon.toFixed(4)}</td>`;
    tr.addEventListener("click", () => {
      const current = store!.get().selectedRegion;
      store!.select(current === region.id ? null : region.id);
    });
    body.append(tr);
  });
  table.append(head, body);
  rankingDiv.replaceChildren(table);
}

function renderCompare(): void {
  const s = store!.get();
  if (s.comparison === null) {
    compareDiv.textContent = "no baseline set";
    return;
  }
  if (s.current === null) {
    compareDiv.textContent = "baseline stored; run to compare";
    return;
  }
  const cmp = compareReports(s.current.report, s.comparison.report);
  const table = document.createElement("table");
  table.innerHTML = "<thead><tr><th>id</th><th>rank</th><th>baseline</th><th>delta</th></tr></thead>";
  const body = document.createElement("tbody");
  for (const row of cmp.rows) {
    const tr = document.createElement("tr");
    const delta =
      row.delta === null
        ? "new"
        : row.delta > 0
          ? `+${row.delta}`
          : String(row.delta);
    const cls = row.delta !== null && row.delta > 0 ? "delta-up" : row.delta !== null && row.delta < 0 ? "delta-down" : "";
    tr.innerHTML =
      `<td>${row.id}</td><td>${row.rank}</td>` +
      `<td>${row.baselineRank ?? "-"}</td><td class="${cls}">${delta}</td>`;
    body.append(tr);
  }
  table.append(body);
  const dropped = document.createElement("div");
  dropped.className = "meta";
  if (cmp.droppedBaselineIds.length > 0) {
    dropped.textContent = `dropped from baseline: ${cmp.droppedBaselineIds.join(", ")}`;
  }
  compareDiv.replaceChildren(table, dropped);
}

function renderMeta(): void {
  const s = store!.get();
  if (s.current === null) {
    runMeta.textContent = s.frameId === null ? "" : `frame ${s.frameId}`;
    warningsDiv.textContent = "";
    return;
  }
  const r = s.current.report;
  runMeta.textContent =
    `frame ${r.frame} | run ${s.current.runId} | config ${r.config_hash.slice(0, 12)} | ` +
    `${r.regions.length} regions | depth ${r.depth_used ? "yes" : "no"} | ` +
    `norm ${r.feature_norm_source}`;
  warningsDiv.textContent = r.warnings.length > 0 ? `warnings: ${r.warnings.join(", ")}` : "";
}

function render(): void {
  const s = store!.get();
  runBtn.disabled = s.inFlight || s.frameId === null;
  uploadBtn.disabled = s.inFlight;
  baselineBtn.disabled = s.current === null;
  if (s.lastError !== null) {
    errorBanner.textContent = `HTTP ${s.lastError.status}: ${s.lastError.detail}`;
    errorBanner.style.display = "block";
  }
  layerOptions();
  renderTable();
  renderCompare();
  renderMeta();
  void paint();
}

async function connect(): Promise<void> {
  clearError();
  client = new ApiClient(baseUrl.value);
  imageCache.clear();
  try {
    const [health, info] = await Promise.all([client.health(), client.configInfo()]);
    healthSpan.textContent = `${health.status} v${health.version}`;
    store = new ConsoleStore(info.default);
    store.subscribe(render);
    buildConfigSliders(info.default);
    buildAlphaSliders();
    render();
  } catch (err) {
    healthSpan.textContent = "unreachable";
    showError(err);
  }
}

connectBtn.addEventListener("click", () => void connect());

uploadBtn.addEventListener("click", async () => {
  if (store === null) {
    showError(new Error("connect to a service first"));
    return;
  }
  const image = imageFile.files?.[0];
  if (image === undefined) {
    showError(new Error("choose an image file first"));
    return;
  }
  clearError();
  try {
    const depth = depthFile.files?.[0];
    const frameId = await client.uploadFrame(image, depth);
    imageCache.clear();
    store.setFrame(frameId);
  } catch (err) {
    showError(err);
  }
});

runBtn.addEventListener("click", async () => {
  if (store === null) return;
  clearError();
  await executeRun(store, client);
});

baselineBtn.addEventListener("click", () => {
  store?.snapshotComparison();
});

alphaReset.addEventListener("click", () => {
  store?.clearAlphaOverride();
  buildAlphaSliders();
});

canvas.addEventListener("click", (ev) => {
  const s = store?.get();
  if (s === undefined || s.current === null) return;
  // paint() records canvas pixels per image pixel; CSS size may differ again.
  const rect = canvas.getBoundingClientRect();
  const xCanvas = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const yCanvas = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  const drawScale = canvas.dataset.scale !== undefined ? Number(canvas.dataset.scale) : 1;
  const point: [number, number] = [xCanvas / drawScale, yCanvas / drawScale];
  store!.select(hitRegion(s.current.annotations.regions, point));
});

layerSelect.addEventListener("change", () => store?.setRasterLayer(layerSelect.value));
boxesToggle.addEventListener("change", () => store?.toggleBoxes());
uncertaintyInput.addEventListener("change", () =>
  store?.setUncertaintyLevel(Number(uncertaintyInput.value)),
);

void connect();
