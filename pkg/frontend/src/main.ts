/** Application wiring: toolbar, interactive map, guidance browser, linked
 * views, and the history panel. */

import { ApiClient } from "./api.js";
import { Controller } from "./controller.js";
import {
  el,
  renderDensity,
  renderKernelBars,
  renderMap,
  renderTiles,
  renderVariogram,
  stripePattern,
  svgEl,
} from "./dom.js";
import {
  buildMapModel,
  choroplethFills,
  kernelExtents,
  snapToBoundaries,
  MapInputs,
} from "./mapModel.js";
import {
  densityModel,
  kernelBarModel,
  scaleColor,
  suggestionList,
  variogramModel,
} from "./plotModels.js";
import { Session } from "./session.js";
import { parseProjection, tilesForViewport, TILE_SERVERS } from "./tiles.js";
import type {
  GuidanceBundleJson,
  SettingJson,
  VariableGridJson,
  VariogramJson,
  WorkspaceSummary,
} from "./types.js";
import {
  fitBounds,
  panBy,
  screenToWorld,
  Viewport,
  zoomAt,
} from "./viewport.js";

type Tool = "pan" | "split" | "kernel" | "merge";

interface AppState {
  summary: WorkspaceSummary;
  bundle: GuidanceBundleJson | null;
  variograms: VariogramJson | null;
  gridSummaries: Map<string, VariableGridJson>;
  annotationBoundaries: number[][][];
  viewport: Viewport;
  tool: Tool;
  mergeSelection: string[];
  splitRegionId: string | null;
  cursorWorld: { x: number; y: number } | null;
  gridSide: number;
  status: string;
}

const MAP_W = 860;
const MAP_H = 620;

export async function startApp(root: HTMLElement, baseUrl: string, workspaceId: string) {
  const api = new ApiClient(baseUrl);
  const session = new Session();
  const controller = new Controller(api, session, workspaceId);

  const summary = await api.workspaceSummary(workspaceId);
  let locationCache: [number, number][] | null = null;
  const state: AppState = {
    summary,
    bundle: null,
    variograms: null,
    gridSummaries: new Map(),
    annotationBoundaries: [],
    viewport: fitBounds(summary.bounding_box, MAP_W, MAP_H),
    tool: "pan",
    mergeSelection: [],
    splitRegionId: null,
    cursorWorld: null,
    gridSide: 4,
    status: "ready",
  };

  // -- static layout -------------------------------------------------------

  root.replaceChildren();
  const toolbar = el("div", { class: "toolbar" });
  const layout = el("div", { class: "layout" });
  const left = el("div", { class: "panel left" });
  const center = el("div", { class: "panel center" });
  const right = el("div", { class: "panel right" });
  layout.append(left, center, right);
  const statusBar = el("div", { class: "status" });
  root.append(toolbar, layout, statusBar);

  const mapSvg = svgEl("svg", {
    width: String(MAP_W),
    height: String(MAP_H),
    class: "map",
  });
  mapSvg.appendChild(stripePattern());
  const tileLayer = svgEl("g");
  const drawLayer = svgEl("g");
  mapSvg.append(tileLayer, drawLayer);
  center.appendChild(mapSvg);

  const suggestionsBox = el("div", { class: "suggestions" });
  const kernelBarsSvg = svgEl("svg", { width: "260", height: "96" });
  const variogramSvg = svgEl("svg", { width: "260", height: "150", class: "plot" });
  const densitySvg = svgEl("svg", { width: "260", height: "80", class: "plot" });
  const multiplesBox = el("div", { class: "multiples" });
  const historyBox = el("div", { class: "history" });
  left.append(
    el("h3", {}, "Distance density"),
    densitySvg,
    el("h3", {}, "Variograms"),
    variogramSvg,
    el("h3", {}, "Kernel suggestions"),
    kernelBarsSvg,
    el("h3", {}, "Regionalizations"),
    suggestionsBox,
  );
  right.append(el("h3", {}, "Variables"), multiplesBox, el("h3", {}, "History"), historyBox);

  const projection = parseProjection(summary.crs_note);

  // -- toolbar ---------------------------------------------------------------

  const modeButton = el("button", {}, "mode: precomputed");
  modeButton.addEventListener("click", () => {
    if (session.mode === "precomputed") {
      if (!session.draft && state.bundle) {
        session.copySuggestionToCustom(state.bundle, state.bundle ? 0 : 0);
      } else {
        session.setMode("custom");
      }
    } else {
      session.setMode("precomputed");
    }
  });

  const toolButtons: Partial<Record<Tool, HTMLButtonElement>> = {};
  for (const tool of ["pan", "split", "kernel", "merge"] as Tool[]) {
    const button = el("button", {}, tool);
    button.addEventListener("click", () => setTool(tool));
    toolButtons[tool] = button;
    toolbar.appendChild(button);
  }
  toolbar.prepend(modeButton);

  const undoButton = el("button", {}, "undo");
  undoButton.addEventListener("click", () => {
    if (!session.undo()) setStatus("nothing to undo");
  });
  const saveButton = el("button", {}, "save setting");
  saveButton.addEventListener("click", async () => {
    report(await controller.saveDraft());
    await refreshHistory();
  });
  const runButton = el("button", {}, "run SBSS");
  runButton.addEventListener("click", async () => {
    setStatus("running...");
    report(await controller.runSbss());
    await refreshHistory();
  });
  const scaleButton = el("button", {}, "scale: counts");
  scaleButton.addEventListener("click", () => {
    session.setColorScale(session.colorScale === "counts" ? "cov_diff" : "counts");
  });
  const locationsButton = el("button", {}, "locations");
  locationsButton.addEventListener("click", async () => {
    session.toggles.locations = !session.toggles.locations;
    if (session.toggles.locations && !locationCache) {
      locationCache = (await api.locations(workspaceId)).locations;
    }
    session.notify();
  });
  const variableSelect = el("select");
  variableSelect.append(el("option", { value: "" }, "variable: none"));
  for (const name of summary.variable_names) {
    variableSelect.append(el("option", { value: name }, name));
  }
  variableSelect.addEventListener("change", async () => {
    session.toggles.variable = variableSelect.value || null;
    await ensureGridSummary();
    session.notify();
  });
  const gridSlider = el("input", {
    type: "range", min: "1", max: "12", value: String(state.gridSide),
  });
  gridSlider.addEventListener("change", async () => {
    state.gridSide = parseInt(gridSlider.value, 10);
    state.gridSummaries.clear();
    await ensureGridSummary();
    session.notify();
  });
  const baseSelect = el("select");
  for (const layer of ["osm", "satellite", "blank"]) {
    baseSelect.append(el("option", { value: layer }, `base: ${layer}`));
  }
  baseSelect.addEventListener("change", () => {
    session.toggles.baseLayer = baseSelect.value as "osm" | "satellite" | "blank";
    session.notify();
  });
  const annotationInput = el("input", { type: "file", accept: ".geojson,.json" });
  annotationInput.addEventListener("change", async () => {
    const file = annotationInput.files?.[0];
    if (!file) return;
    try {
      await api.uploadAnnotation(workspaceId, await file.text());
      await refreshAnnotations();
      session.notify();
      setStatus("annotation stored");
    } catch (error) {
      setStatus(String(error));
    }
  });
  toolbar.append(
    undoButton, saveButton, runButton, scaleButton,
    locationsButton, variableSelect, gridSlider, baseSelect, annotationInput,
  );

  function setTool(tool: Tool): void {
    // edit tools need custom mode; refuse without changing anything
    if (tool !== "pan" && !session.canEdit) {
      setStatus("switch to custom mode to edit");
      return;
    }
    if (state.tool === "kernel" && tool !== "kernel" && controller.kernelDraw.active) {
      report(controller.finishKernelMode());
    }
    state.tool = tool;
    if (tool === "split") controller.beginSplit();
    if (tool === "kernel") report(controller.startKernelMode());
    if (tool === "merge") state.mergeSelection = [];
    session.notify();
  }

  function setStatus(message: string): void {
    state.status = message;
    statusBar.textContent = message;
  }

  function report(result: { ok: boolean; message?: string }): void {
    setStatus(result.ok ? (result.message ?? "ok") : `rejected: ${result.message}`);
  }

  // -- map interactions --------------------------------------------------------

  let dragging = false;
  let lastDrag: { x: number; y: number } | null = null;

  mapSvg.addEventListener("wheel", (event) => {
    event.preventDefault();
    const cursor = eventPoint(event);
    state.viewport = zoomAt(state.viewport, cursor, event.deltaY < 0 ? 1.2 : 1 / 1.2);
    session.notify();
  });
  mapSvg.addEventListener("mousedown", (event) => {
    if (state.tool === "pan") {
      dragging = true;
      lastDrag = eventPoint(event);
    }
  });
  mapSvg.addEventListener("mousemove", (event) => {
    const cursor = eventPoint(event);
    state.cursorWorld = screenToWorld(cursor, state.viewport);
    if (dragging && lastDrag) {
      state.viewport = panBy(state.viewport, cursor.x - lastDrag.x, cursor.y - lastDrag.y);
      lastDrag = cursor;
    }
    session.notify();
  });
  mapSvg.addEventListener("mouseup", () => {
    dragging = false;
    lastDrag = null;
  });
  mapSvg.addEventListener("click", async (event) => {
    const cursor = eventPoint(event);
    let world = screenToWorld(cursor, state.viewport);
    if (session.toggles.annotations && state.annotationBoundaries.length) {
      world = snapToBoundaries(world, state.annotationBoundaries, state.viewport);
    }
    if (state.tool === "split" && session.canEdit) {
      controller.addSplitVertex([world.x, world.y]);
      session.notify();
    } else if (state.tool === "kernel" && session.canEdit) {
      controller.kernelClick(world);
      if (controller.kernelDraw.lastRejection) {
        setStatus(`ring rejected: ${controller.kernelDraw.lastRejection.reason}`);
      }
      session.notify();
    }
  });
  mapSvg.addEventListener("dblclick", async (event) => {
    event.preventDefault();
    if (state.tool === "split" && session.canEdit && state.splitRegionId) {
      report(await controller.commitSplit(state.splitRegionId));
      await refreshMetrics();
    }
  });

  function eventPoint(event: MouseEvent): { x: number; y: number } {
    const rect = mapSvg.getBoundingClientRect();
    return { x: event.clientX - rect.left, y: event.clientY - rect.top };
  }

  async function onRegionClick(regionId: string): Promise<void> {
    if (state.tool === "split") {
      state.splitRegionId = regionId;
      setStatus(`splitting ${regionId}: click vertices, double-click to cut`);
    } else if (state.tool === "merge" && session.canEdit) {
      state.mergeSelection.push(regionId);
      if (state.mergeSelection.length === 2) {
        report(
          await controller.mergeRegions(state.mergeSelection as [string, string]),
        );
        state.mergeSelection = [];
        await refreshMetrics();
      }
    }
    session.notify();
  }

  // -- data refresh ---------------------------------------------------------------

  async function refreshGuidance(): Promise<void> {
    setStatus("precomputing guidance...");
    try {
      state.bundle = await api.computeGuidance(workspaceId, {});
      setStatus("guidance ready");
    } catch (error) {
      setStatus(String(error));
    }
    session.notify();
  }

  async function refreshMetrics(): Promise<void> {
    if (session.draft) await controller.refreshMetrics();
  }

  async function refreshHistory(): Promise<void> {
    const history = await api.history(workspaceId);
    historyBox.replaceChildren();
    for (const entry of history.entries) {
      const row = el(
        "div",
        { class: "history-entry" },
        `${entry.id} ${entry.label || "(unlabeled)"}${entry.result_id ? " *" : ""}`,
      );
      row.addEventListener("click", async () => {
        if (window.confirm(`Replace the draft with history entry ${entry.id}?`)) {
          report(await controller.loadHistoryEntry(entry.id));
          await refreshMetrics();
        }
      });
      historyBox.appendChild(row);
    }
  }

  async function refreshAnnotations(): Promise<void> {
    const listing = await api.annotations(workspaceId);
    const boundaries: number[][][] = [];
    for (const annotationId of listing.annotations) {
      const doc = await api.annotationBoundaries(workspaceId, annotationId);
      boundaries.push(...doc.boundaries);
    }
    state.annotationBoundaries = boundaries;
  }

  async function ensureGridSummary(): Promise<void> {
    const variable = session.toggles.variable;
    if (!variable) return;
    const key = `${variable}:${state.gridSide}`;
    if (!state.gridSummaries.has(key)) {
      state.gridSummaries.set(
        key,
        await api.variableGrid(workspaceId, variable, state.gridSide),
      );
    }
  }

  // -- render -----------------------------------------------------------------

  function activeSetting(): SettingJson | null {
    if (session.mode === "custom") return session.draft;
    if (state.bundle && session.selectedSuggestion !== null) {
      const suggestion = state.bundle.regionalizations[session.selectedSuggestion];
      const rings =
        session.selectedKernelSuggestion !== null
          ? [state.bundle.kernel_suggestions[session.selectedKernelSuggestion]]
          : [];
      return {
        label: suggestion.key,
        regionalization: suggestion.regionalization,
        kernel: rings.map((r) => ({ inner: r.inner, outer: r.outer })),
      };
    }
    return null;
  }

  function render(): void {
    modeButton.textContent = `mode: ${session.mode}`;
    scaleButton.textContent = `scale: ${session.colorScale}`;
    for (const [tool, button] of Object.entries(toolButtons)) {
      button!.className = state.tool === tool ? "active" : "";
    }

    // base layer
    if (projection && session.toggles.baseLayer !== "blank") {
      renderTiles(
        tileLayer,
        tilesForViewport(
          state.viewport,
          projection,
          TILE_SERVERS[session.toggles.baseLayer] ?? TILE_SERVERS.osm,
        ),
      );
    } else {
      tileLayer.replaceChildren();
    }

    const setting = activeSetting();
    const inputs: MapInputs = { setting };
    if (session.mode === "precomputed" && state.bundle && session.selectedSuggestion !== null) {
      const suggestion = state.bundle.regionalizations[session.selectedSuggestion];
      inputs.fills = choroplethFills(
        suggestion.regions,
        session.colorScale,
        scaleColor(session.colorScale),
      );
      inputs.flags = new Map(suggestion.regions.map((r) => [r.id, r.flagged]));
    } else if (controller.lastMetrics) {
      inputs.flags = new Map(
        controller.lastMetrics.regions.map((r) => [r.id, r.flagged]),
      );
    }
    if (session.toggles.locations && locationCache) {
      inputs.locations = locationCache;
    }
    if (session.toggles.variable) {
      const key = `${session.toggles.variable}:${state.gridSide}`;
      inputs.gridCells = state.gridSummaries.get(key)?.cells;
    }
    if (session.toggles.annotations) {
      inputs.annotationBoundaries = state.annotationBoundaries;
    }
    if (state.tool === "split") inputs.splitDraft = controller.splitDraft;
    if (state.tool === "kernel" && controller.kernelDraw.active) {
      const draw = controller.kernelDraw;
      inputs.kernelCenter = draw.center;
      const extent = draw.previewExtent(state.cursorWorld);
      inputs.kernelPreviewRadii = extent ? extent.filter((r) => r > 0) : [];
    }
    renderMap(drawLayer, buildMapModel(inputs, state.viewport), {
      onRegionClick: (id) => void onRegionClick(id),
      selected: new Set(state.mergeSelection),
    });

    // guidance browser
    suggestionsBox.replaceChildren();
    if (state.bundle) {
      for (const item of suggestionList(state.bundle)) {
        const row = el(
          "div",
          {
            class:
              "suggestion" +
              (session.selectedSuggestion === item.index ? " selected" : ""),
          },
          `${item.key} (${item.regionCount} regions` +
            (item.flaggedCount ? `, ${item.flaggedCount} flagged` : "") +
            ")",
        );
        row.addEventListener("click", () => {
          session.mode = "precomputed";
          session.selectSuggestion(item.index);
        });
        const copy = el("button", { class: "copy" }, "copy");
        copy.addEventListener("click", (event) => {
          event.stopPropagation();
          session.copySuggestionToCustom(state.bundle!, item.index);
          void refreshMetrics();
        });
        row.appendChild(copy);
        suggestionsBox.appendChild(row);
      }
      renderKernelBars(
        kernelBarsSvg,
        kernelBarModel(state.bundle, 250),
        session.selectedKernelSuggestion,
        (index) => session.selectKernelSuggestion(index),
      );
    }

    // variogram with kernel extent overlay
    if (state.variograms) {
      const extents = kernelExtents(setting);
      if (state.tool === "kernel" && controller.kernelDraw.active) {
        const preview = controller.kernelDraw.previewExtent(state.cursorWorld);
        if (preview) extents.push(preview);
        extents.push(...controller.kernelDraw.ringExtents());
      }
      renderVariogram(variogramSvg, variogramModel(state.variograms, extents, 260, 150));
    }

    // small multiples
    multiplesBox.replaceChildren();
    for (const name of summary.variable_names.slice(0, 12)) {
      const box = el("div", { class: "multiple" }, name);
      box.addEventListener("click", async () => {
        variableSelect.value = name;
        session.toggles.variable = name;
        await ensureGridSummary();
        session.notify();
      });
      multiplesBox.appendChild(box);
    }
  }

  session.subscribe(render);

  // -- initial loads -------------------------------------------------------------

  const [variogramsDoc, densityDoc] = await Promise.all([
    api.variograms(workspaceId),
    api.distanceDensity(workspaceId),
  ]);
  state.variograms = variogramsDoc;
  renderDensity(densitySvg, densityModel(densityDoc, 260, 80), 80);
  await refreshAnnotations();
  await refreshHistory();
  await refreshGuidance();
  render();
}

declare global {
  interface Window {
    sbsskitStart: typeof startApp;
  }
}

if (typeof window !== "undefined") {
  window.sbsskitStart = startApp;
}
