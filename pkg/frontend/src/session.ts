/** UI session state: map mode, the editable draft stack, selection, and
 * view toggles. Edit interactions are possible only in custom mode;
 * precomputed settings are read-only until copied. */

import type { GuidanceBundleJson, SettingJson } from "./types.js";

export type MapMode = "precomputed" | "custom";
export type ColorScale = "counts" | "cov_diff";

export interface ViewToggles {
  locations: boolean;
  variable: string | null;
  annotations: boolean;
  baseLayer: "osm" | "satellite" | "blank";
}

type Listener = () => void;

export class Session {
  mode: MapMode = "precomputed";
  selectedSuggestion: number | null = null;
  selectedKernelSuggestion: number | null = null;
  colorScale: ColorScale = "counts";
  toggles: ViewToggles = {
    locations: false,
    variable: null,
    annotations: true,
    baseLayer: "osm",
  };

  private draftStack: SettingJson[] = [];
  private listeners: Listener[] = [];

  get canEdit(): boolean {
    return this.mode === "custom";
  }

  get draft(): SettingJson | null {
    return this.draftStack.length
      ? this.draftStack[this.draftStack.length - 1]
      : null;
  }

  get draftDepth(): number {
    return this.draftStack.length;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  notify(): void {
    for (const listener of this.listeners) listener();
  }

  setMode(mode: MapMode): void {
    this.mode = mode;
    this.notify();
  }

  setColorScale(scale: ColorScale): void {
    this.colorScale = scale;
    this.notify();
  }

  selectSuggestion(index: number | null): void {
    this.selectedSuggestion = index;
    this.notify();
  }

  selectKernelSuggestion(index: number | null): void {
    this.selectedKernelSuggestion = index;
    this.notify();
  }

  /** Push a new draft version (from an edit or an explicit load). */
  pushDraft(setting: SettingJson): void {
    if (!this.canEdit) {
      throw new Error("drafts can only change in custom mode");
    }
    this.draftStack.push(setting);
    this.notify();
  }

  /** Replace the whole stack, e.g. when loading a history entry. */
  resetDraft(setting: SettingJson): void {
    this.draftStack = [setting];
    this.notify();
  }

  undo(): boolean {
    if (this.draftStack.length <= 1) return false;
    this.draftStack.pop();
    this.notify();
    return true;
  }

  /** Copy a precomputed suggestion into an editable custom draft. */
  copySuggestionToCustom(bundle: GuidanceBundleJson, index: number): SettingJson {
    const suggestion = bundle.regionalizations[index];
    const rings =
      this.selectedKernelSuggestion !== null
        ? [bundle.kernel_suggestions[this.selectedKernelSuggestion]]
        : bundle.kernel_suggestions.filter((k) => k.level === 0);
    const setting: SettingJson = {
      label: `from ${suggestion.key}`,
      regionalization: structuredClone(suggestion.regionalization),
      kernel: rings.map((k) => ({ inner: k.inner, outer: k.outer })),
    };
    this.mode = "custom";
    this.draftStack = [setting];
    this.selectedSuggestion = null;
    this.notify();
    return setting;
  }
}
