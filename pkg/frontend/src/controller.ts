/** Mediates between interactions and the service.
 *
 * The mode rule lives here: while the session is in precomputed mode no
 * mutating request is ever issued — attempts are refused locally. All
 * numeric results (split polygons, metrics, suggestions) come from the
 * server; the controller only moves state around.
 */

import { ApiClient, ApiError } from "./api.js";
import { KernelDraw } from "./kernelDraw.js";
import { Session } from "./session.js";
import type { MetricReportJson, RingJson, SettingJson } from "./types.js";

export interface ActionResult {
  ok: boolean;
  message?: string;
}

export class Controller {
  readonly kernelDraw = new KernelDraw();
  splitDraft: [number, number][] = [];
  lastMetrics: MetricReportJson | null = null;

  constructor(
    readonly api: ApiClient,
    readonly session: Session,
    readonly workspaceId: string,
  ) {}

  private refuseUnlessEditable(): ActionResult | null {
    if (!this.session.canEdit) {
      return { ok: false, message: "switch to custom mode to edit" };
    }
    if (!this.session.draft) {
      return { ok: false, message: "no draft setting to edit" };
    }
    return null;
  }

  // -- region edits --------------------------------------------------------

  beginSplit(): void {
    this.splitDraft = [];
  }

  addSplitVertex(p: [number, number]): void {
    this.splitDraft.push(p);
  }

  async commitSplit(regionId: string): Promise<ActionResult> {
    const refusal = this.refuseUnlessEditable();
    if (refusal) return refusal;
    if (this.splitDraft.length < 2) {
      return { ok: false, message: "draw at least two polyline vertices" };
    }
    try {
      const response = await this.api.splitRegion(
        this.workspaceId,
        this.session.draft as SettingJson,
        regionId,
        this.splitDraft,
      );
      this.session.pushDraft(response.setting);
      this.splitDraft = [];
      return { ok: true };
    } catch (error) {
      return { ok: false, message: describe(error) };
    }
  }

  async mergeRegions(regionIds: [string, string]): Promise<ActionResult> {
    const refusal = this.refuseUnlessEditable();
    if (refusal) return refusal;
    try {
      const response = await this.api.mergeRegions(
        this.workspaceId,
        this.session.draft as SettingJson,
        regionIds,
      );
      this.session.pushDraft(response.setting);
      return { ok: true };
    } catch (error) {
      return { ok: false, message: describe(error) };
    }
  }

  // -- kernel edits ---------------------------------------------------------

  startKernelMode(): ActionResult {
    const refusal = this.refuseUnlessEditable();
    if (refusal) return refusal;
    this.kernelDraw.start((this.session.draft as SettingJson).kernel);
    return { ok: true };
  }

  kernelClick(world: { x: number; y: number }): RingJson | null {
    if (!this.session.canEdit || !this.kernelDraw.active) return null;
    return this.kernelDraw.clickAt(world);
  }

  finishKernelMode(): ActionResult {
    if (!this.kernelDraw.active) return { ok: false, message: "not drawing" };
    const rings = this.kernelDraw.finish();
    const draft = this.session.draft as SettingJson;
    this.session.pushDraft({ ...draft, kernel: rings });
    return { ok: true };
  }

  // -- server-backed reads ----------------------------------------------------

  async refreshMetrics(): Promise<ActionResult> {
    const draft = this.session.draft;
    if (!draft) return { ok: false, message: "no draft" };
    try {
      this.lastMetrics = await this.api.metrics(this.workspaceId, draft);
      this.session.notify();
      return { ok: true };
    } catch (error) {
      return { ok: false, message: describe(error) };
    }
  }

  async saveDraft(): Promise<ActionResult> {
    const refusal = this.refuseUnlessEditable();
    if (refusal) return refusal;
    try {
      await this.api.saveSetting(this.workspaceId, this.session.draft as SettingJson);
      return { ok: true };
    } catch (error) {
      return { ok: false, message: describe(error) };
    }
  }

  async runSbss(): Promise<ActionResult> {
    const refusal = this.refuseUnlessEditable();
    if (refusal) return refusal;
    try {
      const run = await this.api.runSbss(
        this.workspaceId,
        this.session.draft as SettingJson,
      );
      return { ok: true, message: `result ${run.result_id} stored` };
    } catch (error) {
      return { ok: false, message: describe(error) };
    }
  }

  /** Replace the draft from a history entry (caller confirms first). */
  async loadHistoryEntry(entryId: string): Promise<ActionResult> {
    try {
      const doc = await this.api.historyEntry(this.workspaceId, entryId);
      this.session.mode = "custom";
      this.session.resetDraft(doc.setting);
      return { ok: true };
    } catch (error) {
      return { ok: false, message: describe(error) };
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return String(error);
}
