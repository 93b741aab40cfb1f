/** Typed client for the workbench service.
 *
 * Every request is appended to `log`, which the precomputed-mode contract
 * tests inspect: while browsing suggestions the client must never issue a
 * mutating (non-GET) request.
 */

import type {
  DistanceDensityJson,
  GuidanceBundleJson,
  HistoryEntryJson,
  MetricReportJson,
  SbssRunJson,
  SettingJson,
  VariableGridJson,
  VariogramJson,
  WorkspaceSummary,
} from "./types.js";

export interface RequestLogEntry {
  method: string;
  path: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly field?: string | null,
  ) {
    super(message);
  }
}

export interface GuidanceRequest {
  grid_max?: number;
  k_min?: number;
  k_max?: number;
  kernel_depth?: number;
  max_radius?: number | null;
  threshold?: number;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly log: RequestLogEntry[] = [];

  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  get mutationCount(): number {
    return this.log.filter((entry) => entry.method !== "GET").length;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    this.log.push({ method, path });
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const text = await response.text();
    const doc = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(
        response.status,
        doc.code ?? "error",
        doc.message ?? response.statusText,
        doc.field,
      );
    }
    return doc as T;
  }

  workspaceSummary(workspaceId: string): Promise<WorkspaceSummary> {
    return this.request("GET", `/workspaces/${workspaceId}`);
  }

  listWorkspaces(): Promise<{ workspaces: string[] }> {
    return this.request("GET", "/workspaces");
  }

  cachedGuidance(workspaceId: string): Promise<GuidanceBundleJson> {
    return this.request("GET", `/workspaces/${workspaceId}/guidance`);
  }

  computeGuidance(
    workspaceId: string,
    params: GuidanceRequest,
  ): Promise<GuidanceBundleJson> {
    return this.request("POST", `/workspaces/${workspaceId}/guidance`, params);
  }

  splitRegion(
    workspaceId: string,
    setting: SettingJson,
    regionId: string,
    cut: [number, number][],
  ): Promise<{ setting: SettingJson }> {
    return this.request("POST", `/workspaces/${workspaceId}/regions/split`, {
      setting,
      region_id: regionId,
      cut: { type: "LineString", coordinates: cut },
    });
  }

  mergeRegions(
    workspaceId: string,
    setting: SettingJson,
    regionIds: [string, string],
  ): Promise<{ setting: SettingJson }> {
    return this.request("POST", `/workspaces/${workspaceId}/regions/merge`, {
      setting,
      region_ids: regionIds,
    });
  }

  metrics(workspaceId: string, setting: SettingJson): Promise<MetricReportJson> {
    return this.request("POST", `/workspaces/${workspaceId}/metrics`, { setting });
  }

  runSbss(workspaceId: string, setting: SettingJson): Promise<SbssRunJson> {
    return this.request("POST", `/workspaces/${workspaceId}/sbss`, { setting });
  }

  saveSetting(workspaceId: string, setting: SettingJson): Promise<{ id: string }> {
    return this.request("POST", `/workspaces/${workspaceId}/history`, { setting });
  }

  history(workspaceId: string): Promise<{ entries: HistoryEntryJson[] }> {
    return this.request("GET", `/workspaces/${workspaceId}/history`);
  }

  historyEntry(
    workspaceId: string,
    entryId: string,
  ): Promise<{ setting: SettingJson }> {
    return this.request("GET", `/workspaces/${workspaceId}/history/${entryId}`);
  }

  locations(workspaceId: string): Promise<{ locations: [number, number][] }> {
    return this.request("GET", `/workspaces/${workspaceId}/locations`);
  }

  distanceDensity(workspaceId: string, bins = 40): Promise<DistanceDensityJson> {
    return this.request("GET", `/workspaces/${workspaceId}/distance-density?bins=${bins}`);
  }

  variograms(workspaceId: string, bins = 15): Promise<VariogramJson> {
    return this.request("GET", `/workspaces/${workspaceId}/variograms?bins=${bins}`);
  }

  variableGrid(
    workspaceId: string,
    variable: string,
    gridSide: number,
  ): Promise<VariableGridJson> {
    const query = `variable=${encodeURIComponent(variable)}&grid_side=${gridSide}`;
    return this.request("GET", `/workspaces/${workspaceId}/variable-grid?${query}`);
  }

  annotations(workspaceId: string): Promise<{ annotations: string[] }> {
    return this.request("GET", `/workspaces/${workspaceId}/annotations`);
  }

  annotationBoundaries(
    workspaceId: string,
    annotationId: string,
  ): Promise<{ boundaries: number[][][] }> {
    return this.request(
      "GET",
      `/workspaces/${workspaceId}/annotations/${annotationId}/boundaries`,
    );
  }

  async uploadAnnotation(workspaceId: string, payload: string): Promise<{ id: string }> {
    this.log.push({ method: "POST", path: `/workspaces/${workspaceId}/annotations` });
    const response = await this.fetchFn(
      `${this.baseUrl}/workspaces/${workspaceId}/annotations`,
      { method: "POST", body: payload, headers: { "content-type": "application/geo+json" } },
    );
    const doc = JSON.parse(await response.text());
    if (!response.ok) {
      throw new ApiError(response.status, doc.code ?? "error", doc.message ?? "", doc.field);
    }
    return doc;
  }
}
