import type { RequestLogEntry } from "../src/api.js";
import type { SettingJson } from "../src/types.js";

export function squareSetting(label = "draft"): SettingJson {
  return {
    label,
    regionalization: {
      type: "FeatureCollection",
      features: [
        {
          type: "Feature",
          properties: { id: "all" },
          geometry: {
            type: "Polygon",
            coordinates: [
              [
                [0, 0],
                [100, 0],
                [100, 100],
                [0, 100],
                [0, 0],
              ],
            ],
          },
        },
      ],
    },
    kernel: [{ inner: 0, outer: 30 }],
  };
}

export function splitSettingResponse(): SettingJson {
  const base = squareSetting();
  base.regionalization.features = [
    {
      type: "Feature",
      properties: { id: "alla" },
      geometry: {
        type: "Polygon",
        coordinates: [
          [
            [0, 0],
            [50, 0],
            [50, 100],
            [0, 100],
            [0, 0],
          ],
        ],
      },
    },
    {
      type: "Feature",
      properties: { id: "allb" },
      geometry: {
        type: "Polygon",
        coordinates: [
          [
            [50, 0],
            [100, 0],
            [100, 100],
            [50, 100],
            [50, 0],
          ],
        ],
      },
    },
  ];
  return base;
}

export interface FakeRoute {
  method: string;
  path: RegExp;
  status?: number;
  body: unknown | ((method: string, path: string, body: unknown) => unknown);
}

/** fetch stub: first matching route wins; unmatched requests 404. */
export function fakeFetch(routes: FakeRoute[], log: RequestLogEntry[] = []) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    log.push({ method, path });
    for (const route of routes) {
      if (route.method === method && route.path.test(path)) {
        const parsed = init?.body ? JSON.parse(init.body as string) : undefined;
        const body =
          typeof route.body === "function"
            ? (route.body as (m: string, p: string, b: unknown) => unknown)(
                method,
                path,
                parsed,
              )
            : route.body;
        return new Response(JSON.stringify(body), {
          status: route.status ?? 200,
          headers: { "content-type": "application/json" },
        });
      }
    }
    return new Response(
      JSON.stringify({ status: 404, code: "not_found", message: path }),
      { status: 404 },
    );
  };
}
