/** Optional slippy-tile base layer.
 *
 * Works only when the workspace was projected from lon/lat (the CRS note
 * carries the projection parameters, so it can be inverted). Tile fetch
 * failures simply leave the background blank; region outlines stay intact.
 */

import type { Point } from "./types.js";
import { screenToWorld, Viewport } from "./viewport.js";

const EARTH_RADIUS_M = 6371000.0;

export interface ProjectionOrigin {
  lon0: number;
  lat0: number;
}

export function parseProjection(crsNote: string): ProjectionOrigin | null {
  const match = crsNote.match(
    /equirectangular about lon=(-?[\d.]+), lat=(-?[\d.]+)/,
  );
  if (!match) return null;
  return { lon0: parseFloat(match[1]), lat0: parseFloat(match[2]) };
}

export function worldToLonLat(p: Point, origin: ProjectionOrigin): [number, number] {
  const lat = origin.lat0 + (p.y / EARTH_RADIUS_M) * (180 / Math.PI);
  const lon =
    origin.lon0 +
    (p.x / (EARTH_RADIUS_M * Math.cos((origin.lat0 * Math.PI) / 180))) *
      (180 / Math.PI);
  return [lon, lat];
}

export const TILE_SERVERS: Record<string, string> = {
  osm: "https://tile.openstreetmap.org/{z}/{x}/{y}.png",
  satellite:
    "https://server.arcgisonline.com/ArcGIS/rest/services/World_Imagery/MapServer/tile/{z}/{y}/{x}",
};

export interface TileSpec {
  url: string;
  sx: number; // screen position
  sy: number;
  size: number;
}

function lonLatToTile(lon: number, lat: number, z: number): [number, number] {
  const n = 2 ** z;
  const x = ((lon + 180) / 360) * n;
  const latRad = (lat * Math.PI) / 180;
  const y =
    ((1 - Math.log(Math.tan(latRad) + 1 / Math.cos(latRad)) / Math.PI) / 2) * n;
  return [x, y];
}

/** Tiles covering the viewport at a zoom level matched to the scale. */
export function tilesForViewport(
  vp: Viewport,
  origin: ProjectionOrigin,
  template: string,
): TileSpec[] {
  const corners: [number, number][] = [
    [0, 0],
    [vp.width, 0],
    [0, vp.height],
    [vp.width, vp.height],
  ];
  const lonLats = corners.map(([sx, sy]) =>
    worldToLonLat(screenToWorld({ x: sx, y: sy }, vp), origin),
  );
  const lons = lonLats.map((c) => c[0]);
  const lats = lonLats.map((c) => c[1]);
  const spanLon = Math.max(...lons) - Math.min(...lons);
  if (!(spanLon > 0) || spanLon > 360) return [];
  const z = Math.max(
    1,
    Math.min(18, Math.round(Math.log2((360 / spanLon) * (vp.width / 256)))),
  );
  const [x0, y1] = lonLatToTile(Math.min(...lons), Math.min(...lats), z);
  const [x1, y0] = lonLatToTile(Math.max(...lons), Math.max(...lats), z);
  const tiles: TileSpec[] = [];
  const n = 2 ** z;
  for (let tx = Math.floor(x0); tx <= Math.floor(x1); tx++) {
    for (let ty = Math.floor(y0); ty <= Math.floor(y1); ty++) {
      if (ty < 0 || ty >= n) continue;
      if (tiles.length > 64) return tiles; // runaway guard at odd zooms
      const lonLeft = (tx / n) * 360 - 180;
      const lonRight = ((tx + 1) / n) * 360 - 180;
      const latTop = tileYToLat(ty, n);
      // screen position of the tile's top-left corner
      const worldX =
        ((lonLeft - origin.lon0) * Math.PI * EARTH_RADIUS_M *
          Math.cos((origin.lat0 * Math.PI) / 180)) /
        180;
      const worldY = ((latTop - origin.lat0) * Math.PI * EARTH_RADIUS_M) / 180;
      const sx = worldX * vp.scale + vp.tx;
      const sy = -worldY * vp.scale + vp.ty;
      const worldXRight =
        ((lonRight - origin.lon0) * Math.PI * EARTH_RADIUS_M *
          Math.cos((origin.lat0 * Math.PI) / 180)) /
        180;
      const size = (worldXRight - worldX) * vp.scale;
      tiles.push({
        url: template
          .replace("{z}", String(z))
          .replace("{x}", String(((tx % n) + n) % n))
          .replace("{y}", String(ty)),
        sx,
        sy,
        size,
      });
    }
  }
  return tiles;
}

function tileYToLat(y: number, n: number): number {
  const t = Math.PI - (2 * Math.PI * y) / n;
  return (180 / Math.PI) * Math.atan(0.5 * (Math.exp(t) - Math.exp(-t)));
}
