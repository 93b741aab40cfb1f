/** Kernel drawing state machine.
 *
 * The analyst picks a center anywhere on the map, then alternately clicks
 * the outer and inner radius of each ring. Invalid rings (inner >= outer,
 * overlap with an existing ring) are rejected inline and not added. The
 * current extent is mirrored into the variogram view while drawing.
 */

import type { Point, RingJson } from "./types.js";
import { distance } from "./viewport.js";

export interface RejectedRing {
  reason: string;
  ring: RingJson;
}

export class KernelDraw {
  active = false;
  center: Point | null = null;
  private pendingOuter: number | null = null;
  rings: RingJson[] = [];
  lastRejection: RejectedRing | null = null;

  start(existing: RingJson[] = []): void {
    this.active = true;
    this.center = null;
    this.pendingOuter = null;
    this.rings = [...existing];
    this.lastRejection = null;
  }

  /** World-coordinate click; returns the ring if one was completed. */
  clickAt(p: Point): RingJson | null {
    if (!this.active) return null;
    if (this.center === null) {
      this.center = p;
      return null;
    }
    const radius = distance(p, this.center);
    if (this.pendingOuter === null) {
      this.pendingOuter = radius;
      return null;
    }
    const ring: RingJson = { inner: radius, outer: this.pendingOuter };
    this.pendingOuter = null;
    if (!(ring.inner < ring.outer)) {
      this.lastRejection = { reason: "inner radius must be smaller than outer", ring };
      return null;
    }
    const overlap = this.rings.find(
      (other) =>
        Math.max(other.inner, ring.inner) < Math.min(other.outer, ring.outer),
    );
    if (overlap) {
      this.lastRejection = {
        reason: `ring overlaps (${overlap.inner.toFixed(0)}, ${overlap.outer.toFixed(0)})`,
        ring,
      };
      return null;
    }
    this.lastRejection = null;
    this.rings.push(ring);
    return ring;
  }

  /** Radii band to preview (and to mirror in the variogram view) while the
   * cursor is at `p`; null when not drawing radii yet. */
  previewExtent(p: Point | null): [number, number] | null {
    if (!this.active || this.center === null) return null;
    const cursorRadius = p ? distance(p, this.center) : null;
    if (this.pendingOuter === null) {
      return cursorRadius === null ? null : [0, cursorRadius];
    }
    if (cursorRadius === null) return [0, this.pendingOuter];
    return [
      Math.min(cursorRadius, this.pendingOuter),
      Math.max(cursorRadius, this.pendingOuter),
    ];
  }

  /** Completed ring extents, for the persistent variogram overlay. */
  ringExtents(): [number, number][] {
    return this.rings.map((ring) => [ring.inner, ring.outer]);
  }

  /** Leaving kernel mode finalizes the configuration. */
  finish(): RingJson[] {
    this.active = false;
    this.center = null;
    this.pendingOuter = null;
    const rings = [...this.rings].sort((a, b) => a.inner - b.inner);
    this.rings = rings;
    return rings;
  }
}
