/** Thin DOM/SVG layer materializing render models. */

import type { MapRenderModel } from "./mapModel.js";
import type { DensityBar, KernelBar, VariogramModel } from "./plotModels.js";
import type { TileSpec } from "./tiles.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function svgEl(tag: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  return node;
}

/** Diagonal-stripe pattern marking too-small regions/kernels. */
export function stripePattern(): SVGElement {
  const defs = svgEl("defs");
  const pattern = svgEl("pattern", {
    id: "flag-stripes",
    width: "8",
    height: "8",
    patternUnits: "userSpaceOnUse",
    patternTransform: "rotate(45)",
  });
  pattern.appendChild(
    svgEl("rect", { width: "8", height: "8", fill: "rgba(255,255,255,0)" }),
  );
  pattern.appendChild(
    svgEl("rect", { width: "3", height: "8", fill: "rgba(180,60,60,0.45)" }),
  );
  defs.appendChild(pattern);
  return defs;
}

export function renderTiles(layer: SVGElement, tiles: TileSpec[]): void {
  layer.replaceChildren();
  for (const tile of tiles) {
    const image = svgEl("image", {
      x: String(tile.sx),
      y: String(tile.sy),
      width: String(tile.size + 0.5),
      height: String(tile.size + 0.5),
      opacity: "0.75",
    });
    image.setAttributeNS("http://www.w3.org/1999/xlink", "href", tile.url);
    // a failed tile simply disappears; outlines stay intact
    image.addEventListener("error", () => image.remove());
    layer.appendChild(image);
  }
}

export function renderMap(
  layer: SVGElement,
  model: MapRenderModel,
  options: { onRegionClick?: (id: string) => void; selected?: Set<string> } = {},
): void {
  layer.replaceChildren();

  for (const ring of model.kernelRings) {
    const clip = svgEl("clipPath", { id: `clip-${cssSafe(ring.clipRegionId)}` });
    const regionShape = model.regions.find((r) => r.id === ring.clipRegionId);
    if (regionShape) {
      clip.appendChild(svgEl("path", { d: regionShape.path }));
      layer.appendChild(clip);
    }
    const group = svgEl("g", {
      "clip-path": `url(#clip-${cssSafe(ring.clipRegionId)})`,
    });
    const band = svgEl("circle", {
      cx: String(ring.cx),
      cy: String(ring.cy),
      r: String((ring.innerPx + ring.outerPx) / 2),
      fill: "none",
      stroke: "rgba(70,110,180,0.35)",
      "stroke-width": String(Math.max(ring.outerPx - ring.innerPx, 1)),
    });
    group.appendChild(band);
    layer.appendChild(group);
  }

  for (const region of model.regions) {
    if (region.fill) {
      layer.appendChild(
        svgEl("path", { d: region.path, fill: region.fill, "fill-opacity": "0.55", stroke: "none" }),
      );
    }
    if (region.flagged) {
      layer.appendChild(
        svgEl("path", { d: region.path, fill: "url(#flag-stripes)", stroke: "none" }),
      );
    }
    const outline = svgEl("path", {
      d: region.path,
      fill: "rgba(0,0,0,0)",
      stroke: options.selected?.has(region.id) ? "#d22" : "#222",
      "stroke-width": options.selected?.has(region.id) ? "2.5" : "1.5",
    });
    outline.addEventListener("click", (event) => {
      event.stopPropagation();
      options.onRegionClick?.(region.id);
    });
    layer.appendChild(outline);
  }

  for (const p of model.locations) {
    layer.appendChild(
      svgEl("circle", { cx: String(p.x), cy: String(p.y), r: "2", fill: "#333" }),
    );
  }
  for (const mark of model.variableMarks) {
    layer.appendChild(svgEl("polygon", { points: mark.points, fill: mark.fill }));
  }
  for (const path of model.annotationPaths) {
    layer.appendChild(
      svgEl("path", {
        d: path,
        fill: "none",
        stroke: "#7a4f9e",
        "stroke-dasharray": "5 3",
        "stroke-width": "1.2",
      }),
    );
  }
  if (model.splitPreviewPath) {
    layer.appendChild(
      svgEl("path", {
        d: model.splitPreviewPath,
        fill: "none",
        stroke: "#d22",
        "stroke-width": "2",
        "stroke-dasharray": "6 4",
      }),
    );
  }
  if (model.kernelPreview) {
    for (const r of model.kernelPreview.radii) {
      layer.appendChild(
        svgEl("circle", {
          cx: String(model.kernelPreview.cx),
          cy: String(model.kernelPreview.cy),
          r: String(r),
          fill: "none",
          stroke: "#2266cc",
          "stroke-dasharray": "4 3",
        }),
      );
    }
  }
}

export function renderKernelBars(
  svg: SVGElement,
  bars: KernelBar[],
  selected: number | null,
  onClick: (index: number) => void,
): void {
  svg.replaceChildren();
  for (const bar of bars) {
    const rect = svgEl("rect", {
      x: String(bar.x),
      y: String(bar.y),
      width: String(Math.max(bar.width, 1)),
      height: String(bar.height),
      fill: bar.fill,
      stroke: selected === bar.index ? "#d22" : "#555",
      "stroke-width": selected === bar.index ? "2" : "0.6",
    });
    rect.addEventListener("click", () => onClick(bar.index));
    svg.appendChild(rect);
  }
}

export function renderVariogram(svg: SVGElement, model: VariogramModel): void {
  svg.replaceChildren();
  for (const extent of model.extents) {
    svg.appendChild(
      svgEl("rect", {
        x: String(extent.x0),
        y: "0",
        width: String(Math.max(extent.x1 - extent.x0, 1)),
        height: "100%",
        fill: "rgba(70,110,180,0.18)",
      }),
    );
  }
  for (const line of model.lines) {
    const d = line.points
      .map((p, i) => `${i === 0 ? "M" : "L"}${p.x} ${p.y}`)
      .join("");
    svg.appendChild(
      svgEl("path", { d, fill: "none", stroke: "#666", "stroke-width": "1" }),
    );
  }
  for (const square of model.squares) {
    svg.appendChild(
      svgEl("rect", {
        x: String(square.x),
        y: String(square.y),
        width: String(square.size),
        height: String(square.size),
        fill: square.fill,
      }),
    );
  }
}

export function renderDensity(svg: SVGElement, bars: DensityBar[], height: number): void {
  svg.replaceChildren();
  for (const bar of bars) {
    svg.appendChild(
      svgEl("rect", {
        x: String(bar.x),
        y: String(height - bar.height),
        width: String(bar.width),
        height: String(bar.height),
        fill: "#9aa7b8",
      }),
    );
  }
}

function cssSafe(value: string): string {
  return value.replace(/[^a-zA-Z0-9_-]/g, "_");
}
