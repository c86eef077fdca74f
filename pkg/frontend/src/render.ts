// Markup generators: thumbnails and the editor canvas are plain SVG strings
// built from layout JSON, colored per category. No raster assets.

import { CanvasState, lockLevel } from "./state.js";
import { LayoutJSON, RetrieveItem } from "./types.js";

export function categoryColor(category: string, categories: string[]): string {
  const index = Math.max(0, categories.indexOf(category));
  const hue = Math.round((360 * index) / Math.max(1, categories.length));
  return `hsl(${hue}, 65%, 60%)`;
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function layoutToSvg(
  layout: LayoutJSON,
  categories: string[],
  size = 120,
  aspect = 1.4
): string {
  const width = size;
  const height = Math.round(size * aspect);
  const rects = layout.elements
    .map((e) => {
      const x = (e.cx - e.w / 2) * width;
      const y = (e.cy - e.h / 2) * height;
      const color = categoryColor(e.category, categories);
      return (
        `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" ` +
        `width="${(e.w * width).toFixed(2)}" height="${(e.h * height).toFixed(2)}" ` +
        `fill="${color}" fill-opacity="0.75" stroke="#333" stroke-width="0.8">` +
        `<title>${esc(e.category)}</title></rect>`
      );
    })
    .join("");
  return (
    `<svg class="thumb" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}" ` +
    `xmlns="http://www.w3.org/2000/svg">` +
    `<rect x="0" y="0" width="${width}" height="${height}" fill="#fafafa" stroke="#999"/>` +
    rects +
    `</svg>`
  );
}

export const EMPTY_GRID_MESSAGE = "no templates; generating from base model";

export function candidateGridHtml(items: RetrieveItem[], categories: string[]): string {
  if (items.length === 0) {
    return `<div class="empty-grid">${EMPTY_GRID_MESSAGE}</div>`;
  }
  const cells = items
    .map(
      (item, i) =>
        `<figure class="candidate" data-index="${i}" data-id="${item.id}">` +
        layoutToSvg(item.layout, categories) +
        `<figcaption>#${item.id} &middot; ${item.score.toFixed(3)}</figcaption>` +
        `</figure>`
    )
    .join("");
  return `<div class="candidate-grid">${cells}</div>`;
}

const LOCK_BADGES = ["", "C", "C+S", "C+S+P"] as const;

export function canvasHtml(state: CanvasState, categories: string[], size = 240): string {
  const layout: LayoutJSON = {
    id: null,
    elements: state.slots.map((s) => ({
      category: s.category,
      cx: s.position[0],
      cy: s.position[1],
      w: s.size[0],
      h: s.size[1],
    })),
  };
  const badges = state.slots
    .map((s, i) => {
      const badge = LOCK_BADGES[lockLevel(s.locks)];
      return (
        `<li class="slot" data-index="${i}">` +
        `<span class="swatch" style="background:${categoryColor(s.category, categories)}"></span>` +
        `${esc(s.category)}${badge ? ` <b class="lock">[${badge}]</b>` : ""}` +
        `</li>`
      );
    })
    .join("");
  return layoutToSvg(layout, categories, size) + `<ul class="slot-list">${badges}</ul>`;
}
