// Browser entry point: wires the pure state/render/api modules to the DOM.
// Everything testable lives in those modules; this file only dispatches events.

import { ApiError, StudioClient } from "./api.js";
import {
  CanvasState,
  addSlot,
  adopt,
  buildCondition,
  cycleSlotLocks,
  emptyCanvas,
  inferTask,
  removeSlot,
} from "./state.js";
import { EMPTY_GRID_MESSAGE, candidateGridHtml, canvasHtml, layoutToSvg } from "./render.js";
import { LayoutJSON, RetrieveItem } from "./types.js";

const API_BASE = (window as { LAYOUTRAG_API?: string }).LAYOUTRAG_API ?? "";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

async function boot(): Promise<void> {
  const client = new StudioClient(API_BASE);
  const categories = await client.categories();

  let state: CanvasState = emptyCanvas();
  let candidates: RetrieveItem[] = [];
  let variants: LayoutJSON[] = [];

  const canvasEl = byId<HTMLDivElement>("canvas");
  const gridEl = byId<HTMLDivElement>("candidates");
  const variantsEl = byId<HTMLDivElement>("variants");
  const taskEl = byId<HTMLSpanElement>("task-label");
  const toastEl = byId<HTMLDivElement>("toast");
  const categorySelect = byId<HTMLSelectElement>("category-select");
  const seedInput = byId<HTMLInputElement>("seed");

  categorySelect.innerHTML = categories
    .map((c) => `<option value="${c}">${c}</option>`)
    .join("");

  const toast = (message: string) => {
    toastEl.textContent = message;
    toastEl.classList.add("visible");
    setTimeout(() => toastEl.classList.remove("visible"), 4000);
  };

  const redraw = () => {
    canvasEl.innerHTML = canvasHtml(state, categories);
    gridEl.innerHTML = candidateGridHtml(candidates, categories);
    variantsEl.innerHTML = variants
      .map((l, i) => `<figure class="candidate" data-variant="${i}">${layoutToSvg(l, categories)}</figure>`)
      .join("") || `<div class="empty-grid">${variants.length ? "" : "no variants yet"}</div>`;
    taskEl.textContent = inferTask(state);
  };

  byId<HTMLButtonElement>("add-slot").addEventListener("click", () => {
    state = addSlot(state, categorySelect.value);
    redraw();
  });

  canvasEl.addEventListener("click", (ev) => {
    const slot = (ev.target as HTMLElement).closest<HTMLElement>(".slot");
    if (!slot) return;
    const index = Number(slot.dataset.index);
    state = ev.shiftKey ? removeSlot(state, index) : cycleSlotLocks(state, index);
    redraw();
  });

  byId<HTMLButtonElement>("retrieve").addEventListener("click", async () => {
    const { task, condition } = buildCondition(state);
    try {
      candidates = await client.retrieve(task, condition, 8, Number(seedInput.value));
      redraw();
    } catch (err) {
      toast(err instanceof ApiError ? err.message : String(err));
    }
  });

  byId<HTMLButtonElement>("generate").addEventListener("click", async () => {
    const { task, condition } = buildCondition(state);
    try {
      const res = await client.generate(task, condition, 4, Number(seedInput.value));
      variants = res.layouts;
      redraw();
    } catch (err) {
      if ((err as Error).name === "AbortError") return; // superseded
      toast(err instanceof ApiError ? err.message : String(err));
    }
  });

  gridEl.addEventListener("click", (ev) => {
    const cell = (ev.target as HTMLElement).closest<HTMLElement>(".candidate");
    if (!cell) return;
    const item = candidates[Number(cell.dataset.index)];
    if (!item) return;
    state = adopt(state, item.layout);
    redraw();
  });

  variantsEl.addEventListener("click", (ev) => {
    const cell = (ev.target as HTMLElement).closest<HTMLElement>(".candidate");
    if (!cell) return;
    const layout = variants[Number(cell.dataset.variant)];
    if (!layout) return;
    state = adopt(state, layout);
    redraw();
  });

  redraw();
}

boot().catch((err) => {
  document.body.innerHTML = `<pre>failed to start: ${String(err)}</pre>`;
});
