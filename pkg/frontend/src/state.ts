// Editable canvas state and its projection onto API payloads.
//
// Locks form a hierarchy per slot: position can only be locked when size is,
// size only when category is.  Each slot therefore sits in one of four
// states (free, category, category+size, fully locked), and every reachable
// lock pattern maps onto a task the API accepts; mixed patterns become a
// completion payload where only fully-locked slots count as known.

import {
  ConditionPayload,
  ElementJSON,
  LayoutJSON,
  SlotPayload,
  TaskName,
} from "./types.js";

export interface SlotLocks {
  category: boolean;
  size: boolean;
  position: boolean;
}

export interface SlotState {
  category: string;
  size: [number, number];
  position: [number, number];
  locks: SlotLocks;
}

export interface CanvasState {
  slots: SlotState[];
  seed: number;
  emptyCount: number; // element count used for an unconditioned request with no slots
  selectedCandidate: number | null;
}

export function emptyCanvas(seed = 0, emptyCount = 4): CanvasState {
  return { slots: [], seed, emptyCount, selectedCandidate: null };
}

export function defaultSlot(category: string): SlotState {
  return {
    category,
    size: [0.3, 0.2],
    position: [0.5, 0.5],
    locks: { category: false, size: false, position: false },
  };
}

export function addSlot(state: CanvasState, category: string): CanvasState {
  if (state.slots.length >= 20) return state;
  return { ...state, slots: [...state.slots, defaultSlot(category)] };
}

export function removeSlot(state: CanvasState, index: number): CanvasState {
  return { ...state, slots: state.slots.filter((_, i) => i !== index) };
}

type LockLevel = 0 | 1 | 2 | 3;

export function lockLevel(locks: SlotLocks): LockLevel {
  if (locks.position) return 3;
  if (locks.size) return 2;
  if (locks.category) return 1;
  return 0;
}

function locksForLevel(level: LockLevel): SlotLocks {
  return { category: level >= 1, size: level >= 2, position: level >= 3 };
}

/** Advance a slot through free -> category -> category+size -> all -> free. */
export function cycleSlotLocks(state: CanvasState, index: number): CanvasState {
  const slots = state.slots.map((s, i) => {
    if (i !== index) return s;
    const next = ((lockLevel(s.locks) + 1) % 4) as LockLevel;
    return { ...s, locks: locksForLevel(next) };
  });
  return { ...state, slots };
}

export function setSlotLocks(state: CanvasState, index: number, level: LockLevel): CanvasState {
  const slots = state.slots.map((s, i) =>
    i === index ? { ...s, locks: locksForLevel(level) } : s
  );
  return { ...state, slots };
}

/** The unique API task implied by the current lock pattern. */
export function inferTask(state: CanvasState): TaskName {
  if (state.slots.length === 0) return "ucond";
  const levels = state.slots.map((s) => lockLevel(s.locks));
  if (levels.every((l) => l === 0)) return "ucond";
  if (levels.every((l) => l === 1)) return "c";
  if (levels.every((l) => l === 2)) return "cs";
  return "completion";
}

/** Project the canvas onto the condition payload for the inferred task.
 *
 * Partially-locked slots inside a mixed pattern serialize as unknown; their
 * locked values are still enforced client-side when a result is adopted.
 */
export function buildCondition(state: CanvasState): { task: TaskName; condition: ConditionPayload } {
  const task = inferTask(state);
  const unknown: SlotPayload = { category: null, size: null, position: null };
  if (state.slots.length === 0) {
    const n = Math.max(1, Math.min(20, state.emptyCount));
    return { task, condition: { slots: Array.from({ length: n }, () => ({ ...unknown })) } };
  }
  const slots = state.slots.map((s): SlotPayload => {
    switch (task) {
      case "ucond":
        return { ...unknown };
      case "c":
        return { category: s.category, size: null, position: null };
      case "cs":
        return { category: s.category, size: [...s.size], position: null };
      case "completion":
        return lockLevel(s.locks) === 3
          ? { category: s.category, size: [...s.size], position: [...s.position] }
          : { ...unknown };
    }
  });
  return { task, condition: { slots } };
}

/** Merge a candidate layout into the canvas: unlocked attributes take the
 * candidate's values, locked attributes always win.  Surplus candidate
 * elements become new unlocked slots. */
export function adopt(state: CanvasState, layout: LayoutJSON): CanvasState {
  const remaining: (ElementJSON | undefined)[] = [...layout.elements];

  const takeOfCategory = (category: string): ElementJSON | undefined => {
    const at = remaining.findIndex((e) => e !== undefined && e.category === category);
    if (at < 0) return undefined;
    const found = remaining[at];
    remaining[at] = undefined;
    return found;
  };
  const takeAny = (): ElementJSON | undefined => {
    const at = remaining.findIndex((e) => e !== undefined);
    if (at < 0) return undefined;
    const found = remaining[at];
    remaining[at] = undefined;
    return found;
  };

  const slots = state.slots.map((slot) => {
    const source = slot.locks.category ? takeOfCategory(slot.category) : takeAny();
    if (!source) return slot;
    return {
      ...slot,
      category: slot.locks.category ? slot.category : source.category,
      size: slot.locks.size ? slot.size : ([source.w, source.h] as [number, number]),
      position: slot.locks.position ? slot.position : ([source.cx, source.cy] as [number, number]),
    };
  });
  for (const extra of remaining) {
    if (extra === undefined || slots.length >= 20) continue;
    slots.push({
      category: extra.category,
      size: [extra.w, extra.h],
      position: [extra.cx, extra.cy],
      locks: { category: false, size: false, position: false },
    });
  }
  return { ...state, slots, selectedCandidate: null };
}

/** Serialize the canvas to a layout; inverse of stateFromLayout. */
export function layoutFromState(state: CanvasState, id: string | null = null): LayoutJSON {
  return {
    id,
    elements: state.slots.map((s) => ({
      category: s.category,
      cx: s.position[0],
      cy: s.position[1],
      w: s.size[0],
      h: s.size[1],
    })),
  };
}

export function stateFromLayout(layout: LayoutJSON, seed = 0): CanvasState {
  return {
    slots: layout.elements.map((e) => ({
      category: e.category,
      size: [e.w, e.h] as [number, number],
      position: [e.cx, e.cy] as [number, number],
      locks: { category: false, size: false, position: false },
    })),
    seed,
    emptyCount: Math.max(1, layout.elements.length),
    selectedCandidate: null,
  };
}
