// Wire types for the layout service HTTP API, with runtime validators so the
// client can check payloads before sending and responses before rendering.

import { z } from "zod";

export type TaskName = "ucond" | "c" | "cs" | "completion";

export interface ElementJSON {
  category: string;
  cx: number;
  cy: number;
  w: number;
  h: number;
}

export interface LayoutJSON {
  id: string | null;
  elements: ElementJSON[];
}

export interface SlotPayload {
  category: string | null;
  size: [number, number] | null;
  position: [number, number] | null;
}

export interface ConditionPayload {
  slots: SlotPayload[];
}

const unitNumber = z.number().gte(0).lte(1);
const pair = z.tuple([unitNumber, unitNumber]);

export const slotPayloadSchema = z.object({
  category: z.string().nullable(),
  size: pair.nullable(),
  position: pair.nullable(),
});

export const conditionPayloadSchema = z.object({
  slots: z.array(slotPayloadSchema).min(1).max(20),
});

export const taskNameSchema = z.enum(["ucond", "c", "cs", "completion"]);

// shape accepted by POST /generate
export const generateRequestSchema = z
  .object({
    task: taskNameSchema,
    condition: conditionPayloadSchema.nullable(),
    n_samples: z.number().int().gte(1).lte(256),
    seed: z.number().int(),
  })
  .superRefine((req, ctx) => {
    if (req.condition === null) {
      if (req.task !== "ucond") {
        ctx.addIssue({ code: z.ZodIssueCode.custom, message: "only ucond may omit the condition" });
      }
      return;
    }
    for (const [i, slot] of req.condition.slots.entries()) {
      const bad = (msg: string) =>
        ctx.addIssue({ code: z.ZodIssueCode.custom, message: `slot ${i}: ${msg}` });
      switch (req.task) {
        case "ucond":
          if (slot.category !== null || slot.size !== null || slot.position !== null)
            bad("ucond slots must be fully unknown");
          break;
        case "c":
          if (slot.category === null || slot.size !== null || slot.position !== null)
            bad("c slots carry exactly a category");
          break;
        case "cs":
          if (slot.category === null || slot.size === null || slot.position !== null)
            bad("cs slots carry category and size");
          break;
        case "completion": {
          const known = slot.category !== null && slot.size !== null && slot.position !== null;
          const unknown = slot.category === null && slot.size === null && slot.position === null;
          if (!known && !unknown) bad("completion slots are all-or-nothing");
          break;
        }
      }
    }
  });

export const retrieveRequestSchema = z.object({
  task: taskNameSchema,
  condition: conditionPayloadSchema,
  k: z.number().int().gte(1).optional(),
  seed: z.number().int(),
});

export const elementSchema = z.object({
  category: z.string(),
  cx: z.number(),
  cy: z.number(),
  w: z.number(),
  h: z.number(),
});

export const layoutSchema = z.object({
  id: z.string().nullable(),
  elements: z.array(elementSchema),
});

export const retrieveResponseSchema = z.array(
  z.object({ id: z.number().int(), score: z.number(), layout: layoutSchema })
);

export const generateResponseSchema = z.object({
  layouts: z.array(layoutSchema),
  provenance: z.array(
    z.object({
      task: z.string(),
      decision: z.enum(["reuse", "guide", "base"]),
      template_id: z.number().int().nullable(),
      similarity: z.number().nullable(),
      seed: z.number().int(),
    })
  ),
});

export type RetrieveItem = z.infer<typeof retrieveResponseSchema>[number];
export type GenerateResponse = z.infer<typeof generateResponseSchema>;
