// Thin validated client for the layout service.  Requests carry explicit
// seeds so identical inputs reproduce identical results; at most one
// generate request is in flight (a newer one supersedes the old).

import {
  ConditionPayload,
  GenerateResponse,
  RetrieveItem,
  TaskName,
  generateRequestSchema,
  generateResponseSchema,
  retrieveRequestSchema,
  retrieveResponseSchema,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class StudioClient {
  private inFlightGenerate: AbortController | null = null;

  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!res.ok) {
      const text = await res.text();
      throw new ApiError(res.status, `${res.status} ${path}: ${text}`);
    }
    return res.json();
  }

  async health(): Promise<boolean> {
    const body = (await this.request("/health")) as { status?: string };
    return body.status === "ok";
  }

  async categories(): Promise<string[]> {
    const body = (await this.request("/schema")) as { categories: string[] };
    return body.categories;
  }

  async retrieve(
    task: TaskName,
    condition: ConditionPayload,
    k: number,
    seed: number
  ): Promise<RetrieveItem[]> {
    const payload = retrieveRequestSchema.parse({ task, condition, k, seed });
    const body = await this.request("/retrieve", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return retrieveResponseSchema.parse(body);
  }

  async generate(
    task: TaskName,
    condition: ConditionPayload | null,
    nSamples: number,
    seed: number
  ): Promise<GenerateResponse> {
    const payload = generateRequestSchema.parse({
      task,
      condition,
      n_samples: nSamples,
      seed,
    });
    this.inFlightGenerate?.abort();
    const controller = new AbortController();
    this.inFlightGenerate = controller;
    try {
      const body = await this.request("/generate", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
        signal: controller.signal,
      });
      return generateResponseSchema.parse(body);
    } finally {
      if (this.inFlightGenerate === controller) this.inFlightGenerate = null;
    }
  }
}
