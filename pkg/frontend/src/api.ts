/**
 * Typed client for the allocation service HTTP API.
 *
 * Every number the console displays originates from one of these response
 * payloads; the console itself performs no allocation arithmetic.
 */

export type AgentType = number | number[];

export interface DistributionSpec {
  kind: string;
  params: Record<string, unknown>;
}

export interface AgentConfig {
  size: number;
  count?: number;
  support?: AgentType[];
  probs?: number[];
  distribution?: DistributionSpec;
}

export interface InstanceConfig {
  agents: AgentConfig[];
  budgets: number[] | null;
  names?: string[];
  family: "filling_ratio" | "linear";
}

export interface PresetConfig {
  instance: InstanceConfig;
  policies: string[];
  replications: number;
  seed: number;
}

export interface SessionSummary {
  id: string;
  n: number;
  num_resources: number;
  budgets: number[];
  resource_names: string[];
  policy: string;
  policies: string[];
  family: string;
}

export interface StepRecord {
  index: number;
  type: AgentType;
  x: number[];
  threshold: number | null;
}

export interface WhatIfEntry {
  x: number[];
  threshold: number | null;
}

export type WhatIfBlock = Record<string, WhatIfEntry>;

export interface ObserveResponse {
  index: number;
  type: AgentType;
  x: number[];
  threshold: number | null;
  remaining: number[];
  complete: boolean;
  whatif: WhatIfBlock;
}

export interface WhatIfResponse {
  index: number;
  type: AgentType;
  whatif: WhatIfBlock;
}

export interface SessionState {
  id: string;
  policy: string;
  policies: string[];
  family: string;
  n: number;
  num_resources: number;
  budgets: number[];
  resource_names: string[];
  index: number;
  remaining: number[];
  complete: boolean;
  created: string;
  steps: StepRecord[];
  hindsight?: {
    xopt: number[][];
    metrics: Record<string, number>;
  };
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

async function parse<T>(response: Response): Promise<T> {
  let body: unknown;
  try {
    body = await response.json();
  } catch {
    body = {};
  }
  if (!response.ok) {
    const detail =
      typeof body === "object" && body !== null && "detail" in body
        ? String((body as { detail: unknown }).detail)
        : response.statusText;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class ServiceClient {
  constructor(private readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async presets(): Promise<Record<string, PresetConfig>> {
    return parse(await fetch(this.url("/presets")));
  }

  async createSession(body: {
    preset?: string;
    instance?: InstanceConfig;
    policy: string;
    budgets?: number[];
  }): Promise<SessionSummary> {
    return parse(
      await fetch(this.url("/sessions"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  async getSession(id: string): Promise<SessionState> {
    return parse(await fetch(this.url(`/sessions/${id}`)));
  }

  async deleteSession(id: string): Promise<void> {
    await parse(await fetch(this.url(`/sessions/${id}`), { method: "DELETE" }));
  }

  async observe(id: string, type: AgentType): Promise<ObserveResponse> {
    return parse(
      await fetch(this.url(`/sessions/${id}/observe`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ type }),
      }),
    );
  }

  async whatIf(id: string, type: AgentType, signal?: AbortSignal): Promise<WhatIfResponse> {
    return parse(
      await fetch(this.url(`/sessions/${id}/whatif`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ type }),
        signal,
      }),
    );
  }
}
