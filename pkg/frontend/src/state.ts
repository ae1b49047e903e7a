/**
 * Session controller: the console's state machine.
 *
 * Owns the live session (setup -> stepping -> complete), debounced what-if
 * lookups with cancellation of superseded requests, and a single in-flight
 * commit guard.  Holds no DOM references so it can be driven headlessly.
 */

import {
  AgentType,
  ApiError,
  ObserveResponse,
  ServiceClient,
  SessionState,
  SessionSummary,
  WhatIfBlock,
} from "./api.js";

export type Phase = "setup" | "stepping" | "complete";

export interface ControllerSnapshot {
  phase: Phase;
  summary: SessionSummary | null;
  session: SessionState | null;
  whatif: WhatIfBlock | null;
  whatifError: string | null;
  error: string | null;
  busy: boolean;
}

export type Listener = (snapshot: ControllerSnapshot) => void;

export class SessionController {
  private summary: SessionSummary | null = null;
  private session: SessionState | null = null;
  private whatif: WhatIfBlock | null = null;
  private whatifError: string | null = null;
  private error: string | null = null;
  private busy = false;
  private listeners: Listener[] = [];
  private whatifAbort: AbortController | null = null;
  private whatifTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly client: ServiceClient,
    private readonly debounceMs = 250,
  ) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  snapshot(): ControllerSnapshot {
    const phase: Phase = !this.session
      ? "setup"
      : this.session.complete
        ? "complete"
        : "stepping";
    return {
      phase,
      summary: this.summary,
      session: this.session,
      whatif: this.whatif,
      whatifError: this.whatifError,
      error: this.error,
      busy: this.busy,
    };
  }

  private emit(): void {
    const snap = this.snapshot();
    for (const listener of this.listeners) listener(snap);
  }

  async createSession(body: {
    preset?: string;
    instance?: import("./api.js").InstanceConfig;
    policy: string;
    budgets?: number[];
  }): Promise<void> {
    this.error = null;
    try {
      this.summary = await this.client.createSession(body);
      this.session = await this.client.getSession(this.summary.id);
      this.whatif = null;
      this.whatifError = null;
    } catch (err) {
      this.error = err instanceof ApiError ? err.detail : String(err);
      this.summary = null;
      this.session = null;
    }
    this.emit();
  }

  /** Debounced what-if refresh; superseded requests are aborted. */
  requestWhatIf(type: AgentType): void {
    if (this.whatifTimer !== null) clearTimeout(this.whatifTimer);
    this.whatifTimer = setTimeout(() => {
      void this.fetchWhatIf(type);
    }, this.debounceMs);
  }

  async fetchWhatIf(type: AgentType): Promise<void> {
    if (!this.session || this.session.complete) return;
    this.whatifAbort?.abort();
    const abort = new AbortController();
    this.whatifAbort = abort;
    try {
      const response = await this.client.whatIf(this.session.id, type, abort.signal);
      if (abort.signal.aborted) return;
      this.whatif = response.whatif;
      this.whatifError = null;
    } catch (err) {
      if (abort.signal.aborted) return;
      this.whatif = null;
      this.whatifError = err instanceof ApiError ? err.detail : String(err);
    }
    this.emit();
  }

  /** Commit the observed type; rejects overlapping commits. */
  async commit(type: AgentType): Promise<ObserveResponse | null> {
    if (!this.session || this.busy) return null;
    this.busy = true;
    this.emit();
    try {
      const response = await this.client.observe(this.session.id, type);
      this.session = await this.client.getSession(this.session.id);
      this.whatif = null;
      this.whatifError = null;
      this.error = null;
      return response;
    } catch (err) {
      this.error = err instanceof ApiError ? err.detail : String(err);
      return null;
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  async refresh(): Promise<void> {
    if (!this.session) return;
    this.session = await this.client.getSession(this.session.id);
    this.emit();
  }

  async reset(): Promise<void> {
    if (this.session) {
      try {
        await this.client.deleteSession(this.session.id);
      } catch {
        // already evicted server-side; local reset proceeds regardless
      }
    }
    this.summary = null;
    this.session = null;
    this.whatif = null;
    this.whatifError = null;
    this.error = null;
    this.emit();
  }
}

/** Per-step CSV of the committed allocations (export button). */
export function stepsCsv(session: SessionState): string {
  const header = ["index", "type", ...session.resource_names.map((r) => `x_${r}`), "threshold"];
  const lines = [header.join(",")];
  for (const step of session.steps) {
    const type = Array.isArray(step.type) ? `"[${step.type.join(" ")}]"` : String(step.type);
    lines.push(
      [
        String(step.index),
        type,
        ...step.x.map((v) => String(v)),
        step.threshold === null ? "" : String(step.threshold),
      ].join(","),
    );
  }
  return lines.join("\n") + "\n";
}
