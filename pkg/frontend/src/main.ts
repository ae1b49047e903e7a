/** Browser bootstrap: wires the controller to the page. */

import { AgentType, PresetConfig, ServiceClient } from "./api.js";
import { SessionController, stepsCsv } from "./state.js";
import {
  renderBudgets,
  renderPresetOptions,
  renderSessionHeader,
  renderSteps,
  renderSummary,
  renderThresholdTrace,
  renderWhatIfTable,
} from "./views.js";

const client = new ServiceClient("");
const controller = new SessionController(client);
let presets: Record<string, PresetConfig> = {};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function parseDemand(raw: string): AgentType | null {
  const text = raw.trim();
  if (!text) return null;
  if (text.startsWith("[")) {
    try {
      const parsed = JSON.parse(text);
      return Array.isArray(parsed) ? parsed.map(Number) : null;
    } catch {
      return null;
    }
  }
  const value = Number(text);
  return Number.isFinite(value) ? value : null;
}

async function boot(): Promise<void> {
  presets = await client.presets();
  el<HTMLSelectElement>("preset").innerHTML = renderPresetOptions(presets);
  el<HTMLSelectElement>("preset").value = "twosite";

  el<HTMLFormElement>("setup-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void createSession();
  });
  el<HTMLInputElement>("demand").addEventListener("input", () => {
    const demand = parseDemand(el<HTMLInputElement>("demand").value);
    if (demand !== null) controller.requestWhatIf(demand);
  });
  el<HTMLButtonElement>("commit").addEventListener("click", () => {
    const demand = parseDemand(el<HTMLInputElement>("demand").value);
    if (demand !== null) {
      void controller.commit(demand).then(() => {
        el<HTMLInputElement>("demand").value = "";
      });
    }
  });
  el<HTMLButtonElement>("export").addEventListener("click", exportCsv);
  el<HTMLButtonElement>("reset").addEventListener("click", () => void controller.reset());

  controller.subscribe(render);
  render(controller.snapshot());
}

async function createSession(): Promise<void> {
  const preset = el<HTMLSelectElement>("preset").value;
  const policy = el<HTMLSelectElement>("policy").value;
  const budgetRaw = el<HTMLInputElement>("budgets").value.trim();
  let budgets: number[] | undefined;
  if (budgetRaw) {
    try {
      budgets = JSON.parse(budgetRaw);
    } catch {
      el("setup-error").textContent = `budget override is not valid JSON: ${budgetRaw}`;
      return;
    }
  }
  el("setup-error").textContent = "";
  await controller.createSession({ preset, policy, budgets });
}

function exportCsv(): void {
  const snap = controller.snapshot();
  if (!snap.session) return;
  const blob = new Blob([stepsCsv(snap.session)], { type: "text/csv" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = `session-${snap.session.id}.csv`;
  link.click();
  URL.revokeObjectURL(link.href);
}

function render(snap: ReturnType<SessionController["snapshot"]>): void {
  el("setup-view").hidden = snap.phase !== "setup";
  el("session-view").hidden = snap.phase === "setup";
  el("observe-panel").hidden = snap.phase !== "stepping";
  el("summary-panel").hidden = snap.phase !== "complete";

  if (snap.error && snap.phase === "setup") {
    el("setup-error").textContent = snap.error;
  }
  if (!snap.session) return;

  el("session-header").innerHTML = renderSessionHeader(snap.session);
  el("budgets-view").innerHTML = renderBudgets(snap.session);
  el("steps-view").innerHTML = renderSteps(snap.session);
  el("trace-view").innerHTML = renderThresholdTrace(snap.session);
  el("whatif-view").innerHTML = renderWhatIfTable(
    snap.whatif,
    snap.session.policy,
    snap.whatifError,
  );
  el("summary-view").innerHTML = renderSummary(snap.session);
  el<HTMLButtonElement>("commit").disabled = snap.busy;
  el("step-error").textContent = snap.phase === "stepping" && snap.error ? snap.error : "";

  if (snap.phase === "stepping") {
    const agentLabel = `site ${snap.session.index + 1} of ${snap.session.n}`;
    el("observe-label").textContent = `Observed demand at ${agentLabel}`;
  }
}

void boot();
