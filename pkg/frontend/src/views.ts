/**
 * View-model builders and HTML renderers.
 *
 * Renderers are pure string producers over service payloads; the e2e tests
 * assert on the view models, the browser gets the HTML.
 */

import { PresetConfig, SessionState, WhatIfBlock } from "./api.js";
import { escapeHtml, fixed, fmt, fmtType, fmtVector } from "./format.js";

export interface WhatIfRow {
  policy: string;
  chosen: boolean;
  x: string;
  threshold: string;
}

export function whatIfRows(block: WhatIfBlock, chosenPolicy: string): WhatIfRow[] {
  return Object.entries(block).map(([policy, entry]) => ({
    policy,
    chosen: policy === chosenPolicy,
    x: fmtVector(entry.x),
    threshold: entry.threshold === null ? "—" : fixed(entry.threshold, 4),
  }));
}

export function renderWhatIfTable(block: WhatIfBlock | null, chosenPolicy: string, error: string | null): string {
  if (error) return `<p class="error">${escapeHtml(error)}</p>`;
  if (!block) return `<p class="hint">Enter the observed demand to compare recommendations.</p>`;
  const rows = whatIfRows(block, chosenPolicy)
    .map(
      (row) => `
      <tr class="${row.chosen ? "chosen" : ""}">
        <td>${escapeHtml(row.policy)}</td>
        <td class="num">${row.x}</td>
        <td class="num">${row.threshold}</td>
      </tr>`,
    )
    .join("");
  return `
    <table>
      <thead><tr><th>policy</th><th>recommends</th><th>water level</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export interface BudgetRow {
  resource: string;
  budget: string;
  remaining: string;
  spentShare: number; // for the bar width, derived from service numbers only
}

export function budgetRows(session: SessionState): BudgetRow[] {
  return session.resource_names.map((name, k) => ({
    resource: name,
    budget: fmt(session.budgets[k]),
    remaining: fmt(session.remaining[k]),
    spentShare:
      session.budgets[k] > 0 ? 1 - session.remaining[k] / session.budgets[k] : 0,
  }));
}

export function renderBudgets(session: SessionState): string {
  const rows = budgetRows(session)
    .map(
      (row) => `
      <div class="budget-row">
        <span class="budget-name">${escapeHtml(row.resource)}</span>
        <div class="budget-bar"><div class="budget-fill" style="width:${(row.spentShare * 100).toFixed(1)}%"></div></div>
        <span class="budget-nums">${row.remaining} / ${row.budget}</span>
      </div>`,
    )
    .join("");
  return rows;
}

export function renderSteps(session: SessionState): string {
  if (session.steps.length === 0) return `<p class="hint">No sites served yet.</p>`;
  const rows = session.steps
    .map(
      (step) => `
      <tr>
        <td>${step.index}</td>
        <td class="num">${fmtType(step.type)}</td>
        <td class="num">${fmtVector(step.x)}</td>
        <td class="num">${step.threshold === null ? "—" : fixed(step.threshold, 4)}</td>
      </tr>`,
    )
    .join("");
  return `
    <table>
      <thead><tr><th>site</th><th>observed</th><th>committed</th><th>water level</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderThresholdTrace(session: SessionState): string {
  const levels = session.steps
    .map((s) => s.threshold)
    .filter((t): t is number => t !== null);
  if (levels.length === 0) return "";
  const peak = Math.max(...levels);
  const bars = levels
    .map(
      (level) =>
        `<div class="trace-bar" style="height:${peak > 0 ? (level / peak) * 100 : 0}%" title="${fixed(level, 4)}"></div>`,
    )
    .join("");
  return `<div class="trace">${bars}</div>`;
}

export interface SummaryRow {
  metric: string;
  value: string;
}

export function summaryRows(session: SessionState): SummaryRow[] {
  if (!session.hindsight) return [];
  return Object.entries(session.hindsight.metrics).map(([metric, value]) => ({
    metric,
    value: fixed(value, 6),
  }));
}

export function renderSummary(session: SessionState): string {
  if (!session.hindsight) return "";
  const rows = summaryRows(session)
    .map((row) => `<tr><td>${escapeHtml(row.metric)}</td><td class="num">${row.value}</td></tr>`)
    .join("");
  const opt = session.hindsight.xopt
    .map((row, i) => `<tr><td>${i}</td><td class="num">${fmtVector(row)}</td></tr>`)
    .join("");
  return `
    <h3>Fairness summary</h3>
    <table>
      <thead><tr><th>metric</th><th>value</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
    <h3>Hindsight-fair allocation</h3>
    <table>
      <thead><tr><th>site</th><th>allocation</th></tr></thead>
      <tbody>${opt}</tbody>
    </table>`;
}

export function renderPresetOptions(presets: Record<string, PresetConfig>): string {
  return Object.keys(presets)
    .map((name) => `<option value="${escapeHtml(name)}">${escapeHtml(name)}</option>`)
    .join("");
}

export function renderSessionHeader(session: SessionState): string {
  const where = session.complete
    ? "all sites served"
    : `site ${session.index + 1} of ${session.n}`;
  return `
    <span class="pill">${escapeHtml(session.policy)}</span>
    <span class="pill">${escapeHtml(session.family)}</span>
    <span>${where}</span>`;
}
