/** Display formatting; values pass through unchanged otherwise. */

export function fmt(value: number | null | undefined, digits = 4): string {
  if (value === null || value === undefined) return "—";
  if (!Number.isFinite(value)) return String(value);
  return value
    .toFixed(digits)
    .replace(/(\.\d*?)0+$/, "$1")
    .replace(/\.$/, "");
}

/** Fixed-digit form used in tables so columns stay aligned. */
export function fixed(value: number | null | undefined, digits = 4): string {
  if (value === null || value === undefined) return "—";
  return value.toFixed(digits);
}

export function fmtVector(values: number[] | null | undefined, digits = 4): string {
  if (!values) return "—";
  if (values.length === 1) return fixed(values[0], digits);
  return `[${values.map((v) => fixed(v, digits)).join(", ")}]`;
}

export function fmtType(type: number | number[], digits = 2): string {
  if (Array.isArray(type)) return `[${type.map((v) => fmt(v, digits)).join(", ")}]`;
  return fmt(type, digits);
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
