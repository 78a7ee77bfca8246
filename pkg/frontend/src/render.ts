/** HTML string builders shared by the boards and dashboards.
 *
 * Every renderer returns a plain HTML string so it can be unit-tested
 * without a DOM. Numbers from report JSON are printed verbatim via
 * String(); the UI never re-aggregates or re-rounds what the service
 * computed.
 */

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** Verbatim display of a JSON number (null shows as an em dash). */
export function num(value: number | null | undefined): string {
  return value === null || value === undefined ? "—" : String(value);
}

export function table(headers: string[], rows: (string | number | null)[][], className = "data"): string {
  const head = headers.map((h) => `<th>${escapeHtml(h)}</th>`).join("");
  const body = rows
    .map((row) => `<tr>${row.map((cell) => `<td>${cell === null ? "—" : escapeHtml(cell)}</td>`).join("")}</tr>`)
    .join("");
  return `<table class="${className}"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

/**
 * Horizontal bar chart as nested divs; width scales against the max value
 * but labels show the service-provided numbers untouched.
 */
export function barChart(entries: { label: string; value: number | null }[], maxHint?: number): string {
  const values = entries.map((e) => e.value ?? 0);
  const max = maxHint ?? Math.max(...values, 1e-9);
  const bars = entries
    .map((entry) => {
      const value = entry.value ?? 0;
      const width = Math.max(0, Math.min(100, (value / max) * 100));
      return (
        `<div class="bar-row"><span class="bar-label">${escapeHtml(entry.label)}</span>` +
        `<span class="bar-track"><span class="bar-fill" style="width:${width.toFixed(1)}%"></span></span>` +
        `<span class="bar-value">${entry.value === null ? "—" : escapeHtml(entry.value)}</span></div>`
      );
    })
    .join("");
  return `<div class="bar-chart">${bars}</div>`;
}

export function zeroState(message: string): string {
  return `<p class="zero-state">${escapeHtml(message)}</p>`;
}
