/** Dashboard renderers for the eight report endpoints.
 *
 * Each renderer turns one report JSON body into a table and, where it
 * helps, a bar chart. Every number shown comes straight from a JSON field;
 * the client never aggregates, rounds, or derives values.
 */

import { barChart, escapeHtml, num, table, zeroState } from "./render.js";
import type {
  AgreementReport, ComplianceReport, ConfirmationReport, CrosstabReport,
  GroupComparisonReport, IncidentalsReport, LiftReport, ProcessReport,
} from "./types.js";

export function renderConfirmation(report: ConfirmationReport): string {
  const populated = report.buckets.filter((b) => b.n_sent > 0);
  if (populated.length === 0) {
    return zeroState("No detections sent yet.");
  }
  const rows = populated.map((b) => [
    b.label, b.n_sent, b.n_followed, b.n_confirmed, num(b.rate),
    b.ci_low === null || b.ci_high === null ? null : `${b.ci_low}–${b.ci_high}`,
  ]);
  const chart = barChart(
    populated.map((b) => ({ label: b.label, value: b.rate })),
    1.0,
  );
  const caption = report.screened_only
    ? `${report.org} confirmation by confidence (after desk screening)`
    : `${report.org} confirmation by confidence (all sent)`;
  return `<h3>${escapeHtml(caption)}</h3>${chart}` +
    table(["bucket", "sent", "followed", "confirmed", "rate", "95% CI"], rows);
}

export function renderLift(report: LiftReport): string {
  const rows: (string | number | null)[][] = [
    ["images reviewed by the model", report.total_images],
    ["detections sent", report.sent],
    ["confirmed applications", report.confirmed],
    ["base positive rate", report.base_rate],
    ["review reduction", report.review_reduction],
    ["overall lift", report.overall_lift],
    ["top-bucket rate", report.top_bucket_rate],
    ["top-bucket lift", report.top_lift],
  ];
  const notes = report.notes.map((n) => `<li>${escapeHtml(n)}</li>`).join("");
  return table(["metric", "value"], rows) + (notes ? `<ul class="notes">${notes}</ul>` : "");
}

export function renderAgreement(report: AgreementReport): string {
  if (report.total_overlap === 0) {
    return zeroState("No detections were sent to both organizations.");
  }
  const cells = report.cells;
  const rows: (string | number | null)[][] = [
    ["followed by both", cells.both_followed.n, num(cells.both_followed.elpc_rate), num(cells.both_followed.wdnr_rate)],
    ["advocacy only", cells.elpc_only.n, num(cells.elpc_only.elpc_rate), null],
    ["regulator only", cells.wdnr_only.n, null, num(cells.wdnr_only.wdnr_rate)],
    ["neither", cells.neither.n, null, null],
  ];
  return `<h3>Detections sent to both organizations (N=${num(report.total_overlap)})</h3>` +
    table(["follow-up", "n", "elpc rate", "wdnr rate"], rows);
}

export function renderCompliance(report: ComplianceReport): string {
  if (report.confirmed === 0) {
    return zeroState("No confirmed applications yet.");
  }
  const order = ["violation", "compliant_pre_window", "compliant_unregulated_entity",
                 "compliant_other", "indeterminate"];
  const entries = order
    .filter((key) => key in report.counts)
    .map((key) => ({ label: key, value: report.counts[key] ?? 0 }));
  const rows = entries.map((e) => [e.label, e.value]);
  return `<h3>Compliance rulings for ${num(report.confirmed)} confirmed applications</h3>` +
    barChart(entries) + table(["ruling", "count"], rows) +
    table(["share", "value"], [
      ["non-compliant", num(report.share_noncompliant)],
      ["outside regulatory reach", num(report.share_cracks)],
      ["unregulated among in-window", num(report.share_afo_post_window)],
    ]);
}

export function renderProcess(report: ProcessReport): string {
  const populated = report.followup_rate_by_bucket.filter((b) => b.n_sent > 0);
  if (populated.length === 0) {
    return zeroState("No dispatches recorded yet.");
  }
  const followupRows = populated.map((b) => [b.label, b.n_sent, b.n_followed, num(b.rate)]);
  const latencyEntries = Object.entries(report.latency_histogram)
    .map(([days, count]) => ({ label: `${days}d`, value: count }));
  return `<h3>${escapeHtml(report.org)} process metrics</h3>` +
    table(["bucket", "sent", "followed", "follow-up rate"], followupRows) +
    `<p>visibility rate: <strong>${num(report.visibility_rate)}</strong>` +
    ` (among ${num(report.visited)} visited, ${num(report.responses)} responses)</p>` +
    `<h4>Days to follow-up</h4>` + barChart(latencyEntries) +
    `<p>within 1 day: ${num(report.latency_p_le_1)}; max: ${num(report.latency_max)} days</p>`;
}

export function renderGroupComparison(report: GroupComparisonReport): string {
  const rows: (string | number | null)[][] = [];
  for (const [group, summary] of Object.entries(report.groups)) {
    for (const [metric, values] of Object.entries(summary.metrics)) {
      rows.push([group, summary.n, metric, values.mean, num(values.ci_half)]);
    }
  }
  if (rows.length === 0) {
    return zeroState("No confirmed applications to compare.");
  }
  return `<h3>Confirmed events by ruling (excluded: ${escapeHtml(report.excluded.join(", "))})</h3>` +
    table(["group", "n", "metric", "mean", "95% CI half-width"], rows);
}

export function renderCrosstab(report: CrosstabReport): string {
  const levels = Object.keys(report.rows);
  const any = levels.some((level) => (report.rows[level] ?? []).some((v) => v > 0));
  if (!any) {
    return zeroState("No confidence-rated responses yet.");
  }
  const rows = levels.map((level) => [level, ...(report.rows[level] ?? [])]);
  return `<h3>Self-reported confidence by model score</h3>` +
    table(["confidence", ...report.buckets], rows);
}

export function renderIncidentals(report: IncidentalsReport): string {
  if (report.total === 0) {
    return zeroState("No incidental reports filed.");
  }
  const entries = Object.entries(report.counts).map(([label, value]) => ({ label, value }));
  return `<h3>${num(report.total)} incidental reports</h3>` + barChart(entries) +
    table(["category", "count"], entries.map((e) => [e.label, e.value]));
}
