/** Assignment board and printable field packets.
 *
 * The packet view renders the manifest verbatim: title, north arrow,
 * capture date, coordinates, and the three image slots, with an explicit
 * placeholder when summer imagery is missing. The print stylesheet keeps
 * exactly this block on paper for verifiers working offline.
 */

import { escapeHtml, num, table, zeroState } from "./render.js";
import type { Assignment, PacketManifest } from "./types.js";

export function renderAssignmentList(assignments: Assignment[]): string {
  if (assignments.length === 0) {
    return zeroState("No assignments for this verifier.");
  }
  const rows = assignments.map((a) => [
    a.assignment_id,
    a.detection_id,
    a.run_id,
    a.dispatched_on,
    a.rank === null ? null : String(a.rank),
    String(a.score),
  ]);
  return table(
    ["assignment", "detection", "run", "dispatched", "rank", "score"],
    rows,
    "assignment-list",
  );
}

export function groupByVerifier(assignments: Assignment[]): Map<string, Assignment[]> {
  const grouped = new Map<string, Assignment[]>();
  for (const assignment of assignments) {
    const key = assignment.verifier_id ?? assignment.region_tag ?? "unassigned";
    const bucket = grouped.get(key) ?? [];
    bucket.push(assignment);
    grouped.set(key, bucket);
  }
  for (const bucket of grouped.values()) {
    bucket.sort((a, b) => (a.rank ?? 0) - (b.rank ?? 0));
  }
  return grouped;
}

export function renderAssignmentBoard(assignments: Assignment[]): string {
  if (assignments.length === 0) {
    return zeroState("No assignments yet.");
  }
  const sections: string[] = [];
  for (const [verifier, bucket] of groupByVerifier(assignments)) {
    sections.push(
      `<section class="verifier-group"><h3>${escapeHtml(verifier)}</h3>` +
        renderAssignmentList(bucket) +
        "</section>",
    );
  }
  return sections.join("");
}

export function renderPacket(packet: PacketManifest): string {
  const summer = packet.summer_image_uri
    ? `<figure><img src="${escapeHtml(packet.summer_image_uri)}" alt="summer reference">` +
      "<figcaption>Summer reference</figcaption></figure>"
    : `<figure class="placeholder"><div class="thumb placeholder">summer image unavailable</div>` +
      "<figcaption>Summer reference</figcaption></figure>";
  const notes = packet.notes.length
    ? `<ul class="packet-notes">${packet.notes.map((n) => `<li>${escapeHtml(n)}</li>`).join("")}</ul>`
    : "";
  return `
<article class="packet print-sheet" data-assignment-id="${escapeHtml(packet.assignment_id)}">
  <header class="packet-header">
    <h2>${escapeHtml(packet.title)}</h2>
    ${packet.north_arrow ? '<span class="north-arrow" title="north">⬆ N</span>' : ""}
  </header>
  <dl class="packet-meta">
    <dt>Capture date</dt><dd>${escapeHtml(packet.capture_date)}</dd>
    <dt>Coordinates</dt><dd>${num(packet.centroid.lat)}, ${num(packet.centroid.lon)}</dd>
  </dl>
  <div class="packet-imagery">
    <figure><img src="${escapeHtml(packet.detection_image_uri)}" alt="detection">
      <figcaption>Detection</figcaption></figure>
    ${summer}
    <figure><img src="${escapeHtml(packet.static_map_uri)}" alt="static map">
      <figcaption>Road map</figcaption></figure>
  </div>
  ${notes}
</article>`;
}
