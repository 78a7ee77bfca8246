/** Desk-screening board: pending detections with one-click accept and
 * reject-with-reason. Decisions apply optimistically and roll back when
 * the server reports the item was already decided by another screener.
 */

import { ApiClient, ApiError } from "./api.js";
import { escapeHtml, num, zeroState } from "./render.js";
import type { ScreeningItem } from "./types.js";

export const REJECT_REASONS = ["vegetation", "building", "roadway", "shadow", "other"] as const;

export function renderScreeningItem(item: ScreeningItem): string {
  const summer = item.summer_image_uri
    ? `<img class="thumb" src="${escapeHtml(item.summer_image_uri)}" alt="summer reference">`
    : `<div class="thumb placeholder">no summer image</div>`;
  const reasons = REJECT_REASONS
    .map((reason) => `<option value="${reason}">${reason}</option>`)
    .join("");
  return `
<article class="screening-item" data-detection-id="${escapeHtml(item.detection_id)}">
  <header>
    <strong>${escapeHtml(item.detection_id)}</strong>
    <span class="score">score ${num(item.score)}</span>
    <span class="capture-date">captured ${escapeHtml(item.capture_date)}</span>
  </header>
  <div class="imagery">
    <img class="thumb" src="${escapeHtml(item.image_uri)}" alt="detection">
    ${summer}
    <img class="thumb" src="${escapeHtml(item.static_map_uri)}" alt="static map">
  </div>
  <div class="actions">
    <button class="accept" data-action="accept">Accept</button>
    <select class="reject-reason" aria-label="reject reason">
      <option value="">reason…</option>${reasons}
    </select>
    <button class="reject" data-action="reject" disabled>Reject</button>
  </div>
</article>`;
}

export function renderScreeningBoard(items: ScreeningItem[]): string {
  if (items.length === 0) {
    return zeroState("Screening queue is empty.");
  }
  return `<section class="screening-board">${items.map(renderScreeningItem).join("")}</section>`;
}

/** A reject needs a reason before the button may enable. */
export function canReject(reason: string): boolean {
  return REJECT_REASONS.includes(reason as (typeof REJECT_REASONS)[number]);
}

export interface DecisionOutcome {
  ok: boolean;
  /** Items removed from the queue optimistically get restored on failure. */
  rolledBack: boolean;
  message: string;
}

/**
 * Queue controller with optimistic removal: the item leaves the local list
 * immediately, and a 409 (someone else decided it first) restores the list
 * and surfaces who-got-there-first messaging.
 */
export class ScreeningBoardController {
  items: ScreeningItem[] = [];

  constructor(private api: ApiClient) {}

  async refresh(): Promise<void> {
    this.items = await this.api.screeningQueue("pending");
  }

  async decide(detectionId: string, decision: "accept" | "reject", reason?: string): Promise<DecisionOutcome> {
    if (decision === "reject" && !canReject(reason ?? "")) {
      return { ok: false, rolledBack: false, message: "Select a reject reason first." };
    }
    const snapshot = this.items;
    this.items = this.items.filter((item) => item.detection_id !== detectionId);
    try {
      await this.api.decideScreening(detectionId, decision, reason);
      return { ok: true, rolledBack: false, message: `${detectionId} ${decision}ed.` };
    } catch (error) {
      this.items = snapshot;
      if (error instanceof ApiError && error.status === 409) {
        await this.refresh();
        return { ok: false, rolledBack: true, message: "Already decided by another screener." };
      }
      if (error instanceof ApiError) {
        return { ok: false, rolledBack: true, message: error.body.message };
      }
      throw error;
    }
  }
}
