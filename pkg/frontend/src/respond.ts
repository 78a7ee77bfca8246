/** Field response form: the client-side validation mirrors the service's
 * response invariants exactly, so anything that submits cleanly here is
 * also accepted there (modulo races).
 */

import { escapeHtml } from "./render.js";
import type { ResponseFormState } from "./types.js";

export function emptyResponseForm(assignmentId: string): ResponseFormState {
  return {
    assignment_id: assignmentId,
    visited_on: "",
    site_visited: true,
    location_visible: false,
    manure_present: null,
    reporter_confidence: null,
    notes: "",
    photo_uris: [],
  };
}

/** Field-level validation errors keyed by field name; empty means valid. */
export function validateResponseForm(state: ResponseFormState): Record<string, string> {
  const errors: Record<string, string> = {};
  if (!state.assignment_id) {
    errors.assignment_id = "Assignment is required.";
  }
  if (!/^\d{4}-\d{2}-\d{2}$/.test(state.visited_on)) {
    errors.visited_on = "Visit date must be YYYY-MM-DD.";
  }
  if (!state.site_visited && state.location_visible) {
    errors.location_visible = "A location cannot be visible without a site visit.";
  }
  if (state.location_visible && state.manure_present === null) {
    errors.manure_present = "Visible location needs a manure assessment.";
  }
  if (!state.location_visible && state.manure_present !== null) {
    errors.manure_present = "Manure assessment requires a visible location.";
  }
  return errors;
}

export function responsePayload(state: ResponseFormState): Record<string, unknown> {
  const payload: Record<string, unknown> = {
    assignment_id: state.assignment_id,
    visited_on: state.visited_on,
    site_visited: state.site_visited,
    location_visible: state.location_visible,
    notes: state.notes,
    photo_uris: state.photo_uris,
  };
  if (state.manure_present !== null) {
    payload.manure_present = state.manure_present;
  }
  if (state.reporter_confidence !== null) {
    payload.reporter_confidence = state.reporter_confidence;
  }
  return payload;
}

/** The manure question appears only after the verifier says the location
 * was visible, matching the survey's skip logic. */
export function renderResponseForm(state: ResponseFormState, errors: Record<string, string> = {}): string {
  const error = (field: string): string =>
    errors[field] ? `<span class="field-error">${escapeHtml(errors[field])}</span>` : "";
  const manureBlock = state.location_visible
    ? `
  <fieldset name="manure_present">
    <legend>Manure present?</legend>
    <label><input type="radio" name="manure" value="yes" ${state.manure_present === true ? "checked" : ""}> yes</label>
    <label><input type="radio" name="manure" value="no" ${state.manure_present === false ? "checked" : ""}> no</label>
    ${error("manure_present")}
  </fieldset>
  <fieldset name="reporter_confidence">
    <legend>Confidence</legend>
    ${(["high", "medium", "low"] as const)
      .map((level) => `<label><input type="radio" name="confidence" value="${level}" ${state.reporter_confidence === level ? "checked" : ""}> ${level}</label>`)
      .join("")}
  </fieldset>`
    : "";
  const valid = Object.keys(validateResponseForm(state)).length === 0;
  return `
<form class="response-form" data-assignment-id="${escapeHtml(state.assignment_id)}">
  <label>Visit date <input name="visited_on" type="date" value="${escapeHtml(state.visited_on)}">${error("visited_on")}</label>
  <label><input name="site_visited" type="checkbox" ${state.site_visited ? "checked" : ""}> site was visited</label>
  <label><input name="location_visible" type="checkbox" ${state.location_visible ? "checked" : ""}> location visible from public road</label>
  ${error("location_visible")}
  ${manureBlock}
  <label>Notes <textarea name="notes">${escapeHtml(state.notes)}</textarea></label>
  <button type="submit" ${valid ? "" : "disabled"}>Submit response</button>
</form>`;
}
