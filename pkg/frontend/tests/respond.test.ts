import { describe, expect, it } from "vitest";

import {
  emptyResponseForm, renderResponseForm, responsePayload, validateResponseForm,
} from "../src/respond.js";

function filled() {
  const state = emptyResponseForm("A-elpc-D1-V01");
  state.visited_on = "2023-02-10";
  return state;
}

describe("response form validation", () => {
  it("valid when not visible and no assessment", () => {
    expect(validateResponseForm(filled())).toEqual({});
  });

  it("visible location requires a manure assessment", () => {
    const state = filled();
    state.location_visible = true;
    expect(validateResponseForm(state)).toHaveProperty("manure_present");
    state.manure_present = false;
    expect(validateResponseForm(state)).toEqual({});
  });

  it("assessment without visibility is rejected", () => {
    const state = filled();
    state.manure_present = true;
    expect(validateResponseForm(state)).toHaveProperty("manure_present");
  });

  it("no site visit forbids visibility", () => {
    const state = filled();
    state.site_visited = false;
    state.location_visible = true;
    state.manure_present = true;
    expect(validateResponseForm(state)).toHaveProperty("location_visible");
  });

  it("requires an ISO visit date", () => {
    const state = filled();
    state.visited_on = "Feb 10";
    expect(validateResponseForm(state)).toHaveProperty("visited_on");
  });
});

describe("response form rendering", () => {
  it("hides the manure question until the location is visible", () => {
    const state = filled();
    expect(renderResponseForm(state)).not.toContain("Manure present?");
    state.location_visible = true;
    state.manure_present = true;
    expect(renderResponseForm(state)).toContain("Manure present?");
  });

  it("disables submit while invalid", () => {
    const state = filled();
    state.location_visible = true;  // missing assessment
    expect(renderResponseForm(state)).toMatch(/<button type="submit" disabled>/);
    state.manure_present = false;
    expect(renderResponseForm(state)).toMatch(/<button type="submit" >/);
  });

  it("shows field-level errors in place", () => {
    const state = filled();
    state.location_visible = true;
    const html = renderResponseForm(state, validateResponseForm(state));
    expect(html).toContain("field-error");
    expect(html).toContain("manure assessment");
  });
});

describe("payload construction", () => {
  it("omits absent optionals exactly like the API expects", () => {
    const state = filled();
    const payload = responsePayload(state);
    expect(payload).not.toHaveProperty("manure_present");
    expect(payload).not.toHaveProperty("reporter_confidence");
    expect(payload.site_visited).toBe(true);
  });

  it("carries the assessment and confidence when visible", () => {
    const state = filled();
    state.location_visible = true;
    state.manure_present = true;
    state.reporter_confidence = "high";
    const payload = responsePayload(state);
    expect(payload.manure_present).toBe(true);
    expect(payload.reporter_confidence).toBe("high");
  });
});
