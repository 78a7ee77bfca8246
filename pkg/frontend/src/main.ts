/** Browser wiring: tabs, data loading, and event delegation over the pure
 * renderers. Service base URL comes from ?service= or defaults to the
 * local dev port.
 */

import { ApiClient, ApiError } from "./api.js";
import { renderAssignmentBoard, renderPacket } from "./assignments.js";
import {
  renderAgreement, renderCompliance, renderConfirmation, renderCrosstab,
  renderGroupComparison, renderIncidentals, renderLift, renderProcess,
} from "./dashboards.js";
import { emptyResponseForm, renderResponseForm, responsePayload, validateResponseForm } from "./respond.js";
import { ScreeningBoardController, canReject, renderScreeningBoard } from "./screening.js";
import type { ResponseFormState } from "./types.js";

const DEFAULT_SERVICE = "http://127.0.0.1:8420";
const TOTAL_IMAGES_REVIEWED = 40995;

function serviceBaseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? DEFAULT_SERVICE;
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function flash(message: string, isError = false): void {
  const banner = el("flash");
  banner.textContent = message;
  banner.className = isError ? "flash error" : "flash";
  banner.hidden = false;
  window.setTimeout(() => { banner.hidden = true; }, 4000);
}

async function loadScreening(api: ApiClient, board: ScreeningBoardController): Promise<void> {
  await board.refresh();
  el("screening").innerHTML = renderScreeningBoard(board.items);
}

function wireScreening(api: ApiClient, board: ScreeningBoardController): void {
  el("screening").addEventListener("change", (event) => {
    const select = event.target as HTMLSelectElement;
    if (!select.classList.contains("reject-reason")) return;
    const article = select.closest(".screening-item") as HTMLElement;
    const button = article.querySelector("button.reject") as HTMLButtonElement;
    button.disabled = !canReject(select.value);
  });
  el("screening").addEventListener("click", (event) => {
    const button = event.target as HTMLButtonElement;
    const action = button.dataset.action;
    if (!action) return;
    const article = button.closest(".screening-item") as HTMLElement;
    const detectionId = article.dataset.detectionId as string;
    const reason = (article.querySelector(".reject-reason") as HTMLSelectElement | null)?.value;
    void board
      .decide(detectionId, action as "accept" | "reject", reason || undefined)
      .then((outcome) => {
        el("screening").innerHTML = renderScreeningBoard(board.items);
        flash(outcome.message, !outcome.ok);
      });
  });
}

async function loadAssignments(api: ApiClient): Promise<void> {
  const org = (el("assignment-org") as HTMLSelectElement).value;
  const assignments = await api.assignments({ org });
  el("assignments").innerHTML = renderAssignmentBoard(assignments);
}

function wireAssignments(api: ApiClient): void {
  el("assignment-org").addEventListener("change", () => void loadAssignments(api));
  el("assignments").addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest("tr");
    if (!row || !row.parentElement?.matches("tbody")) return;
    const assignmentId = row.cells[0]?.textContent ?? "";
    if (!assignmentId.startsWith("A-")) return;
    void api.packet(assignmentId).then((packet) => {
      el("packet").innerHTML = renderPacket(packet);
    });
    const form = emptyResponseForm(assignmentId);
    renderAndWireResponseForm(api, form);
  });
}

function renderAndWireResponseForm(api: ApiClient, state: ResponseFormState): void {
  const container = el("response-form");
  const draw = (errors: Record<string, string> = {}): void => {
    container.innerHTML = renderResponseForm(state, errors);
    const form = container.querySelector("form") as HTMLFormElement;
    form.addEventListener("change", () => {
      state.visited_on = (form.querySelector("[name=visited_on]") as HTMLInputElement).value;
      state.site_visited = (form.querySelector("[name=site_visited]") as HTMLInputElement).checked;
      state.location_visible = (form.querySelector("[name=location_visible]") as HTMLInputElement).checked;
      if (!state.location_visible) {
        state.manure_present = null;
        state.reporter_confidence = null;
      } else {
        const manure = form.querySelector("[name=manure]:checked") as HTMLInputElement | null;
        state.manure_present = manure ? manure.value === "yes" : null;
        const confidence = form.querySelector("[name=confidence]:checked") as HTMLInputElement | null;
        state.reporter_confidence = (confidence?.value ?? null) as ResponseFormState["reporter_confidence"];
      }
      state.notes = (form.querySelector("[name=notes]") as HTMLTextAreaElement).value;
      draw(validateResponseForm(state));
    });
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const errors = validateResponseForm(state);
      if (Object.keys(errors).length > 0) {
        draw(errors);
        return;
      }
      void api
        .submitResponse(responsePayload(state))
        .then(() => flash(`Response filed for ${state.assignment_id}.`))
        .catch((error: unknown) => {
          if (error instanceof ApiError) {
            flash(error.body.message, true);
          } else {
            throw error;
          }
        });
    });
  };
  draw();
}

async function loadDashboards(api: ApiClient): Promise<void> {
  const [confElpc, confWdnr, screened, compliance, process, agreement, crosstab, incidentals, groups] =
    await Promise.all([
      api.reportConfirmation("elpc"),
      api.reportConfirmation("wdnr"),
      api.reportConfirmation("wdnr", true),
      api.reportCompliance(),
      api.reportProcess("elpc"),
      api.reportAgreement(),
      api.reportCrosstab(),
      api.reportIncidentals(),
      api.reportGroupComparison(),
    ]);
  const lift = await api.reportLift(TOTAL_IMAGES_REVIEWED).catch(() => null);
  el("dashboards").innerHTML = [
    renderConfirmation(confElpc),
    renderConfirmation(confWdnr),
    renderConfirmation(screened),
    renderCompliance(compliance),
    renderProcess(process),
    renderAgreement(agreement),
    renderCrosstab(crosstab),
    renderIncidentals(incidentals),
    renderGroupComparison(groups),
    lift ? renderLift(lift) : "",
  ].join("<hr>");
}

function wireTabs(): void {
  document.querySelectorAll<HTMLButtonElement>("nav button").forEach((button) => {
    button.addEventListener("click", () => {
      document.querySelectorAll("main > section").forEach((section) => {
        (section as HTMLElement).hidden = section.id !== button.dataset.tab;
      });
      document.querySelectorAll("nav button").forEach((b) => b.classList.remove("active"));
      button.classList.add("active");
    });
  });
}

export function start(): void {
  const api = new ApiClient(serviceBaseUrl());
  const board = new ScreeningBoardController(api);
  wireTabs();
  wireScreening(api, board);
  wireAssignments(api);
  void loadScreening(api, board);
  void loadAssignments(api);
  void loadDashboards(api);
  el("reload").addEventListener("click", () => {
    void loadScreening(api, board);
    void loadAssignments(api);
    void loadDashboards(api);
  });
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  start();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
