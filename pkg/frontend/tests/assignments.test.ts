import { describe, expect, it } from "vitest";

import { groupByVerifier, renderAssignmentBoard, renderPacket } from "../src/assignments.js";
import type { Assignment, PacketManifest } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const assignments = loadFixture<Assignment[]>("assignments_elpc_v01.json");
const completePacket = loadFixture<PacketManifest>("packet_complete.json");
const missingSummer = loadFixture<PacketManifest>("packet_missing_summer.json");

describe("assignment board", () => {
  it("groups by verifier and orders by rank", () => {
    const grouped = groupByVerifier(assignments);
    expect([...grouped.keys()]).toEqual(["V01"]);
    for (const bucket of grouped.values()) {
      const ranks = bucket.map((a) => a.rank ?? 0);
      expect(ranks).toEqual([...ranks].sort((a, b) => a - b));
    }
  });

  it("renders every assignment row with its dispatch date and score", () => {
    const html = renderAssignmentBoard(assignments);
    for (const assignment of assignments.slice(0, 10)) {
      expect(html).toContain(assignment.assignment_id);
      expect(html).toContain(assignment.dispatched_on);
      expect(html).toContain(String(assignment.score));
    }
  });

  it("zero state without assignments", () => {
    expect(renderAssignmentBoard([])).toContain("zero-state");
  });
});

describe("packet rendering", () => {
  it("renders manifest fields verbatim for print", () => {
    const html = renderPacket(completePacket);
    expect(html).toContain(completePacket.title);
    expect(html).toContain("north-arrow");
    expect(html).toContain(completePacket.capture_date);
    expect(html).toContain(String(completePacket.centroid.lat));
    expect(html).toContain(String(completePacket.centroid.lon));
    expect(html).toContain(completePacket.detection_image_uri);
    expect(html).toContain(completePacket.summer_image_uri as string);
    expect(html).toContain(completePacket.static_map_uri);
    expect(html).toContain("print-sheet");
  });

  it("shows an explicit placeholder when the summer image is missing", () => {
    expect(missingSummer.summer_image_uri).toBeNull();
    const html = renderPacket(missingSummer);
    expect(html).toContain("summer image unavailable");
    expect(html).toContain(missingSummer.notes[0] as string);
  });

  it("matches the snapshot", () => {
    expect(renderPacket(missingSummer)).toMatchSnapshot();
  });
});
