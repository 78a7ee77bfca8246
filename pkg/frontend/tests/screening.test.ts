import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import {
  ScreeningBoardController, canReject, renderScreeningBoard, renderScreeningItem,
} from "../src/screening.js";
import type { ScreeningItem } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const queue = loadFixture<ScreeningItem[]>("screening_pending.json");

describe("screening board rendering", () => {
  it("keeps the service ordering (score descending)", () => {
    const scores = queue.map((item) => item.score);
    const sorted = [...scores].sort((a, b) => b - a);
    expect(scores).toEqual(sorted);
    const html = renderScreeningBoard(queue);
    const positions = queue.map((item) => html.indexOf(item.detection_id));
    expect(positions).toEqual([...positions].sort((a, b) => a - b));
  });

  it("shows score, capture date, and all three image slots", () => {
    const item = queue[0]!;
    const html = renderScreeningItem(item);
    expect(html).toContain(`score ${item.score}`);
    expect(html).toContain(item.capture_date);
    expect(html).toContain(item.image_uri);
    expect(html).toContain(item.static_map_uri);
  });

  it("marks a missing summer image with a placeholder", () => {
    const item = { ...queue[0]!, summer_image_uri: null };
    expect(renderScreeningItem(item)).toContain("no summer image");
  });

  it("renders the reject button disabled until a reason exists", () => {
    const html = renderScreeningItem(queue[0]!);
    expect(html).toMatch(/<button class="reject"[^>]*disabled>/);
    expect(canReject("")).toBe(false);
    expect(canReject("vegetation")).toBe(true);
    expect(canReject("because")).toBe(false);
  });

  it("zero state on an empty queue", () => {
    expect(renderScreeningBoard([])).toContain("zero-state");
  });
});

class FakeApi {
  queue: ScreeningItem[];
  decided = new Map<string, string>();

  constructor(items: ScreeningItem[]) {
    this.queue = [...items];
  }

  async screeningQueue(): Promise<ScreeningItem[]> {
    return this.queue.filter((item) => !this.decided.has(item.detection_id));
  }

  async decideScreening(detectionId: string, decision: string): Promise<unknown> {
    if (this.decided.has(detectionId)) {
      throw new ApiError(409, {
        code: "not_pending",
        field: "detection_id",
        message: `detection ${detectionId} already decided`,
      });
    }
    this.decided.set(detectionId, decision);
    return { detection_id: detectionId, status: `${decision}ed` };
  }
}

describe("screening controller", () => {
  it("optimistically removes the item and keeps it removed on success", async () => {
    const fake = new FakeApi(queue.slice(0, 3));
    const board = new ScreeningBoardController(fake as unknown as ApiClient);
    await board.refresh();
    const target = board.items[0]!.detection_id;
    const outcome = await board.decide(target, "accept");
    expect(outcome.ok).toBe(true);
    expect(board.items.map((i) => i.detection_id)).not.toContain(target);
  });

  it("blocks reject without a reason before any network call", async () => {
    const fake = new FakeApi(queue.slice(0, 3));
    const board = new ScreeningBoardController(fake as unknown as ApiClient);
    await board.refresh();
    const target = board.items[0]!.detection_id;
    const outcome = await board.decide(target, "reject");
    expect(outcome.ok).toBe(false);
    expect(outcome.message).toContain("reason");
    expect(fake.decided.size).toBe(0);
    expect(board.items).toHaveLength(3);
  });

  it("rolls back and reloads when another screener got there first", async () => {
    const fake = new FakeApi(queue.slice(0, 3));
    const board = new ScreeningBoardController(fake as unknown as ApiClient);
    await board.refresh();
    const target = board.items[1]!.detection_id;
    fake.decided.set(target, "accept");  // someone else decided it
    const outcome = await board.decide(target, "reject", "vegetation");
    expect(outcome.ok).toBe(false);
    expect(outcome.rolledBack).toBe(true);
    expect(outcome.message).toContain("another screener");
    expect(board.items.map((i) => i.detection_id)).not.toContain(target);
  });
});
