import { describe, expect, it } from "vitest";
import {
  CAMERA_MOVE_FRACTION,
  REFRESH_MIN_INTERVAL_MS,
  initialGateState,
  markRefreshed,
  planFetches,
  shouldRefresh,
} from "../src/cut.js";
import { CutEntryJson } from "../src/protocol.js";

const DIAG = 1000;
const POS: [number, number, number] = [0, 0, 0];

describe("shouldRefresh", () => {
  it("fires on the first call", () => {
    expect(shouldRefresh(initialGateState(), 0, POS, 0, DIAG)).toBe(true);
  });

  it("throttles to one refresh per 100 ms regardless of motion", () => {
    const gate = initialGateState();
    markRefreshed(gate, 1000, POS, 0);
    expect(shouldRefresh(gate, 1000 + REFRESH_MIN_INTERVAL_MS - 1, [500, 0, 0], 1, DIAG)).toBe(
      false,
    );
  });

  it("stays quiet for a stationary camera in the same interval", () => {
    const gate = initialGateState();
    markRefreshed(gate, 0, POS, 0);
    expect(shouldRefresh(gate, 200, POS, 0, DIAG)).toBe(false);
    // Sub-threshold jitter: 0.1% of the diagonal is the line.
    const jitter: [number, number, number] = [0.9 * CAMERA_MOVE_FRACTION * DIAG, 0, 0];
    expect(shouldRefresh(gate, 400, jitter, 0, DIAG)).toBe(false);
  });

  it("fires when the camera moves beyond 0.1% of the scene diagonal", () => {
    const gate = initialGateState();
    markRefreshed(gate, 0, POS, 0);
    const moved: [number, number, number] = [1.1 * CAMERA_MOVE_FRACTION * DIAG, 0, 0];
    expect(shouldRefresh(gate, 200, moved, 0, DIAG)).toBe(true);
  });

  it("fires when t crosses an interval boundary", () => {
    const gate = initialGateState();
    markRefreshed(gate, 0, POS, 0);
    expect(shouldRefresh(gate, 200, POS, 1, DIAG)).toBe(true);
  });
});

describe("planFetches", () => {
  const cut: CutEntryJson[] = [
    { path: 1, count: 10, sse: 50, bytes: 400 },
    { path: 8, count: 10, sse: 120, bytes: 400 },
    { path: 9, count: 10, sse: 120, bytes: 400 },
    { path: 10, count: 10, sse: 7, bytes: 400 },
  ];

  it("orders by descending sse, ties by ascending path", () => {
    const plan = planFetches(0, cut, () => false);
    expect(plan.map((p) => p.path)).toEqual([8, 9, 1, 10]);
  });

  it("skips resident blocks; warm cache plans nothing", () => {
    const resident = new Set(["0/8", "0/1"]);
    const plan = planFetches(0, cut, (k) => resident.has(k));
    expect(plan.map((p) => p.path)).toEqual([9, 10]);
    expect(planFetches(0, cut, () => true)).toEqual([]);
  });

  it("keys residency by interval", () => {
    const resident = new Set(["0/8"]);
    const plan = planFetches(1, cut, (k) => resident.has(k));
    expect(plan.length).toBe(4);
  });
});
