import { describe, expect, it } from "vitest";
import { advanceTime, clampTime, intervalForTime } from "../src/timeline.js";

const TIMES = [0, 1, 2, 3];

describe("intervalForTime", () => {
  it("maps interior times to right-open intervals", () => {
    expect(intervalForTime(TIMES, 0.25)).toEqual({ s: 0, alpha: 0.25 });
    expect(intervalForTime(TIMES, 1.5)).toEqual({ s: 1, alpha: 0.5 });
  });

  it("an exact snapshot time starts the next interval at alpha 0", () => {
    expect(intervalForTime(TIMES, 1)).toEqual({ s: 1, alpha: 0 });
    expect(intervalForTime(TIMES, 2)).toEqual({ s: 2, alpha: 0 });
  });

  it("the last interval is closed", () => {
    expect(intervalForTime(TIMES, 3)).toEqual({ s: 2, alpha: 1 });
  });

  it("rejects times outside the span", () => {
    expect(() => intervalForTime(TIMES, -0.1)).toThrow(/span/);
    expect(() => intervalForTime(TIMES, 3.1)).toThrow(/span/);
  });

  it("handles non-uniform spacing", () => {
    expect(intervalForTime([0, 10, 11], 5)).toEqual({ s: 0, alpha: 0.5 });
    expect(intervalForTime([0, 10, 11], 10.5)).toEqual({ s: 1, alpha: 0.5 });
  });
});

describe("clampTime / advanceTime", () => {
  it("clamps to the dataset span", () => {
    expect(clampTime(TIMES, -5)).toBe(0);
    expect(clampTime(TIMES, 99)).toBe(3);
    expect(clampTime(TIMES, 1.5)).toBe(1.5);
  });

  it("advances by rate * dt and stops at the end", () => {
    expect(advanceTime(TIMES, 1, 2, 0.25)).toBe(1.5);
    expect(advanceTime(TIMES, 2.9, 1, 1)).toBe(3);
    expect(advanceTime(TIMES, 1, -4, 1)).toBe(0);
  });
});
