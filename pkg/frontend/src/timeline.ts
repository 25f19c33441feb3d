/** Timeline state: maps simulation time to a snapshot interval and blend factor. */

export interface IntervalPos {
  s: number;
  alpha: number;
}

export function clampTime(times: number[], t: number): number {
  return Math.min(Math.max(t, times[0]), times[times.length - 1]);
}

/**
 * Interval s with t in [t_s, t_{s+1}) — right-open, last interval closed —
 * and the blend factor alpha within it. t must lie in the dataset span.
 */
export function intervalForTime(times: number[], t: number): IntervalPos {
  if (times.length < 2) {
    throw new Error("need at least two snapshot times");
  }
  if (!(times[0] <= t && t <= times[times.length - 1])) {
    throw new Error(`time ${t} outside dataset span [${times[0]}, ${times[times.length - 1]}]`);
  }
  let s = times.length - 2;
  for (let i = 1; i < times.length - 1; i++) {
    if (t < times[i]) {
      s = i - 1;
      break;
    }
  }
  const span = times[s + 1] - times[s];
  const alpha = span === 0 ? 0 : (t - times[s]) / span;
  return { s, alpha };
}

/** Advance playback by wall-clock dt at the given rate, clamped to the span. */
export function advanceTime(times: number[], t: number, rate: number, dt: number): number {
  return clampTime(times, t + rate * dt);
}
