/**
 * Cut-refresh policy: when to call resolve and, given a resolve response and
 * the current residency, which blocks to fetch in what order.
 */

import { CutEntryJson } from "./protocol.js";
import { blockKey } from "./cache.js";
import { Vec3, vlen, vsub } from "./camera.js";

export const REFRESH_MIN_INTERVAL_MS = 100;
export const CAMERA_MOVE_FRACTION = 1e-3;
export const MAX_CONCURRENT_FETCHES = 8;
export const DEFAULT_TAU = 2.0;
export const DEFAULT_BUDGET = 200_000;

export interface RefreshGateState {
  lastRefreshMs: number;
  lastCameraPos: Vec3 | null;
  lastInterval: number | null;
}

export function initialGateState(): RefreshGateState {
  return { lastRefreshMs: -Infinity, lastCameraPos: null, lastInterval: null };
}

/**
 * Decide whether a resolve call is due. Fires at most once per 100 ms and
 * only when the camera moved beyond 0.1% of the scene diagonal or the
 * timeline crossed an interval boundary.
 */
export function shouldRefresh(
  gate: RefreshGateState,
  nowMs: number,
  cameraPos: Vec3,
  interval: number,
  sceneDiagonal: number,
): boolean {
  if (nowMs - gate.lastRefreshMs < REFRESH_MIN_INTERVAL_MS) {
    return false;
  }
  if (gate.lastCameraPos === null || gate.lastInterval === null) {
    return true;
  }
  if (interval !== gate.lastInterval) {
    return true;
  }
  const moved = vlen(vsub(cameraPos, gate.lastCameraPos));
  return moved > CAMERA_MOVE_FRACTION * sceneDiagonal;
}

export function markRefreshed(
  gate: RefreshGateState,
  nowMs: number,
  cameraPos: Vec3,
  interval: number,
): void {
  gate.lastRefreshMs = nowMs;
  gate.lastCameraPos = [...cameraPos] as Vec3;
  gate.lastInterval = interval;
}

export interface FetchItem {
  interval: number;
  path: number;
  sse: number;
  bytes: number;
}

/**
 * Blocks in the cut but not yet resident, ordered by descending sse
 * (ties broken by ascending path for determinism).
 */
export function planFetches(
  interval: number,
  cut: CutEntryJson[],
  isResident: (key: string) => boolean,
): FetchItem[] {
  const missing = cut.filter((e) => !isResident(blockKey(interval, e.path)));
  return missing
    .map((e) => ({ interval, path: e.path, sse: e.sse, bytes: e.bytes }))
    .sort((a, b) => (b.sse !== a.sse ? b.sse - a.sse : a.path - b.path));
}
