/**
 * Streaming session: owns the active cut, the residency cache, and the fetch
 * pipeline. The server's resolve endpoint is the single source of truth for
 * cut selection; this side only diffs, fetches, and keeps rendering the last
 * good cut while refinements stream in.
 */

import { ApiClient } from "./client.js";
import { Block, CutEntryJson } from "./protocol.js";
import { LruCache, blockKey } from "./cache.js";
import { CameraJson } from "./camera.js";
import {
  DEFAULT_BUDGET,
  DEFAULT_TAU,
  FetchItem,
  MAX_CONCURRENT_FETCHES,
  RefreshGateState,
  initialGateState,
  markRefreshed,
  planFetches,
  shouldRefresh,
} from "./cut.js";

export const DEFAULT_CACHE_BYTES = 512 * 1024 * 1024;

export interface SessionEvent {
  kind: "resolve" | "fetch";
  interval: number;
  path?: number;
}

export interface ActiveCut {
  interval: number;
  entries: CutEntryJson[];
  totalPoints: number;
  budgetExceeded: boolean;
}

export class StreamSession {
  tau = DEFAULT_TAU;
  budget = DEFAULT_BUDGET;
  readonly cache: LruCache<Block>;
  cut: ActiveCut | null = null;
  lastError: string | null = null;
  /** Chronological log of network actions, used by trace-replay tests. */
  readonly log: SessionEvent[] = [];

  private gate: RefreshGateState = initialGateState();
  private queue: FetchItem[] = [];
  private inFlight = new Set<string>();
  private allowed = new Set<string>();

  constructor(
    private readonly client: ApiClient,
    readonly sceneDiagonal: number,
    cacheBytes = DEFAULT_CACHE_BYTES,
  ) {
    this.cache = new LruCache<Block>(cacheBytes);
  }

  /** Forget the refresh gate so the next update resolves unconditionally. */
  invalidate(): void {
    this.gate = initialGateState();
  }

  /**
   * One policy step: call resolve if the gate allows, rebuild the fetch queue
   * from the response, then top up the fetch pipeline. Network failure keeps
   * the previous cut and surfaces `lastError` for the HUD.
   */
  async update(nowMs: number, camera: CameraJson, interval: number): Promise<void> {
    if (shouldRefresh(this.gate, nowMs, camera.position, interval, this.sceneDiagonal)) {
      this.log.push({ kind: "resolve", interval });
      try {
        const resp = await this.client.resolve(interval, camera, this.tau, this.budget);
        markRefreshed(this.gate, nowMs, camera.position, interval);
        this.cut = {
          interval,
          entries: resp.cut,
          totalPoints: resp.total_points,
          budgetExceeded: resp.budget_exceeded,
        };
        this.lastError = null;
        this.allowed = new Set(resp.cut.map((e) => blockKey(interval, e.path)));
        this.queue = planFetches(interval, resp.cut, (k) => this.cache.has(k));
      } catch (err) {
        // Keep the stale gate position so the retry condition persists, but
        // throttle retries to the usual refresh cadence.
        this.gate.lastRefreshMs = nowMs;
        this.lastError = String(err);
      }
    }
    await this.pump();
  }

  /** Blocks of the active cut that are resident right now. */
  renderSet(): Block[] {
    if (this.cut === null) {
      return [];
    }
    const out: Block[] = [];
    for (const e of this.cut.entries) {
      const b = this.cache.get(blockKey(this.cut.interval, e.path));
      if (b !== undefined) {
        out.push(b);
      }
    }
    return out;
  }

  get pendingFetches(): number {
    return this.queue.length + this.inFlight.size;
  }

  private async pump(): Promise<void> {
    const started: Promise<void>[] = [];
    while (this.inFlight.size < MAX_CONCURRENT_FETCHES && this.queue.length > 0) {
      const item = this.queue.shift()!;
      const key = blockKey(item.interval, item.path);
      if (this.cache.has(key) || this.inFlight.has(key) || !this.allowed.has(key)) {
        continue;
      }
      this.inFlight.add(key);
      started.push(this.fetchOne(item, key));
    }
    await Promise.all(started);
  }

  private async fetchOne(item: FetchItem, key: string): Promise<void> {
    this.log.push({ kind: "fetch", interval: item.interval, path: item.path });
    try {
      const block = await this.client.block(item.interval, item.path);
      // A slow response for a block no longer in the cut is dropped, not cached.
      if (this.allowed.has(key)) {
        this.cache.put(key, block, item.bytes);
      }
    } catch (err) {
      this.lastError = String(err);
    } finally {
      this.inFlight.delete(key);
    }
    await this.pump();
  }
}
