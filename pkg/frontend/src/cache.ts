/**
 * Byte-capped LRU residency cache for decoded blocks. Keys are
 * "interval/path" strings; eviction touches least-recently-used first and the
 * byte bound holds at all times.
 */

export class LruCache<V> {
  private map = new Map<string, { value: V; bytes: number }>();
  private bytes = 0;

  constructor(readonly capacityBytes: number) {
    if (capacityBytes <= 0) {
      throw new Error("cache capacity must be positive");
    }
  }

  get sizeBytes(): number {
    return this.bytes;
  }

  get count(): number {
    return this.map.size;
  }

  has(key: string): boolean {
    return this.map.has(key);
  }

  /** Look up and mark as most recently used. */
  get(key: string): V | undefined {
    const slot = this.map.get(key);
    if (slot === undefined) {
      return undefined;
    }
    this.map.delete(key);
    this.map.set(key, slot);
    return slot.value;
  }

  /** Insert, evicting LRU entries until the byte bound holds. */
  put(key: string, value: V, bytes: number): void {
    if (bytes > this.capacityBytes) {
      throw new Error(`item of ${bytes} bytes exceeds cache capacity ${this.capacityBytes}`);
    }
    const old = this.map.get(key);
    if (old !== undefined) {
      this.map.delete(key);
      this.bytes -= old.bytes;
    }
    while (this.bytes + bytes > this.capacityBytes) {
      const lru = this.map.keys().next().value as string;
      this.delete(lru);
    }
    this.map.set(key, { value, bytes });
    this.bytes += bytes;
  }

  delete(key: string): boolean {
    const slot = this.map.get(key);
    if (slot === undefined) {
      return false;
    }
    this.map.delete(key);
    this.bytes -= slot.bytes;
    return true;
  }

  keys(): string[] {
    return [...this.map.keys()];
  }
}

export function blockKey(interval: number, path: number): string {
  return `${interval}/${path}`;
}
