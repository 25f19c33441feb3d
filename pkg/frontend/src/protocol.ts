/**
 * Wire formats: block records (magic CLB1), interval index records, and the
 * JSON shapes served by the /api endpoints. All binary data is little-endian.
 */

export const BLOCK_MAGIC = 0x31424c43; // "CLB1" read as LE u32
export const BLOCK_VERSION = 1;
export const BLOCK_HEADER_SIZE = 128;
export const POINT_PAYLOAD_SIZE = 36;
export const INDEX_ENTRY_SIZE = 32;

export interface Box {
  min: [number, number, number];
  max: [number, number, number];
}

export interface DatasetMeta {
  format: string;
  version: number;
  root_box: Box;
  node_capacity: number;
  alpha: number;
  seed: number;
  max_depth: number;
  snapshot_times: number[];
  snapshot_counts: number[];
  counters: Record<string, number>;
}

export interface CutEntryJson {
  path: number;
  count: number;
  sse: number;
  bytes: number;
}

export interface ResolveResponse {
  cut: CutEntryJson[];
  total_points: number;
  budget_exceeded: boolean;
}

export interface IndexEntry {
  path: number;
  childMask: number;
  count: number;
  byteOffset: number;
  byteLength: number;
}

export interface Block {
  path: number;
  interval: number;
  count: number;
  boxStart: Box;
  boxEnd: Box;
  qposStart: Uint16Array; // (m, 3) packed row-major
  qposEnd: Uint16Array;
  sizeStart: Float32Array;
  sizeEnd: Float32Array;
  weightStart: Float32Array;
  weightEnd: Float32Array;
  ids: BigUint64Array;
}

export class FormatError extends Error {}

// Path codes are u64 on the wire but held as JS numbers; a depth-17 octree
// path is 52 bits, so anything deeper cannot round-trip through a double.
const MAX_SAFE_PATH = BigInt(Number.MAX_SAFE_INTEGER);

function pathToNumber(raw: bigint): number {
  if (raw > MAX_SAFE_PATH) {
    throw new FormatError(`path code ${raw} exceeds 2^53-1`);
  }
  return Number(raw);
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c;
  }
  return table;
})();

/** CRC-32 (IEEE 802.3), matching zlib.crc32. */
export function crc32(data: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function blockByteLength(count: number): number {
  const body = BLOCK_HEADER_SIZE + POINT_PAYLOAD_SIZE * count;
  return body + ((-body % 8) + 8) % 8 + 4;
}

function readBox(view: DataView, offset: number): Box {
  const v: number[] = [];
  for (let i = 0; i < 6; i++) {
    v.push(view.getFloat64(offset + 8 * i, true));
  }
  return { min: [v[0], v[1], v[2]], max: [v[3], v[4], v[5]] };
}

/** Parse and CRC-verify one block record. */
export function parseBlock(buf: ArrayBuffer): Block {
  if (buf.byteLength < BLOCK_HEADER_SIZE + 4) {
    throw new FormatError(`block truncated: ${buf.byteLength} bytes`);
  }
  const view = new DataView(buf);
  if (view.getUint32(0, true) !== BLOCK_MAGIC) {
    throw new FormatError("bad block magic");
  }
  const version = view.getUint32(4, true);
  if (version !== BLOCK_VERSION) {
    throw new FormatError(`unsupported block version ${version}`);
  }
  const path = pathToNumber(view.getBigUint64(8, true));
  const interval = view.getUint32(16, true);
  const count = view.getUint32(20, true);
  const expected = blockByteLength(count);
  if (buf.byteLength !== expected) {
    throw new FormatError(
      `block is ${buf.byteLength} bytes, expected ${expected} for count ${count}`,
    );
  }
  const bytes = new Uint8Array(buf);
  const stored = view.getUint32(buf.byteLength - 4, true);
  if (crc32(bytes.subarray(0, buf.byteLength - 4)) !== stored) {
    throw new FormatError("block CRC mismatch");
  }
  const boxStart = readBox(view, 24);
  const boxEnd = readBox(view, 72);
  let off = BLOCK_HEADER_SIZE;
  const qposStart = new Uint16Array(buf, off, count * 3);
  off += 6 * count;
  const qposEnd = new Uint16Array(buf, off, count * 3);
  off += 6 * count;
  const sizeStart = new Float32Array(buf, off, count);
  off += 4 * count;
  const sizeEnd = new Float32Array(buf, off, count);
  off += 4 * count;
  const weightStart = new Float32Array(buf, off, count);
  off += 4 * count;
  const weightEnd = new Float32Array(buf, off, count);
  off += 4 * count;
  // ids are 8-byte values at an offset that is only 4-byte aligned when count
  // is odd in the 2-byte columns; copy to a fresh aligned buffer.
  const ids = new BigUint64Array(buf.slice(off, off + 8 * count));
  return {
    path,
    interval,
    count,
    boxStart,
    boxEnd,
    qposStart,
    qposEnd,
    sizeStart,
    sizeEnd,
    weightStart,
    weightEnd,
    ids,
  };
}

/** Parse a bare-record interval index (sorted 32-byte entries). */
export function parseIndex(buf: ArrayBuffer): IndexEntry[] {
  if (buf.byteLength % INDEX_ENTRY_SIZE !== 0) {
    throw new FormatError(
      `index length ${buf.byteLength} is not a multiple of ${INDEX_ENTRY_SIZE}`,
    );
  }
  const view = new DataView(buf);
  const entries: IndexEntry[] = [];
  let prev = -1;
  for (let off = 0; off < buf.byteLength; off += INDEX_ENTRY_SIZE) {
    const path = pathToNumber(view.getBigUint64(off, true));
    if (path <= prev) {
      throw new FormatError("index entries must be sorted by path code");
    }
    prev = path;
    entries.push({
      path,
      childMask: view.getUint8(off + 8),
      count: view.getUint32(off + 12, true),
      byteOffset: pathToNumber(view.getBigUint64(off + 16, true)),
      byteLength: view.getUint32(off + 24, true),
    });
  }
  return entries;
}

export function pathDepth(path: number): number {
  let depth = 0;
  let p = path;
  while (p > 1) {
    p = Math.floor(p / 8);
    depth++;
  }
  return depth;
}

/** Axis-aligned box of an octree path inside the root box (half-open cells). */
export function pathBox(path: number, rootBox: Box): Box {
  const octants: number[] = [];
  let p = path;
  while (p > 1) {
    octants.push(p % 8);
    p = Math.floor(p / 8);
  }
  octants.reverse();
  const min = [...rootBox.min] as [number, number, number];
  const max = [...rootBox.max] as [number, number, number];
  for (const o of octants) {
    const bits = [(o >> 2) & 1, (o >> 1) & 1, o & 1];
    for (let a = 0; a < 3; a++) {
      const mid = 0.5 * (min[a] + max[a]);
      if (bits[a]) {
        min[a] = mid;
      } else {
        max[a] = mid;
      }
    }
  }
  return { min, max };
}
