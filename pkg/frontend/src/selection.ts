/**
 * Particle-id selection: parsing pasted/uploaded id lists and unpacking the
 * per-block flag bitmasks served by the selection endpoint.
 */

export const SELECTION_CAP = 1_048_576;

export class SelectionParseError extends Error {}

/**
 * Parse a decimal id list separated by commas and/or whitespace, e.g.
 * "5, 9\n12" -> [5, 9, 12]. Duplicates collapse; order is ascending.
 */
export function parseIdList(text: string): number[] {
  const ids = new Set<number>();
  for (const token of text.split(/[\s,]+/)) {
    if (token === "") {
      continue;
    }
    if (!/^\d+$/.test(token)) {
      throw new SelectionParseError(`not a particle id: "${token}"`);
    }
    const id = Number(token);
    if (!Number.isSafeInteger(id)) {
      throw new SelectionParseError(`id out of range: "${token}"`);
    }
    ids.add(id);
  }
  return [...ids].sort((a, b) => a - b);
}

/**
 * Unpack a little-bit-order flags bitmask (bit i = point i selected) into
 * one byte per point for use as a vertex attribute.
 */
export function unpackFlags(mask: Uint8Array, count: number): Uint8Array {
  if (mask.length < Math.ceil(count / 8)) {
    throw new Error(`bitmask of ${mask.length} bytes too short for ${count} points`);
  }
  const flags = new Uint8Array(count);
  for (let i = 0; i < count; i++) {
    flags[i] = (mask[i >> 3] >> (i & 7)) & 1;
  }
  return flags;
}
