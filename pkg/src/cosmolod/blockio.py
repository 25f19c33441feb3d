"""Block and tree-index binary formats.

Block record (magic ``CLB1``, little-endian): a fixed header, contiguous
per-field payload arrays, zero padding to 8-byte alignment, then a CRC-32
(IEEE) over header+payload. Index records are fixed 32-byte entries sorted
by path code.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .geometry import Aabb, path_depth, path_parent, ROOT_PATH

BLOCK_MAGIC = b"CLB1"
BLOCK_VERSION = 1
# magic 4 + version 4 + path 8 + interval 4 + count 4 + boxes 2*48 + reserved 8
BLOCK_HEADER_SIZE = 128
# qpos 2*6 + size 2*4 + weight 2*4 + id 8
POINT_PAYLOAD_SIZE = 36

INDEX_ENTRY_SIZE = 32


@dataclass
class Block:
    """One octree node's representative points for one timestep interval."""

    path: int
    interval: int
    box_start: Aabb
    box_end: Aabb
    qpos_start: np.ndarray  # (m, 3) u16
    qpos_end: np.ndarray  # (m, 3) u16
    size_start: np.ndarray  # f32
    size_end: np.ndarray  # f32
    weight_start: np.ndarray  # f32
    weight_end: np.ndarray  # f32
    ids: np.ndarray  # u64

    def __post_init__(self):
        self.qpos_start = np.ascontiguousarray(self.qpos_start, np.uint16).reshape(-1, 3)
        self.qpos_end = np.ascontiguousarray(self.qpos_end, np.uint16).reshape(-1, 3)
        self.size_start = np.ascontiguousarray(self.size_start, np.float32)
        self.size_end = np.ascontiguousarray(self.size_end, np.float32)
        self.weight_start = np.ascontiguousarray(self.weight_start, np.float32)
        self.weight_end = np.ascontiguousarray(self.weight_end, np.float32)
        self.ids = np.ascontiguousarray(self.ids, np.uint64)
        m = self.count
        for name in ("qpos_end", "size_start", "size_end", "weight_start", "weight_end", "ids"):
            if len(getattr(self, name)) != m:
                raise ValueError(f"block array {name} length != {m}")

    @property
    def count(self) -> int:
        return len(self.qpos_start)


def _pack_box(box: Aabb) -> bytes:
    return struct.pack("<6d", *box.min, *box.max)


def _unpack_box(raw: bytes) -> Aabb:
    vals = struct.unpack("<6d", raw)
    return Aabb(np.array(vals[:3]), np.array(vals[3:]))


def write_block(block: Block) -> bytes:
    """Serialize one block record, CRC included."""
    m = block.count
    header = b"".join(
        (
            BLOCK_MAGIC,
            struct.pack("<IQII", BLOCK_VERSION, block.path, block.interval, m),
            _pack_box(block.box_start),
            _pack_box(block.box_end),
            b"\x00" * 8,
        )
    )
    payload = b"".join(
        (
            block.qpos_start.astype("<u2").tobytes(),
            block.qpos_end.astype("<u2").tobytes(),
            block.size_start.astype("<f4").tobytes(),
            block.size_end.astype("<f4").tobytes(),
            block.weight_start.astype("<f4").tobytes(),
            block.weight_end.astype("<f4").tobytes(),
            block.ids.astype("<u8").tobytes(),
        )
    )
    body = header + payload
    body += b"\x00" * (-len(body) % 8)
    return body + struct.pack("<I", zlib.crc32(body))


def block_byte_length(count: int) -> int:
    body = BLOCK_HEADER_SIZE + POINT_PAYLOAD_SIZE * count
    return body + (-body % 8) + 4


def read_block(blob: bytes, max_count: int | None = None) -> Block:
    """Parse and CRC-verify one block record."""
    if len(blob) < BLOCK_HEADER_SIZE + 4:
        raise FormatError(f"block truncated: {len(blob)} bytes")
    if blob[:4] != BLOCK_MAGIC:
        raise FormatError(f"bad block magic {blob[:4]!r}, expected {BLOCK_MAGIC!r}")
    version, path, interval, m = struct.unpack("<IQII", blob[4:24])
    if version != BLOCK_VERSION:
        raise FormatError(f"unsupported block version {version}")
    if max_count is not None and m > max_count:
        raise FormatError(f"block count {m} exceeds node capacity {max_count}")
    expected = block_byte_length(m)
    if len(blob) != expected:
        raise FormatError(f"block is {len(blob)} bytes, expected {expected} for count {m}")
    (crc_stored,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != crc_stored:
        raise FormatError("block CRC mismatch")
    box_start = _unpack_box(blob[24:72])
    box_end = _unpack_box(blob[72:120])
    off = BLOCK_HEADER_SIZE

    def col(dtype, width, items=1):
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=m * items, offset=off)
        off += width * m * items
        return arr

    return Block(
        path=path,
        interval=interval,
        box_start=box_start,
        box_end=box_end,
        qpos_start=col("<u2", 2, 3).reshape(-1, 3),
        qpos_end=col("<u2", 2, 3).reshape(-1, 3),
        size_start=col("<f4", 4),
        size_end=col("<f4", 4),
        weight_start=col("<f4", 4),
        weight_end=col("<f4", 4),
        ids=col("<u8", 8),
    )


@dataclass(frozen=True)
class IndexEntry:
    """One octree node's directory record within an interval."""

    path: int
    child_mask: int
    count: int
    byte_offset: int
    byte_length: int


@dataclass
class IntervalIndex:
    """Sorted node directory for one timestep interval."""

    entries: list[IndexEntry]
    by_path: dict[int, IndexEntry] = field(init=False, repr=False)

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if paths != sorted(paths):
            raise FormatError("index entries must be sorted by path code")
        self.by_path = {e.path: e for e in self.entries}
        if len(self.by_path) != len(self.entries):
            raise FormatError("duplicate path in index")
        for e in self.entries:
            if e.path != ROOT_PATH:
                parent = self.by_path.get(path_parent(e.path))
                if parent is None:
                    raise FormatError(f"orphan node {e.path}: parent missing")
                if not (parent.child_mask >> (e.path & 7)) & 1:
                    raise FormatError(f"parent of {e.path} does not flag the child")

    def leaves(self) -> list[IndexEntry]:
        return [e for e in self.entries if e.child_mask == 0]

    def children(self, path: int) -> list[IndexEntry]:
        mask = self.by_path[path].child_mask
        return [self.by_path[(path << 3) | o] for o in range(8) if (mask >> o) & 1]


def write_index(index: IntervalIndex) -> bytes:
    """Bare 32-byte records, sorted by path; no file header."""
    return b"".join(
        struct.pack("<QB3xIQI4x", e.path, e.child_mask, e.count, e.byte_offset, e.byte_length)
        for e in index.entries
    )


def read_index(blob: bytes) -> IntervalIndex:
    if len(blob) % INDEX_ENTRY_SIZE != 0:
        raise FormatError(f"index length {len(blob)} is not a multiple of {INDEX_ENTRY_SIZE}")
    entries = []
    for off in range(0, len(blob), INDEX_ENTRY_SIZE):
        path, mask, count, byte_offset, byte_length = struct.unpack(
            "<QB3xIQI4x", blob[off : off + INDEX_ENTRY_SIZE]
        )
        entries.append(IndexEntry(path, mask, count, byte_offset, byte_length))
    return IntervalIndex(entries)
