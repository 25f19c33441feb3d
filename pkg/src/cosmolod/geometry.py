"""Geometric and addressing primitives: boxes, octree paths, Morton keys, quantization.

All operations here are pure functions on immutable values. The octant
convention is fixed everywhere as ``4*ix + 2*iy + iz`` where ix/iy/iz select
the upper half along x/y/z. Child boxes follow the half-open rule: shared
faces belong to the upper-coordinate child.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CodecError, RangeError

MAX_DEPTH = 20
ROOT_PATH = 1
QMAX = 65535


def vec3(x: float, y: float, z: float) -> np.ndarray:
    """Build a finite 3-vector."""
    v = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise CodecError(f"non-finite vector {v}")
    return v


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box with min <= max on every axis."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        mn = np.asarray(self.min, dtype=np.float64)
        mx = np.asarray(self.max, dtype=np.float64)
        object.__setattr__(self, "min", mn)
        object.__setattr__(self, "max", mx)
        if mn.shape != (3,) or mx.shape != (3,):
            raise ValueError("Aabb corners must be 3-vectors")
        if not (np.all(np.isfinite(mn)) and np.all(np.isfinite(mx))):
            raise ValueError("Aabb corners must be finite")
        if np.any(mn > mx):
            raise ValueError(f"Aabb min {mn} exceeds max {mx}")

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    def longest_edge(self) -> float:
        return float(np.max(self.extent))

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, p: np.ndarray) -> bool:
        return bool(np.all(p >= self.min) and np.all(p <= self.max))

    def corners(self) -> np.ndarray:
        """All 8 corners, shape (8, 3)."""
        out = np.empty((8, 3))
        for i in range(8):
            for c in range(3):
                out[i, c] = self.max[c] if (i >> (2 - c)) & 1 else self.min[c]
        return out

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))

    @staticmethod
    def of_points(pos: np.ndarray) -> "Aabb":
        pos = np.asarray(pos, dtype=np.float64).reshape(-1, 3)
        if pos.shape[0] == 0:
            raise ValueError("cannot take the Aabb of zero points")
        return Aabb(pos.min(axis=0), pos.max(axis=0))


def child_aabb(parent: Aabb, octant: int) -> Aabb:
    """Half-extent box of one of the 8 children; the children tile the parent."""
    if not 0 <= octant <= 7:
        raise RangeError(f"octant {octant} out of [0,7]")
    mid = parent.center
    sel = np.array([(octant >> 2) & 1, (octant >> 1) & 1, octant & 1], dtype=bool)
    return Aabb(np.where(sel, mid, parent.min), np.where(sel, parent.max, mid))


# --- locational codes -------------------------------------------------------
#
# A path is an integer: a leading 1 bit followed by 3 bits per level,
# most-significant octant digit first. Root = 1, depth <= MAX_DEPTH.


def path_depth(path: int) -> int:
    if path < 1:
        raise RangeError(f"invalid path code {path}")
    bits = path.bit_length() - 1
    if bits % 3 != 0:
        raise RangeError(f"path code {path} has no integer depth")
    return bits // 3


def path_child(path: int, octant: int) -> int:
    if not 0 <= octant <= 7:
        raise RangeError(f"octant {octant} out of [0,7]")
    if path_depth(path) >= MAX_DEPTH:
        raise RangeError(f"path {path} already at max depth {MAX_DEPTH}")
    return (path << 3) | octant


def path_parent(path: int) -> int:
    if path_depth(path) < 1:
        raise RangeError("root path has no parent")
    return path >> 3


def path_octants(path: int) -> list[int]:
    """Octant digits from root down to the node."""
    d = path_depth(path)
    return [(path >> (3 * (d - 1 - i))) & 7 for i in range(d)]


def path_box(root: Aabb, path: int) -> Aabb:
    """Spatial cell of a node, derived by walking its octant digits."""
    box = root
    for o in path_octants(path):
        box = child_aabb(box, o)
    return box


def path_is_ancestor(a: int, b: int) -> bool:
    """True if node a is a strict ancestor of node b."""
    da, db = path_depth(a), path_depth(b)
    return da < db and (b >> (3 * (db - da))) == a


# --- quantization -----------------------------------------------------------


def quantize(p: np.ndarray, box: Aabb) -> tuple[int, int, int]:
    """Map a point to 16-bit box-relative coordinates.

    Points epsilon-outside the box are clamped first; round half away from
    zero; a degenerate axis quantizes to 0.
    """
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise CodecError(f"non-finite point {p}")
    q, _ = quantize_array(p.reshape(1, 3), box)
    return int(q[0, 0]), int(q[0, 1]), int(q[0, 2])


def dequantize(q, box: Aabb) -> np.ndarray:
    """Inverse of :func:`quantize` up to the grid resolution."""
    return dequantize_array(np.asarray(q, dtype=np.uint16).reshape(1, 3), box)[0]


def quantize_array(pos: np.ndarray, box: Aabb) -> tuple[np.ndarray, int]:
    """Vectorized quantization; returns (u16 array (n,3), clamped point count)."""
    pos = np.asarray(pos, dtype=np.float64)
    if not np.all(np.isfinite(pos)):
        raise CodecError("non-finite positions")
    clamped = np.clip(pos, box.min, box.max)
    n_clamped = int(np.count_nonzero(np.any(clamped != pos, axis=1)))
    ext = box.extent
    safe = np.where(ext > 0, ext, 1.0)
    t = (clamped - box.min) / safe * QMAX
    q = np.floor(t + 0.5)  # non-negative, so this is round-half-away-from-zero
    q = np.clip(q, 0, QMAX)
    q = np.where(ext > 0, q, 0.0)
    return q.astype(np.uint16), n_clamped


def dequantize_array(q: np.ndarray, box: Aabb) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return box.min + q / QMAX * box.extent


# --- Morton keys ------------------------------------------------------------


def morton_keys(pos: np.ndarray, root: Aabb, depth: int) -> np.ndarray:
    """Locational code of the depth-`depth` cell containing each point.

    Points outside the root box are clamped first. Sorting by the returned
    key groups any node's points into one contiguous run.
    """
    if not 0 <= depth <= MAX_DEPTH:
        raise RangeError(f"depth {depth} out of [0,{MAX_DEPTH}]")
    pos = np.asarray(pos, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(pos)):
        raise CodecError("non-finite positions")
    n_cells = 1 << depth
    ext = root.extent
    safe = np.where(ext > 0, ext, 1.0)
    t = (np.clip(pos, root.min, root.max) - root.min) / safe
    cell = np.clip(np.floor(t * n_cells), 0, n_cells - 1).astype(np.uint64)
    cx, cy, cz = cell[:, 0], cell[:, 1], cell[:, 2]
    key = np.full(pos.shape[0], 1, dtype=np.uint64)
    one = np.uint64(1)
    for level in range(depth):
        shift = np.uint64(depth - 1 - level)
        digit = (
            (((cx >> shift) & one) << np.uint64(2))
            | (((cy >> shift) & one) << np.uint64(1))
            | ((cz >> shift) & one)
        )
        key = (key << np.uint64(3)) | digit
    return key


def morton_key(p: np.ndarray, root: Aabb, depth: int) -> int:
    return int(morton_keys(np.asarray(p, dtype=np.float64).reshape(1, 3), root, depth)[0])


@dataclass(frozen=True)
class BuildConfig:
    """Knobs of the LOD build: node capacity, density exponent, seed, depth cap."""

    node_capacity: int = 16000
    density_exponent: float = 1.0
    seed: int = 0
    max_depth: int = MAX_DEPTH

    def __post_init__(self):
        if self.node_capacity < 1:
            raise ValueError("node_capacity must be >= 1")
        if not 1 <= self.max_depth <= MAX_DEPTH:
            raise ValueError(f"max_depth must be in [1,{MAX_DEPTH}]")
        if not math.isfinite(self.density_exponent):
            raise ValueError("density_exponent must be finite")
