"""Raw snapshot I/O and deterministic synthetic dataset generation.

The snapshot format is a purpose-built columnar binary (magic ``CPT1``),
little-endian throughout:

* header (40 bytes): magic, version u32 = 1, count u64, snapshot_time f64,
  16 reserved zero bytes
* columns, each contiguous: id u64, pos f64 x3 (xyzxyz...), mass f32,
  density f32, size f32, then a zero u32 pad column for a 48-byte
  per-particle stride.

Synthetic data is a set of Plummer spheres drifting at constant per-cluster
velocities; identical configs produce byte-identical snapshots.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import FormatError
from .geometry import Aabb
from .hashing import mix, uniform01

MAGIC = b"CPT1"
VERSION = 1
HEADER_SIZE = 40
PARTICLE_STRIDE = 48

_STREAM_CENTER = 1
_STREAM_VELOCITY = 2
_STREAM_RADIUS = 3
_STREAM_DIRECTION = 4

DEFAULT_KNN = 32


@dataclass
class ParticleTable:
    """One snapshot: columnar particle data plus its simulation time."""

    ids: np.ndarray  # u64, unique
    pos: np.ndarray  # (n, 3) f64
    mass: np.ndarray  # f32, > 0
    density: np.ndarray  # f32, > 0
    size: np.ndarray  # f32, > 0
    snapshot_time: float = 0.0

    def __post_init__(self):
        self.ids = np.ascontiguousarray(self.ids, dtype=np.uint64)
        self.pos = np.ascontiguousarray(self.pos, dtype=np.float64).reshape(-1, 3)
        self.mass = np.ascontiguousarray(self.mass, dtype=np.float32)
        self.density = np.ascontiguousarray(self.density, dtype=np.float32)
        self.size = np.ascontiguousarray(self.size, dtype=np.float32)
        n = self.count
        for name in ("pos", "mass", "density", "size"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} length != count {n}")
        if len(np.unique(self.ids)) != n:
            raise ValueError("particle ids must be unique within a snapshot")

    @property
    def count(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class SynthConfig:
    """Shape of a synthetic multi-snapshot dataset."""

    n_points: int = 100_000
    n_clusters: int = 8
    n_snapshots: int = 2
    plummer_scale: float = 1.0
    box_size: float = 100.0
    drift_speed: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1 or self.n_clusters < 1:
            raise ValueError("n_points and n_clusters must be positive")
        if self.n_snapshots < 2:
            raise ValueError("n_snapshots must be >= 2")
        if self.plummer_scale <= 0 or self.box_size <= 0:
            raise ValueError("plummer_scale and box_size must be positive")
        if self.drift_speed < 0:
            raise ValueError("drift_speed must be >= 0")


def write_table(table: ParticleTable, destination) -> int:
    """Serialize a table; returns the byte count written."""
    n = table.count
    header = MAGIC + struct.pack("<IQd", VERSION, n, table.snapshot_time) + b"\x00" * 16
    parts = [
        header,
        table.ids.astype("<u8").tobytes(),
        table.pos.astype("<f8").tobytes(),
        table.mass.astype("<f4").tobytes(),
        table.density.astype("<f4").tobytes(),
        table.size.astype("<f4").tobytes(),
        b"\x00" * (4 * n),  # pad column: 48-byte stride
    ]
    blob = b"".join(parts)
    if hasattr(destination, "write"):
        destination.write(blob)
    else:
        Path(destination).write_bytes(blob)
    return len(blob)


def read_table(source) -> ParticleTable:
    """Parse a snapshot written by :func:`write_table`; bit-exact round trip."""
    if hasattr(source, "read"):
        blob = source.read()
    else:
        blob = Path(source).read_bytes()
    if len(blob) < HEADER_SIZE:
        raise FormatError(f"snapshot truncated: {len(blob)} bytes < {HEADER_SIZE} header")
    if blob[:4] != MAGIC:
        raise FormatError(f"bad snapshot magic {blob[:4]!r}, expected {MAGIC!r}")
    version, count, snapshot_time = struct.unpack("<IQd", blob[4:24])
    if version != VERSION:
        raise FormatError(f"unsupported snapshot version {version}")
    expected = HEADER_SIZE + PARTICLE_STRIDE * count
    if len(blob) != expected:
        raise FormatError(f"snapshot payload is {len(blob)} bytes, expected {expected}")
    off = HEADER_SIZE

    def col(dtype, width, items=1):
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count * items, offset=off)
        off += width * count * items
        return arr

    ids = col("<u8", 8)
    pos = col("<f8", 8, 3).reshape(-1, 3)
    mass = col("<f4", 4)
    density = col("<f4", 4)
    size = col("<f4", 4)
    if len(np.unique(ids)) != count:
        raise FormatError("duplicate particle ids in snapshot")
    return ParticleTable(ids, pos, mass, density, size, snapshot_time)


def plummer_radius(u, scale: float = 1.0):
    """Inverse CDF of the Plummer mass profile, r(u) = a*(u^(-2/3) - 1)^(-1/2)."""
    u = np.asarray(u, dtype=np.float64)
    return scale / np.sqrt(u ** (-2.0 / 3.0) - 1.0)


def gen_synthetic(cfg: SynthConfig, knn: int = DEFAULT_KNN) -> list[ParticleTable]:
    """Deterministic drifting-cluster dataset, one table per snapshot.

    Snapshot times are 0, 1, ..., n_snapshots-1. Particle ids are stable
    across snapshots, and all randomness is counter-based, so identical
    configs serialize to identical bytes.
    """
    n, k = cfg.n_points, cfg.n_clusters
    cidx = np.arange(k, dtype=np.uint64)
    centers = np.stack(
        [uniform01(cfg.seed, _STREAM_CENTER, cidx, axis) for axis in range(3)], axis=1
    ) * cfg.box_size
    # isotropic unit drift directions via inverse-CDF of (cos theta, phi)
    vz = 2.0 * uniform01(cfg.seed, _STREAM_VELOCITY, cidx, 0) - 1.0
    vphi = 2.0 * math.pi * uniform01(cfg.seed, _STREAM_VELOCITY, cidx, 1)
    vr = np.sqrt(np.maximum(0.0, 1.0 - vz * vz))
    velocities = cfg.drift_speed * np.stack([vr * np.cos(vphi), vr * np.sin(vphi), vz], axis=1)

    ids = np.arange(n, dtype=np.uint64)
    cluster = (ids % np.uint64(k)).astype(np.int64)
    u = uniform01(cfg.seed, _STREAM_RADIUS, ids)
    radius = plummer_radius(u, cfg.plummer_scale)
    dz = 2.0 * uniform01(cfg.seed, _STREAM_DIRECTION, ids, 0) - 1.0
    dphi = 2.0 * math.pi * uniform01(cfg.seed, _STREAM_DIRECTION, ids, 1)
    dr = np.sqrt(np.maximum(0.0, 1.0 - dz * dz))
    offset = radius[:, None] * np.stack([dr * np.cos(dphi), dr * np.sin(dphi), dz], axis=1)

    mass = np.ones(n, dtype=np.float32)
    box = Aabb(np.zeros(3), np.full(3, float(cfg.box_size)))
    tables = []
    for s in range(cfg.n_snapshots):
        t = float(s)
        pos = centers[cluster] + velocities[cluster] * t + offset
        table = ParticleTable(
            ids, pos, mass, np.ones(n, np.float32), np.ones(n, np.float32), snapshot_time=t
        )
        estimate_density(table, knn, box=box)
        tables.append(table)
    return tables


def estimate_density(table: ParticleTable, k: int = DEFAULT_KNN, box: Aabb | None = None) -> ParticleTable:
    """Fill size (k-th nearest neighbor distance) and density columns in place.

    density_i = k * mass_i / ((4/3) pi size_i^3). With count <= k the size
    falls back to the maximum pairwise distance; a single particle falls
    back to the diagonal of `box` (or of the table's own bounds).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = table.count
    if n < 1:
        raise ValueError("cannot estimate density of an empty table")
    if n == 1:
        if box is None:
            raise ValueError("single-particle density needs an explicit box")
        size = np.array([box.diagonal()], dtype=np.float64)
    elif n <= k:
        from scipy.spatial.distance import pdist

        size = np.full(n, float(pdist(table.pos).max()), dtype=np.float64)
    else:
        tree = cKDTree(table.pos)
        dist, _ = tree.query(table.pos, k=k + 1, workers=-1)
        size = dist[:, k]
    size = np.maximum(size, np.finfo(np.float32).tiny)
    density = k * table.mass.astype(np.float64) / (4.0 / 3.0 * math.pi * size**3)
    table.size = size.astype(np.float32)
    table.density = density.astype(np.float32)
    return table


def write_dataset(tables: list[ParticleTable], out_dir) -> list[Path]:
    """Write snapshots as snap_000.cpt... plus times.json."""
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, table in enumerate(tables):
        p = out / f"snap_{i:03d}.cpt"
        write_table(table, p)
        paths.append(p)
    (out / "times.json").write_text(
        json.dumps([t.snapshot_time for t in tables]) + "\n"
    )
    return paths


def snapshot_paths(in_dir) -> list[Path]:
    paths = sorted(Path(in_dir).glob("snap_*.cpt"))
    if len(paths) < 2:
        raise FormatError(f"need >= 2 snapshots in {in_dir}, found {len(paths)}")
    return paths
