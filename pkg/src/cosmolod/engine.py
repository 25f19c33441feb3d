"""View-dependent decision core: frustum tests, screen-space error, budgeted
cut selection, selection bitmasks, and the client cache policy.

Everything here is pure except :func:`cache_touch`, which mutates a
single-owner value.
"""

from __future__ import annotations

import heapq
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .blockio import IntervalIndex
from .errors import CacheError
from .geometry import Aabb, ROOT_PATH, child_aabb, path_is_ancestor

SELECTION_CAP = 1_048_576


@dataclass(frozen=True)
class Camera:
    """Pinhole view description."""

    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov_y: float = 60.0
    width: int = 1024
    height: int = 768
    near: float = 0.01

    def __post_init__(self):
        for name in ("position", "look_at", "up"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if np.allclose(self.position, self.look_at):
            raise ValueError("camera position equals look_at")
        if not 0 < self.fov_y < 180:
            raise ValueError("fov_y must be in (0, 180)")
        if self.width < 1 or self.height < 1:
            raise ValueError("viewport must be at least 1x1 pixel")
        if self.near <= 0:
            raise ValueError("near must be positive")
        fwd = self.look_at - self.position
        if np.linalg.norm(np.cross(fwd, self.up)) == 0:
            raise ValueError("up is parallel to the view direction")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(right, up, forward) orthonormal camera basis."""
        fwd = self.look_at - self.position
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        right = right / np.linalg.norm(right)
        up = np.cross(right, fwd)
        return right, up, fwd

    @property
    def focal_px(self) -> float:
        return self.height / (2.0 * math.tan(math.radians(self.fov_y) / 2.0))

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(
            position=np.asarray(d["position"], dtype=np.float64),
            look_at=np.asarray(d["look_at"], dtype=np.float64),
            up=np.asarray(d.get("up", [0.0, 1.0, 0.0]), dtype=np.float64),
            fov_y=float(d.get("fov_y", 60.0)),
            width=int(d.get("width", 1024)),
            height=int(d.get("height", 768)),
            near=float(d.get("near", 0.01)),
        )


def screen_space_error(box: Aabb, cam: Camera) -> float:
    """Projected size of the box's longest edge at its nearest point, in pixels."""
    nearest = np.clip(cam.position, box.min, box.max)
    d = float(np.linalg.norm(nearest - cam.position))
    if d == 0.0:
        return math.inf
    return box.longest_edge() / d * cam.focal_px


OUTSIDE, INTERSECTING, INSIDE = "outside", "intersecting", "inside"


def _frustum_planes(cam: Camera) -> list[tuple[np.ndarray, float]]:
    """Five inward-facing planes (normal n, offset d): inside iff n.p + d >= 0."""
    right, up, fwd = cam.basis()
    tan_v = math.tan(math.radians(cam.fov_y) / 2.0)
    tan_h = tan_v * cam.width / cam.height
    normals = [
        fwd,
        right + tan_h * fwd,
        -right + tan_h * fwd,
        up + tan_v * fwd,
        -up + tan_v * fwd,
    ]
    planes = []
    for i, n in enumerate(normals):
        n = n / np.linalg.norm(n)
        d = -float(n @ cam.position)
        if i == 0:
            d -= cam.near  # near plane sits `near` in front of the eye
        planes.append((n, d))
    return planes


def frustum_classify(box: Aabb, cam: Camera) -> str:
    """Conservative box test against near + 4 side planes (no far plane)."""
    fully_inside = True
    for n, d in _frustum_planes(cam):
        p_vertex = np.where(n >= 0, box.max, box.min)
        if float(n @ p_vertex) + d < 0:
            return OUTSIDE
        n_vertex = np.where(n >= 0, box.min, box.max)
        if float(n @ n_vertex) + d < 0:
            fully_inside = False
    return INSIDE if fully_inside else INTERSECTING


@dataclass(frozen=True)
class CutEntry:
    path: int
    interval: int
    count: int
    sse: float


@dataclass
class Cut:
    """Antichain of nodes drawn for one frame, ordered by refinement priority."""

    entries: list[CutEntry]
    total_points: int
    budget_exceeded: bool = False


def select_cut(
    index: IntervalIndex,
    interval: int,
    root_box: Aabb,
    cam: Camera,
    tau: float,
    budget: int,
) -> Cut:
    """Greedy view-dependent refinement down to `tau` pixels under a point budget.

    Nodes outside the frustum cost nothing and are dropped; a node whose
    children would blow the budget is kept as-is while smaller nodes may
    still refine.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    root = index.by_path.get(ROOT_PATH)
    if root is None:
        return Cut([], 0)
    if frustum_classify(root_box, cam) == OUTSIDE:
        return Cut([], 0)
    if budget < root.count:
        sse = screen_space_error(root_box, cam)
        return Cut([CutEntry(ROOT_PATH, interval, root.count, sse)], root.count, True)

    # heap of un-finalized nodes; max sse first, ties to the smaller path
    root_sse = screen_space_error(root_box, cam)
    heap = [(-root_sse, ROOT_PATH, root_box, root.count)]
    finalized: list[CutEntry] = []
    total = root.count
    while heap:
        neg_sse, path, box, count, = heapq.heappop(heap)
        sse = -neg_sse
        entry = index.by_path[path]
        if sse <= tau or entry.child_mask == 0:
            finalized.append(CutEntry(path, interval, count, sse))
            continue
        kids = []
        for o in range(8):
            if not (entry.child_mask >> o) & 1:
                continue
            cbox = child_aabb(box, o)
            if frustum_classify(cbox, cam) == OUTSIDE:
                continue
            cpath = (path << 3) | o
            kids.append((cpath, cbox, index.by_path[cpath].count))
        new_total = total - count + sum(k[2] for k in kids)
        if new_total > budget:
            finalized.append(CutEntry(path, interval, count, sse))
            continue
        total = new_total
        for cpath, cbox, ccount in kids:
            heapq.heappush(heap, (-screen_space_error(cbox, cam), cpath, cbox, ccount))

    finalized.sort(key=lambda e: (-e.sse, e.path))
    return Cut(finalized, sum(e.count for e in finalized))


def all_leaves_cut(index: IntervalIndex, interval: int, root_box: Aabb) -> Cut:
    """The exact cut: every leaf, full detail (no camera involved)."""
    entries = [CutEntry(e.path, interval, e.count, math.inf) for e in index.leaves()]
    entries.sort(key=lambda e: e.path)
    return Cut(entries, sum(e.count for e in entries))


def cut_is_antichain(cut: Cut) -> bool:
    paths = [e.path for e in cut.entries]
    for i, a in enumerate(paths):
        for b in paths[i + 1 :]:
            if path_is_ancestor(a, b) or path_is_ancestor(b, a):
                return False
    return True


# --- selection sets ----------------------------------------------------------


def make_selection(ids) -> np.ndarray:
    """Sorted unique id set, capped at SELECTION_CAP entries after input check."""
    ids = np.asarray(ids, dtype=np.uint64)
    if len(ids) > SELECTION_CAP:
        raise ValueError(f"selection of {len(ids)} ids exceeds the cap of {SELECTION_CAP}")
    return np.unique(ids)


def selection_flags(block_ids: np.ndarray, selection: np.ndarray) -> bytes:
    """Membership bitmask, bit i (LSB-first within each byte) = point i selected."""
    block_ids = np.asarray(block_ids, dtype=np.uint64)
    member = np.isin(block_ids, selection)
    return np.packbits(member, bitorder="little").tobytes()


# --- client cache policy ------------------------------------------------------


@dataclass
class CacheState:
    """LRU residency tracker; values are byte sizes."""

    capacity_bytes: int
    resident: OrderedDict = field(default_factory=OrderedDict)

    @property
    def used_bytes(self) -> int:
        return sum(self.resident.values())


def cache_touch(state: CacheState, key, nbytes: int) -> list:
    """Make `key` resident; returns the keys evicted to stay within capacity."""
    if nbytes > state.capacity_bytes:
        raise CacheError(f"item of {nbytes} bytes exceeds capacity {state.capacity_bytes}")
    if key in state.resident:
        state.resident.pop(key)
    state.resident[key] = nbytes
    evicted = []
    while state.used_bytes > state.capacity_bytes:
        old_key, _ = state.resident.popitem(last=False)
        evicted.append(old_key)
    return evicted
