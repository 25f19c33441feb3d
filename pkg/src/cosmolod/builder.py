"""LOD dataset construction.

For each timestep interval the pipeline Morton-sorts the start snapshot,
partitions it into the shallowest octree leaves holding at most
``node_capacity`` points, pairs every point with its id-matched end state in
the next snapshot, then walks the tree bottom-up choosing each internal
node's representatives by weighted subselection from its children's
representatives. Every random choice is keyed by (seed, path, id), so the
output bytes are independent of worker count and run order.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blockio import Block, IndexEntry, IntervalIndex, write_block, write_index
from .errors import FormatError
from .geometry import Aabb, BuildConfig, ROOT_PATH, morton_keys, path_depth, quantize_array
from .hashing import mix, uniform01
from .ingest import ParticleTable, read_table

META_NAME = "meta.json"


@dataclass
class DatasetSummary:
    """Build report: tree shape plus data-quality counters."""

    intervals: int = 0
    node_counts: list = field(default_factory=list)
    depth_histogram: dict = field(default_factory=dict)
    clamped_points: int = 0
    missing_ids: int = 0
    overfull_leaves: int = 0
    bytes_written: int = 0


def subsample(ids: np.ndarray, weights: np.ndarray, n: int, node_seed: int):
    """Weighted subselection without replacement, hash-keyed by particle id.

    Scores are u^(1/w) with u = hash(node_seed, id); the n best survive
    (ties to the smaller id) and survivor weights are rescaled so the total
    weight is exactly conserved. Identity when nothing needs dropping.
    """
    m = len(ids)
    weights = np.asarray(weights, dtype=np.float64)
    if m <= n:
        return np.arange(m), weights.copy()
    u = uniform01(node_seed, ids)
    log_score = np.log(u) / weights
    order = np.lexsort((ids, -log_score))
    sel = np.sort(order[:n])
    corrected = weights[sel] * (weights.sum() / weights[sel].sum())
    return sel, corrected


def pair_timesteps(ids: np.ndarray, table_next: ParticleTable):
    """End-state lookup by persistent id into the next snapshot.

    Returns (pos_end, size_end, mass_end, density_end, missing_count); a
    missing id keeps columns of NaN sentinels replaced by the caller with
    the start state.
    """
    order = np.argsort(table_next.ids)
    sorted_ids = table_next.ids[order]
    idx = np.searchsorted(sorted_ids, ids)
    idx_c = np.minimum(idx, len(sorted_ids) - 1)
    found = sorted_ids[idx_c] == ids
    src = order[idx_c]
    pos_end = table_next.pos[src].copy()
    size_end = table_next.size[src].copy()
    mass_end = table_next.mass[src].copy()
    density_end = table_next.density[src].copy()
    missing = ~found
    return pos_end, size_end, mass_end, density_end, missing


@dataclass
class _Reps:
    """Representatives of one node: start/end states with float64 weights."""

    ids: np.ndarray
    pos0: np.ndarray
    pos1: np.ndarray
    size0: np.ndarray
    size1: np.ndarray
    w0: np.ndarray
    w1: np.ndarray


def _partition(keys_sorted: np.ndarray, n: int, max_depth: int, key_depth: int):
    """Shallowest nodes holding <= n points; returns [(path, lo, hi, child_mask)]."""
    nodes = []
    overfull = 0
    total = len(keys_sorted)
    stack = [(ROOT_PATH, 0, total)]
    while stack:
        path, lo, hi = stack.pop()
        d = path_depth(path)
        if hi - lo <= n or d == max_depth:
            if hi - lo > n:
                overfull += 1
            nodes.append((path, lo, hi, 0))
            continue
        shift = 3 * (key_depth - d - 1)
        probes = np.array(
            [((path << 3) | o) << shift for o in range(8)] + [(path + 1) << (shift + 3)],
            dtype=np.uint64,
        )
        bounds = np.searchsorted(keys_sorted, probes, side="left")
        mask = 0
        for o in range(8):
            if bounds[o + 1] > bounds[o]:
                mask |= 1 << o
                stack.append(((path << 3) | o, int(bounds[o]), int(bounds[o + 1])))
        nodes.append((path, lo, hi, mask))
    return nodes, overfull


def _make_block(path, interval, reps: _Reps, summary_clamp):
    box_start = Aabb.of_points(reps.pos0)
    box_end = Aabb.of_points(reps.pos1)
    q0, c0 = quantize_array(reps.pos0, box_start)
    q1, c1 = quantize_array(reps.pos1, box_end)
    summary_clamp.append(c0 + c1)
    block = Block(
        path=path,
        interval=interval,
        box_start=box_start,
        box_end=box_end,
        qpos_start=q0,
        qpos_end=q1,
        size_start=reps.size0,
        size_end=reps.size1,
        weight_start=reps.w0.astype(np.float32),
        weight_end=reps.w1.astype(np.float32),
        ids=reps.ids,
    )
    return write_block(block)


def _process_nodes(nodes, leaf_reps, interval, cfg, clamp_counts):
    """Bottom-up representative selection and serialization for one subtree.

    `nodes` maps path -> child_mask for every node in the subtree; `leaf_reps`
    holds the raw-point reps of its leaves. Returns (block bytes by path,
    reps of the subtree's top node).
    """
    reps: dict[int, _Reps] = dict(leaf_reps)
    blocks: dict[int, bytes] = {}
    top = min(nodes, key=path_depth)
    for path in sorted(nodes, key=lambda p: (-path_depth(p), p)):
        mask = nodes[path]
        if mask != 0:
            kids = [reps.pop((path << 3) | o) for o in range(8) if (mask >> o) & 1]
            cat = _Reps(*(np.concatenate([getattr(k, f) for k in kids]) for f in
                          ("ids", "pos0", "pos1", "size0", "size1", "w0", "w1")))
            sel, w0 = subsample(cat.ids, cat.w0, cfg.node_capacity, int(mix(cfg.seed, path)))
            w1 = cat.w1[sel] * (cat.w1.sum() / cat.w1[sel].sum()) if len(sel) < len(cat.ids) else cat.w1.copy()
            node_reps = _Reps(cat.ids[sel], cat.pos0[sel], cat.pos1[sel],
                              cat.size0[sel], cat.size1[sel], w0, w1)
        else:
            node_reps = reps[path]
        reps[path] = node_reps
        blocks[path] = _make_block(path, interval, node_reps, clamp_counts)
    return blocks, reps[top]


def build(snapshot_files, cfg: BuildConfig, out_dir, workers: int = 1) -> DatasetSummary:
    """Build the on-disk LOD dataset from >= 2 snapshot files."""
    snapshot_files = [Path(p) for p in snapshot_files]
    if len(snapshot_files) < 2:
        raise FormatError("need at least 2 snapshots")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    # pass 1: global bounding box over every snapshot, plus times and counts
    times, counts = [], []
    root_box = None
    for p in snapshot_files:
        try:
            table = read_table(p)
        except Exception as exc:
            raise FormatError(f"unreadable snapshot {p}: {exc}") from exc
        times.append(table.snapshot_time)
        counts.append(table.count)
        box = Aabb.of_points(table.pos)
        root_box = box if root_box is None else root_box.union(box)

    summary = DatasetSummary(intervals=len(snapshot_files) - 1)
    alpha = cfg.density_exponent
    table_next = None
    for s in range(len(snapshot_files) - 1):
        table = table_next if table_next is not None else read_table(snapshot_files[s])
        table_next = read_table(snapshot_files[s + 1])

        keys = morton_keys(table.pos, root_box, cfg.max_depth)
        order = np.lexsort((table.ids, keys))
        ids = table.ids[order]
        pos0 = table.pos[order]
        size0 = table.size[order]
        w0 = table.mass[order].astype(np.float64) * table.density[order].astype(np.float64) ** alpha

        pos1, size1, mass1, density1, missing = pair_timesteps(ids, table_next)
        w1 = mass1.astype(np.float64) * density1.astype(np.float64) ** alpha
        n_missing = int(missing.sum())
        if n_missing:
            pos1[missing] = pos0[missing]
            size1[missing] = size0[missing]
            w1[missing] = w0[missing]
        summary.missing_ids += n_missing

        nodes, overfull = _partition(keys[order], cfg.node_capacity, cfg.max_depth, cfg.max_depth)
        summary.overfull_leaves += overfull
        node_masks = {path: mask for path, lo, hi, mask in nodes}
        leaf_slices = {path: (lo, hi) for path, lo, hi, mask in nodes if mask == 0}

        def leaf_reps_of(paths):
            out = {}
            for p in paths:
                lo, hi = leaf_slices[p]
                sl = slice(lo, hi)
                out[p] = _Reps(ids[sl], pos0[sl], pos1[sl], size0[sl], size1[sl], w0[sl], w1[sl])
            return out

        clamp_counts: list[int] = []
        blocks: dict[int, bytes] = {}
        if len(node_masks) == 1:
            sub_blocks, _ = _process_nodes(node_masks, leaf_reps_of(leaf_slices), s, cfg, clamp_counts)
            blocks.update(sub_blocks)
        else:
            # independent subtrees under each depth-1 child, then the root
            groups: dict[int, dict[int, int]] = {}
            for path, mask in node_masks.items():
                if path == ROOT_PATH:
                    continue
                d = path_depth(path)
                top = path >> (3 * (d - 1))
                groups.setdefault(top, {})[path] = mask

            def run_group(item):
                top, sub_nodes = item
                sub_leaves = leaf_reps_of([p for p in sub_nodes if sub_nodes[p] == 0])
                return top, _process_nodes(sub_nodes, sub_leaves, s, cfg, clamp_counts)

            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(run_group, sorted(groups.items())))
            else:
                results = [run_group(item) for item in sorted(groups.items())]
            top_reps = {}
            for top, (sub_blocks, reps) in results:
                blocks.update(sub_blocks)
                top_reps[top] = reps
            root_nodes = {ROOT_PATH: node_masks[ROOT_PATH]}
            root_blocks, _ = _process_nodes(
                root_nodes,
                {p: top_reps[p] for p in top_reps},
                s,
                cfg,
                clamp_counts,
            )
            blocks.update(root_blocks)
        summary.clamped_points += int(sum(clamp_counts))

        # concatenate blocks in path order and record the directory
        entries = []
        offset = 0
        data_path = out / f"blocks_{s}.bin"
        with open(data_path, "wb") as fh:
            for path in sorted(blocks):
                blob = blocks[path]
                fh.write(blob)
                entries.append(
                    IndexEntry(path, node_masks[path], _block_count(blob), offset, len(blob))
                )
                offset = offset + len(blob)
        index = IntervalIndex(sorted(entries, key=lambda e: e.path))
        (out / f"index_{s}.bin").write_bytes(write_index(index))
        summary.bytes_written += offset
        summary.node_counts.append(len(entries))
        for e in entries:
            d = path_depth(e.path)
            summary.depth_histogram[d] = summary.depth_histogram.get(d, 0) + 1

    meta = {
        "format": "cosmolod",
        "version": 1,
        "root_box": {"min": list(root_box.min), "max": list(root_box.max)},
        "node_capacity": cfg.node_capacity,
        "alpha": cfg.density_exponent,
        "seed": cfg.seed,
        "max_depth": cfg.max_depth,
        "snapshot_times": times,
        "snapshot_counts": counts,
        "counters": {
            "clamped_points": summary.clamped_points,
            "missing_ids": summary.missing_ids,
            "overfull_leaves": summary.overfull_leaves,
        },
    }
    (out / META_NAME).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return summary


def _block_count(blob: bytes) -> int:
    return struct.unpack("<I", blob[20:24])[0]
