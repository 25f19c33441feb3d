import hashlib
import io
from pathlib import Path

import numpy as np
import pytest

from cosmolod.blockio import (
    BLOCK_HEADER_SIZE,
    POINT_PAYLOAD_SIZE,
    Block,
    IndexEntry,
    IntervalIndex,
    block_byte_length,
    read_block,
    read_index,
    write_block,
    write_index,
)
from cosmolod.builder import build, pair_timesteps, subsample
from cosmolod.dataset import Dataset
from cosmolod.errors import FormatError
from cosmolod.geometry import Aabb, BuildConfig, ROOT_PATH, dequantize_array, morton_keys, path_depth
from cosmolod.ingest import ParticleTable, SynthConfig, gen_synthetic, write_dataset, snapshot_paths


def make_block(m=3, path=1, interval=0, seed=0):
    rng = np.random.default_rng(seed)
    return Block(
        path=path,
        interval=interval,
        box_start=Aabb(np.zeros(3), np.ones(3)),
        box_end=Aabb(np.zeros(3), np.full(3, 2.0)),
        qpos_start=rng.integers(0, 65536, (m, 3)).astype(np.uint16),
        qpos_end=rng.integers(0, 65536, (m, 3)).astype(np.uint16),
        size_start=rng.uniform(0.1, 1, m).astype(np.float32),
        size_end=rng.uniform(0.1, 1, m).astype(np.float32),
        weight_start=rng.uniform(0.1, 1, m).astype(np.float32),
        weight_end=rng.uniform(0.1, 1, m).astype(np.float32),
        ids=np.arange(m, dtype=np.uint64),
    )


class TestBlockIO:
    def test_field_width_sums(self):
        # header: magic+version+path+interval+count + 2 boxes + reserved
        assert 4 + 4 + 8 + 4 + 4 + 48 + 48 + 8 == BLOCK_HEADER_SIZE
        # payload: 2 qpos + 2 sizes + 2 weights + id
        assert 6 + 6 + 4 + 4 + 4 + 4 + 8 == POINT_PAYLOAD_SIZE

    def test_empty_block_round_trips(self):
        blob = write_block(make_block(0))
        assert len(blob) == BLOCK_HEADER_SIZE + 4
        back = read_block(blob)
        assert back.count == 0

    def test_single_point_length(self):
        blob = write_block(make_block(1))
        body = BLOCK_HEADER_SIZE + POINT_PAYLOAD_SIZE
        expected = body + (-body % 8) + 4
        assert len(blob) == expected == block_byte_length(1)

    def test_round_trip_bit_exact(self):
        block = make_block(17)
        blob = write_block(block)
        back = read_block(blob)
        assert back.path == block.path and back.interval == block.interval
        for f in ("qpos_start", "qpos_end", "size_start", "size_end",
                  "weight_start", "weight_end", "ids"):
            assert np.array_equal(getattr(back, f), getattr(block, f))
        assert write_block(back) == blob

    def test_flipped_bit_fails_crc(self):
        blob = bytearray(write_block(make_block(4)))
        blob[BLOCK_HEADER_SIZE + 5] ^= 0x01
        with pytest.raises(FormatError, match="CRC"):
            read_block(bytes(blob))

    def test_count_over_capacity_rejected(self):
        blob = write_block(make_block(10))
        with pytest.raises(FormatError, match="capacity"):
            read_block(blob, max_count=5)

    def test_bad_magic(self):
        blob = b"NOPE" + write_block(make_block(1))[4:]
        with pytest.raises(FormatError, match="magic"):
            read_block(blob)


class TestIndexIO:
    def test_single_root_round_trips(self):
        idx = IntervalIndex([IndexEntry(1, 0, 100, 0, 3700)])
        assert read_index(write_index(idx)).entries == idx.entries

    def test_orphan_rejected(self):
        with pytest.raises(FormatError, match="orphan"):
            IntervalIndex([IndexEntry(1, 0x02, 10, 0, 100), IndexEntry(80, 0, 5, 100, 50)])

    def test_nine_node_full_mask(self):
        entries = [IndexEntry(1, 0xFF, 80, 0, 100)]
        entries += [IndexEntry(8 + o, 0, 10, 100 * (o + 1), 100) for o in range(8)]
        idx = IntervalIndex(entries)
        assert idx.by_path[1].child_mask == 0xFF
        assert len(idx.leaves()) == 8
        assert read_index(write_index(idx)).entries == entries

    def test_unsorted_rejected(self):
        with pytest.raises(FormatError, match="sorted"):
            IntervalIndex([IndexEntry(9, 0, 1, 0, 10), IndexEntry(1, 0x02, 1, 10, 10)])


class TestSubsample:
    def test_identity_when_fits(self):
        ids = np.arange(10, dtype=np.uint64)
        w = np.full(10, 2.0)
        sel, corrected = subsample(ids, w, 10, node_seed=1)
        assert np.array_equal(sel, np.arange(10))
        assert np.array_equal(corrected, w)

    def test_rescale_conserves_total(self):
        ids = np.arange(4, dtype=np.uint64)
        w = np.ones(4)
        sel, corrected = subsample(ids, w, 2, node_seed=42)
        assert len(sel) == 2
        assert np.allclose(corrected, 2.0)
        assert corrected.sum() == pytest.approx(4.0)

    def test_inclusion_odds_proportional_to_weight(self):
        # Monte Carlo: 1e4 points, half weight 2 / half weight 1, keep 1e3,
        # over 1e3 node seeds the heavy/light inclusion ratio approaches 2.
        m, n, trials = 10_000, 1_000, 1_000
        ids = np.arange(m, dtype=np.uint64)
        w = np.where(ids < m // 2, 2.0, 1.0)
        heavy = np.zeros(trials)
        light = np.zeros(trials)
        for t in range(trials):
            sel, _ = subsample(ids, w, n, node_seed=t)
            heavy[t] = np.count_nonzero(sel < m // 2)
            light[t] = len(sel) - heavy[t]
        ratio = (heavy.mean() / (m // 2)) / (light.mean() / (m // 2))
        assert 1.9 <= ratio <= 2.1

    def test_deterministic_in_node_seed(self):
        ids = np.arange(100, dtype=np.uint64)
        w = np.linspace(0.5, 3, 100)
        a = subsample(ids, w, 20, node_seed=8)
        b = subsample(ids, w, 20, node_seed=8)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


class TestPairTimesteps:
    def _tables(self):
        t0 = ParticleTable(
            ids=np.array([1, 2, 3], dtype=np.uint64),
            pos=np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]]),
            mass=np.ones(3),
            density=np.ones(3),
            size=np.full(3, 0.5),
            snapshot_time=0.0,
        )
        t1 = ParticleTable(
            ids=np.array([3, 1], dtype=np.uint64),
            pos=np.array([[3.0, 0, 0], [0.5, 0, 0]]),
            mass=np.ones(2),
            density=np.full(2, 2.0),
            size=np.full(2, 0.25),
            snapshot_time=1.0,
        )
        return t0, t1

    def test_id_matched_lookup(self):
        t0, t1 = self._tables()
        pos1, size1, mass1, density1, missing = pair_timesteps(t0.ids, t1)
        assert pos1[0, 0] == 0.5 and pos1[2, 0] == 3.0
        assert not missing[0] and not missing[2]

    def test_missing_id_flagged(self):
        t0, t1 = self._tables()
        _, _, _, _, missing = pair_timesteps(t0.ids, t1)
        assert missing.tolist() == [False, True, False]


@pytest.fixture(scope="module")
def uniform_tables():
    rng = np.random.default_rng(77)
    n = 20_000
    tables = []
    pos = rng.uniform(0, 10, (n, 3))
    for s in range(2):
        tables.append(
            ParticleTable(
                ids=np.arange(n, dtype=np.uint64),
                pos=pos + s * 0.1,
                mass=np.ones(n, np.float32),
                density=rng.uniform(0.5, 2, n).astype(np.float32),
                size=np.full(n, 0.2, np.float32),
                snapshot_time=float(s),
            )
        )
    return tables


class TestBuild:
    def test_under_capacity_single_root_leaf(self, tmp_path):
        rng = np.random.default_rng(1)
        n = 1000
        tables = [
            ParticleTable(
                ids=np.arange(n, dtype=np.uint64),
                pos=rng.uniform(0, 1, (n, 3)),
                mass=np.ones(n),
                density=np.ones(n),
                size=np.full(n, 0.1),
                snapshot_time=float(s),
            )
            for s in range(2)
        ]
        paths = write_dataset(tables, tmp_path / "raw")
        build(paths, BuildConfig(node_capacity=16000, seed=0), tmp_path / "lod")
        with Dataset(tmp_path / "lod") as ds:
            idx = ds.index(0)
            assert len(idx.entries) == 1
            root = idx.by_path[ROOT_PATH]
            assert root.child_mask == 0 and root.count == n

    def test_one_octant_gets_single_subtree(self, tmp_path):
        # 20000 points inside one octant, capacity 16000: the root must have
        # exactly one child subtree and exactly 16000 representatives.
        rng = np.random.default_rng(2)
        n = 20_000
        pos = rng.uniform(0, 1, (n, 3)) * 0.49  # lower octant of [0,1]^3
        pos[0] = [0.0, 0.0, 0.0]
        pos[1] = [1.0, 1.0, 1.0]  # pin the root box to [0,1]^3
        tables = [
            ParticleTable(
                ids=np.arange(n, dtype=np.uint64),
                pos=pos,
                mass=np.ones(n),
                density=np.ones(n),
                size=np.full(n, 0.05),
                snapshot_time=float(s),
            )
            for s in range(2)
        ]
        paths = write_dataset(tables, tmp_path / "raw")
        build(paths, BuildConfig(node_capacity=16000, seed=3), tmp_path / "lod")
        with Dataset(tmp_path / "lod") as ds:
            root = ds.index(0).by_path[ROOT_PATH]
            assert bin(root.child_mask).count("1") >= 1
            assert root.count == 16000
            depth1 = [e for e in ds.index(0).entries if path_depth(e.path) == 1]
            # all but a stray corner point live in octant 0
            main = [e for e in depth1 if e.count > 2]
            assert len(main) == 1 and main[0].path == 8

    def test_byte_identical_rebuild(self, uniform_tables, tmp_path):
        paths = write_dataset(uniform_tables, tmp_path / "raw")
        cfg = BuildConfig(node_capacity=3000, seed=5)
        build(paths, cfg, tmp_path / "a", workers=1)
        build(paths, cfg, tmp_path / "b", workers=3)
        for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
            ha = hashlib.sha256((tmp_path / "a" / name).read_bytes()).hexdigest()
            hb = hashlib.sha256((tmp_path / "b" / name).read_bytes()).hexdigest()
            assert ha == hb, name

    def test_parent_representatives_subset_of_children(self, small_dataset):
        ds = small_dataset
        idx = ds.index(0)
        for entry in idx.entries:
            if entry.child_mask == 0:
                continue
            parent_ids = set(ds.block(0, entry.path).ids.tolist())
            child_ids = set()
            for child in idx.children(entry.path):
                child_ids.update(ds.block(0, child.path).ids.tolist())
            assert parent_ids <= child_ids

    def test_leaf_ids_partition_snapshot(self, small_dataset, small_tables):
        ds = small_dataset
        for s in range(ds.n_intervals):
            leaf_ids = np.concatenate([ds.block(s, e.path).ids for e in ds.index(s).leaves()])
            assert np.array_equal(np.sort(leaf_ids), np.sort(small_tables[s].ids))

    def test_weight_conservation(self, small_dataset, small_tables):
        ds = small_dataset
        alpha = ds.meta["alpha"]
        for s in range(ds.n_intervals):
            table = small_tables[s]
            keys = morton_keys(table.pos, ds.root_box, ds.meta["max_depth"])
            order = np.argsort(keys)
            keys_sorted = keys[order]
            w_sorted = (table.mass.astype(np.float64) * table.density.astype(np.float64) ** alpha)[order]
            for entry in ds.index(s).entries:
                d = path_depth(entry.path)
                shift = 3 * (ds.meta["max_depth"] - d)
                lo = np.searchsorted(keys_sorted, np.uint64(entry.path << shift))
                hi = np.searchsorted(keys_sorted, np.uint64((entry.path + 1) << shift))
                raw_total = w_sorted[lo:hi].sum()
                block_total = ds.block(s, entry.path).weight_start.astype(np.float64).sum()
                assert block_total == pytest.approx(raw_total, rel=1e-6)

    def test_quantization_honesty(self, small_dataset):
        ds = small_dataset
        for entry in ds.index(0).entries[:40]:
            block = ds.block(0, entry.path)
            pos = dequantize_array(block.qpos_start, block.box_start)
            assert np.all(pos >= block.box_start.min - 1e-12)
            assert np.all(pos <= block.box_start.max + 1e-12)

    def test_capacity_respected_everywhere(self, small_dataset):
        ds = small_dataset
        for s in range(ds.n_intervals):
            for entry in ds.index(s).entries:
                assert entry.count <= ds.node_capacity

    def test_zero_drift_end_equals_start(self, tmp_path):
        cfg = SynthConfig(n_points=3000, n_clusters=2, n_snapshots=2, drift_speed=0.0, seed=13)
        paths = write_dataset(gen_synthetic(cfg), tmp_path / "raw")
        build(paths, BuildConfig(node_capacity=500, seed=13), tmp_path / "lod")
        with Dataset(tmp_path / "lod") as ds:
            for entry in ds.index(0).entries:
                block = ds.block(0, entry.path)
                assert np.array_equal(block.qpos_start, block.qpos_end)
                assert np.array_equal(
                    np.array(block.box_start.min), np.array(block.box_end.min)
                )

    def test_missing_id_fallback_counted(self, tmp_path):
        rng = np.random.default_rng(4)
        n = 100
        t0 = ParticleTable(
            ids=np.arange(n, dtype=np.uint64),
            pos=rng.uniform(0, 1, (n, 3)),
            mass=np.ones(n),
            density=np.ones(n),
            size=np.full(n, 0.1),
            snapshot_time=0.0,
        )
        t1 = ParticleTable(
            ids=np.arange(1, n, dtype=np.uint64),  # id 0 vanishes
            pos=rng.uniform(0, 1, (n - 1, 3)),
            mass=np.ones(n - 1),
            density=np.ones(n - 1),
            size=np.full(n - 1, 0.1),
            snapshot_time=1.0,
        )
        paths = write_dataset([t0, t1], tmp_path / "raw")
        summary = build(paths, BuildConfig(seed=0), tmp_path / "lod")
        assert summary.missing_ids == 1
        with Dataset(tmp_path / "lod") as ds:
            block = ds.block(0, ROOT_PATH)
            i = int(np.flatnonzero(block.ids == 0)[0])
            p0 = dequantize_array(block.qpos_start[i : i + 1], block.box_start)
            p1 = dequantize_array(block.qpos_end[i : i + 1], block.box_end)
            # static fallback: end state equals start state up to quantization
            assert np.allclose(p0, p1, atol=np.max(block.box_end.extent) / 65535 + 1e-12)
