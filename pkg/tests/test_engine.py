import math

import numpy as np
import pytest

from cosmolod.engine import (
    INSIDE,
    INTERSECTING,
    OUTSIDE,
    Camera,
    CacheState,
    all_leaves_cut,
    cache_touch,
    cut_is_antichain,
    frustum_classify,
    make_selection,
    screen_space_error,
    select_cut,
    selection_flags,
)
from cosmolod.errors import CacheError
from cosmolod.geometry import Aabb, ROOT_PATH, child_aabb, path_box, path_depth
from conftest import random_cameras, whole_box_camera


def look_z(width=1024, height=1024, fov=60.0, pos=(0.0, 0.0, 0.0)):
    pos = np.asarray(pos, dtype=np.float64)
    return Camera(
        position=pos,
        look_at=pos + np.array([0.0, 0.0, 1.0]),
        up=np.array([0.0, 1.0, 0.0]),
        fov_y=fov,
        width=width,
        height=height,
    )


class TestScreenSpaceError:
    def test_known_value(self):
        # L=1 at distance 100, 1080 px, 60 deg: 1080/(2*tan30)/100
        cam = look_z(width=1920, height=1080)
        box = Aabb(np.array([-0.5, -0.5, 100.0]), np.array([0.5, 0.5, 101.0]))
        sse = screen_space_error(box, cam)
        assert sse == pytest.approx(1080 / (2 * math.tan(math.radians(30))) / 100, rel=1e-9)
        assert sse == pytest.approx(9.3531, abs=1e-4)

    def test_camera_inside_box_is_infinite(self):
        cam = look_z()
        box = Aabb(np.full(3, -1.0), np.full(3, 1.0))
        assert screen_space_error(box, cam) == math.inf

    def test_doubling_distance_halves_sse(self):
        cam = look_z()
        near = Aabb(np.array([-1.0, -1.0, 50.0]), np.array([0.0, 0.0, 51.0]))
        far = Aabb(np.array([-1.0, -1.0, 100.0]), np.array([0.0, 0.0, 101.0]))
        # nearest points at z=50 vs z=100 along the axis from the origin camera
        cam0 = look_z(pos=(-0.5, -0.5, 0.0))
        assert screen_space_error(near, cam0) == pytest.approx(
            2 * screen_space_error(far, cam0), rel=1e-9
        )

    def test_child_sse_never_exceeds_parent(self):
        rng = np.random.default_rng(31)
        root = Aabb(np.zeros(3), np.array([4.0, 3.0, 5.0]))
        cams = random_cameras(root, 20, seed=4)
        for cam in cams:
            boxes = [root]
            for _ in range(40):
                box = boxes[rng.integers(len(boxes))]
                for o in range(8):
                    child = child_aabb(box, o)
                    assert screen_space_error(child, cam) <= screen_space_error(box, cam) + 1e-9
                boxes.append(child_aabb(box, int(rng.integers(8))))


class TestFrustum:
    def test_small_box_ahead_is_inside(self):
        cam = look_z()
        box = Aabb(np.array([-0.1, -0.1, 10.0]), np.array([0.1, 0.1, 10.2]))
        assert frustum_classify(box, cam) == INSIDE

    def test_box_behind_is_outside(self):
        cam = look_z()
        box = Aabb(np.array([-1.0, -1.0, -5.0]), np.array([1.0, 1.0, -4.0]))
        assert frustum_classify(box, cam) == OUTSIDE

    def test_box_straddling_side_plane(self):
        # right frustum boundary at x = z*tan(30) ~ 2.887 at z=5
        cam = look_z(fov=60.0)
        box = Aabb(np.array([2.0, -0.5, 5.0]), np.array([4.0, 0.5, 5.5]))
        assert frustum_classify(box, cam) == INTERSECTING

    def test_never_outside_when_points_visible(self):
        # conservative: every box containing a projectable point must not be culled
        rng = np.random.default_rng(6)
        cam = look_z(width=640, height=480, fov=47.0, pos=(1.0, 2.0, 3.0))
        right, up, fwd = cam.basis()
        tan_v = math.tan(math.radians(cam.fov_y / 2))
        tan_h = tan_v * cam.width / cam.height
        for _ in range(300):
            zc = rng.uniform(cam.near, 50)
            xc = rng.uniform(-1, 1) * tan_h * zc
            yc = rng.uniform(-1, 1) * tan_v * zc
            p = cam.position + xc * right + yc * up + zc * fwd
            half = rng.uniform(0.01, 5.0, 3)
            box = Aabb(p - half, p + half)
            assert frustum_classify(box, cam) != OUTSIDE


class TestSelectCut:
    def test_huge_tau_returns_root(self, small_dataset):
        ds = small_dataset
        cam = whole_box_camera(ds.root_box)
        cut = select_cut(ds.index(0), 0, ds.root_box, cam, tau=1e9, budget=10**9)
        assert [e.path for e in cut.entries] == [ROOT_PATH]
        assert not cut.budget_exceeded

    def test_tiny_tau_yields_visible_leaves(self, small_dataset):
        ds = small_dataset
        cam = whole_box_camera(ds.root_box)
        cut = select_cut(ds.index(0), 0, ds.root_box, cam, tau=1e-12, budget=10**9)
        expected = {
            e.path
            for e in ds.index(0).leaves()
            if frustum_classify(path_box(ds.root_box, e.path), cam) != OUTSIDE
        }
        assert {e.path for e in cut.entries} == expected

    def test_camera_behind_dataset_empty_cut(self, small_dataset):
        ds = small_dataset
        center = ds.root_box.center
        behind = Camera(
            position=center + np.array([0.0, 0.0, -2 * ds.root_box.diagonal()]),
            look_at=center + np.array([0.0, 0.0, -4 * ds.root_box.diagonal()]),
            up=np.array([0.0, 1.0, 0.0]),
        )
        cut = select_cut(ds.index(0), 0, ds.root_box, behind, tau=1.0, budget=10**6)
        assert cut.entries == [] and cut.total_points == 0

    def test_budget_below_root_flags_and_returns_root(self, small_dataset):
        ds = small_dataset
        cam = whole_box_camera(ds.root_box)
        root_count = ds.index(0).by_path[ROOT_PATH].count
        cut = select_cut(ds.index(0), 0, ds.root_box, cam, tau=0.5, budget=root_count - 1)
        assert cut.budget_exceeded
        assert [e.path for e in cut.entries] == [ROOT_PATH]

    def test_budget_safety_and_antichain(self, small_dataset):
        ds = small_dataset
        budget = 5000
        for cam in random_cameras(ds.root_box, 25, seed=8):
            cut = select_cut(ds.index(0), 0, ds.root_box, cam, tau=0.7, budget=budget)
            if not cut.budget_exceeded:
                assert cut.total_points <= budget
            assert cut_is_antichain(cut)
            assert cut.total_points == sum(e.count for e in cut.entries)

    def test_refinement_dominance_unbounded_budget(self, small_dataset):
        ds = small_dataset
        cam = whole_box_camera(ds.root_box)
        tau = 4.0
        cut = select_cut(ds.index(0), 0, ds.root_box, cam, tau=tau, budget=10**12)
        for e in cut.entries:
            if ds.index(0).by_path[e.path].child_mask != 0:
                assert e.sse <= tau

    def test_ordered_by_descending_sse(self, small_dataset):
        ds = small_dataset
        cam = whole_box_camera(ds.root_box)
        cut = select_cut(ds.index(0), 0, ds.root_box, cam, tau=1.0, budget=10**6)
        sses = [e.sse for e in cut.entries]
        assert sses == sorted(sses, reverse=True)

    def test_deterministic(self, small_dataset):
        ds = small_dataset
        cam = whole_box_camera(ds.root_box)
        a = select_cut(ds.index(0), 0, ds.root_box, cam, tau=1.3, budget=7000)
        b = select_cut(ds.index(0), 0, ds.root_box, cam, tau=1.3, budget=7000)
        assert a == b

    def test_all_leaves_cut_counts(self, small_dataset, small_tables):
        ds = small_dataset
        cut = all_leaves_cut(ds.index(0), 0, ds.root_box)
        assert cut.total_points == small_tables[0].count
        assert cut_is_antichain(cut)


class TestSelection:
    def test_single_member(self):
        mask = selection_flags(np.array([5, 9, 12], dtype=np.uint64), make_selection([9]))
        assert mask == bytes([0b00000010])

    def test_empty_selection(self):
        mask = selection_flags(np.array([5, 9, 12], dtype=np.uint64), make_selection([]))
        assert mask == bytes([0])

    def test_full_membership(self):
        ids = np.arange(11, dtype=np.uint64)
        mask = selection_flags(ids, make_selection(ids))
        assert mask == bytes([0xFF, 0b00000111])

    def test_trailing_bits_zero(self):
        ids = np.arange(9, dtype=np.uint64)
        mask = selection_flags(ids, make_selection([8]))
        assert mask == bytes([0, 0b00000001])

    def test_dedup_and_sort(self):
        sel = make_selection([9, 5, 9])
        assert sel.tolist() == [5, 9]

    def test_cap_enforced(self):
        with pytest.raises(ValueError, match="cap"):
            make_selection(np.zeros(1_048_577, dtype=np.uint64))

    def test_cap_boundary_accepted(self):
        sel = make_selection(np.arange(1_048_576, dtype=np.uint64))
        assert len(sel) == 1_048_576


class TestCache:
    def test_lru_eviction(self):
        st = CacheState(capacity_bytes=100)
        assert cache_touch(st, "A", 60) == []
        assert cache_touch(st, "B", 60) == ["A"]

    def test_retouch_refreshes_recency(self):
        st = CacheState(capacity_bytes=100)
        cache_touch(st, "A", 40)
        cache_touch(st, "B", 40)
        cache_touch(st, "A", 40)  # A becomes most recent
        assert cache_touch(st, "C", 40) == ["B"]
        assert "A" in st.resident

    def test_oversized_item_rejected(self):
        st = CacheState(capacity_bytes=100)
        with pytest.raises(CacheError):
            cache_touch(st, "X", 150)

    def test_capacity_invariant(self):
        rng = np.random.default_rng(2)
        st = CacheState(capacity_bytes=1000)
        for i in range(200):
            cache_touch(st, int(rng.integers(0, 50)), int(rng.integers(1, 400)))
            assert st.used_bytes <= 1000
