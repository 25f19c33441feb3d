"""Read-only handle over a built LOD dataset directory."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .blockio import Block, IntervalIndex, read_block, read_index
from .builder import META_NAME
from .errors import FormatError
from .geometry import Aabb


class Dataset:
    """Opens meta + per-interval indexes; blocks are read on demand via pread."""

    def __init__(self, directory):
        self.dir = Path(directory)
        meta_path = self.dir / META_NAME
        if not meta_path.exists():
            raise FormatError(f"not a dataset directory: {self.dir} (missing {META_NAME})")
        self.meta = json.loads(meta_path.read_text())
        box = self.meta["root_box"]
        self.root_box = Aabb(np.array(box["min"]), np.array(box["max"]))
        self.times: list[float] = list(self.meta["snapshot_times"])
        self.node_capacity: int = int(self.meta["node_capacity"])
        self.n_intervals = len(self.times) - 1
        self.indexes: list[IntervalIndex] = []
        self._fds: list[int] = []
        for s in range(self.n_intervals):
            self.indexes.append(read_index((self.dir / f"index_{s}.bin").read_bytes()))
            self._fds.append(os.open(self.dir / f"blocks_{s}.bin", os.O_RDONLY))

    def close(self):
        for fd in self._fds:
            os.close(fd)
        self._fds = []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def index(self, s: int) -> IntervalIndex:
        if not 0 <= s < self.n_intervals:
            raise KeyError(f"interval {s} out of [0,{self.n_intervals})")
        return self.indexes[s]

    def block_bytes(self, s: int, path: int) -> bytes:
        entry = self.index(s).by_path.get(path)
        if entry is None:
            raise KeyError(f"no block {path} in interval {s}")
        blob = os.pread(self._fds[s], entry.byte_length, entry.byte_offset)
        if len(blob) != entry.byte_length:
            raise FormatError(f"short read for block {path} interval {s}")
        return blob

    def block(self, s: int, path: int) -> Block:
        return read_block(self.block_bytes(s, path))

    def interval_for_time(self, t: float) -> tuple[int, float]:
        """Interval s with t in [t_s, t_{s+1}) (last interval closed) and its alpha."""
        times = self.times
        if not times[0] <= t <= times[-1]:
            raise ValueError(f"time {t} outside dataset span [{times[0]}, {times[-1]}]")
        s = int(np.searchsorted(np.asarray(times), t, side="right")) - 1
        s = min(max(s, 0), self.n_intervals - 1)
        span = times[s + 1] - times[s]
        alpha = 0.0 if span == 0 else (t - times[s]) / span
        return s, float(alpha)
