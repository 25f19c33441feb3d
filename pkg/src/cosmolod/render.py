"""Deterministic CPU reference splat renderer.

Points are linearly interpolated between their interval endpoints, projected
by the pinhole model, and accumulated additively as radial cubic splats
normalized so a fully visible splat deposits approximately its weight.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .blockio import Block
from .dataset import Dataset
from .engine import Camera, Cut
from .errors import CodecError
from .geometry import dequantize_array

MIN_RADIUS_PX = 0.5
MAX_RADIUS_PX = 64.0
KERNEL_DISK_INTEGRAL = 0.3 * math.pi  # integral of k(r) * 2*pi*r over [0,1]


def splat_kernel(r):
    """Radial cubic falloff k(r) = 1 - 3r^2 + 2r^3 on [0,1], 0 beyond."""
    r = np.asarray(r, dtype=np.float64)
    k = np.where(r <= 1.0, 1.0 - 3.0 * r * r + 2.0 * r * r * r, 0.0)
    if k.ndim == 0:
        return float(k)
    return k


@njit(cache=True)
def _accumulate(img, sx, sy, radius, amp):
    height, width = img.shape
    for i in range(sx.shape[0]):
        r = radius[i]
        x0 = max(int(math.floor(sx[i] - r - 0.5)), 0)
        x1 = min(int(math.ceil(sx[i] + r + 0.5)), width)
        y0 = max(int(math.floor(sy[i] - r - 0.5)), 0)
        y1 = min(int(math.ceil(sy[i] + r + 0.5)), height)
        for py in range(y0, y1):
            dy = (py + 0.5) - sy[i]
            for px in range(x0, x1):
                dx = (px + 0.5) - sx[i]
                t = math.sqrt(dx * dx + dy * dy) / r
                if t <= 1.0:
                    img[py, px] += amp[i] * (1.0 - 3.0 * t * t + 2.0 * t * t * t)
    return img


def render_points(pos, size, weight, cam: Camera) -> np.ndarray:
    """Splat raw point states to a float image of shape (height, width)."""
    pos = np.asarray(pos, dtype=np.float64).reshape(-1, 3)
    size = np.asarray(size, dtype=np.float64).reshape(-1)
    weight = np.asarray(weight, dtype=np.float64).reshape(-1)
    img = np.zeros((cam.height, cam.width), dtype=np.float64)
    if pos.shape[0] == 0:
        return img
    right, up, fwd = cam.basis()
    rel = pos - cam.position
    zc = rel @ fwd
    keep = zc >= cam.near
    if not np.any(keep):
        return img
    rel, zc = rel[keep], zc[keep]
    xc = rel @ right
    yc = rel @ up
    f = cam.focal_px
    sx = f * xc / zc + cam.width / 2.0
    sy = f * yc / zc + cam.height / 2.0
    radius = np.clip(f * size[keep] / zc, MIN_RADIUS_PX, MAX_RADIUS_PX)
    # cull splats that cannot touch the viewport
    vis = (
        (sx + radius > 0)
        & (sx - radius < cam.width)
        & (sy + radius > 0)
        & (sy - radius < cam.height)
    )
    if not np.any(vis):
        return img
    amp = weight[keep][vis] / (KERNEL_DISK_INTEGRAL * radius[vis] ** 2)
    _accumulate(img, sx[vis], sy[vis], radius[vis], amp)
    return img


def interpolate_block(block: Block, alpha: float):
    """(pos, size, weight) of a block's points at blend factor alpha in [0,1]."""
    p0 = dequantize_array(block.qpos_start, block.box_start)
    p1 = dequantize_array(block.qpos_end, block.box_end)
    pos = (1.0 - alpha) * p0 + alpha * p1
    size = (1.0 - alpha) * block.size_start.astype(np.float64) + alpha * block.size_end.astype(np.float64)
    weight = (1.0 - alpha) * block.weight_start.astype(np.float64) + alpha * block.weight_end.astype(np.float64)
    return pos, size, weight


def render_cut(ds: Dataset, cut: Cut, cam: Camera, alpha: float) -> np.ndarray:
    """Render the blocks of a cut at one blend factor, in entry order."""
    img = np.zeros((cam.height, cam.width), dtype=np.float64)
    for entry in cut.entries:
        block = ds.block(entry.interval, entry.path)
        pos, size, weight = interpolate_block(block, alpha)
        img += render_points(pos, size, weight, cam)
    return img


def render_table_pair(
    table_start, table_end, alpha: float, cam: Camera, density_exponent: float = 1.0
) -> np.ndarray:
    """Render raw snapshot points interpolated by persistent id (the exact image)."""
    from .builder import pair_timesteps

    pos1, size1, mass1, density1, missing = pair_timesteps(table_start.ids, table_end)
    pos0 = table_start.pos
    size0 = table_start.size.astype(np.float64)
    e = density_exponent
    w0 = table_start.mass.astype(np.float64) * table_start.density.astype(np.float64) ** e
    w1 = mass1.astype(np.float64) * density1.astype(np.float64) ** e
    if missing.any():
        pos1[missing] = pos0[missing]
        size1 = size1.astype(np.float64)
        size1[missing] = size0[missing]
        w1[missing] = w0[missing]
    pos = (1.0 - alpha) * pos0 + alpha * pos1
    size = (1.0 - alpha) * size0 + alpha * np.asarray(size1, dtype=np.float64)
    weight = (1.0 - alpha) * w0 + alpha * w1
    return render_points(pos, size, weight, cam)


def image_psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio of b against reference a, in dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    peak = float(a.max())
    if peak <= 0:
        raise CodecError("PSNR undefined for a zero reference image")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
