"""Float image output: PFM (grayscale, little-endian) and a tone-mapped PPM preview."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError


def write_pfm(img: np.ndarray, destination) -> None:
    """Grayscale PFM; rows stored bottom-to-top, scale -1.0 marks little-endian."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 2:
        raise ValueError("expected a 2-D grayscale image")
    h, w = img.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    payload = np.flipud(img).astype("<f4").tobytes()
    if hasattr(destination, "write"):
        destination.write(header + payload)
    else:
        Path(destination).write_bytes(header + payload)


def read_pfm(source) -> np.ndarray:
    blob = Path(source).read_bytes() if not hasattr(source, "read") else source.read()
    parts = blob.split(b"\n", 3)
    if len(parts) < 4 or parts[0] not in (b"Pf",):
        raise FormatError("not a grayscale PFM file")
    w, h = map(int, parts[1].split())
    scale = float(parts[2])
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(parts[3], dtype=dtype, count=w * h).reshape(h, w)
    return np.flipud(data).astype(np.float64)


def tone_map(img: np.ndarray) -> np.ndarray:
    """Log map I' = log(1 + I/I0) / log(1 + Imax/I0) with I0 = 1% of max."""
    img = np.asarray(img, dtype=np.float64)
    peak = float(img.max())
    if peak <= 0:
        return np.zeros_like(img)
    i0 = 0.01 * peak
    return np.log1p(np.maximum(img, 0.0) / i0) / np.log1p(peak / i0)


def write_ppm_preview(img: np.ndarray, destination) -> None:
    """8-bit grayscale preview as binary PPM (P6)."""
    mapped = np.clip(tone_map(img) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    h, w = mapped.shape
    rgb = np.repeat(mapped[:, :, None], 3, axis=2)
    blob = f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()
    if hasattr(destination, "write"):
        destination.write(blob)
    else:
        Path(destination).write_bytes(blob)
