"""PFM disparity files, PNG previews and atomic output helpers."""
from __future__ import annotations

import os
import re
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from PIL import Image


@contextmanager
def atomic_path(dest: str | Path):
    """Yield a temporary path next to ``dest``; rename over ``dest`` on success."""
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{dest.name}.", suffix=dest.suffix, dir=dest.parent)
    os.close(fd)
    tmp = Path(tmp)
    try:
        yield tmp
        # mkstemp creates 0600 files; give the result the usual umask-based mode
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, dest)
    finally:
        if tmp.exists():
            tmp.unlink()


def write_bytes_atomic(dest: str | Path, data: bytes) -> None:
    with atomic_path(dest) as tmp:
        tmp.write_bytes(data)


def pfm_bytes(values: np.ndarray) -> bytes:
    """Single-channel little-endian PFM (scale -1), rows stored bottom to top."""
    arr = np.asarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("PFM writer expects a 2D array")
    h, w = arr.shape
    header = f"Pf\n{w} {h}\n-1\n".encode("ascii")
    return header + np.ascontiguousarray(arr[::-1]).tobytes()


def write_pfm(path: str | Path, values: np.ndarray) -> None:
    write_bytes_atomic(path, pfm_bytes(values))


class PFMError(ValueError):
    pass


def read_pfm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"(P[fF])\s+(\d+)\s+(\d+)\s+(\S+)\s", data)
    if m is None:
        raise PFMError(f"{path}: not a PFM file")
    kind, w, h, scale = m.group(1), int(m.group(2)), int(m.group(3)), float(m.group(4))
    channels = 3 if kind == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    if len(data) - m.end() < 4 * w * h * channels:
        raise PFMError(f"{path}: truncated PFM data")
    arr = np.frombuffer(data, dtype=dtype, count=w * h * channels, offset=m.end())
    shape = (h, w, channels) if channels == 3 else (h, w)
    return arr.reshape(shape)[::-1].astype(np.float64)


def to_uint8(img: np.ndarray, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    finite = np.isfinite(img)
    if lo is None:
        lo = float(img[finite].min()) if finite.any() else 0.0
    if hi is None:
        hi = float(img[finite].max()) if finite.any() else 1.0
    span = hi - lo if hi > lo else 1.0
    out = np.clip((np.where(finite, img, lo) - lo) / span, 0.0, 1.0)
    return np.round(out * 255.0).astype(np.uint8)


def write_png(path: str | Path, img: np.ndarray, lo: float | None = None, hi: float | None = None) -> None:
    """Write a float image (gray or RGB) normalized to 8 bit."""
    if np.asarray(img).dtype != np.uint8:
        img = to_uint8(img, lo, hi)
    with atomic_path(path) as tmp:
        Image.fromarray(img).save(tmp, format="PNG")
