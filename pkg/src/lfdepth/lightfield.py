"""Light field container, view-grid ingestion, EPI slicing and gradients.

Disparity convention: a scene point at ``(u, v)`` in the central view appears
at ``(u + d * (s - s_c), v + d * (t - t_c))`` in view ``(s, t)``.  Both EPI
axes therefore share one sign and ``AXIS_SIGN`` is +1 for each.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image
from scipy import ndimage
from skimage.color import rgb2lab

from .io import atomic_path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

Axis = Literal["horizontal", "vertical"]
AXIS_SIGN = {"horizontal": 1.0, "vertical": 1.0}

# LAB channels are divided by this so L lands in [0, 1].
LAB_SCALE = 100.0


class LightFieldError(Exception):
    """Base class for ingestion and parameter errors."""


class MissingViewError(LightFieldError):
    def __init__(self, s: int, t: int, path: Path):
        self.s, self.t, self.path = s, t, path
        super().__init__(f"missing view (s={s}, t={t}): {path}")


class DimensionMismatchError(LightFieldError):
    def __init__(self, expected: tuple, got: tuple, where: str = ""):
        self.expected, self.got = expected, got
        super().__init__(f"view size mismatch{where}: expected {expected}, got {got}")


class ParameterError(LightFieldError, ValueError):
    pass


@dataclass(frozen=True)
class GridLayout:
    """How the files of a view grid are named.

    ``pattern`` is a ``str.format`` template.  Available fields are ``idx``
    (flat index), ``s``/``col`` and ``t``/``row``.  ``index_order`` is
    ``"row-major"`` (idx = t * n_s + s) or ``"col-major"``.
    """

    n_s: int = 9
    n_t: int = 9
    pattern: str = "input_Cam{idx:03}.png"
    index_order: str = "row-major"
    start: int = 0

    def filename(self, s: int, t: int) -> str:
        if self.index_order == "row-major":
            idx = t * self.n_s + s
        elif self.index_order == "col-major":
            idx = s * self.n_t + t
        else:
            raise ParameterError(f"unknown index_order {self.index_order!r}")
        idx += self.start
        return self.pattern.format(idx=idx, s=s, t=t, col=s, row=t)

    @classmethod
    def from_file(cls, path: str | Path) -> "GridLayout":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
        data = data.get("layout", data)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown layout keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def guess(cls, directory: str | Path) -> "GridLayout":
        """Infer an HCI-style layout from ``input_Cam###`` files in ``directory``."""
        names = [p.name for p in Path(directory).iterdir()]
        rx = re.compile(r"input_Cam(\d{3})\.png$")
        n = sum(1 for nm in names if rx.match(nm))
        side = int(round(np.sqrt(n)))
        if n == 0 or side * side != n:
            raise ParameterError(f"cannot infer a square grid from {n} input_Cam files")
        return cls(n_s=side, n_t=side)


@dataclass(frozen=True, eq=False)
class LightField:
    """Views on an ``n_t x n_s`` grid; ``views[t, s]`` is an ``h x w x 3`` RGB image."""

    views: np.ndarray
    lab: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.views, dtype=np.float32)
        if v.ndim != 5 or v.shape[-1] != 3:
            raise ParameterError(f"views must have shape (n_t, n_s, h, w, 3), got {v.shape}")
        if v.shape[0] < 3 or v.shape[1] < 3:
            raise ParameterError("need at least a 3x3 angular grid")
        v.setflags(write=False)
        object.__setattr__(self, "views", v)
        lab = self.lab
        if lab is None:
            lab = to_lab(v)
        lab = np.asarray(lab, dtype=np.float32)
        lab.setflags(write=False)
        object.__setattr__(self, "lab", lab)

    @property
    def n_t(self) -> int:
        return self.views.shape[0]

    @property
    def n_s(self) -> int:
        return self.views.shape[1]

    @property
    def h(self) -> int:
        return self.views.shape[2]

    @property
    def w(self) -> int:
        return self.views.shape[3]

    @property
    def angular_center(self) -> tuple[int, int]:
        return self.n_s // 2, self.n_t // 2

    @property
    def center_rgb(self) -> np.ndarray:
        s_c, t_c = self.angular_center
        return self.views[t_c, s_c]

    @property
    def center_lab(self) -> np.ndarray:
        s_c, t_c = self.angular_center
        return self.lab[t_c, s_c]


@dataclass(frozen=True, eq=False)
class Epi:
    """Angular slice: ``pixels[j]`` is the slice row/column seen from view ``j``."""

    pixels: np.ndarray  # (n_views, width, channels)
    axis: Axis
    slice_index: int

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def center_row(self) -> int:
        return self.height // 2


@dataclass
class DisparityMap:
    values: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.valid is None:
            self.valid = np.isfinite(self.values)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.values.shape:
            raise ParameterError("valid mask must match disparity shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def to_lab(rgb: np.ndarray) -> np.ndarray:
    """RGB in [0, 1] to LAB scaled by ``1 / LAB_SCALE``; works on any leading shape."""
    rgb = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    flat = rgb.reshape(-1, 1, 3)
    lab = rgb2lab(flat).reshape(rgb.shape) / LAB_SCALE
    return lab.astype(np.float32)


def _read_image(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        mode = im.mode
        if mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
            arr = np.repeat(arr[..., None], 3, axis=-1)
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def load_light_field(path: str | Path, layout: GridLayout | None = None) -> LightField:
    """Read an ``n_t x n_s`` grid of images from ``path``."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"light field directory not found: {path}")
    layout = layout or GridLayout.guess(path)
    views = None
    first_shape = None
    for t in range(layout.n_t):
        for s in range(layout.n_s):
            fp = path / layout.filename(s, t)
            if not fp.is_file():
                raise MissingViewError(s, t, fp)
            img = _read_image(fp)
            if first_shape is None:
                first_shape = img.shape
                views = np.empty((layout.n_t, layout.n_s) + img.shape, dtype=np.float32)
            elif img.shape != first_shape:
                raise DimensionMismatchError(
                    first_shape[:2], img.shape[:2], f" at (s={s}, t={t})"
                )
            views[t, s] = img
    return LightField(views)


def save_light_field(lf: LightField, path: str | Path, layout: GridLayout | None = None) -> GridLayout:
    """Write every view as an 8-bit PNG named by ``layout``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    layout = layout or GridLayout(n_s=lf.n_s, n_t=lf.n_t)
    for t in range(lf.n_t):
        for s in range(lf.n_s):
            img = np.clip(np.round(lf.views[t, s] * 255.0), 0, 255).astype(np.uint8)
            with atomic_path(path / layout.filename(s, t)) as tmp:
                Image.fromarray(img).save(tmp, format="PNG")
    return layout


def crop_angular(lf: LightField, keep: int) -> LightField:
    """Keep the central ``keep x keep`` views."""
    if keep % 2 == 0 or keep < 3 or keep > min(lf.n_s, lf.n_t):
        raise ParameterError(
            f"keep must be odd, >= 3 and <= {min(lf.n_s, lf.n_t)}; got {keep}"
        )
    s_c, t_c = lf.angular_center
    r = keep // 2
    sl_t = slice(t_c - r, t_c + r + 1)
    sl_s = slice(s_c - r, s_c + r + 1)
    if keep == lf.n_s == lf.n_t:
        return lf
    return LightField(lf.views[sl_t, sl_s], lab=lf.lab[sl_t, sl_s])


def extract_epi(lf: LightField, axis: Axis, slice_index: int, space: str = "lab") -> Epi:
    """Slice the central cross-hair.

    ``horizontal`` fixes ``t = t_c`` and image row ``slice_index``;
    ``vertical`` fixes ``s = s_c`` and image column ``slice_index``.
    """
    data = lf.lab if space == "lab" else lf.views
    s_c, t_c = lf.angular_center
    if axis == "horizontal":
        if not 0 <= slice_index < lf.h:
            raise ParameterError(f"row {slice_index} outside [0, {lf.h})")
        pix = data[t_c, :, slice_index, :, :]
    elif axis == "vertical":
        if not 0 <= slice_index < lf.w:
            raise ParameterError(f"column {slice_index} outside [0, {lf.w})")
        pix = data[:, s_c, :, slice_index, :]
    else:
        raise ParameterError(f"unknown axis {axis!r}")
    return Epi(np.ascontiguousarray(pix), axis, slice_index)


def epi_stack(lf: LightField, axis: Axis, space: str = "lab") -> np.ndarray:
    """All EPIs of one axis as ``(n_slices, n_views, width, 3)``."""
    data = lf.lab if space == "lab" else lf.views
    s_c, t_c = lf.angular_center
    if axis == "horizontal":
        return np.ascontiguousarray(data[t_c].transpose(1, 0, 2, 3))
    return np.ascontiguousarray(data[:, s_c].transpose(2, 0, 1, 3))


_SOBEL_NORM = 1.0 / 8.0


def sobel_field(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel Sobel gradient summed over channels, in intensity per pixel.

    Works on ``(..., rows, cols)`` or ``(..., rows, cols, channels)`` when
    ``img.ndim >= 3`` and the last axis has at most 4 entries.  Borders use
    nearest-pixel replication.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim >= 3 and img.shape[-1] <= 4:
        summed = img.sum(axis=-1)
    else:
        summed = img
    # Sobel is linear, so summing channels first equals summing per-channel gradients.
    # Separable passes on the last two axes only; leading axes are independent images.
    row_ax, col_ax = summed.ndim - 2, summed.ndim - 1
    deriv, smooth = [-1.0, 0.0, 1.0], [1.0, 2.0, 1.0]
    gx = ndimage.correlate1d(summed, deriv, axis=col_ax, mode="nearest")
    gx = ndimage.correlate1d(gx, smooth, axis=row_ax, mode="nearest") * _SOBEL_NORM
    gy = ndimage.correlate1d(summed, deriv, axis=row_ax, mode="nearest")
    gy = ndimage.correlate1d(gy, smooth, axis=col_ax, mode="nearest") * _SOBEL_NORM
    return gx, gy


def bilinear(field2d: np.ndarray, x, y) -> np.ndarray:
    """Sample ``field2d[..., rows, cols]`` at column ``x`` / row ``y``; clamps at borders."""
    h, w = field2d.shape[-2:]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.intp), w - 2) if w > 1 else np.zeros_like(x, dtype=np.intp)
    y0 = np.minimum(np.floor(y).astype(np.intp), h - 2) if h > 1 else np.zeros_like(y, dtype=np.intp)
    fx = x - x0
    fy = y - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    top = field2d[..., y0, x0] * (1 - fx) + field2d[..., y0, x1] * fx
    bot = field2d[..., y1, x0] * (1 - fx) + field2d[..., y1, x1] * fx
    return top * (1 - fy) + bot * fy


def sobel_gradient(img: np.ndarray, at) -> tuple[np.ndarray, bool]:
    """Gradient ``(gx, gy)`` at subpixel ``at = (x, y)``.

    Returns the gradient and a flag that is True when the rounded point lies
    on the outermost pixel ring, where the Sobel stencil was clamped.
    """
    img = np.asarray(img, dtype=np.float64)
    x, y = float(at[0]), float(at[1])
    h, w = img.shape[:2]
    xi, yi = int(np.floor(x + 0.5)), int(np.floor(y + 0.5))
    flagged = not (1 <= xi <= w - 2 and 1 <= yi <= h - 2)
    gx, gy = sobel_field(img)
    g = np.array([bilinear(gx, x, y), bilinear(gy, x, y)], dtype=np.float64)
    return g, flagged


def with_views(lf: LightField, views: np.ndarray) -> LightField:
    """New light field with replaced RGB views (LAB recomputed)."""
    return replace(lf, views=views, lab=None)
