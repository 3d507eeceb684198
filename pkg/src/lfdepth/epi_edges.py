"""EPI line detection with a sheared Prewitt filter bank, gradient-alignment
outlier rejection and central-view visibility.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .lightfield import AXIS_SIGN, Epi, LightField, ParameterError, epi_stack, sobel_field

AXES = ("horizontal", "vertical")
PREWITT_PROFILE = np.array([-1.0, -1.0, -1.0, 0.0, 1.0, 1.0, 1.0])
_ARM = 3.0  # taps per signed arm of the profile


@dataclass(frozen=True)
class FilterBank:
    """``K`` sheared Prewitt kernels tuned to disparities uniformly spanning ``[-d_max, d_max]``."""

    d_max: float = 2.0
    size: int = 33
    orientations: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.size < 3 or self.size % 2 == 0:
            raise ParameterError(f"filter bank size must be odd and >= 3, got {self.size}")
        if self.d_max <= 0:
            raise ParameterError("d_max must be positive")
        object.__setattr__(self, "orientations", np.linspace(-self.d_max, self.d_max, self.size))

    @property
    def step(self) -> float:
        return 2.0 * self.d_max / (self.size - 1)

    @classmethod
    def with_step(cls, d_max: float, step: float) -> "FilterBank":
        size = int(round(2 * d_max / step)) + 1
        return cls(d_max=d_max, size=size)

    def kernels(self, height: int) -> np.ndarray:
        """Equivalent explicit kernels ``(K, height, width)``, recovered from impulse responses.

        The spline prefilter gives each kernel infinite support; the taps
        beyond ``reach`` columns are below 1e-3 of the peak and are dropped.
        """
        c = height // 2
        reach = int(math.ceil(self.d_max * max(c, height - 1 - c))) + 6
        width = 4 * reach + 1
        n = height * (2 * reach + 1)
        probes = np.zeros((n, height, width, 1))
        rr, jj = np.divmod(np.arange(n), 2 * reach + 1)
        probes[np.arange(n), rr, jj + reach, 0] = 1.0
        resp = sheared_correlation(probes, self)[..., 2 * reach, 0]  # (K, n)
        return resp.reshape(self.size, height, 2 * reach + 1)


@dataclass
class EpiLine:
    x_top: float
    x_bottom: float
    disparity: float
    axis: str
    slice_index: int
    strength: float = 0.0
    visible: bool = False

    def x_at(self, row: float, height: int) -> float:
        return self.x_top + (self.x_bottom - self.x_top) * row / (height - 1.0)


@dataclass
class LineSet:
    """Column-oriented collection of EPI lines (all arrays share length)."""

    axis: np.ndarray  # 0 horizontal, 1 vertical
    slice_index: np.ndarray
    x_top: np.ndarray
    x_bottom: np.ndarray
    disparity: np.ndarray
    strength: np.ndarray
    visible: np.ndarray
    kept: np.ndarray
    height: int

    def __len__(self) -> int:
        return len(self.x_top)

    @classmethod
    def empty(cls, height: int) -> "LineSet":
        z = np.zeros(0)
        zi = np.zeros(0, dtype=np.intp)
        zb = np.zeros(0, dtype=bool)
        return cls(zi, zi.copy(), z, z.copy(), z.copy(), z.copy(), zb, zb.copy(), height)

    def subset(self, mask) -> "LineSet":
        return LineSet(self.axis[mask], self.slice_index[mask], self.x_top[mask],
                       self.x_bottom[mask], self.disparity[mask], self.strength[mask],
                       self.visible[mask], self.kept[mask], self.height)

    @classmethod
    def concat(cls, sets: list["LineSet"]) -> "LineSet":
        sets = [s for s in sets if s is not None]
        if not sets:
            return cls.empty(0)
        cat = lambda a: np.concatenate([getattr(s, a) for s in sets])  # noqa: E731
        return cls(cat("axis"), cat("slice_index"), cat("x_top"), cat("x_bottom"),
                   cat("disparity"), cat("strength"), cat("visible"), cat("kept"), sets[0].height)

    def sorted(self) -> "LineSet":
        order = np.lexsort((self.x_top, self.slice_index, self.axis))
        return self.subset(order)

    def x_center(self) -> np.ndarray:
        c = self.height // 2
        return self.x_top + (self.x_bottom - self.x_top) * (c / (self.height - 1.0))

    def to_lines(self) -> list[EpiLine]:
        return [
            EpiLine(float(self.x_top[i]), float(self.x_bottom[i]), float(self.disparity[i]),
                    AXES[int(self.axis[i])], int(self.slice_index[i]), float(self.strength[i]),
                    bool(self.visible[i]))
            for i in range(len(self))
        ]

    @classmethod
    def from_lines(cls, lines: list[EpiLine], height: int) -> "LineSet":
        if not lines:
            return cls.empty(height)
        return cls(
            np.array([AXES.index(ln.axis) for ln in lines], dtype=np.intp),
            np.array([ln.slice_index for ln in lines], dtype=np.intp),
            np.array([ln.x_top for ln in lines], dtype=np.float64),
            np.array([ln.x_bottom for ln in lines], dtype=np.float64),
            np.array([ln.disparity for ln in lines], dtype=np.float64),
            np.array([ln.strength for ln in lines], dtype=np.float64),
            np.array([ln.visible for ln in lines], dtype=bool),
            np.ones(len(lines), dtype=bool),
            height,
        )


def line_disparity(x_top, x_bottom, height: int, axis: str = "horizontal"):
    return AXIS_SIGN[axis] * (np.asarray(x_bottom) - np.asarray(x_top)) / (height - 1.0)


def _cubic_weights(t: np.ndarray) -> list[np.ndarray]:
    """Cubic B-spline weights of the taps at offsets -1, 0, 1, 2 for fractions ``t``."""
    t2, t3 = t * t, t * t * t
    return [(1.0 - t) ** 3 / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
            (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0]


def sheared_correlation(stack: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Signed per-channel responses ``(K, n_epi, width, ch)`` of the sheared Prewitt bank.

    Rows are shifted by cubic B-spline interpolation before the Prewitt
    profile is applied.  Bilinear shifting low-passes every fractional
    shift, which lets integer-shift orientations win the near-flat top of
    the response curve.
    """
    stack = np.asarray(stack, dtype=np.float64)
    n_epi, rows, width, ch = stack.shape
    c = rows // 2
    coef = ndimage.spline_filter1d(stack, 3, axis=2, mode="nearest")
    cols = np.arange(width, dtype=np.float64)
    out = np.empty((bank.size, n_epi, width, ch))
    for k, o in enumerate(bank.orientations):
        acc = np.zeros((n_epi, width, ch))
        for r in range(rows):
            x = np.clip(cols + o * (r - c), 0.0, width - 1.0)
            x0 = np.floor(x).astype(np.intp)
            for off, wgt in zip((-1, 0, 1, 2), _cubic_weights(x - x0)):
                idx = np.clip(x0 + off, 0, width - 1)
                acc += coef[:, r, idx] * wgt[None, :, None]
        out[k] = ndimage.correlate1d(acc, PREWITT_PROFILE, axis=1, mode="nearest") / _ARM
    return out


def filter_responses(stack: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Oriented responses ``(K, n_epi, width)`` for EPIs ``stack`` of shape ``(n_epi, rows, width, ch)``.

    Each response is the channel sum of absolute correlations with a sheared
    Prewitt kernel, normalized per arm so a unit step seen by every view
    scores the EPI height.
    """
    return np.abs(sheared_correlation(stack, bank)).sum(axis=-1)


def _detect_stack(stack: np.ndarray, bank: FilterBank, threshold: float, nms_radius: int,
                  axis_code: int) -> LineSet:
    n_epi, rows, width, _ = stack.shape
    resp = filter_responses(stack, bank)
    best = np.argmax(resp, axis=0)
    rmax = np.take_along_axis(resp, best[None], axis=0)[0]

    pad = np.pad(rmax, ((0, 0), (nms_radius, nms_radius)), constant_values=-np.inf)
    peak = rmax >= threshold
    for off in range(1, nms_radius + 1):
        left = pad[:, nms_radius - off: nms_radius - off + width]
        right = pad[:, nms_radius + off: nms_radius + off + width]
        # leftmost sample of a plateau wins
        peak &= (rmax > left) & (rmax >= right)
    e_idx, u_idx = np.nonzero(peak)
    if e_idx.size == 0:
        return LineSet.empty(rows)

    r0 = rmax[e_idx, u_idx]
    rl = rmax[e_idx, np.maximum(u_idx - 1, 0)]
    rr = rmax[e_idx, np.minimum(u_idx + 1, width - 1)]
    den = rl - 2.0 * r0 + rr
    delta = np.where(np.abs(den) > 1e-12, 0.5 * (rl - rr) / np.where(den == 0, 1.0, den), 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    x_c = u_idx + delta
    d = bank.orientations[best[e_idx, u_idx]]
    c = rows // 2
    x_top = x_c - d * c
    x_bot = x_c + d * (rows - 1 - c)
    inside = (x_top >= 0) & (x_top <= width - 1) & (x_bot >= 0) & (x_bot <= width - 1)
    m = int(inside.sum())
    return LineSet(
        axis=np.full(m, axis_code, dtype=np.intp),
        slice_index=e_idx[inside].astype(np.intp),
        x_top=x_top[inside],
        x_bottom=x_bot[inside],
        disparity=line_disparity(x_top[inside], x_bot[inside], rows, AXES[axis_code]),
        strength=r0[inside],
        visible=np.zeros(m, dtype=bool),
        kept=np.zeros(m, dtype=bool),
        height=rows,
    )


def detect_lines(epi: Epi, bank: FilterBank, threshold: float = 0.02, nms_radius: int = 2) -> list[EpiLine]:
    """Lines at non-maximum-suppressed peaks of the oriented filter responses."""
    if epi.height < 3:
        raise ParameterError("EPI height must be at least 3")
    code = AXES.index(epi.axis)
    ls = _detect_stack(epi.pixels[None], bank, threshold, nms_radius, code)
    ls.slice_index[:] = epi.slice_index
    return ls.to_lines()


def min_aligned(height: int, c: float) -> int:
    if not 1 <= c <= height:
        raise ParameterError(f"c must lie in [1, {height}], got {c}")
    return int(math.ceil(height / c))


def _epi_gradients(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx, gy = sobel_field(pixels)
    if gx.ndim == 2:
        gx, gy = gx[None], gy[None]
    return np.ascontiguousarray(gx), np.ascontiguousarray(gy)


def aligned_count(line: EpiLine, epi: Epi, tau_f: float = math.pi / 13) -> int:
    """Number of line samples whose EPI gradient is within ``tau_f`` of the line normal."""
    gx, gy = _epi_gradients(epi.pixels)
    counts, _ = kernels.line_alignment(gx, gy, np.zeros(1, dtype=np.intp), [line.x_top],
                                       [line.x_bottom], math.cos(tau_f), 1.0)
    return int(counts[0])


def reject_outliers(line: EpiLine, epi: Epi, tau_f: float = math.pi / 13, c: float = 4) -> bool:
    """True to keep the line: at least ``ceil(height / c)`` aligned samples."""
    return aligned_count(line, epi, tau_f) >= min_aligned(epi.height, c)


def visibility(line: EpiLine, epi: Epi, tau_v: float = math.pi / 10) -> bool:
    gx, gy = _epi_gradients(epi.pixels)
    _, central = kernels.line_alignment(gx, gy, np.zeros(1, dtype=np.intp), [line.x_top],
                                        [line.x_bottom], 2.0, math.cos(tau_v))
    return bool(central[0])


def detect_all(lf: LightField, bank: FilterBank, tau_f: float = math.pi / 13, c: float = 4,
               tau_v: float = math.pi / 10, threshold: float = 0.02, nms_radius: int = 2,
               axes=AXES) -> LineSet:
    """Every candidate line of the central cross-hair with ``kept``/``visible`` flags."""
    sets = []
    for axis in axes:
        stack = epi_stack(lf, axis).astype(np.float64)
        ls = _detect_stack(stack, bank, threshold, nms_radius, AXES.index(axis))
        if len(ls):
            gx, gy = _epi_gradients(stack)
            counts, central = kernels.line_alignment(
                gx, gy, ls.slice_index, ls.x_top, ls.x_bottom, math.cos(tau_f), math.cos(tau_v))
            ls.kept = counts >= min_aligned(stack.shape[1], c)
            ls.visible = ls.kept & (central == 1)
        sets.append(ls)
    return LineSet.concat(sets).sorted()


def collect_sparse_lines(lf: LightField, bank: FilterBank, tau_f: float = math.pi / 13, c: float = 4,
                         tau_v: float = math.pi / 10, threshold: float = 0.02,
                         nms_radius: int = 2) -> LineSet:
    """Visible lines of all central cross-hair EPIs, ordered by (axis, slice, x_top)."""
    ls = detect_all(lf, bank, tau_f, c, tau_v, threshold, nms_radius)
    return ls.subset(ls.visible)
