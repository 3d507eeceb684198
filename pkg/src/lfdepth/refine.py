"""Sub-pixel refinement of EPI lines and joint filtering of the projected labels."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .epi_edges import AXES, EpiLine, LineSet, line_disparity
from .lightfield import Epi, LightField, bilinear, epi_stack, sobel_field

DEFAULT_BINS = 32


@dataclass
class SparsePointSet:
    """Labels in the central view.

    ``ps`` holds ``(x, y)`` positions, ``pd`` disparities, ``pc`` LAB colours
    and ``grad`` unit image gradients.  ``degenerate`` marks points whose
    gradient vanished (``grad`` is then zero) and ``flagged`` marks points
    clamped at the image border.
    """

    ps: np.ndarray
    pd: np.ndarray
    pc: np.ndarray
    grad: np.ndarray
    degenerate: np.ndarray
    flagged: np.ndarray
    line_id: np.ndarray
    width: int
    height: int

    def __len__(self) -> int:
        return len(self.pd)

    def subset(self, mask) -> "SparsePointSet":
        return SparsePointSet(self.ps[mask], self.pd[mask], self.pc[mask], self.grad[mask],
                              self.degenerate[mask], self.flagged[mask], self.line_id[mask],
                              self.width, self.height)

    def with_disparity(self, pd: np.ndarray) -> "SparsePointSet":
        return replace(self, pd=np.asarray(pd, dtype=np.float64))

    @classmethod
    def from_arrays(cls, ps, pd, width: int, height: int, grad=None, pc=None) -> "SparsePointSet":
        ps = np.asarray(ps, dtype=np.float64).reshape(-1, 2)
        m = len(ps)
        grad = np.zeros((m, 2)) if grad is None else np.asarray(grad, dtype=np.float64).reshape(-1, 2)
        norm = np.linalg.norm(grad, axis=1)
        return cls(ps, np.asarray(pd, dtype=np.float64).reshape(-1),
                   np.zeros((m, 3)) if pc is None else np.asarray(pc, dtype=np.float64).reshape(-1, 3),
                   grad, norm == 0, np.zeros(m, dtype=bool), np.arange(m), width, height)


def entropy_table(n: int) -> np.ndarray:
    """``table[c]`` is the contribution of a bucket holding ``c`` of ``n`` samples.

    Each of the ``c`` samples adds ``-P log2 P`` with ``P = c / n``; ``table[0] = 0``.
    """
    c = np.arange(n + 1, dtype=np.float64)
    p = c / n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(c > 0, -c * p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return t


def entropy(line: EpiLine, epi: Epi, bins: int = DEFAULT_BINS) -> float:
    """Histogram entropy of LAB lightness sampled once per view along ``line``."""
    L = np.ascontiguousarray(epi.pixels[None, :, :, 0], dtype=np.float64)
    E = kernels.line_entropy(L, np.zeros(1, dtype=np.intp), [line.x_top], [line.x_bottom],
                             bins, entropy_table(epi.height))
    return float(E[0])


def _proposals(seed: int, line_ids: np.ndarray, iters: int) -> np.ndarray:
    out = np.empty((len(line_ids), iters, 2))
    for i, lid in enumerate(line_ids):
        out[i] = np.random.default_rng([int(seed), int(lid)]).uniform(-1.0, 1.0, (iters, 2))
    return out


def search_radii(alpha: float, t: float, iters: int) -> np.ndarray:
    return alpha * t ** np.arange(1, iters + 1, dtype=np.float64)


def refine_line(line: EpiLine, epi: Epi, alpha: float = 0.15, t: float = 0.88, iters: int = 10,
                rng_seed: int = 0, bins: int = DEFAULT_BINS, line_id: int = 0) -> EpiLine:
    """Annealed random search on ``(x_top, x_bottom)`` minimizing :func:`entropy`."""
    L = np.ascontiguousarray(epi.pixels[None, :, :, 0], dtype=np.float64)
    props = _proposals(rng_seed, np.array([line_id]), iters)
    xt, xb, _ = kernels.anneal_lines(L, np.zeros(1, dtype=np.intp), [line.x_top], [line.x_bottom],
                                     props, search_radii(alpha, t, iters), bins,
                                     entropy_table(epi.height))
    xt, xb = float(xt[0]), float(xb[0])
    return replace(line, x_top=xt, x_bottom=xb,
                   disparity=float(line_disparity(xt, xb, epi.height, line.axis)))


def refine_lines(lf: LightField, lines: LineSet, alpha: float = 0.15, t: float = 0.88,
                 iters: int = 10, seed: int = 0, bins: int = DEFAULT_BINS) -> LineSet:
    """Refine every line; line ``i`` of the (sorted) set draws from its own stream ``(seed, i)``."""
    if len(lines) == 0 or iters == 0:
        return lines
    out = lines.subset(np.arange(len(lines)))
    radii = search_radii(alpha, t, iters)
    table = entropy_table(lines.height)
    ids = np.arange(len(lines))
    for code, axis in enumerate(AXES):
        sel = np.flatnonzero(lines.axis == code)
        if sel.size == 0:
            continue
        L = np.ascontiguousarray(epi_stack(lf, axis)[..., 0], dtype=np.float64)
        props = _proposals(seed, ids[sel], iters)
        xt, xb, _ = kernels.anneal_lines(L, lines.slice_index[sel], lines.x_top[sel],
                                         lines.x_bottom[sel], props, radii, bins, table)
        out.x_top[sel] = xt
        out.x_bottom[sel] = xb
        out.disparity[sel] = line_disparity(xt, xb, lines.height, axis)
    return out


def project_to_central(lines: LineSet, lf: LightField) -> SparsePointSet:
    """Place each line where it crosses the central view."""
    m = len(lines)
    w, h = lf.w, lf.h
    xc = lines.x_center()
    horiz = lines.axis == 0
    x = np.where(horiz, xc, lines.slice_index.astype(np.float64))
    y = np.where(horiz, lines.slice_index.astype(np.float64), xc)
    xi, yi = np.floor(x + 0.5), np.floor(y + 0.5)
    flagged = (xi < 1) | (xi > w - 2) | (yi < 1) | (yi > h - 2)
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    lab = np.asarray(lf.center_lab, dtype=np.float64)
    pc = np.stack([bilinear(lab[..., ch], x, y) for ch in range(3)], axis=1) if m else np.zeros((0, 3))
    gx, gy = sobel_field(lab)
    g = np.stack([bilinear(gx, x, y), bilinear(gy, x, y)], axis=1) if m else np.zeros((0, 2))
    norm = np.linalg.norm(g, axis=1)
    degenerate = norm == 0
    g = np.where(degenerate[:, None], 0.0, g / np.where(degenerate, 1.0, norm)[:, None])
    return SparsePointSet(np.stack([x, y], axis=1) if m else np.zeros((0, 2)),
                          lines.disparity.astype(np.float64).copy(), pc, g, degenerate, flagged,
                          np.arange(m), w, h)


def trilateral_filter(points: SparsePointSet, sigma_s: float = 10.0, sigma_d: float = 0.1,
                      sigma_c: float = 0.5, radius: float | None = None) -> SparsePointSet:
    """One pass of joint spatial / disparity / colour filtering of ``pd``.

    Each output is the normalized weighted mean of the neighbour disparities
    ``q_d`` within ``radius`` (default ``3 * sigma_s``), the point itself included.
    """
    if len(points) == 0:
        return points
    radius = 3.0 * sigma_s if radius is None else radius
    pd = kernels.trilateral(points.ps, points.pd, points.pc, sigma_s, sigma_d, sigma_c, radius)
    return points.with_disparity(pd)
