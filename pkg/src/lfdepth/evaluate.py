"""Disparity metrics, error and normal maps, and the reprojection-sign baseline."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .diffusion import depth_profiles
from .lightfield import DimensionMismatchError, DisparityMap, LightField, bilinear
from .refine import SparsePointSet

GT_EDGE_THRESHOLD = 0.1
DEFAULT_TOLERANCES = (0, 1, 2, 3, 4)
# a central pixel counts as occluded in a view when a splat beats it by this much
OCCLUSION_MARGIN = 0.1


@dataclass
class MetricsReport:
    mse_x100: float
    q25: float
    q50: float
    rmse: float
    boundary_recall: dict = field(default_factory=dict)
    gt_edge_pixels: int = 0
    abs_error: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("abs_error")
        d["boundary_recall"] = {str(k): v for k, v in self.boundary_recall.items()}
        return d


def _values(d) -> np.ndarray:
    return d.values if isinstance(d, DisparityMap) else np.asarray(d, dtype=np.float64)


def depth_edges(d: np.ndarray, threshold: float = GT_EDGE_THRESHOLD) -> np.ndarray:
    """Pixels whose disparity differs from a 4-neighbour by more than ``threshold``."""
    d = np.asarray(d, dtype=np.float64)
    e = np.zeros(d.shape, dtype=bool)
    dx = np.abs(np.diff(d, axis=1)) > threshold
    dy = np.abs(np.diff(d, axis=0)) > threshold
    e[:, :-1] |= dx
    e[:, 1:] |= dx
    e[:-1, :] |= dy
    e[1:, :] |= dy
    return e


def boundary_recall(pred: np.ndarray, gt: np.ndarray, tolerances=DEFAULT_TOLERANCES,
                    threshold: float = GT_EDGE_THRESHOLD) -> tuple[dict, int]:
    gt_e = depth_edges(gt, threshold)
    pr_e = depth_edges(pred, threshold)
    n = int(gt_e.sum())
    if n == 0:
        return {t: 1.0 for t in tolerances}, 0
    if pr_e.any():
        dist = ndimage.distance_transform_edt(~pr_e)
    else:
        dist = np.full(gt.shape, np.inf)
    return {t: float(np.mean(dist[gt_e] <= t)) for t in tolerances}, n


def compute_metrics(pred, gt, tolerances=DEFAULT_TOLERANCES,
                    edge_threshold: float = GT_EDGE_THRESHOLD) -> MetricsReport:
    p, g = _values(pred), _values(gt)
    if p.shape != g.shape:
        raise DimensionMismatchError(g.shape, p.shape, "prediction")
    err = p - g
    a = np.abs(err)
    recall, n = boundary_recall(p, g, tolerances, edge_threshold)
    return MetricsReport(
        mse_x100=float(100.0 * np.mean(err * err)),
        q25=float(np.percentile(a, 25)),
        q50=float(np.percentile(a, 50)),
        rmse=float(np.sqrt(np.mean(err * err))),
        boundary_recall=recall,
        gt_edge_pixels=n,
        abs_error=a,
    )


def _visibility(d: np.ndarray, ds: float, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Target coordinates of every central pixel in one view and its z-buffer visibility."""
    h, w = d.shape
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    x = u + d * ds
    y = v + d * dt
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xi = np.floor(x + 0.5).astype(np.intp)
    yi = np.floor(y + 0.5).astype(np.intp)
    zbuf = np.full((h, w), -np.inf)
    flat = yi[inside] * w + xi[inside]
    np.maximum.at(zbuf.reshape(-1), flat, d[inside])
    visible = inside.copy()
    visible[inside] = d[inside] >= zbuf.reshape(-1)[flat] - OCCLUSION_MARGIN
    return x, y, visible


def reprojection_error(lf: LightField, disparity) -> np.ndarray:
    """Mean L1 RGB error of every non-central view warped onto the central view.

    Pixels that are occluded or fall outside a view are left out of that view's
    term; pixels seen by no other view get zero error.
    """
    d = _values(disparity)
    if d.shape != (lf.h, lf.w):
        raise DimensionMismatchError((lf.h, lf.w), d.shape, "disparity")
    views = np.asarray(lf.views, dtype=np.float64)
    tc, sc = lf.angular_center
    ref = views[tc, sc]
    total = np.zeros(d.shape)
    count = np.zeros(d.shape)
    for t in range(lf.n_t):
        for s in range(lf.n_s):
            if s == sc and t == tc:
                continue
            x, y, vis = _visibility(d, s - sc, t - tc)
            img = np.moveaxis(views[t, s], -1, 0)
            warped = bilinear(img, x, y)
            l1 = np.abs(warped - np.moveaxis(ref, -1, 0)).mean(axis=0)
            total += np.where(vis, l1, 0.0)
            count += vis
    return np.where(count > 0, total / np.maximum(count, 1), 0.0)


def reprojection_error_maps(lf: LightField, D_f, D_b) -> tuple[np.ndarray, np.ndarray]:
    return reprojection_error(lf, D_f), reprojection_error(lf, D_b)


def reproj_sign_baseline(points: SparsePointSet, err_f: np.ndarray, err_b: np.ndarray,
                         window: str = "pixel") -> np.ndarray:
    """+1 where the forward solve reprojects better (or equally well) at each point.

    ``window="pixel"`` compares the errors at the point's own pixel.  That
    pixel sits on the edge and often cannot tell the two solves apart, so
    ``"profile"`` instead averages over the samples along the gradient that
    the step filter reads.
    """
    if window == "pixel":
        h, w = err_f.shape
        xi = np.clip(np.floor(points.ps[:, 0] + 0.5).astype(np.intp), 0, w - 1)
        yi = np.clip(np.floor(points.ps[:, 1] + 0.5).astype(np.intp), 0, h - 1)
        ef, eb = err_f[yi, xi], err_b[yi, xi]
    elif window == "profile":
        ef = depth_profiles(points, err_f).mean(axis=1)
        eb = depth_profiles(points, err_b).mean(axis=1)
    else:
        raise ValueError("window must be 'profile' or 'pixel'")
    return np.where(eb < ef, -1.0, 1.0)


def surface_normals(disparity) -> np.ndarray:
    """Unit normals ``(h, w, 3)`` treating disparity as depth (central differences)."""
    d = _values(disparity)
    dz_dy, dz_dx = np.gradient(d)
    n = np.stack([-dz_dx, -dz_dy, np.ones_like(d)], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def normal_map(disparity) -> np.ndarray:
    """Normals encoded as RGB in [0, 1]."""
    return (surface_normals(disparity) + 1.0) / 2.0


def error_image(report: MetricsReport, vmax: float | None = None) -> np.ndarray:
    """Absolute error as a gray image in [0, 1]; ``vmax`` defaults to the error maximum."""
    a = report.abs_error
    vmax = float(a.max()) if vmax is None else vmax
    return np.clip(a / vmax, 0.0, 1.0) if vmax > 0 else np.zeros_like(a)
