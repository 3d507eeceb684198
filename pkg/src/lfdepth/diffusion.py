"""Sparse-to-dense disparity by weighted Poisson diffusion.

The energy ``sum_p ld(p) (S(p) - D(p))^2 + sum_(p,q) ls(p,q) (D(p) - D(q))^2``
over four-connected pixel pairs is minimized through its normal equations,
an SPD five-point system solved with preconditioned conjugate gradients.
Edge weights are the smaller of the two endpoint smoothness weights.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.linalg import LinearOperator, cg

from .lightfield import DisparityMap, LightField, ParameterError, bilinear, sobel_field
from .refine import SparsePointSet

log = logging.getLogger(__name__)

DIRECTIONAL_DATA_WEIGHT = 1e6
EPS = 1e-4
STEP_FILTER = np.array([-1.0, -1.0, 1.0, 1.0])
PROFILE_OFFSETS = np.array([-1.5, -0.5, 0.5, 1.5])


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass
class SplatImage:
    values: np.ndarray
    occupied: np.ndarray
    # index of the point that won each occupied pixel (-1 elsewhere)
    source: np.ndarray


@dataclass
class WeightMaps:
    lambda_d: np.ndarray
    lambda_s: np.ndarray

    def __post_init__(self):
        if self.lambda_d.shape != self.lambda_s.shape:
            raise ParameterError("weight maps must share a shape")
        if not (np.all(np.isfinite(self.lambda_d)) and np.all(np.isfinite(self.lambda_s))):
            raise ParameterError("weights must be finite")
        if np.any(self.lambda_d < 0) or np.any(self.lambda_s <= 0):
            raise ParameterError("need lambda_d >= 0 and lambda_s > 0")


@dataclass
class SolverConfig:
    max_iters: int = 20000
    residual_tol: float = 1e-9
    preconditioner: str = "jacobi"  # jacobi | multigrid | none

    def __post_init__(self):
        if self.residual_tol <= 0:
            raise ParameterError("residual_tol must be positive")
        if self.preconditioner not in ("jacobi", "multigrid", "none"):
            raise ParameterError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    converged: bool


def offset_positions(points: SparsePointSet, sign) -> np.ndarray:
    sign = np.zeros(len(points)) if sign is None else np.broadcast_to(
        np.asarray(sign, dtype=np.float64), (len(points),))
    return points.ps + sign[:, None] * points.grad


def splat(points: SparsePointSet, offset_sign, w: int, h: int, priority=None) -> SplatImage:
    """Rasterize ``p + sign * grad`` to the nearest pixel.

    ``offset_sign`` is +1, -1, ``None``/0 (no offset) or one sign per point.
    Colliding points keep the larger disparity; among equal disparities the
    larger ``priority`` wins, then the lower position, so the result does not
    depend on point order.  Points landing outside the image are dropped.
    """
    values = np.zeros((h, w))
    occupied = np.zeros((h, w), dtype=bool)
    source = np.full((h, w), -1, dtype=np.intp)
    if len(points) == 0:
        return SplatImage(values, occupied, source)
    pos = offset_positions(points, offset_sign)
    xi = np.floor(pos[:, 0] + 0.5).astype(np.intp)
    yi = np.floor(pos[:, 1] + 0.5).astype(np.intp)
    inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        return SplatImage(values, occupied, source)
    prio = np.zeros(len(points)) if priority is None else np.asarray(priority, dtype=np.float64)
    pd = points.pd
    # ascending sort; the last entry per pixel wins
    order = idx[np.lexsort((-points.ps[idx, 1], -points.ps[idx, 0], prio[idx], pd[idx]))]
    pix = yi[order] * w + xi[order]
    rev_order, rev_pix = order[::-1], pix[::-1]
    upix, first = np.unique(rev_pix, return_index=True)
    win = rev_order[first]
    values.flat[upix] = pd[win]
    occupied.flat[upix] = True
    source.flat[upix] = win
    return SplatImage(values, occupied, source)


def _edge_weights(lambda_s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    wx = np.minimum(lambda_s[:, :-1], lambda_s[:, 1:])
    wy = np.minimum(lambda_s[:-1, :], lambda_s[1:, :])
    return wx, wy


def build_system(sp_img: SplatImage, weights: WeightMaps) -> tuple[sp.csr_matrix, np.ndarray]:
    """Normal equations ``A x = b`` of the weighted diffusion energy (halved)."""
    h, w = weights.lambda_d.shape
    n = h * w
    ld = np.where(sp_img.occupied, weights.lambda_d, 0.0)
    wx, wy = _edge_weights(weights.lambda_s)
    ids = np.arange(n).reshape(h, w)
    rows = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    cols = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    ew = np.concatenate([wx.ravel(), wy.ravel()])
    diag = ld.ravel().copy()
    np.add.at(diag, rows, ew)
    np.add.at(diag, cols, ew)
    A = sp.coo_matrix(
        (np.concatenate([diag, -ew, -ew]),
         (np.concatenate([np.arange(n), rows, cols]), np.concatenate([np.arange(n), cols, rows]))),
        shape=(n, n),
    ).tocsr()
    b = (ld * np.where(sp_img.occupied, sp_img.values, 0.0)).ravel()
    return A, b


def dense_solve(sp_img: SplatImage, weights: WeightMaps) -> np.ndarray:
    """Direct dense solve of the normal equations; reference for small grids."""
    A, b = build_system(sp_img, weights)
    return np.linalg.solve(A.toarray(), b).reshape(weights.lambda_d.shape)


def _initial_guess(sp_img: SplatImage) -> np.ndarray:
    # nearest occupied pixel's value
    _, (iy, ix) = ndimage.distance_transform_edt(~sp_img.occupied, return_indices=True)
    return sp_img.values[iy, ix]


def _preconditioner(A: sp.csr_matrix, kind: str):
    if kind == "none":
        return None
    if kind == "multigrid":
        try:
            import pyamg
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise ParameterError("multigrid preconditioner needs pyamg") from exc
        return pyamg.smoothed_aggregation_solver(A).aspreconditioner(cycle="V")
    inv = 1.0 / A.diagonal()
    return LinearOperator(A.shape, matvec=lambda x: inv * x, dtype=np.float64)


def solve_poisson(sp_img: SplatImage, weights: WeightMaps, cfg: SolverConfig | None = None
                  ) -> tuple[DisparityMap, SolveInfo]:
    """Minimize the diffusion energy; returns the dense map and solver diagnostics."""
    cfg = cfg or SolverConfig()
    if not np.any(sp_img.occupied & (weights.lambda_d > 0)):
        raise ParameterError("no constrained pixel: need a splatted pixel with lambda_d > 0")
    A, b = build_system(sp_img, weights)
    x0 = _initial_guess(sp_img).ravel()
    bnorm = np.linalg.norm(b)
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    x, status = cg(A, b, x0=x0, rtol=cfg.residual_tol, atol=0.0, maxiter=cfg.max_iters,
                   M=_preconditioner(A, cfg.preconditioner), callback=count)
    res = float(np.linalg.norm(b - A @ x) / bnorm) if bnorm > 0 else 0.0
    converged = status == 0
    if not converged:
        warnings.warn(f"PCG stopped after {iters} iterations, relative residual {res:.3e}",
                      ConvergenceWarning, stacklevel=2)
    values = x.reshape(weights.lambda_d.shape)
    return DisparityMap(values), SolveInfo(iters, res, converged)


def image_gradient_magnitude(lf: LightField) -> np.ndarray:
    gx, gy = sobel_field(np.asarray(lf.center_lab, dtype=np.float64))
    return np.hypot(gx, gy)


def directional_weights(grad_mag: np.ndarray, sp_img: SplatImage,
                        data_weight: float = DIRECTIONAL_DATA_WEIGHT, eps: float = EPS) -> WeightMaps:
    return WeightMaps(np.where(sp_img.occupied, data_weight, 0.0), 1.0 / (grad_mag + eps))


def directional_solve(points: SparsePointSet, sign, lf: LightField, cfg: SolverConfig | None = None,
                      data_weight: float = DIRECTIONAL_DATA_WEIGHT, eps: float = EPS,
                      grad_mag: np.ndarray | None = None) -> tuple[DisparityMap, SolveInfo]:
    """Diffuse the labels offset by ``sign * grad`` (``None`` for the naive, un-offset solve)."""
    grad_mag = image_gradient_magnitude(lf) if grad_mag is None else grad_mag
    h, w = grad_mag.shape
    img = splat(points, sign, w, h)
    return solve_poisson(img, directional_weights(grad_mag, img, data_weight, eps), cfg)


def depth_profiles(points: SparsePointSet, dmap: np.ndarray, offsets=PROFILE_OFFSETS) -> np.ndarray:
    """Disparities sampled along each point's gradient, ``(m, len(offsets))``."""
    pos = points.ps[:, None, :] + np.asarray(offsets)[None, :, None] * points.grad[:, None, :]
    return bilinear(np.asarray(dmap, dtype=np.float64), pos[..., 0], pos[..., 1])


def step_response(profiles: np.ndarray, flat_tol: float = 1e-3, lo=None, hi=None) -> np.ndarray:
    """``|F . N|`` of min-max normalized profiles; flat windows score zero.

    ``lo``/``hi`` override the per-row range used for normalization.
    """
    lo = profiles.min(axis=1, keepdims=True) if lo is None else np.reshape(lo, (-1, 1))
    hi = profiles.max(axis=1, keepdims=True) if hi is None else np.reshape(hi, (-1, 1))
    span = hi - lo
    flat = span[:, 0] <= flat_tol
    norm = (profiles - lo) / np.where(span > flat_tol, span, 1.0)
    r = np.abs(norm @ STEP_FILTER)
    return np.where(flat, 0.0, r)


def bidirectional_weights(points: SparsePointSet, D_f, D_b, flat_tol: float = 1e-3,
                          joint: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Per-point step confidence ``lambda_e`` and the offset sign whose solve attains it.

    With ``joint`` both profiles at a point share one normalization range, so a
    tiny wobble in one solve cannot score like a real depth step in the other.
    """
    df = D_f.values if isinstance(D_f, DisparityMap) else D_f
    db = D_b.values if isinstance(D_b, DisparityMap) else D_b
    pf = depth_profiles(points, df)
    pb = depth_profiles(points, db)
    lo = hi = None
    if joint:
        lo = np.minimum(pf.min(axis=1), pb.min(axis=1))
        hi = np.maximum(pf.max(axis=1), pb.max(axis=1))
    rf = step_response(pf, flat_tol, lo, hi)
    rb = step_response(pb, flat_tol, lo, hi)
    lam = np.maximum(rf, rb)
    sign = np.where(rb > rf, -1.0, 1.0)
    deg = points.degenerate
    lam = np.where(deg, 0.0, lam)
    sign = np.where(deg, 1.0, sign)
    return lam, sign


def final_weights(sp_img: SplatImage, lambda_e: np.ndarray, grad_mag: np.ndarray, D_f, D_b,
                  omega: float = 150.0, a: float = 3.0, eps: float = EPS) -> WeightMaps:
    """Confidence-scaled data weights and depth-edge-aware smoothness weights.

    Smoothness is ``1 / ((|grad I| + eps) (|grad (D_f + D_b)| + eps))`` capped at ``1 / eps``.
    """
    df = D_f.values if isinstance(D_f, DisparityMap) else D_f
    db = D_b.values if isinstance(D_b, DisparityMap) else D_b
    lam_d = np.zeros(sp_img.values.shape)
    occ = sp_img.occupied
    lam_d[occ] = omega * np.exp(a * lambda_e[sp_img.source[occ]])
    sx, sy = sobel_field(df + db)
    dmag = np.hypot(sx, sy)
    lam_s = np.minimum(1.0 / ((grad_mag + eps) * (dmag + eps)), 1.0 / eps)
    return WeightMaps(lam_d, lam_s)


def final_solve(points: SparsePointSet, signs, lambda_e, D_f, D_b, lf: LightField,
                cfg: SolverConfig | None = None, omega: float = 150.0, a: float = 3.0,
                eps: float = EPS, grad_mag: np.ndarray | None = None
                ) -> tuple[DisparityMap, SolveInfo, WeightMaps]:
    """Diffuse labels placed on their chosen side with the final weighting."""
    grad_mag = image_gradient_magnitude(lf) if grad_mag is None else grad_mag
    h, w = grad_mag.shape
    signs = np.where(points.degenerate, 0.0, signs)
    img = splat(points, signs, w, h, priority=lambda_e)
    wm = final_weights(img, np.asarray(lambda_e, dtype=np.float64), grad_mag, D_f, D_b, omega, a, eps)
    dmap, info = solve_poisson(img, wm, cfg)
    return dmap, info, wm
