"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Both backends take identical arguments.  ``line_alignment`` and
``anneal_lines`` perform the same floating point operations in the same
order, so their outputs match bit for bit; ``trilateral`` agrees to
rounding.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def _sample_rows(field, epi_idx, x_top, x_bot, frac):
    """Bilinear samples of ``field[e, r, x]`` along every line; returns ``(m, n)`` and x positions."""
    n_rows, width = field.shape[1], field.shape[2]
    x = x_top[:, None] + (x_bot - x_top)[:, None] * frac[None, :]
    xc = np.clip(x, 0.0, width - 1.0)
    x0 = np.minimum(np.floor(xc).astype(np.intp), width - 2)
    f = xc - x0
    e = epi_idx[:, None]
    r = np.arange(n_rows)[None, :]
    vals = field[e, r, x0] * (1.0 - f) + field[e, r, x0 + 1] * f
    return vals, x


def line_alignment(gx, gy, epi_idx, x_top, x_bot, cos_tau_f, cos_tau_v):
    """Count gradient-aligned samples per line and test the central sample.

    Returns ``(counts, central)`` where ``central`` is 1 when the central-row
    sample is aligned within ``cos_tau_v``.  Samples whose rounded column is
    on the outer pixel ring are never aligned.
    """
    gx = np.asarray(gx, dtype=np.float64)
    gy = np.asarray(gy, dtype=np.float64)
    epi_idx = np.asarray(epi_idx, dtype=np.intp)
    x_top = np.asarray(x_top, dtype=np.float64)
    x_bot = np.asarray(x_bot, dtype=np.float64)
    n_rows, width = gx.shape[1], gx.shape[2]
    frac = np.arange(n_rows) / (n_rows - 1.0)
    sx, x = _sample_rows(gx, epi_idx, x_top, x_bot, frac)
    sy, _ = _sample_rows(gy, epi_idx, x_top, x_bot, frac)
    nx = np.full_like(x_top, n_rows - 1.0)
    ny = -(x_bot - x_top)
    nn = np.sqrt(nx * nx + ny * ny)
    gn = np.sqrt(sx * sx + sy * sy)
    dot = np.abs(sx * nx[:, None] + sy * ny[:, None])
    xi = np.floor(x + 0.5)
    ok = (gn > 0.0) & (xi >= 1.0) & (xi <= width - 2.0)
    denom = np.where(ok, gn * nn[:, None], 1.0)
    cosang = np.where(ok, dot / denom, -1.0)
    counts = np.count_nonzero(cosang > cos_tau_f, axis=1).astype(np.int32)
    central = (cosang[:, n_rows // 2] > cos_tau_v).astype(np.uint8)
    return counts, central


def _entropy_many(L, epi_idx, x_top, x_bot, frac, bins, table):
    vals, _ = _sample_rows(L, epi_idx, x_top, x_bot, frac)
    b = np.minimum((np.clip(vals, 0.0, 1.0) * bins).astype(np.intp), bins - 1)
    m = len(x_top)
    flat = (np.arange(m)[:, None] * bins + b).ravel()
    counts = np.bincount(flat, minlength=m * bins).reshape(m, bins)
    E = np.zeros(m)
    for k in range(bins):
        E = E + table[counts[:, k]]
    return E


def line_entropy(L, epi_idx, x_top, x_bot, bins, table):
    L = np.asarray(L, dtype=np.float64)
    n_rows = L.shape[1]
    frac = np.arange(n_rows) / (n_rows - 1.0)
    return _entropy_many(L, np.asarray(epi_idx, dtype=np.intp), np.asarray(x_top, dtype=np.float64),
                         np.asarray(x_bot, dtype=np.float64), frac, bins, np.asarray(table, dtype=np.float64))


def anneal_lines(L, epi_idx, x_top, x_bot, proposals, radii, bins, table):
    """Random search over line intercepts, accepting strict entropy decreases.

    ``proposals[i, j]`` holds two uniform draws in [-1, 1] for line ``i`` at
    iteration ``j``; the step is scaled by ``radii[j]``.  Proposals leaving
    ``[0, width - 1]`` are skipped.
    """
    L = np.asarray(L, dtype=np.float64)
    epi_idx = np.asarray(epi_idx, dtype=np.intp)
    xt = np.array(x_top, dtype=np.float64)
    xb = np.array(x_bot, dtype=np.float64)
    table = np.asarray(table, dtype=np.float64)
    n_rows, width = L.shape[1], L.shape[2]
    frac = np.arange(n_rows) / (n_rows - 1.0)
    E = _entropy_many(L, epi_idx, xt, xb, frac, bins, table)
    for j, rad in enumerate(radii):
        pt = xt + proposals[:, j, 0] * rad
        pb = xb + proposals[:, j, 1] * rad
        inside = (pt >= 0.0) & (pt <= width - 1.0) & (pb >= 0.0) & (pb <= width - 1.0)
        Ep = _entropy_many(L, epi_idx, np.where(inside, pt, xt), np.where(inside, pb, xb),
                           frac, bins, table)
        acc = inside & (Ep < E)
        xt = np.where(acc, pt, xt)
        xb = np.where(acc, pb, xb)
        E = np.where(acc, Ep, E)
    return xt, xb, E


def trilateral(ps, pd, pc, sigma_s, sigma_d, sigma_c, radius, chunk=2048):
    """Normalized spatial x disparity x colour Gaussian average of neighbour disparities."""
    ps = np.asarray(ps, dtype=np.float64)
    pd = np.asarray(pd, dtype=np.float64)
    pc = np.asarray(pc, dtype=np.float64)
    m = len(pd)
    out = np.empty(m)
    tree = cKDTree(ps)
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        sub = cKDTree(ps[lo:hi])
        # query with slack, then apply the compiled kernel's squared-distance test
        # so points exactly on the radius are treated alike by both backends
        pairs = sub.sparse_distance_matrix(tree, radius * (1 + 1e-9) + 1e-12, output_type="ndarray")
        i = pairs["i"].astype(np.intp) + lo
        j = pairs["j"].astype(np.intp)
        dx = ps[i, 0] - ps[j, 0]
        dy = ps[i, 1] - ps[j, 1]
        d2 = dx * dx + dy * dy
        keep = d2 <= radius * radius
        i, j, d2 = i[keep], j[keep], d2[keep]
        dd = pd[i] - pd[j]
        dc2 = np.sum((pc[i] - pc[j]) ** 2, axis=1)
        wgt = np.exp(-d2 / (2 * sigma_s ** 2) - dd * dd / (2 * sigma_d ** 2)
                     - dc2 / (2 * sigma_c ** 2))
        # the pair list includes the point itself and coincident points
        num = np.bincount(i - lo, weights=wgt * pd[j], minlength=hi - lo)
        den = np.bincount(i - lo, weights=wgt, minlength=hi - lo)
        out[lo:hi] = num / den
    return out
