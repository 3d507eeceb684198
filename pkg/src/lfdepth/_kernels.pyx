# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.  Semantics mirror ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, floor, sqrt, ceil

cnp.import_array()


cdef inline double _sample(const double[:, :, ::1] f, Py_ssize_t e, Py_ssize_t r,
                           double x, Py_ssize_t width) noexcept nogil:
    cdef double xc = x
    cdef Py_ssize_t x0
    cdef double fr
    if xc < 0.0:
        xc = 0.0
    elif xc > width - 1.0:
        xc = width - 1.0
    x0 = <Py_ssize_t>floor(xc)
    if x0 > width - 2:
        x0 = width - 2
    fr = xc - x0
    return f[e, r, x0] * (1.0 - fr) + f[e, r, x0 + 1] * fr


def line_alignment(gx, gy, epi_idx, x_top, x_bot, double cos_tau_f, double cos_tau_v):
    cdef const double[:, :, ::1] GX = np.ascontiguousarray(gx, dtype=np.float64)
    cdef const double[:, :, ::1] GY = np.ascontiguousarray(gy, dtype=np.float64)
    cdef const Py_ssize_t[::1] E = np.ascontiguousarray(epi_idx, dtype=np.intp)
    cdef const double[::1] XT = np.ascontiguousarray(x_top, dtype=np.float64)
    cdef const double[::1] XB = np.ascontiguousarray(x_bot, dtype=np.float64)
    cdef Py_ssize_t m = XT.shape[0]
    cdef Py_ssize_t n_rows = GX.shape[1]
    cdef Py_ssize_t width = GX.shape[2]
    cdef Py_ssize_t center = n_rows // 2
    counts_arr = np.zeros(m, dtype=np.int32)
    central_arr = np.zeros(m, dtype=np.uint8)
    cdef int[::1] counts = counts_arr
    cdef unsigned char[::1] central = central_arr
    cdef Py_ssize_t i, r, e
    cdef double frac, x, xi, sx, sy, nx, ny, nn, gn, dot, c
    with nogil:
        for i in range(m):
            e = E[i]
            nx = n_rows - 1.0
            ny = -(XB[i] - XT[i])
            nn = sqrt(nx * nx + ny * ny)
            for r in range(n_rows):
                frac = r / (n_rows - 1.0)
                x = XT[i] + (XB[i] - XT[i]) * frac
                sx = _sample(GX, e, r, x, width)
                sy = _sample(GY, e, r, x, width)
                gn = sqrt(sx * sx + sy * sy)
                xi = floor(x + 0.5)
                if gn > 0.0 and xi >= 1.0 and xi <= width - 2.0:
                    dot = fabs(sx * nx + sy * ny)
                    c = dot / (gn * nn)
                else:
                    c = -1.0
                if c > cos_tau_f:
                    counts[i] += 1
                if r == center and c > cos_tau_v:
                    central[i] = 1
    return counts_arr, central_arr


cdef double _entropy(const double[:, :, ::1] L, Py_ssize_t e, double xt, double xb,
                     const double[::1] frac, int bins, const double[::1] table,
                     long[::1] hist) noexcept nogil:
    cdef Py_ssize_t n_rows = L.shape[1]
    cdef Py_ssize_t width = L.shape[2]
    cdef Py_ssize_t r, b
    cdef double v, E = 0.0
    for b in range(bins):
        hist[b] = 0
    for r in range(n_rows):
        v = _sample(L, e, r, xt + (xb - xt) * frac[r], width)
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        b = <Py_ssize_t>(v * bins)
        if b > bins - 1:
            b = bins - 1
        hist[b] += 1
    for b in range(bins):
        E = E + table[hist[b]]
    return E


def line_entropy(L, epi_idx, x_top, x_bot, int bins, table):
    cdef const double[:, :, ::1] LL = np.ascontiguousarray(L, dtype=np.float64)
    cdef const Py_ssize_t[::1] EI = np.ascontiguousarray(epi_idx, dtype=np.intp)
    cdef const double[::1] XT = np.ascontiguousarray(x_top, dtype=np.float64)
    cdef const double[::1] XB = np.ascontiguousarray(x_bot, dtype=np.float64)
    cdef const double[::1] T = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t n_rows = LL.shape[1]
    cdef const double[::1] frac = np.arange(n_rows) / (n_rows - 1.0)
    cdef long[::1] hist = np.zeros(bins, dtype=np.int_)
    out = np.empty(XT.shape[0])
    cdef double[::1] O = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(XT.shape[0]):
            O[i] = _entropy(LL, EI[i], XT[i], XB[i], frac, bins, T, hist)
    return out


def anneal_lines(L, epi_idx, x_top, x_bot, proposals, radii, int bins, table):
    cdef const double[:, :, ::1] LL = np.ascontiguousarray(L, dtype=np.float64)
    cdef const Py_ssize_t[::1] EI = np.ascontiguousarray(epi_idx, dtype=np.intp)
    cdef const double[:, :, ::1] P = np.ascontiguousarray(proposals, dtype=np.float64)
    cdef const double[::1] R = np.ascontiguousarray(radii, dtype=np.float64)
    cdef const double[::1] T = np.ascontiguousarray(table, dtype=np.float64)
    xt_arr = np.array(x_top, dtype=np.float64)
    xb_arr = np.array(x_bot, dtype=np.float64)
    cdef double[::1] XT = xt_arr
    cdef double[::1] XB = xb_arr
    cdef Py_ssize_t m = XT.shape[0]
    cdef Py_ssize_t n_rows = LL.shape[1]
    cdef double wmax = LL.shape[2] - 1.0
    cdef const double[::1] frac = np.arange(n_rows) / (n_rows - 1.0)
    cdef long[::1] hist = np.zeros(bins, dtype=np.int_)
    E_arr = np.empty(m)
    cdef double[::1] EO = E_arr
    cdef Py_ssize_t i, j
    cdef double E, Ep, pt, pb
    with nogil:
        for i in range(m):
            E = _entropy(LL, EI[i], XT[i], XB[i], frac, bins, T, hist)
            for j in range(R.shape[0]):
                pt = XT[i] + P[i, j, 0] * R[j]
                pb = XB[i] + P[i, j, 1] * R[j]
                if pt < 0.0 or pt > wmax or pb < 0.0 or pb > wmax:
                    continue
                Ep = _entropy(LL, EI[i], pt, pb, frac, bins, T, hist)
                if Ep < E:
                    XT[i] = pt
                    XB[i] = pb
                    E = Ep
            EO[i] = E
    return xt_arr, xb_arr, E_arr


def trilateral(ps, pd, pc, double sigma_s, double sigma_d, double sigma_c, double radius):
    cdef const double[:, ::1] S = np.ascontiguousarray(ps, dtype=np.float64)
    cdef const double[::1] D = np.ascontiguousarray(pd, dtype=np.float64)
    cdef const double[:, ::1] C = np.ascontiguousarray(pc, dtype=np.float64)
    cdef Py_ssize_t m = D.shape[0]
    out_arr = np.empty(m)
    if m == 0:
        return out_arr
    cdef double[::1] out = out_arr
    # uniform grid with cell size sigma_s; points sorted by cell
    cdef double cell = sigma_s
    xmin = float(np.min(ps[:, 0])); ymin = float(np.min(ps[:, 1]))
    cx_arr = np.floor((np.asarray(ps[:, 0]) - xmin) / cell).astype(np.intp)
    cy_arr = np.floor((np.asarray(ps[:, 1]) - ymin) / cell).astype(np.intp)
    cdef Py_ssize_t ncx = int(cx_arr.max()) + 1
    cdef Py_ssize_t ncy = int(cy_arr.max()) + 1
    key = cy_arr * ncx + cx_arr
    order_arr = np.argsort(key, kind="stable").astype(np.intp)
    starts_arr = np.searchsorted(key[order_arr], np.arange(ncx * ncy + 1)).astype(np.intp)
    cdef const Py_ssize_t[::1] order = order_arr
    cdef const Py_ssize_t[::1] starts = starts_arr
    cdef const Py_ssize_t[::1] CX = cx_arr
    cdef const Py_ssize_t[::1] CY = cy_arr
    cdef Py_ssize_t reach = <Py_ssize_t>ceil(radius / cell)
    cdef double is2 = 1.0 / (2.0 * sigma_s * sigma_s)
    cdef double id2 = 1.0 / (2.0 * sigma_d * sigma_d)
    cdef double ic2 = 1.0 / (2.0 * sigma_c * sigma_c)
    cdef double r2 = radius * radius
    cdef Py_ssize_t i, j, k, gx, gy, c0
    cdef double num, den, dx, dy, d2, dd, dc, wgt
    with nogil:
        for i in range(m):
            num = 0.0
            den = 0.0
            for gy in range(CY[i] - reach, CY[i] + reach + 1):
                if gy < 0 or gy >= ncy:
                    continue
                for gx in range(CX[i] - reach, CX[i] + reach + 1):
                    if gx < 0 or gx >= ncx:
                        continue
                    c0 = gy * ncx + gx
                    for k in range(starts[c0], starts[c0 + 1]):
                        j = order[k]
                        dx = S[i, 0] - S[j, 0]
                        dy = S[i, 1] - S[j, 1]
                        d2 = dx * dx + dy * dy
                        if d2 > r2:
                            continue
                        dd = D[i] - D[j]
                        dc = ((C[i, 0] - C[j, 0]) * (C[i, 0] - C[j, 0])
                              + (C[i, 1] - C[j, 1]) * (C[i, 1] - C[j, 1])
                              + (C[i, 2] - C[j, 2]) * (C[i, 2] - C[j, 2]))
                        wgt = exp(-d2 * is2 - dd * dd * id2 - dc * ic2)
                        num = num + wgt * D[j]
                        den = den + wgt
            out[i] = num / den
    return out_arr
