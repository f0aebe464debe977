# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-event kernels: inceptive classification and pair detection.

Contract-identical to ``_kernels_py``; see that module for semantics."""
import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF CLS_INCEPTIVE = 1
DEF CLS_TRAILING = 2
DEF CLS_NOISY = 3

cdef cnp.int64_t GAP_INF = np.iinfo(np.int64).max


def classify_events(t, x, y, p, int width, int height, long long delta_us,
                    bint per_polarity):
    cdef Py_ssize_t n = t.shape[0]
    cls_arr = np.zeros(n, np.uint8)
    ie_ref_arr = np.full(n, -1, np.int64)
    mag_arr = np.zeros(n, np.int64)
    if n == 0:
        return cls_arr, ie_ref_arr, mag_arr

    cdef cnp.int64_t[::1] tv = np.ascontiguousarray(t, dtype=np.int64)
    cdef cnp.uint16_t[::1] xv = np.ascontiguousarray(x, dtype=np.uint16)
    cdef cnp.uint16_t[::1] yv = np.ascontiguousarray(y, dtype=np.uint16)
    cdef cnp.uint8_t[::1] pv = np.ascontiguousarray(p, dtype=np.uint8)
    cdef cnp.uint8_t[::1] cls = cls_arr
    cdef cnp.int64_t[::1] ie_ref = ie_ref_arr
    cdef cnp.int64_t[::1] mag = mag_arr

    cdef Py_ssize_t nchains = width * height
    if per_polarity:
        nchains *= 2
    last_arr = np.full(nchains, -1, np.int64)
    cdef cnp.int64_t[::1] last = last_arr

    gap_prev_arr = np.full(n, GAP_INF, np.int64)
    gap_next_arr = np.full(n, GAP_INF, np.int64)
    cdef cnp.int64_t[::1] gap_prev = gap_prev_arr
    cdef cnp.int64_t[::1] gap_next = gap_next_arr

    cdef Py_ssize_t i, c, j
    cdef cnp.int64_t g
    for i in range(n):
        c = <Py_ssize_t> yv[i] * width + xv[i]
        if per_polarity:
            c = c * 2 + pv[i]
        j = last[c]
        if j >= 0:
            g = tv[i] - tv[j]
            gap_prev[i] = g
            gap_next[j] = g
        last[c] = i

    for i in range(n):
        if gap_prev[i] <= delta_us:
            cls[i] = CLS_TRAILING
        elif gap_next[i] <= delta_us:
            cls[i] = CLS_INCEPTIVE
        else:
            cls[i] = CLS_NOISY

    # Second chain walk: attach trailing events to the most recent
    # inceptive event of their chain and count them.
    last_arr[:] = -1
    for i in range(n):
        c = <Py_ssize_t> yv[i] * width + xv[i]
        if per_polarity:
            c = c * 2 + pv[i]
        if cls[i] == CLS_INCEPTIVE:
            last[c] = i
        elif cls[i] == CLS_TRAILING:
            j = last[c]
            ie_ref[i] = j
            mag[j] += 1
    return cls_arr, ie_ref_arr, mag_arr


def detect_events(t, x, y, p, cls, eta_us, int omega, int width, int height):
    cdef Py_ssize_t n = t.shape[0]
    snow_arr = np.zeros(n, np.uint8)
    if n == 0:
        return snow_arr.astype(bool)

    cdef cnp.int64_t[::1] tv = np.ascontiguousarray(t, dtype=np.int64)
    cdef cnp.uint16_t[::1] xv = np.ascontiguousarray(x, dtype=np.uint16)
    cdef cnp.uint16_t[::1] yv = np.ascontiguousarray(y, dtype=np.uint16)
    cdef cnp.uint8_t[::1] pv = np.ascontiguousarray(p, dtype=np.uint8)
    cdef cnp.uint8_t[::1] cv = np.ascontiguousarray(cls, dtype=np.uint8)
    cdef cnp.int64_t[::1] eta = np.ascontiguousarray(eta_us, dtype=np.int64)
    cdef cnp.uint8_t[::1] snow = snow_arr

    store_t_arr = np.zeros(width * height, np.int64)
    store_idx_arr = np.full(width * height, -1, np.int64)
    cdef cnp.int64_t[::1] store_t = store_t_arr
    cdef cnp.int64_t[::1] store_idx = store_idx_arr

    cdef Py_ssize_t i, pix, best_pix, base
    cdef int xi, yi, yy, xx, y0, y1, x0, x1
    cdef cnp.int64_t ti, dt, best_t, eta_i
    for i in range(n):
        if cv[i] != CLS_INCEPTIVE:
            continue
        xi = xv[i]
        yi = yv[i]
        ti = tv[i]
        if pv[i]:
            pix = <Py_ssize_t> yi * width + xi
            store_t[pix] = ti
            store_idx[pix] = i
            continue
        eta_i = eta[i]
        best_t = -1
        best_pix = -1
        y0 = yi - omega
        if y0 < 0:
            y0 = 0
        y1 = yi + omega
        if y1 > height - 1:
            y1 = height - 1
        x0 = xi - omega
        if x0 < 0:
            x0 = 0
        x1 = xi + omega
        if x1 > width - 1:
            x1 = width - 1
        for yy in range(y0, y1 + 1):
            base = <Py_ssize_t> yy * width
            for xx in range(x0, x1 + 1):
                pix = base + xx
                if store_idx[pix] >= 0:
                    dt = ti - store_t[pix]
                    if 0 < dt <= eta_i and store_t[pix] > best_t:
                        best_t = store_t[pix]
                        best_pix = pix
        if best_pix >= 0:
            snow[store_idx[best_pix]] = 1
            snow[i] = 1
            store_idx[best_pix] = -1
    return snow_arr.astype(bool)
