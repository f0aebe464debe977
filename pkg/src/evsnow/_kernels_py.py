"""NumPy/Python fallback for the hot per-event kernels.

Same contracts as the compiled twin in ``_kernels.pyx``; selected at import
time by ``kernels`` when the extension is unavailable. Classification is
fully vectorized; detection keeps a per-pixel store in a dict and loops
over inceptive events only.
"""
from __future__ import annotations

import numpy as np

from .events import CLS_INCEPTIVE, CLS_NOISY, CLS_TRAILING

_GAP_INF = np.iinfo(np.int64).max


def classify_events(t, x, y, p, width, height, delta_us, per_polarity):
    """Label each event inceptive/trailing/noisy by its gap chain.

    Chains are per pixel, split by polarity when ``per_polarity`` is true.
    Within a chain, with prev/next the gaps to the neighboring chain events
    (infinite at chain boundaries): prev <= delta -> trailing; prev > delta
    and next <= delta -> inceptive; otherwise noisy.

    Returns ``(cls, ie_ref, magnitude)`` arrays of length n: trailing events
    carry the stream index of their owning inceptive event in ``ie_ref``
    (-1 elsewhere) and each inceptive event's trailing count in ``magnitude``.
    """
    n = t.shape[0]
    cls = np.zeros(n, np.uint8)
    ie_ref = np.full(n, -1, np.int64)
    magnitude = np.zeros(n, np.int64)
    if n == 0:
        return cls, ie_ref, magnitude

    chain = y.astype(np.int64) * width + x.astype(np.int64)
    if per_polarity:
        chain = chain * 2 + p

    # Stable sort groups each chain contiguously while preserving time order.
    order = np.argsort(chain, kind="stable")
    tc = t[order].astype(np.int64)
    cc = chain[order]

    same_prev = np.empty(n, bool)
    same_prev[0] = False
    same_prev[1:] = cc[1:] == cc[:-1]

    gap_prev = np.full(n, _GAP_INF, np.int64)
    gap_next = np.full(n, _GAP_INF, np.int64)
    gaps = tc[1:] - tc[:-1]
    inner = same_prev[1:]
    gap_prev[1:][inner] = gaps[inner]
    gap_next[:-1][inner] = gaps[inner]

    is_te = gap_prev <= delta_us
    is_ie = ~is_te & (gap_next <= delta_us)
    cls_sorted = np.where(is_te, CLS_TRAILING,
                          np.where(is_ie, CLS_INCEPTIVE, CLS_NOISY)).astype(np.uint8)
    cls[order] = cls_sorted

    # Owner of each trailing event: the most recent inceptive event in its
    # chain. A trailing event always has one (the first event of a <=delta
    # run has an infinite prev gap, hence is inceptive), and chains are
    # contiguous blocks here, so a plain running maximum of inceptive
    # positions cannot leak across chains for trailing events.
    pos = np.arange(n)
    last_ie_pos = np.maximum.accumulate(np.where(is_ie, pos, -1))
    te_pos = pos[is_te]
    owners_sorted = last_ie_pos[te_pos]
    ie_ref[order[te_pos]] = order[owners_sorted]
    counts = np.bincount(owners_sorted, minlength=n)
    magnitude[order] = counts
    return cls, ie_ref, magnitude


def detect_events(t, x, y, p, cls, eta_us, omega, width, height):
    """Pair positive/negative inceptive events within (omega, eta) windows.

    ``eta_us`` is a per-event int64 array (the threshold applied at each
    negative inceptive event). Returns a bool array marking the paired
    inceptive events; trailing-event propagation is done by the caller.
    """
    n = t.shape[0]
    snow = np.zeros(n, bool)
    store: dict[tuple[int, int], tuple[int, int]] = {}
    ie_idx = np.nonzero(cls == CLS_INCEPTIVE)[0]
    ti = t.astype(np.int64)
    for i in ie_idx:
        xi = int(x[i])
        yi = int(y[i])
        tn = int(ti[i])
        if p[i]:
            store[(yi, xi)] = (tn, int(i))
            continue
        eta = int(eta_us[i])
        best_t = -1
        best_key = None
        for yy in range(max(yi - omega, 0), min(yi + omega, height - 1) + 1):
            for xx in range(max(xi - omega, 0), min(xi + omega, width - 1) + 1):
                entry = store.get((yy, xx))
                if entry is None:
                    continue
                dt = tn - entry[0]
                # Strict > keeps the first (lexicographically smallest) pixel
                # among time ties, matching the scan order.
                if 0 < dt <= eta and entry[0] > best_t:
                    best_t = entry[0]
                    best_key = (yy, xx)
        if best_key is not None:
            snow[store[best_key][1]] = True
            snow[i] = True
            del store[best_key]
    return snow
