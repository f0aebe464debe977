"""Snowflake detection by pairing positive/negative inceptive events.

A positive inceptive event marks a bright flake entering a pixel's field
of view, the next negative inceptive event within the temporal threshold
eta and spatial window omega marks its exit; such a pair (and the trailing
events owned by either end) is flagged as snow. Each pixel stores at most
the latest unconsumed positive inceptive event.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from . import kernels
from .events import CLS_INCEPTIVE, CLS_UNCLASSIFIED, Event, LabeledStream, sort_check

EXPIRE_POLICIES = ("on_read", "on_clock")


@dataclass(frozen=True)
class DetectorConfig:
    """Pairing thresholds.

    ``eta_us`` may come from a fixed setting or from the velocity-adjusted
    rule in :mod:`evsnow.dwell`; ``omega_px`` is the half-width of the
    square search window; ``expire_policy`` chooses whether stale positive
    entries are skipped when read (default) or purged as time advances
    (bounded-memory streaming) — the outputs are identical.
    """
    eta_us: float = 3000.0
    omega_px: int = 1
    expire_policy: str = "on_read"

    def __post_init__(self):
        if self.eta_us <= 0:
            raise ValueError("eta_us must be positive")
        if self.omega_px < 0:
            raise ValueError("omega_px must be >= 0")
        if self.expire_policy not in EXPIRE_POLICIES:
            raise ValueError(f"expire_policy must be one of {EXPIRE_POLICIES}")


def _check_input(stream: LabeledStream) -> None:
    if not sort_check(stream):
        raise ValueError("detect requires a time-ordered stream")
    if len(stream) and np.any(stream.cls == CLS_UNCLASSIFIED):
        raise ValueError("detect requires a classified stream (run the inceptive filter)")


def _propagate_trailing(snow: np.ndarray, ie_ref: np.ndarray) -> np.ndarray:
    owned = ie_ref >= 0
    snow = snow.copy()
    snow[owned] |= snow[ie_ref[owned]]
    return snow


def detect(stream: LabeledStream, cfg: DetectorConfig,
           eta_per_event_us=None) -> LabeledStream:
    """Flag snowflake events; order, count and all other fields unchanged.

    ``eta_per_event_us`` optionally overrides ``cfg.eta_us`` with a
    per-event threshold array (used for piecewise-constant velocity).
    """
    _check_input(stream)
    n = len(stream)
    if eta_per_event_us is None:
        eta = np.full(n, int(cfg.eta_us), np.int64)
    else:
        eta = np.asarray(eta_per_event_us, np.int64)
        if eta.shape[0] != n:
            raise ValueError("eta_per_event_us must match the stream length")
    snow = kernels.detect_events(
        stream.t, stream.x, stream.y, stream.p, stream.cls,
        eta, int(cfg.omega_px),
        stream.geometry.width_px, stream.geometry.height_px,
    )
    snow = _propagate_trailing(snow, stream.ie_ref)
    return stream.replace(snow=snow)


def split(stream: LabeledStream) -> tuple[LabeledStream, LabeledStream]:
    """Partition into (snow, background) streams; both stay time-ordered."""
    mask = stream.snow
    return stream.select(mask), stream.select(~mask)


def pair_events(stream: LabeledStream, eta_us: float, omega_px: int) -> List[Tuple[int, int]]:
    """The (positive IE index, negative IE index) pairs the detector forms.

    Used for dwell-time measurement (pass a large ``eta_us`` to disable
    thresholding up to a cap). Mirrors the kernel's pairing rule.
    """
    _check_input(stream)
    width = stream.geometry.width_px
    height = stream.geometry.height_px
    eta = int(eta_us)
    omega = int(omega_px)
    store: dict[tuple[int, int], tuple[int, int]] = {}
    pairs: List[Tuple[int, int]] = []
    ie_idx = np.nonzero(stream.cls == CLS_INCEPTIVE)[0]
    t64 = stream.t.astype(np.int64)
    for i in ie_idx:
        xi, yi, ti = int(stream.x[i]), int(stream.y[i]), int(t64[i])
        if stream.p[i]:
            store[(yi, xi)] = (ti, int(i))
            continue
        best_t = -1
        best_key = None
        for yy in range(max(yi - omega, 0), min(yi + omega, height - 1) + 1):
            for xx in range(max(xi - omega, 0), min(xi + omega, width - 1) + 1):
                entry = store.get((yy, xx))
                if entry is not None and 0 < ti - entry[0] <= eta and entry[0] > best_t:
                    best_t = entry[0]
                    best_key = (yy, xx)
        if best_key is not None:
            pairs.append((store[best_key][1], int(i)))
            del store[best_key]
    return pairs


class StreamingDetector:
    """Streaming call contract: feed classified events, receive labeled ones.

    Events are emitted in input order once their snow label is final; a
    pending positive inceptive event (and its trailing events) may lag by
    up to eta before it can no longer be paired. ``flush`` emits everything
    left with final labels.

    Feed the complete classified stream from its first event: trailing
    events reference their owner by stream index, which must line up with
    the feed order.
    """

    def __init__(self, geometry, cfg: DetectorConfig):
        self.geometry = geometry
        self.cfg = cfg
        self._eta = int(cfg.eta_us)
        self._omega = int(cfg.omega_px)
        # pixel -> (t, feed index); at most one pending positive per pixel
        self._store: dict[tuple[int, int], tuple[int, int]] = {}
        self._buffer: deque = deque()  # (feed_index, Event)
        self._snow: dict[int, bool] = {}  # resolved IE index -> label
        self._resolved: set[int] = set()
        self._last_ie_at_chain: dict[tuple[int, int, int], int] = {}
        # Labels of superseded chain owners stay alive until every buffered
        # trailing event that references them has been emitted.
        self._pending_delete: deque = deque()  # (watermark feed index, owner)
        self._count = 0
        self._last_t = None

    def feed(self, event: Event) -> List[Event]:
        """Process one event; returns events whose labels became final."""
        if event.cls == CLS_UNCLASSIFIED:
            raise ValueError("streaming detector requires classified events")
        if self._last_t is not None and event.t < self._last_t:
            raise ValueError("streaming detector requires time-ordered input")
        self._last_t = event.t
        idx = self._count
        self._count += 1
        self._buffer.append((idx, event))

        if event.cls == CLS_INCEPTIVE:
            chain = (event.y, event.x, event.polarity)
            prev_ie = self._last_ie_at_chain.get(chain)
            if prev_ie is not None:
                # All its trailing events precede this IE in the feed.
                self._pending_delete.append((idx, prev_ie))
            self._last_ie_at_chain[chain] = idx
            if event.polarity:
                old = self._store.get((event.y, event.x))
                if old is not None:
                    self._resolve(old[1], False)
                self._store[(event.y, event.x)] = (event.t, idx)
            else:
                self._match_negative(event, idx)
        # Trailing/noisy events resolve via their owner (or immediately).

        if self.cfg.expire_policy == "on_clock":
            stale = [k for k, (t0, _) in self._store.items()
                     if event.t - t0 > self._eta]
            for k in stale:
                _, j = self._store.pop(k)
                self._resolve(j, False)
        return self._drain(event.t)

    def flush(self) -> List[Event]:
        """Resolve everything still pending and emit the remaining events."""
        for _, j in self._store.values():
            self._resolve(j, False)
        self._store.clear()
        out = self._emit_ready(final=True)
        return out

    # -- internals ----------------------------------------------------------

    def _match_negative(self, event: Event, idx: int) -> None:
        best_t = -1
        best_key = None
        for yy in range(max(event.y - self._omega, 0),
                        min(event.y + self._omega, self.geometry.height_px - 1) + 1):
            for xx in range(max(event.x - self._omega, 0),
                            min(event.x + self._omega, self.geometry.width_px - 1) + 1):
                entry = self._store.get((yy, xx))
                if entry is not None and 0 < event.t - entry[0] <= self._eta and entry[0] > best_t:
                    best_t = entry[0]
                    best_key = (yy, xx)
        if best_key is not None:
            _, j = self._store.pop(best_key)
            self._resolve(j, True)
            self._resolve(idx, True)
        else:
            self._resolve(idx, False)

    def _resolve(self, idx: int, snow: bool) -> None:
        self._resolved.add(idx)
        self._snow[idx] = snow

    def _label_ready(self, idx: int, event: Event, now: Optional[int]) -> Optional[bool]:
        if event.cls == CLS_INCEPTIVE:
            if idx in self._resolved:
                return self._snow.get(idx, False)
            if now is not None and now - event.t > self._eta:
                # Can no longer pair; resolve as background in place.
                self._store.pop((event.y, event.x), None)
                self._resolve(idx, False)
                return False
            return None
        if event.cls != CLS_INCEPTIVE and event.ie_ref is None:
            return False  # noisy events are never snow
        owner = event.ie_ref
        if owner in self._resolved:
            return self._snow.get(owner, False)
        return None

    def _drain(self, now: int) -> List[Event]:
        return self._emit_ready(final=False, now=now)

    def _emit_ready(self, final: bool, now: Optional[int] = None) -> List[Event]:
        out: List[Event] = []
        while self._buffer:
            idx, event = self._buffer[0]
            label = self._label_ready(idx, event, None if final else now)
            if label is None:
                if final:
                    label = False
                else:
                    break
            self._buffer.popleft()
            out.append(Event(event.t, event.x, event.y, event.polarity,
                             cls=event.cls, snow=bool(label), truth=event.truth,
                             ie_ref=event.ie_ref))
        head = self._buffer[0][0] if self._buffer else self._count
        while self._pending_delete and self._pending_delete[0][0] <= head:
            _, owner = self._pending_delete.popleft()
            self._snow.pop(owner, None)
            self._resolved.discard(owner)
        return out
