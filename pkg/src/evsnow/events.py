"""Core event and camera geometry types shared by the whole toolkit.

Conventions used everywhere downstream:

* time in microseconds (integer timestamps),
* lengths in millimeters,
* velocities in millimeters per second,
* polarity 1 = positive (brighter), 0 = negative.

Event streams are stored as structure-of-arrays (:class:`LabeledStream`);
the scalar :class:`Event` view exists for convenience and tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

# Classification codes (also the on-disk encoding, see stream_io).
CLS_UNCLASSIFIED = 0
CLS_INCEPTIVE = 1
CLS_TRAILING = 2
CLS_NOISY = 3

CLS_NAMES = {
    CLS_UNCLASSIFIED: "unclassified",
    CLS_INCEPTIVE: "inceptive",
    CLS_TRAILING: "trailing",
    CLS_NOISY: "noisy",
}

POLARITY_POSITIVE = 1
POLARITY_NEGATIVE = 0

# Truth flag encoding in LabeledStream.truth: -1 = unknown, 0 = background, 1 = snow.
TRUTH_UNKNOWN = -1
TRUTH_BACKGROUND = 0
TRUTH_SNOW = 1

US_PER_S = 1_000_000.0


def kmh_to_mm_s(kmh: float) -> float:
    """Convert km/h to mm/s."""
    return kmh * 1e6 / 3600.0


@dataclass(frozen=True)
class Event:
    """One sensor firing.

    ``ie_ref`` is the stream index of the owning inceptive event and is set
    on trailing events by the inceptive filter; it is an in-memory
    annotation and is not serialized.
    """
    t: int
    x: int
    y: int
    polarity: int
    cls: int = CLS_UNCLASSIFIED
    snow: bool = False
    truth: Optional[bool] = None
    ie_ref: Optional[int] = None


@dataclass(frozen=True)
class CameraGeometry:
    """Pinhole camera and effective circular-detector parameters.

    ``radius_mm`` is the effective detector radius of the circular model;
    the default construction rule uses the half-diagonal of the pixel
    array, the tightest disc enclosing the rectangular sensor.
    ``principal`` is the pixel coordinate of the ego-motion center.
    """
    focal_mm: float
    radius_mm: float
    width_px: int
    height_px: int
    pitch_mm: float
    principal: tuple[float, float]

    def __post_init__(self):
        if self.focal_mm <= 0:
            raise ValueError("focal_mm must be positive")
        if self.radius_mm <= 0:
            raise ValueError("radius_mm must be positive")
        if self.pitch_mm <= 0:
            raise ValueError("pitch_mm must be positive")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("sensor dimensions must be positive")

    @classmethod
    def half_diagonal(
        cls,
        width_px: int,
        height_px: int,
        focal_mm: float,
        pitch_mm: float,
        principal: Optional[tuple[float, float]] = None,
    ) -> "CameraGeometry":
        """Build a geometry with the half-diagonal effective radius rule."""
        radius = pitch_mm * math.hypot(width_px / 2.0, height_px / 2.0)
        if principal is None:
            principal = (width_px / 2.0, height_px / 2.0)
        return cls(focal_mm, radius, width_px, height_px, pitch_mm, principal)


def default_geometry() -> CameraGeometry:
    """1280x720 sensor, 5 mm lens, 5 um pitch, principal point at center."""
    return CameraGeometry.half_diagonal(1280, 720, focal_mm=5.0, pitch_mm=0.005)


@dataclass(frozen=True)
class MotionParams:
    """Ego-motion along the optical axis."""
    velocity_mm_s: float

    def __post_init__(self):
        if self.velocity_mm_s <= 0:
            raise ValueError("velocity_mm_s must be positive")

    @classmethod
    def from_kmh(cls, kmh: float) -> "MotionParams":
        return cls(kmh_to_mm_s(kmh))


def pixel_radius(x, y, geom: CameraGeometry):
    """Distance (mm, on the image plane) of pixel (x, y) from the principal point.

    Accepts scalars or arrays. Out-of-bounds coordinates are rejected.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if np.any(x < 0) or np.any(x >= geom.width_px) or np.any(y < 0) or np.any(y >= geom.height_px):
        raise ValueError("pixel coordinates out of sensor bounds")
    cx, cy = geom.principal
    r = geom.pitch_mm * np.hypot(x - cx, y - cy)
    return float(r) if r.ndim == 0 else r


class LabeledStream:
    """A time-ordered event sequence in structure-of-arrays layout.

    Arrays (all the same length): ``t`` uint64 microseconds, ``x``/``y``
    uint16 pixels, ``p`` uint8 polarity, ``cls`` uint8, ``snow`` bool,
    ``truth`` int8 (-1 unknown / 0 background / 1 snow), ``ie_ref`` int64
    (-1 unset). Instances are treated as immutable; derive new streams
    with :meth:`replace`.
    """

    __slots__ = ("geometry", "t", "x", "y", "p", "cls", "snow", "truth", "ie_ref")

    def __init__(self, geometry: CameraGeometry, t, x, y, p,
                 cls=None, snow=None, truth=None, ie_ref=None):
        t = np.ascontiguousarray(t, dtype=np.uint64)
        x = np.ascontiguousarray(x, dtype=np.uint16)
        y = np.ascontiguousarray(y, dtype=np.uint16)
        p = np.ascontiguousarray(p, dtype=np.uint8)
        n = t.shape[0]
        for name, a in (("x", x), ("y", y), ("p", p)):
            if a.shape[0] != n:
                raise ValueError(f"array {name} length {a.shape[0]} != {n}")
        if n and (int(x.max()) >= geometry.width_px or int(y.max()) >= geometry.height_px):
            raise ValueError("event coordinates exceed sensor bounds")
        if np.any(p > 1):
            raise ValueError("polarity must be 0 or 1")
        self.geometry = geometry
        self.t = t
        self.x = x
        self.y = y
        self.p = p
        self.cls = (np.zeros(n, np.uint8) if cls is None
                    else np.ascontiguousarray(cls, dtype=np.uint8))
        self.snow = (np.zeros(n, bool) if snow is None
                     else np.ascontiguousarray(snow, dtype=bool))
        self.truth = (np.full(n, TRUTH_UNKNOWN, np.int8) if truth is None
                      else np.ascontiguousarray(truth, dtype=np.int8))
        self.ie_ref = (np.full(n, -1, np.int64) if ie_ref is None
                       else np.ascontiguousarray(ie_ref, dtype=np.int64))
        for name in ("cls", "snow", "truth", "ie_ref"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"array {name} has wrong length")

    @classmethod
    def empty(cls, geometry: CameraGeometry) -> "LabeledStream":
        return cls(geometry, [], [], [], [])

    @classmethod
    def from_events(cls, geometry: CameraGeometry, events: Iterable[Event]) -> "LabeledStream":
        events = list(events)
        truth = [TRUTH_UNKNOWN if e.truth is None else int(bool(e.truth)) for e in events]
        ie_ref = [-1 if e.ie_ref is None else e.ie_ref for e in events]
        return cls(
            geometry,
            [e.t for e in events],
            [e.x for e in events],
            [e.y for e in events],
            [e.polarity for e in events],
            cls=[e.cls for e in events],
            snow=[e.snow for e in events],
            truth=truth,
            ie_ref=ie_ref,
        )

    def __len__(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, i: int) -> Event:
        truth = None if self.truth[i] == TRUTH_UNKNOWN else bool(self.truth[i])
        ie_ref = None if self.ie_ref[i] < 0 else int(self.ie_ref[i])
        return Event(
            t=int(self.t[i]), x=int(self.x[i]), y=int(self.y[i]),
            polarity=int(self.p[i]), cls=int(self.cls[i]),
            snow=bool(self.snow[i]), truth=truth, ie_ref=ie_ref,
        )

    def events(self):
        """Iterate scalar Event views."""
        for i in range(len(self)):
            yield self[i]

    def replace(self, **arrays) -> "LabeledStream":
        """New stream sharing all arrays except the given replacements."""
        kw = {name: getattr(self, name) for name in
              ("t", "x", "y", "p", "cls", "snow", "truth", "ie_ref")}
        kw.update(arrays)
        return LabeledStream(self.geometry, **kw)

    def select(self, mask) -> "LabeledStream":
        """Subset stream by a boolean mask or index array (ie_ref is cleared)."""
        return LabeledStream(
            self.geometry, self.t[mask], self.x[mask], self.y[mask], self.p[mask],
            cls=self.cls[mask], snow=self.snow[mask], truth=self.truth[mask],
        )

    def time_sorted(self) -> "LabeledStream":
        """Stable-sort by timestamp (ties preserve input order)."""
        order = np.argsort(self.t, kind="stable")
        return self.select(order)


def sort_check(stream: LabeledStream) -> bool:
    """True iff timestamps are nondecreasing (ties allowed)."""
    t = stream.t
    if t.shape[0] < 2:
        return True
    return bool(np.all(t[1:] >= t[:-1]))
