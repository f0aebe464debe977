"""Bit-exact event stream serialization and accumulation-frame rendering.

Binary ``.evd`` layout (little-endian, mmap-friendly):

* 16-byte header: magic ``EBS1``, version u16, width u16, height u16,
  6 zero bytes reserved;
* 15-byte records: t u64 (microseconds), x u16, y u16, flags u8,
  2 reserved zero bytes. Flag bits: 0 polarity (1 = positive), 1-2
  classification (0 unclassified, 1 inceptive, 2 trailing, 3 noisy),
  3 snow prediction, 4 truth valid, 5 truth snow.

Records must appear in nondecreasing timestamp order. A documented CSV
bridge (``t,x,y,p[,cls,snow,truth]``) covers conversion from external
tools; proprietary camera RAW formats are out of scope.
"""
from __future__ import annotations

import io
import struct
from typing import Optional, Union

import numpy as np

from .events import (
    TRUTH_UNKNOWN,
    CameraGeometry,
    LabeledStream,
    sort_check,
)

EVD_MAGIC = b"EBS1"
EVD_VERSION = 1
_HEADER = struct.Struct("<4sHHH6x")
assert _HEADER.size == 16

_RECORD_DTYPE = np.dtype([
    ("t", "<u8"),
    ("x", "<u2"),
    ("y", "<u2"),
    ("flags", "u1"),
    ("rsv", "<u2"),
])
assert _RECORD_DTYPE.itemsize == 15

HEADER_BYTES = _HEADER.size
RECORD_BYTES = _RECORD_DTYPE.itemsize


class EvdFormatError(ValueError):
    """Malformed .evd input; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagicError(EvdFormatError):
    pass


class TruncatedRecordError(EvdFormatError):
    pass


class TimestampRegressionError(EvdFormatError):
    pass


class CsvFormatError(ValueError):
    """Malformed CSV line; ``line_number`` is 1-based."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"{message} (line {line_number})")
        self.line_number = line_number


def _open(destination, mode: str):
    if hasattr(destination, "read") or hasattr(destination, "write"):
        return destination, False
    return open(destination, mode), True


def _pack_flags(stream: LabeledStream) -> np.ndarray:
    flags = stream.p.astype(np.uint8)
    flags |= (stream.cls & 0x3) << 1
    flags |= stream.snow.astype(np.uint8) << 3
    valid = stream.truth != TRUTH_UNKNOWN
    flags |= valid.astype(np.uint8) << 4
    flags |= ((stream.truth == 1).astype(np.uint8)) << 5
    return flags


def write_evd(stream: LabeledStream, destination) -> int:
    """Write header plus one 15-byte record per event; returns byte count."""
    if not sort_check(stream):
        raise ValueError("write_evd requires a time-ordered stream")
    f, owned = _open(destination, "wb")
    try:
        f.write(_HEADER.pack(EVD_MAGIC, EVD_VERSION,
                             stream.geometry.width_px, stream.geometry.height_px))
        rec = np.zeros(len(stream), _RECORD_DTYPE)
        rec["t"] = stream.t
        rec["x"] = stream.x
        rec["y"] = stream.y
        rec["flags"] = _pack_flags(stream)
        f.write(rec.tobytes())
    finally:
        if owned:
            f.close()
    return HEADER_BYTES + RECORD_BYTES * len(stream)


def read_evd(source, geometry: Optional[CameraGeometry] = None) -> LabeledStream:
    """Exact inverse of :func:`write_evd`.

    The file stores only the sensor dimensions; pass ``geometry`` to attach
    full optics, otherwise a default-rule geometry (5 mm focal, 5 um pitch,
    half-diagonal radius) is built from the stored width/height.
    """
    f, owned = _open(source, "rb")
    try:
        head = f.read(HEADER_BYTES)
        if len(head) < HEADER_BYTES or head[:4] != EVD_MAGIC:
            raise BadMagicError("bad magic, not an EBS1 event file", 0)
        _, version, width, height = _HEADER.unpack(head)
        if version != EVD_VERSION:
            raise EvdFormatError(f"unsupported version {version}", 4)
        body = f.read()
    finally:
        if owned:
            f.close()
    n, rem = divmod(len(body), RECORD_BYTES)
    if rem:
        raise TruncatedRecordError("truncated record", HEADER_BYTES + n * RECORD_BYTES)
    rec = np.frombuffer(body, _RECORD_DTYPE)
    t = rec["t"]
    if n > 1:
        bad = np.nonzero(t[1:] < t[:-1])[0]
        if bad.size:
            raise TimestampRegressionError(
                "timestamp regression", HEADER_BYTES + int(bad[0] + 1) * RECORD_BYTES)
    if geometry is None:
        geometry = CameraGeometry.half_diagonal(width, height, focal_mm=5.0, pitch_mm=0.005)
    elif (geometry.width_px, geometry.height_px) != (width, height):
        raise ValueError("geometry dimensions do not match file header")
    flags = rec["flags"]
    truth = np.full(n, TRUTH_UNKNOWN, np.int8)
    valid = (flags >> 4) & 1
    truth[valid == 1] = ((flags >> 5) & 1)[valid == 1].astype(np.int8)
    return LabeledStream(
        geometry, t, rec["x"], rec["y"], flags & 1,
        cls=(flags >> 1) & 0x3, snow=((flags >> 3) & 1).astype(bool), truth=truth,
    )


CSV_HEADER = "t,x,y,p,cls,snow,truth"


def write_csv(stream: LabeledStream, destination) -> None:
    """One event per line after a header; truth -1 means unlabeled."""
    f, owned = _open(destination, "w")
    try:
        f.write(CSV_HEADER + "\n")
        for i in range(len(stream)):
            f.write(f"{stream.t[i]},{stream.x[i]},{stream.y[i]},{stream.p[i]},"
                    f"{stream.cls[i]},{int(stream.snow[i])},{stream.truth[i]}\n")
    finally:
        if owned:
            f.close()


def read_csv(source, geometry: Optional[CameraGeometry] = None) -> LabeledStream:
    """Parse ``t,x,y,p`` or the full 7-column form; header line optional."""
    f, owned = _open(source, "r")
    try:
        lines = f.read().splitlines()
    finally:
        if owned:
            f.close()
    rows = []
    for ln, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        if ln == 1 and line.split(",")[0].strip() == "t":
            continue  # header
        parts = [s.strip() for s in line.split(",")]
        if len(parts) not in (4, 7):
            raise CsvFormatError(f"expected 4 or 7 fields, got {len(parts)}", ln)
        try:
            vals = [int(s) for s in parts]
        except ValueError:
            raise CsvFormatError("non-integer field", ln) from None
        if len(vals) == 4:
            vals += [0, 0, TRUTH_UNKNOWN]
        rows.append(vals)
    if geometry is None:
        if rows:
            width = max(r[1] for r in rows) + 1
            height = max(r[2] for r in rows) + 1
        else:
            width = height = 1
        geometry = CameraGeometry.half_diagonal(max(width, 1), max(height, 1),
                                                focal_mm=5.0, pitch_mm=0.005)
    arr = np.asarray(rows, np.int64).reshape(-1, 7)
    return LabeledStream(geometry, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3],
                         cls=arr[:, 4], snow=arr[:, 5].astype(bool),
                         truth=arr[:, 6].astype(np.int8))


# ---------------------------------------------------------------------------
# Rendering

BRIGHTNESS_STEP = 32
MID_GRAY = 128


def _window_mask(stream: LabeledStream, window_us: int, t0: int) -> np.ndarray:
    if window_us <= 0:
        raise ValueError("window_us must be positive")
    return (stream.t >= np.uint64(t0)) & (stream.t < np.uint64(t0 + window_us))


def render_accumulation(stream: LabeledStream, window_us: int, t0: int = 0) -> np.ndarray:
    """Grayscale accumulation frame: mid-gray +/- 32 per net polarity count."""
    geom = stream.geometry
    mask = _window_mask(stream, window_us, t0)
    net = np.zeros(geom.height_px * geom.width_px, np.int64)
    idx = stream.y[mask].astype(np.int64) * geom.width_px + stream.x[mask]
    np.add.at(net, idx, np.where(stream.p[mask] == 1, 1, -1))
    img = np.clip(MID_GRAY + BRIGHTNESS_STEP * net, 0, 255).astype(np.uint8)
    return img.reshape(geom.height_px, geom.width_px)


def render_accumulation_color(stream: LabeledStream, window_us: int, t0: int = 0) -> np.ndarray:
    """Color accumulation frame: snow events red, background positive green,
    background negative blue, each +32 per event count, saturating."""
    geom = stream.geometry
    mask = _window_mask(stream, window_us, t0)
    shape = geom.height_px * geom.width_px
    idx = stream.y[mask].astype(np.int64) * geom.width_px + stream.x[mask]
    snow = stream.snow[mask]
    pos = stream.p[mask] == 1
    chans = []
    for sel in (snow, ~snow & pos, ~snow & ~pos):
        counts = np.zeros(shape, np.int64)
        np.add.at(counts, idx[sel], 1)
        chans.append(np.clip(MID_GRAY + BRIGHTNESS_STEP * counts, 0, 255).astype(np.uint8))
    return np.stack(chans, axis=-1).reshape(geom.height_px, geom.width_px, 3)


def write_pnm(image: np.ndarray, destination) -> None:
    """Write a grayscale (P5) or RGB (P6) binary portable anymap."""
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError("image must be HxW or HxWx3 uint8")
    h, w = image.shape[:2]
    f, owned = _open(destination, "wb")
    try:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(image, np.uint8).tobytes())
    finally:
        if owned:
            f.close()
