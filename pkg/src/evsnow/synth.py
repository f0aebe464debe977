"""Ground-truth synthetic snowfall scenes.

Flakes are sampled uniformly over the circular detector footprint (and
uniformly in depth), projected through the pinhole model under ego-motion
along the optical axis, and rasterized into per-pixel crossings. Each
crossing emits a positive inceptive event at entry, a burst of trailing
events, and a negative inceptive event exactly one dwell time later, so a
noiseless scene reproduces the closed-form dwell model event for event.
Background clutter is modeled as moving edge tracks whose entry/exit gap
corresponds to a configurable physical detail size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dwell import DiameterDensity, dwell_time
from .events import (
    TRUTH_BACKGROUND,
    TRUTH_SNOW,
    US_PER_S,
    CameraGeometry,
    LabeledStream,
    MotionParams,
    pixel_radius,
)


@dataclass(frozen=True)
class Snowflake3D:
    """A flake in camera coordinates: lateral (X, Y), depth Z, diameter D (mm)."""
    x_mm: float
    y_mm: float
    z_mm: float
    d_mm: float

    def __post_init__(self):
        if self.z_mm <= 0:
            raise ValueError("z_mm must be positive")
        if self.d_mm <= 0:
            raise ValueError("d_mm must be positive")


def project(flake: Snowflake3D, geom: CameraGeometry, motion: MotionParams):
    """Pinhole projection: image position (mm), pixel diameter, pixel speed.

    The apparent velocity toward the image periphery is V*sqrt(X^2+Y^2)/Z;
    both the pixel diameter and pixel speed scale with 1/Z, which is why
    their ratio (the dwell time) is depth-independent.
    """
    if flake.z_mm <= 0:
        raise ValueError("z_mm must be positive")
    x_img = geom.focal_mm * flake.x_mm / flake.z_mm
    y_img = geom.focal_mm * flake.y_mm / flake.z_mm
    d_px = (flake.d_mm / flake.z_mm) * geom.focal_mm / geom.pitch_mm
    u_mm_s = motion.velocity_mm_s * math.hypot(flake.x_mm, flake.y_mm) / flake.z_mm
    u_px_s = (geom.focal_mm / flake.z_mm) * u_mm_s / geom.pitch_mm
    return x_img, y_img, d_px, u_px_s


@dataclass(frozen=True)
class BackgroundTrack:
    """A background edge sweeping a straight pixel path.

    At each path pixel the track emits a positive/negative inceptive pair
    separated by the dwell a physical detail of size ``detail_mm`` would
    have at that pixel, plus trailing bursts; locally the emitted manifolds
    share polarity, like real background edges.
    """
    detail_mm: float
    x0: int
    y0: int
    dx: int
    dy: int
    n_pixels: int
    t0_us: int
    rate_hz: float

    def __post_init__(self):
        if self.detail_mm <= 0 or self.n_pixels <= 0 or self.rate_hz <= 0:
            raise ValueError("detail_mm, n_pixels and rate_hz must be positive")


@dataclass(frozen=True)
class SynthConfig:
    geom: CameraGeometry
    motion: MotionParams
    duration_us: int
    flake_rate: float  # flakes per second entering the frustum
    diameter_density: DiameterDensity
    trailing_count: int = 2
    delta_us: int = 5000  # trailing events are spaced delta_us/2 apart
    p_miss: float = 0.0
    jitter_us: int = 0
    background_tracks: tuple[BackgroundTrack, ...] = ()
    seed: int = 0
    z_range_mm: tuple[float, float] = (500.0, 3000.0)
    max_pixels_per_flake: int = 12

    def __post_init__(self):
        if not 0.0 <= self.p_miss <= 1.0:
            raise ValueError("p_miss must lie in [0, 1]")
        if self.flake_rate < 0 or self.duration_us < 0 or self.jitter_us < 0:
            raise ValueError("rates, duration and jitter must be >= 0")
        if self.trailing_count < 0:
            raise ValueError("trailing_count must be >= 0")
        if self.delta_us <= 1:
            raise ValueError("delta_us must exceed 1")
        z0, z1 = self.z_range_mm
        if not 0 < z0 <= z1:
            raise ValueError("z_range_mm must be positive and ordered")


def _emit_crossing(out, cfg: SynthConfig, entry_us: float, px: int, py: int,
                   d_mm: float, truth: int) -> None:
    """One pixel crossing: positive burst at entry, negative burst at exit."""
    geom = cfg.geom
    cx, cy = geom.principal
    r_mm = geom.pitch_mm * math.hypot(px - cx, py - cy)
    if r_mm <= 0.0:
        return  # ego-motion axis: unbounded dwell, no exit event
    dwell = max(1, round(dwell_time(d_mm, geom, cfg.motion, r_mm)))
    spacing = cfg.delta_us // 2
    entry = round(entry_us)
    for pol, t0 in ((1, entry), (0, entry + dwell)):
        out.append((t0, px, py, pol, truth))
        for k in range(1, cfg.trailing_count + 1):
            out.append((t0 + k * spacing, px, py, pol, truth))


def _flake_crossings(cfg: SynthConfig, flake_spawn_us: float, d_mm: float,
                     phi: float, r_img_mm: float, z0_mm: float):
    """Pixels crossed by one flake with entry times, walked radially outward."""
    geom = cfg.geom
    cx, cy = geom.principal
    v = cfg.motion.velocity_mm_s
    rho = r_img_mm * z0_mm / geom.focal_mm  # lateral distance, mm
    cphi, sphi = math.cos(phi), math.sin(phi)

    def pixel_at(r_img):
        px = math.floor(cx + (r_img * cphi) / geom.pitch_mm)
        py = math.floor(cy + (r_img * sphi) / geom.pitch_mm)
        return px, py

    crossings = []
    if rho <= 1e-9:
        px, py = pixel_at(0.0)
        if 0 <= px < geom.width_px and 0 <= py < geom.height_px:
            crossings.append((flake_spawn_us, px, py))
        return crossings

    z = z0_mm
    t_rel = 0.0
    cur = None
    z_stop = max(geom.focal_mm * rho / (2.0 * geom.radius_mm), 10.0)
    while z > z_stop and len(crossings) < cfg.max_pixels_per_flake:
        r_img = geom.focal_mm * rho / z
        if r_img > geom.radius_mm:
            break
        px, py = pixel_at(r_img)
        if (px, py) != cur:
            cur = (px, py)
            if 0 <= px < geom.width_px and 0 <= py < geom.height_px:
                crossings.append((flake_spawn_us + t_rel * US_PER_S, px, py))
            elif crossings or (0 <= cx < geom.width_px and 0 <= cy < geom.height_px):
                # Radial motion is strictly outward, so when the expansion
                # center lies on the sensor the path leaves the pixel array
                # at most once and never re-enters.
                break
        # Step so the radial image motion stays below ~0.35 pixel.
        dt = 0.35 * geom.pitch_mm * z * z / (geom.focal_mm * rho * v)
        z -= v * dt
        t_rel += dt
    return crossings


def generate(cfg: SynthConfig) -> LabeledStream:
    """Build a time-sorted ground-truth stream; deterministic for a seed."""
    rng = np.random.default_rng(cfg.seed)
    out: list[tuple[int, int, int, int, int]] = []

    n_flakes = int(rng.poisson(cfg.flake_rate * cfg.duration_us / US_PER_S))
    if n_flakes:
        spawn = rng.uniform(0.0, cfg.duration_us, n_flakes)
        diam = cfg.diameter_density.sample(rng, n_flakes)
        phi = rng.uniform(0.0, 2.0 * math.pi, n_flakes)
        r_img = cfg.geom.radius_mm * np.sqrt(rng.uniform(0.0, 1.0, n_flakes))
        z0 = rng.uniform(cfg.z_range_mm[0], cfg.z_range_mm[1], n_flakes)
        for i in range(n_flakes):
            if diam[i] <= 0:
                continue
            for entry_us, px, py in _flake_crossings(
                    cfg, float(spawn[i]), float(diam[i]),
                    float(phi[i]), float(r_img[i]), float(z0[i])):
                _emit_crossing(out, cfg, entry_us, px, py, float(diam[i]), TRUTH_SNOW)

    for track in cfg.background_tracks:
        spacing_us = US_PER_S / track.rate_hz
        for k in range(track.n_pixels):
            px = track.x0 + k * track.dx
            py = track.y0 + k * track.dy
            if not (0 <= px < cfg.geom.width_px and 0 <= py < cfg.geom.height_px):
                continue
            _emit_crossing(out, cfg, track.t0_us + k * spacing_us,
                           px, py, track.detail_mm, TRUTH_BACKGROUND)

    if not out:
        return LabeledStream.empty(cfg.geom)

    arr = np.asarray(out, np.int64)
    t, x, y, p, truth = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4]
    if cfg.p_miss > 0.0:
        keep = rng.random(t.shape[0]) >= cfg.p_miss
        t, x, y, p, truth = t[keep], x[keep], y[keep], p[keep], truth[keep]
    if cfg.jitter_us > 0 and t.shape[0]:
        t = t + rng.integers(-cfg.jitter_us, cfg.jitter_us + 1, t.shape[0])
    t = np.maximum(t, 0)
    if t.shape[0] == 0:
        return LabeledStream.empty(cfg.geom)
    order = np.argsort(t, kind="stable")
    return LabeledStream(cfg.geom, t[order], x[order], y[order], p[order],
                         truth=truth.astype(np.int8)[order])
