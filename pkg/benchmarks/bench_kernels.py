#!/usr/bin/env python
"""Benchmark the compiled kernels against the pure-Python/numpy fallback.

Generates a synthetic scene, then times classification and detection with
each available implementation and reports events per second.

Usage: python benchmarks/bench_kernels.py [--events N] [--repeats K]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from evsnow.events import MotionParams, default_geometry
from evsnow.dwell import UniformDiameter
from evsnow.kernels import implementations
from evsnow.synth import SynthConfig, generate


def make_stream(target_events: int):
    geom = default_geometry()
    cfg = SynthConfig(
        geom=geom, motion=MotionParams(5555.56), duration_us=2_000_000,
        flake_rate=max(target_events / 20.0, 1.0),
        diameter_density=UniformDiameter(5.0), seed=7)
    stream = generate(cfg)
    while len(stream) < target_events:
        # Tile the scene in time until it is large enough.
        shift = int(stream.t[-1]) + 1000 if len(stream) else 1_000_000
        stream = stream.replace(t=np.concatenate([stream.t, stream.t + shift]),
                                x=np.tile(stream.x, 2), y=np.tile(stream.y, 2),
                                p=np.tile(stream.p, 2),
                                cls=np.tile(stream.cls, 2),
                                snow=np.tile(stream.snow, 2),
                                truth=np.tile(stream.truth, 2),
                                ie_ref=np.tile(stream.ie_ref, 2))
    return stream


def bench(name: str, mod, stream, repeats: int) -> None:
    geom = stream.geometry
    n = len(stream)
    best_cls = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        cls, ie_ref, _ = mod.classify_events(
            stream.t, stream.x, stream.y, stream.p,
            geom.width_px, geom.height_px, 5000, True)
        best_cls = min(best_cls, time.perf_counter() - t0)
    eta = np.full(n, 3000, np.int64)
    best_det = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        mod.detect_events(stream.t, stream.x, stream.y, stream.p, cls,
                          eta, 1, geom.width_px, geom.height_px)
        best_det = min(best_det, time.perf_counter() - t0)
    print(f"{name:>10}: classify {n / best_cls / 1e6:8.2f} M ev/s   "
          f"detect {n / best_det / 1e6:8.2f} M ev/s   "
          f"pipeline {n / (best_cls + best_det) / 1e6:8.2f} M ev/s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--events", type=int, default=2_000_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    stream = make_stream(args.events)
    print(f"benchmarking on {len(stream)} events, best of {args.repeats}")
    for name, mod in implementations().items():
        bench(name, mod, stream, args.repeats)


if __name__ == "__main__":
    main()
