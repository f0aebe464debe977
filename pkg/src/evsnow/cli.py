"""Command-line front-end: classify/detect/split pipelines, scene synthesis,
threshold calibration, model inspection, rendering and evaluation.

Every subcommand that writes an artifact also writes a JSON run manifest
(``<output>.manifest.json``) capturing the resolved configuration, inputs,
seed, version and wall-clock duration, so any output can be regenerated.
"""
from __future__ import annotations

import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import click
import numpy as np

from . import __version__
from .config import geometry_from_config, load_config
from .detector import DetectorConfig, detect, split
from .dwell import (
    UniformDiameter,
    calibrate_tau_beta,
    eta_from_tau,
    fp_rate_bound,
    np_threshold_alpha,
)
from .evaluate import (
    event_prf,
    match_boxes,
    measured_dwells,
    percent_removed_curve,
    read_boxes,
    write_curve,
)
from .events import CLS_NOISY, CameraGeometry, MotionParams, default_geometry
from .inceptive import FilterConfig, classify
from .stream_io import (
    read_csv,
    read_evd,
    render_accumulation,
    render_accumulation_color,
    write_csv,
    write_evd,
    write_pnm,
)
from .synth import SynthConfig, generate


@dataclass
class RunManifest:
    """Reproducibility record written alongside every output artifact."""
    subcommand: str
    config: Dict
    inputs: List[str]
    outputs: List[str]
    seed: Optional[int]
    version: str
    duration_s: float

    def write(self, primary_output: str) -> None:
        with open(primary_output + ".manifest.json", "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write("\n")


def _emit_manifest(subcommand: str, config: Dict, inputs: List[str],
                   outputs: List[str], seed: Optional[int], t_start: float) -> None:
    if not outputs:
        return
    manifest = RunManifest(subcommand, config, inputs, outputs, seed,
                           __version__, time.perf_counter() - t_start)
    manifest.write(outputs[0])


def _resolve_geometry(geometry_path: Optional[str]) -> CameraGeometry:
    if geometry_path is None:
        return default_geometry()
    return geometry_from_config(load_config(geometry_path))


def _guess_format(path: str, fmt: Optional[str]) -> str:
    if fmt:
        return fmt
    return "csv" if path.endswith(".csv") else "evd"


def _load_stream(path: str, fmt: Optional[str], geometry: Optional[CameraGeometry]):
    if _guess_format(path, fmt) == "csv":
        return read_csv(path, geometry)
    return read_evd(path, geometry)


def _save_stream(stream, path: str, fmt: Optional[str]) -> None:
    if _guess_format(path, fmt) == "csv":
        write_csv(stream, path)
    else:
        write_evd(stream, path)


_geometry_option = click.option(
    "--geometry", "geometry_path", type=click.Path(exists=True), default=None,
    help="Key=value geometry/config file; default 1280x720, 5 mm lens.")
_format_option = click.option(
    "--format", "fmt", type=click.Choice(["evd", "csv"]), default=None,
    help="Stream format; inferred from the file extension when omitted.")


@click.group()
@click.version_option(version=__version__)
def main():
    """Event-camera snowfall removal toolkit."""


# ---------------------------------------------------------------------------
# filter

def _resolve_eta(eta_us, tau, alpha, velocity_mm_s, theta_mm,
                 geom: CameraGeometry) -> Tuple[float, float]:
    """Returns (eta_us, tau); raises UsageError when under-specified."""
    if eta_us is not None:
        return float(eta_us), 0.0
    if alpha is not None and tau is None:
        tau = np_threshold_alpha(alpha, geom)
    if tau is not None:
        if velocity_mm_s is None:
            raise click.UsageError(
                "--tau/--alpha need --velocity-mm-s to derive the dwell threshold")
        return eta_from_tau(tau, theta_mm, MotionParams(velocity_mm_s)), tau
    raise click.UsageError(
        "specify a dwell threshold: either --eta-us, or --tau (or --alpha) "
        "together with --velocity-mm-s")


def _piecewise_eta(velocity_file: str, t: np.ndarray, tau: float,
                   theta_mm: float) -> np.ndarray:
    """Per-event threshold from a CSV of (t_us, velocity_mm_s) breakpoints."""
    rows = []
    with open(velocity_file) as f:
        for ln, line in enumerate(f, start=1):
            line = line.strip()
            if not line or (ln == 1 and line.split(",")[0].strip() == "t"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise click.UsageError(
                    f"{velocity_file}:{ln}: expected 't,velocity_mm_s'")
            rows.append((float(parts[0]), float(parts[1])))
    if not rows:
        raise click.UsageError(f"{velocity_file}: no velocity samples")
    rows.sort()
    knots = np.asarray([r[0] for r in rows])
    vels = np.asarray([r[1] for r in rows])
    if np.any(vels <= 0):
        raise click.UsageError(f"{velocity_file}: velocities must be positive")
    idx = np.clip(np.searchsorted(knots, t.astype(np.float64), side="right") - 1, 0, None)
    eta = 1e6 * tau * theta_mm / vels[idx]
    return eta.astype(np.int64)


@main.command("filter")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output-snow", type=click.Path(), default=None)
@click.option("--output-background", type=click.Path(), default=None)
@click.option("--delta-us", type=int, default=5000, show_default=True,
              help="Inceptive-filter gap threshold.")
@click.option("--eta-us", type=float, default=None, help="Fixed dwell threshold.")
@click.option("--tau", type=float, default=None, help="Velocity-normalized threshold.")
@click.option("--alpha", type=float, default=None,
              help="Significance level; derives tau = focal/(radius*sqrt(alpha)).")
@click.option("--velocity-mm-s", type=float, default=None)
@click.option("--velocity-file", type=click.Path(exists=True), default=None,
              help="CSV of t,velocity_mm_s; threshold applied piecewise-constant.")
@click.option("--omega-px", type=int, default=1, show_default=True)
@click.option("--theta-mm", type=float, default=5.0, show_default=True)
@click.option("--drop-noisy", is_flag=True, help="Drop isolated (noisy) events.")
@_geometry_option
@_format_option
def filter_cmd(input_path, output_snow, output_background, delta_us, eta_us,
               tau, alpha, velocity_mm_s, velocity_file, omega_px, theta_mm,
               drop_noisy, geometry_path, fmt):
    """Classify events, detect snowflakes, and split the stream."""
    t_start = time.perf_counter()
    geom = _resolve_geometry(geometry_path)
    if velocity_file is not None and tau is None and alpha is None:
        raise click.UsageError("--velocity-file needs --tau or --alpha")
    eta_value, tau_value = (0.0, 0.0)
    if velocity_file is None:
        eta_value, tau_value = _resolve_eta(eta_us, tau, alpha,
                                            velocity_mm_s, theta_mm, geom)
    elif alpha is not None and tau is None:
        tau_value = np_threshold_alpha(alpha, geom)
    else:
        tau_value = tau

    stream = _load_stream(input_path, fmt, geom)
    n = len(stream)
    t0 = time.perf_counter()
    stream, _ = classify(stream, FilterConfig(delta_us=delta_us))
    if velocity_file is not None:
        eta_per_event = _piecewise_eta(velocity_file, stream.t, tau_value, theta_mm)
        cfg = DetectorConfig(eta_us=float(eta_per_event.max() or 1), omega_px=omega_px)
        labeled = detect(stream, cfg, eta_per_event_us=eta_per_event)
        eta_value = float(eta_per_event.max())
    else:
        labeled = detect(stream, DetectorConfig(eta_us=eta_value, omega_px=omega_px))
    elapsed = time.perf_counter() - t0
    rate = n / elapsed if elapsed > 0 else float("inf")
    click.echo(f"processed {n} events in {elapsed:.3f} s "
               f"({rate / 1e6:.2f} M events/s)", err=True)

    snow, background = split(labeled)
    if drop_noisy:
        background = background.select(background.cls != CLS_NOISY)
    outputs = []
    if output_snow:
        _save_stream(snow, output_snow, fmt)
        outputs.append(output_snow)
    if output_background:
        _save_stream(background, output_background, fmt)
        outputs.append(output_background)
    click.echo(f"snow events: {len(snow)}  background events: {len(background)}")
    _emit_manifest("filter", {
        "delta_us": delta_us, "eta_us": eta_value, "tau": tau_value,
        "alpha": alpha, "omega_px": omega_px, "theta_mm": theta_mm,
        "drop_noisy": drop_noisy, "velocity_mm_s": velocity_mm_s,
        "velocity_file": velocity_file, "geometry": geometry_path,
        "events_per_s": rate,
    }, [input_path], outputs, None, t_start)


# ---------------------------------------------------------------------------
# synth

@main.command("synth")
@click.option("--output", required=True, type=click.Path())
@click.option("--duration-us", type=int, default=1_000_000, show_default=True)
@click.option("--flake-rate", type=float, default=100.0, show_default=True,
              help="Flakes per second entering the field of view.")
@click.option("--velocity-mm-s", type=float, required=True)
@click.option("--theta-mm", type=float, default=5.0, show_default=True,
              help="Flake diameters drawn uniform on (0, theta].")
@click.option("--trailing-count", type=int, default=2, show_default=True)
@click.option("--delta-us", type=int, default=5000, show_default=True)
@click.option("--p-miss", type=float, default=0.0, show_default=True)
@click.option("--jitter-us", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_geometry_option
@_format_option
def synth_cmd(output, duration_us, flake_rate, velocity_mm_s, theta_mm,
              trailing_count, delta_us, p_miss, jitter_us, seed,
              geometry_path, fmt):
    """Generate a ground-truth synthetic snowfall scene."""
    t_start = time.perf_counter()
    geom = _resolve_geometry(geometry_path)
    cfg = SynthConfig(
        geom=geom, motion=MotionParams(velocity_mm_s), duration_us=duration_us,
        flake_rate=flake_rate, diameter_density=UniformDiameter(theta_mm),
        trailing_count=trailing_count, delta_us=delta_us, p_miss=p_miss,
        jitter_us=jitter_us, seed=seed)
    stream = generate(cfg)
    _save_stream(stream, output, fmt)
    click.echo(f"generated {len(stream)} events -> {output}")
    _emit_manifest("synth", {
        "duration_us": duration_us, "flake_rate": flake_rate,
        "velocity_mm_s": velocity_mm_s, "theta_mm": theta_mm,
        "trailing_count": trailing_count, "delta_us": delta_us,
        "p_miss": p_miss, "jitter_us": jitter_us, "geometry": geometry_path,
    }, [], [output], seed, t_start)


# ---------------------------------------------------------------------------
# calibrate

@main.command("calibrate")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="Baseline (no-precipitation) stream at known speed.")
@click.option("--beta", type=float, required=True)
@click.option("--theta-mm", type=float, default=5.0, show_default=True)
@click.option("--velocity-mm-s", type=float, required=True,
              help="Speed the baseline drive was recorded at.")
@click.option("--delta-us", type=int, default=5000, show_default=True)
@click.option("--cap-us", type=float, default=1_000_000.0, show_default=True,
              help="Ignore measured dwells above this cap.")
@click.option("--omega-px", type=int, default=0, show_default=True)
@_geometry_option
@_format_option
def calibrate_cmd(input_path, beta, theta_mm, velocity_mm_s, delta_us, cap_us,
                  omega_px, geometry_path, fmt):
    """Fit the normalized threshold tau to a baseline dwell histogram."""
    geom = _resolve_geometry(geometry_path)
    stream = _load_stream(input_path, fmt, geom)
    stream, _ = classify(stream, FilterConfig(delta_us=delta_us))
    dwells = measured_dwells(stream, cap_us, omega_px)
    if dwells.size == 0:
        raise click.ClickException("no dwell pairs found in the baseline stream")
    tau = calibrate_tau_beta(dwells, beta, theta_mm, velocity_mm_s)
    eta = eta_from_tau(tau, theta_mm, MotionParams(velocity_mm_s))
    click.echo(f"samples = {dwells.size}")
    click.echo(f"tau = {tau:.6g}")
    click.echo(f"eta_us (at calibration speed) = {eta:.6g}")


# ---------------------------------------------------------------------------
# model

@main.command("model")
@click.option("--alpha", type=float, required=True)
@click.option("--theta-mm", type=float, default=5.0, show_default=True)
@click.option("--velocity-mm-s", type=float, required=True)
@_geometry_option
def model_cmd(alpha, theta_mm, velocity_mm_s, geometry_path):
    """Print the closed-form threshold and error-rate figures for a config."""
    geom = _resolve_geometry(geometry_path)
    motion = MotionParams(velocity_mm_s)
    tau = np_threshold_alpha(alpha, geom)
    eta = eta_from_tau(tau, theta_mm, motion)
    click.echo(f"focal_mm = {geom.focal_mm}")
    click.echo(f"radius_mm = {geom.radius_mm:.6g}")
    click.echo(f"alpha = {alpha}")
    click.echo(f"tau = {tau:.6g}")
    click.echo(f"eta_us = {eta:.6g}")
    click.echo(f"fp_rate_bound = {fp_rate_bound(tau, geom):.6g}")


# ---------------------------------------------------------------------------
# render

@main.command("render")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path(),
              help="Portable graymap (.pgm) or pixmap (.ppm with --color).")
@click.option("--window-us", type=int, required=True)
@click.option("--t0", type=int, default=0, show_default=True)
@click.option("--color", is_flag=True,
              help="Color render: snow red, background positive green, negative blue.")
@_geometry_option
@_format_option
def render_cmd(input_path, output, window_us, t0, color, geometry_path, fmt):
    """Render an accumulation frame from an event stream."""
    t_start = time.perf_counter()
    geom = _resolve_geometry(geometry_path)
    stream = _load_stream(input_path, fmt, geom)
    if color:
        image = render_accumulation_color(stream, window_us, t0)
    else:
        image = render_accumulation(stream, window_us, t0)
    write_pnm(image, output)
    click.echo(f"wrote {output}")
    _emit_manifest("render", {
        "window_us": window_us, "t0": t0, "color": color,
        "geometry": geometry_path,
    }, [input_path], [output], None, t_start)


# ---------------------------------------------------------------------------
# eval

@main.command("eval")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="Labeled stream carrying both predictions and truth flags.")
@click.option("--curve-output", type=click.Path(), default=None,
              help="Also write a percent-removed curve CSV over an eta grid.")
@click.option("--eta-max-us", type=float, default=5000.0, show_default=True)
@click.option("--eta-steps", type=int, default=21, show_default=True)
@click.option("--omega-px", type=int, default=1, show_default=True)
@click.option("--delta-us", type=int, default=5000, show_default=True)
@click.option("--det-boxes", type=click.Path(exists=True), default=None)
@click.option("--gt-boxes", type=click.Path(exists=True), default=None)
@click.option("--iou-min", type=float, default=0.5, show_default=True)
@click.option("--exclude", "exclusions", type=(float, float), multiple=True,
              help="Time windows (lo hi, us) to exclude from box matching.")
@_geometry_option
@_format_option
def eval_cmd(input_path, curve_output, eta_max_us, eta_steps, omega_px,
             delta_us, det_boxes, gt_boxes, iou_min, exclusions,
             geometry_path, fmt):
    """Score predictions against ground truth; optional curves and boxes."""
    t_start = time.perf_counter()
    geom = _resolve_geometry(geometry_path)
    stream = _load_stream(input_path, fmt, geom)
    report = event_prf(stream, "snow")
    click.echo("event-level (positive class = snow): " + report.as_text())
    outputs = []
    if curve_output:
        classified, _ = classify(stream, FilterConfig(delta_us=delta_us))
        grid = np.linspace(0.0, eta_max_us, eta_steps)
        curve = percent_removed_curve(classified, grid,
                                      DetectorConfig(eta_us=max(eta_max_us, 1.0),
                                                     omega_px=omega_px))
        write_curve(curve, curve_output)
        outputs.append(curve_output)
        click.echo(f"wrote {curve_output}")
    if det_boxes or gt_boxes:
        if not (det_boxes and gt_boxes):
            raise click.UsageError("--det-boxes and --gt-boxes go together")
        box_report = match_boxes(read_boxes(det_boxes), read_boxes(gt_boxes),
                                 iou_min, list(exclusions))
        click.echo("box-level: " + box_report.as_text())
    if outputs:
        _emit_manifest("eval", {
            "eta_max_us": eta_max_us, "eta_steps": eta_steps,
            "omega_px": omega_px, "delta_us": delta_us, "iou_min": iou_min,
            "exclusions": list(exclusions), "geometry": geometry_path,
        }, [input_path], outputs, None, t_start)


if __name__ == "__main__":
    main()
