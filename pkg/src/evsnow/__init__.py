"""Event-camera snowfall removal toolkit.

Partitions event streams into snowflake and background events by measuring
per-pixel dwell times from paired positive/negative inceptive events and
thresholding them with a Neyman-Pearson rule. Ships the closed-form
statistical model, a ground-truth synthetic scene generator, serialization,
evaluation metrics, and a CLI (``evsnow``).
"""
__version__ = "0.1.0"

from .detector import DetectorConfig, StreamingDetector, detect, split
from .dwell import (
    DiameterDensity,
    PointMassDiameter,
    ThresholdConfig,
    TruncatedLogNormalDiameter,
    UniformDiameter,
    calibrate_tau_beta,
    dwell_pdf,
    dwell_time,
    eta_from_tau,
    fn_rate,
    fp_rate,
    fp_rate_bound,
    likelihood_ratio,
    np_threshold_alpha,
)
from .events import (
    CameraGeometry,
    Event,
    LabeledStream,
    MotionParams,
    default_geometry,
    kmh_to_mm_s,
    pixel_radius,
    sort_check,
)
from .inceptive import FilterConfig, IeGraphNode, classify
from .kernels import HAVE_COMPILED, IMPLEMENTATION
from .stream_io import read_csv, read_evd, render_accumulation, write_csv, write_evd
from .synth import BackgroundTrack, Snowflake3D, SynthConfig, generate, project

__all__ = [
    "__version__",
    "BackgroundTrack", "CameraGeometry", "DetectorConfig", "DiameterDensity",
    "Event", "FilterConfig", "HAVE_COMPILED", "IMPLEMENTATION", "IeGraphNode",
    "LabeledStream", "MotionParams", "PointMassDiameter", "Snowflake3D",
    "StreamingDetector", "SynthConfig", "ThresholdConfig",
    "TruncatedLogNormalDiameter", "UniformDiameter", "calibrate_tau_beta",
    "classify", "default_geometry", "detect", "dwell_pdf", "dwell_time",
    "eta_from_tau", "fn_rate", "fp_rate", "fp_rate_bound", "generate",
    "kmh_to_mm_s", "likelihood_ratio", "np_threshold_alpha", "pixel_radius",
    "project", "read_csv", "read_evd", "render_accumulation", "sort_check",
    "split", "write_csv", "write_evd",
]
