"""Plain-text ``key = value`` configuration files.

One assignment per line; ``#`` starts a comment; blank lines ignored.
Recognized keys: focal_mm, radius_mm, width_px, height_px, pitch_mm,
cx, cy, theta_mm, alpha, beta, tau, eta_us, omega_px, velocity_mm_s,
delta_us. Unknown keys are rejected so typos fail loudly.
"""
from __future__ import annotations

import math
from typing import Dict, Optional, Union

from .events import CameraGeometry

_FLOAT_KEYS = frozenset({
    "focal_mm", "radius_mm", "pitch_mm", "cx", "cy", "theta_mm",
    "alpha", "beta", "tau", "eta_us", "velocity_mm_s",
})
_INT_KEYS = frozenset({"width_px", "height_px", "omega_px", "delta_us"})
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS

ConfigDict = Dict[str, Union[int, float]]


class ConfigError(ValueError):
    """Malformed configuration file; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"{message} (line {line_number})")
        self.line_number = line_number


def parse_config(text: str) -> ConfigDict:
    out: ConfigDict = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", ln)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", ln)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", ln)
        try:
            out[key] = int(value) if key in _INT_KEYS else float(value)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {value!r}", ln) from None
    return out


def load_config(path) -> ConfigDict:
    if hasattr(path, "read"):
        return parse_config(path.read())
    with open(path) as f:
        return parse_config(f.read())


def format_config(cfg: ConfigDict) -> str:
    return "".join(f"{k} = {cfg[k]}\n" for k in sorted(cfg))


def geometry_from_config(cfg: ConfigDict,
                         default: Optional[CameraGeometry] = None) -> CameraGeometry:
    """Build a geometry, falling back to ``default`` for unset fields.

    ``radius_mm`` defaults to the half-diagonal rule when omitted.
    """
    base = default
    width = int(cfg.get("width_px", base.width_px if base else 1280))
    height = int(cfg.get("height_px", base.height_px if base else 720))
    focal = float(cfg.get("focal_mm", base.focal_mm if base else 5.0))
    pitch = float(cfg.get("pitch_mm", base.pitch_mm if base else 0.005))
    if "cx" in cfg or "cy" in cfg:
        principal = (float(cfg.get("cx", width / 2.0)),
                     float(cfg.get("cy", height / 2.0)))
    elif base is not None:
        principal = base.principal
    else:
        principal = (width / 2.0, height / 2.0)
    if "radius_mm" in cfg:
        radius = float(cfg["radius_mm"])
    else:
        radius = pitch * math.hypot(width / 2.0, height / 2.0)
    return CameraGeometry(focal, radius, width, height, pitch, principal)
