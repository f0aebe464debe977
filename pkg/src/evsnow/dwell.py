"""Closed-form dwell-time statistics and threshold selection.

A snowflake of diameter D (mm) seen by a camera with focal length l (mm)
and effective circular detector radius R (mm), while the vehicle moves at
V (mm/s) along the optical axis, occupies a pixel at image-plane radius
r (mm) for

    T = 1e6 * D * l / (V * r)   microseconds,

independent of its distance along the optical axis. Under uniformly
distributed flake positions the dwell-time density is

    f(T) = 2 D^2 l^2 * 1e12 / (R^2 V^2 T^3)   for T > 1e6 * D l / (V R),

zero otherwise. The likelihood ratio of "background" vs "snowflake" is a
monotone function of T, so the optimal test reduces to dwell thresholding
T >= eta with eta = 1e6 * tau * theta / V; tau is the dimensionless,
velocity-normalized threshold and theta the maximum physical flake
diameter. Two Neyman-Pearson calibrations are provided: the closed form
tau = l / (R * sqrt(alpha)) bounding the snowflake-kept rate by alpha, and
an empirical beta-quantile fit on baseline (no-precipitation) dwell
samples bounding the background-discarded rate by beta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, stats

from .events import US_PER_S, CameraGeometry, MotionParams

_QUAD_RTOL = 1e-8


# ---------------------------------------------------------------------------
# Diameter densities

class DiameterDensity:
    """A diameter distribution on (0, d_max], millimeters.

    Only the second moment restricted to (0, c] enters the detector math,
    so subclasses implement :meth:`second_moment_upto` (analytically where
    possible, by adaptive quadrature otherwise) alongside pdf/cdf/sampling.
    """

    d_max: float
    family: str

    def pdf(self, d):
        raise NotImplementedError

    def cdf(self, d):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def second_moment_upto(self, c: float) -> float:
        """Integral of D^2 * f(D) over (0, min(c, d_max)]."""
        raise NotImplementedError

    def normalization(self) -> float:
        """Numerical integral of the pdf over its support (should be 1)."""
        val, _ = integrate.quad(self.pdf, 0.0, self.d_max, epsrel=1e-12, limit=200)
        return val


@dataclass(frozen=True)
class UniformDiameter(DiameterDensity):
    """Uniform on (0, d_max]."""
    d_max: float
    family: str = "uniform"

    def __post_init__(self):
        if self.d_max <= 0:
            raise ValueError("d_max must be positive")

    def pdf(self, d):
        d = np.asarray(d, float)
        return np.where((d > 0) & (d <= self.d_max), 1.0 / self.d_max, 0.0)

    def cdf(self, d):
        return np.clip(np.asarray(d, float) / self.d_max, 0.0, 1.0)

    def sample(self, rng, size):
        return rng.uniform(0.0, self.d_max, size)

    def second_moment_upto(self, c):
        c = min(max(c, 0.0), self.d_max)
        return c ** 3 / (3.0 * self.d_max)


@dataclass(frozen=True)
class PointMassDiameter(DiameterDensity):
    """All mass at one diameter."""
    d0: float
    family: str = "point_mass"

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")

    @property
    def d_max(self) -> float:
        return self.d0

    def pdf(self, d):
        raise ValueError("point mass has no density; use cdf/second_moment_upto")

    def cdf(self, d):
        return np.where(np.asarray(d, float) >= self.d0, 1.0, 0.0)

    def sample(self, rng, size):
        return np.full(size, self.d0)

    def second_moment_upto(self, c):
        return self.d0 ** 2 if self.d0 <= c else 0.0

    def normalization(self):
        return 1.0


@dataclass(frozen=True)
class TruncatedLogNormalDiameter(DiameterDensity):
    """Lognormal(mu, sigma) truncated and renormalized to (0, d_max]."""
    mu: float
    sigma: float
    d_max: float
    family: str = "truncated_lognormal"

    def __post_init__(self):
        if self.sigma <= 0 or self.d_max <= 0:
            raise ValueError("sigma and d_max must be positive")

    def _dist(self):
        return stats.lognorm(s=self.sigma, scale=math.exp(self.mu))

    def pdf(self, d):
        d = np.asarray(d, float)
        dist = self._dist()
        norm = dist.cdf(self.d_max)
        return np.where((d > 0) & (d <= self.d_max), dist.pdf(d) / norm, 0.0)

    def cdf(self, d):
        dist = self._dist()
        norm = dist.cdf(self.d_max)
        return np.clip(dist.cdf(np.asarray(d, float)) / norm, 0.0, 1.0)

    def sample(self, rng, size):
        dist = self._dist()
        norm = dist.cdf(self.d_max)
        u = rng.uniform(0.0, 1.0, size)
        return dist.ppf(u * norm)

    def second_moment_upto(self, c):
        c = min(max(c, 0.0), self.d_max)
        if c <= 0.0:
            return 0.0
        # Closed-form partial second moment of a lognormal:
        # int_0^c d^2 f(d) dd = exp(2mu + 2sigma^2) * Phi((ln c - mu)/sigma - 2sigma),
        # renormalized by the truncation mass Phi((ln d_max - mu)/sigma).
        def phi(z):
            return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
        z = (math.log(c) - self.mu) / self.sigma - 2.0 * self.sigma
        z_norm = (math.log(self.d_max) - self.mu) / self.sigma
        return (math.exp(2.0 * self.mu + 2.0 * self.sigma ** 2)
                * phi(z) / phi(z_norm))


# ---------------------------------------------------------------------------
# Threshold configuration

@dataclass(frozen=True)
class ThresholdConfig:
    """Detector thresholds; unset calibration fields stay None."""
    theta_mm: float = 5.0
    alpha: Optional[float] = None
    beta: Optional[float] = None
    tau: Optional[float] = None
    eta_us: Optional[float] = None
    omega_px: int = 1

    def __post_init__(self):
        if self.theta_mm <= 0:
            raise ValueError("theta_mm must be positive")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if v is not None and not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.eta_us is not None and self.eta_us <= 0:
            raise ValueError("eta_us must be positive")
        if self.omega_px < 0:
            raise ValueError("omega_px must be >= 0")


# ---------------------------------------------------------------------------
# Kinematics and density

def dwell_time(d_mm: float, geom: CameraGeometry, motion: MotionParams, r_mm: float) -> float:
    """Dwell time (us) of a flake of diameter d_mm at image radius r_mm."""
    if r_mm <= 0:
        raise ValueError("r = 0 is the ego-motion axis singularity (unbounded dwell)")
    if d_mm <= 0:
        raise ValueError("diameter must be positive")
    return US_PER_S * d_mm * geom.focal_mm / (motion.velocity_mm_s * r_mm)


def dwell_support_min_us(d_mm: float, geom: CameraGeometry, motion: MotionParams) -> float:
    """Smallest possible dwell (us): the flake at the detector rim r = R."""
    return US_PER_S * d_mm * geom.focal_mm / (motion.velocity_mm_s * geom.radius_mm)


def dwell_pdf(t_us, d_mm: float, geom: CameraGeometry, motion: MotionParams):
    """Dwell-time density (per us) for fixed diameter; zero below the support."""
    if d_mm <= 0:
        raise ValueError("diameter must be positive")
    t = np.asarray(t_us, float)
    tmin = dwell_support_min_us(d_mm, geom, motion)
    coeff = (2.0 * d_mm ** 2 * geom.focal_mm ** 2 * US_PER_S ** 2
             / (geom.radius_mm ** 2 * motion.velocity_mm_s ** 2))
    with np.errstate(divide="ignore"):
        dens = np.where(t > tmin, coeff / np.maximum(t, 1e-300) ** 3, 0.0)
    return float(dens) if dens.ndim == 0 else dens


def dwell_cdf(t_us, d_mm: float, geom: CameraGeometry, motion: MotionParams):
    """Closed-form CDF matching :func:`dwell_pdf`: 1 - (tmin/T)^2 above tmin."""
    t = np.asarray(t_us, float)
    tmin = dwell_support_min_us(d_mm, geom, motion)
    out = np.where(t > tmin, 1.0 - (tmin / np.maximum(t, 1e-300)) ** 2, 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Hypothesis testing

def likelihood_ratio(t_us: float, h0: DiameterDensity, h1: DiameterDensity,
                     cfg: ThresholdConfig, geom: CameraGeometry,
                     motion: MotionParams) -> float:
    """Background-vs-snowflake likelihood ratio at dwell time t_us.

    Equals the restricted second moment of h1 up to c = T*V*R/l divided by
    the second moment of h0 up to theta; nondecreasing in T above the
    critical dwell theta*l/(V*R).
    """
    if t_us <= 0:
        raise ValueError("dwell time must be positive")
    if h0.d_max > cfg.theta_mm * (1 + 1e-12):
        raise ValueError("h0 must place no mass above theta_mm")
    denom = h0.second_moment_upto(cfg.theta_mm)
    if denom <= 0.0:
        raise ValueError("degenerate h0: zero second moment below theta")
    c = (t_us / US_PER_S) * motion.velocity_mm_s * geom.radius_mm / geom.focal_mm
    return h1.second_moment_upto(c) / denom


def np_threshold_alpha(alpha: float, geom: CameraGeometry) -> float:
    """Closed-form Neyman-Pearson threshold tau = l / (R * sqrt(alpha))."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return geom.focal_mm / (geom.radius_mm * math.sqrt(alpha))


def fp_rate_bound(tau: float, geom: CameraGeometry) -> float:
    """Tight upper bound l^2/(R^2 tau^2) on the snowflake-kept rate, in [0, 1]."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return min(max((geom.focal_mm / (geom.radius_mm * tau)) ** 2, 0.0), 1.0)


def fp_rate(tau: float, h0: DiameterDensity, cfg: ThresholdConfig,
            geom: CameraGeometry) -> float:
    """Exact snowflake-kept rate P(T > eta | snowflake) for diameter density h0.

    Velocity-independent by construction; always <= :func:`fp_rate_bound`.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if h0.d_max > cfg.theta_mm * (1 + 1e-12):
        raise ValueError("h0 must place no mass above theta_mm")
    scale = (geom.focal_mm / (geom.radius_mm * cfg.theta_mm * tau)) ** 2
    return scale * h0.second_moment_upto(cfg.theta_mm)


def fn_rate(d0_mm: float, alpha: float, theta_mm: float) -> float:
    """Background-discarded rate for a background detail of size d0_mm,
    at closed-form significance alpha: max(1 - alpha * d0^2 / theta^2, 0)."""
    if d0_mm < 0:
        raise ValueError("d0_mm must be nonnegative")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if theta_mm <= 0:
        raise ValueError("theta_mm must be positive")
    return max(1.0 - alpha * d0_mm ** 2 / theta_mm ** 2, 0.0)


def eta_from_tau(tau: float, theta_mm: float, motion: MotionParams) -> float:
    """Velocity-adjusted dwell threshold eta = 1e6 * tau * theta / V (us)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return US_PER_S * tau * theta_mm / motion.velocity_mm_s


def tau_from_eta(eta_us: float, theta_mm: float, motion: MotionParams) -> float:
    """Inverse of :func:`eta_from_tau`."""
    if eta_us <= 0:
        raise ValueError("eta_us must be positive")
    return eta_us * motion.velocity_mm_s / (US_PER_S * theta_mm)


def calibrate_tau_beta(baseline_dwells_us: Sequence[float], beta: float,
                       theta_mm: float, v0_mm_s: float) -> float:
    """Empirical tau from baseline (no-precipitation) dwell samples.

    Returns the smallest tau whose threshold eta = 1e6*tau*theta/V0 has an
    empirical fraction of samples at or below it equal to beta. Quantile
    convention is lower-midpoint: for k = ceil(beta*n) >= 1 the threshold
    sits at the k-th order statistic; beta = 0 places it below the minimum
    sample (at half its value).
    """
    samples = np.sort(np.asarray(baseline_dwells_us, float))
    n = samples.shape[0]
    if n == 0:
        raise ValueError("baseline dwell sample set is empty")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if v0_mm_s <= 0:
        raise ValueError("v0_mm_s must be positive")
    k = int(math.ceil(beta * n - 1e-12))
    eta = samples[0] / 2.0 if k == 0 else float(samples[k - 1])
    return eta * v0_mm_s / (US_PER_S * theta_mm)
