import math

import numpy as np
import pytest
from scipy import integrate

from evsnow.events import CameraGeometry, MotionParams, default_geometry, kmh_to_mm_s
from evsnow.dwell import (
    PointMassDiameter,
    ThresholdConfig,
    TruncatedLogNormalDiameter,
    UniformDiameter,
    calibrate_tau_beta,
    dwell_cdf,
    dwell_pdf,
    dwell_support_min_us,
    dwell_time,
    eta_from_tau,
    fn_rate,
    fp_rate,
    fp_rate_bound,
    likelihood_ratio,
    np_threshold_alpha,
    tau_from_eta,
)

V20 = kmh_to_mm_s(20.0)
GEOM_R36 = CameraGeometry(5.0, 3.6, 1280, 720, 0.005, (640.0, 360.0))


# ---------------------------------------------------------------------------
# Kinematics

def test_dwell_time_hand_value():
    g = default_geometry()
    t = dwell_time(5.0, g, MotionParams(V20), 3.6)
    assert t == pytest.approx(1250.0, rel=1e-9)


def test_dwell_time_z_independence_oracle():
    # Oracle: T = 1e6 * D*Z / (V*sqrt(X^2+Y^2)) with (X, Y) = (r*Z/focal, 0)
    # must agree with the projected form at every depth.
    g = default_geometry()
    v = V20
    rng = np.random.default_rng(11)
    for _ in range(50):
        d = rng.uniform(0.5, 5.0)
        r = rng.uniform(0.1, g.radius_mm)
        ref = dwell_time(d, g, MotionParams(v), r)
        for z in (500.0, 1000.0, 2000.0):
            lateral = r * z / g.focal_mm
            t_3d = 1e6 * d * z / (v * math.hypot(lateral, 0.0))
            assert t_3d == pytest.approx(ref, rel=1e-12)


def test_dwell_time_velocity_scaling():
    g = default_geometry()
    t1 = dwell_time(5.0, g, MotionParams(V20), 2.0)
    t2 = dwell_time(5.0, g, MotionParams(2 * V20), 2.0)
    assert t1 == pytest.approx(2 * t2, rel=1e-12)


def test_dwell_time_axis_singularity():
    g = default_geometry()
    with pytest.raises(ValueError):
        dwell_time(5.0, g, MotionParams(V20), 0.0)


def test_dwell_time_below_2ms_at_rim():
    g = default_geometry()
    assert dwell_time(5.0, g, MotionParams(V20), g.radius_mm) < 2000.0


# ---------------------------------------------------------------------------
# Density

def test_pdf_zero_below_support():
    g = default_geometry()
    m = MotionParams(V20)
    tmin = dwell_support_min_us(5.0, g, m)
    assert dwell_pdf(tmin * 0.999, 5.0, g, m) == 0.0
    assert dwell_pdf(tmin * 1.001, 5.0, g, m) > 0.0


@pytest.mark.parametrize("d,kmh", [(5.0, 20.0), (1.0, 20.0), (5.0, 100.0), (2.5, 60.0)])
def test_pdf_normalization(d, kmh):
    g = default_geometry()
    m = MotionParams(kmh_to_mm_s(kmh))
    tmin = dwell_support_min_us(d, g, m)
    total, _ = integrate.quad(lambda t: dwell_pdf(t, d, g, m), tmin, np.inf,
                              epsabs=1e-10, epsrel=1e-10)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_cdf_matches_pdf_integral():
    g = default_geometry()
    m = MotionParams(V20)
    tmin = dwell_support_min_us(5.0, g, m)
    for t in (tmin * 1.5, tmin * 3, tmin * 10):
        num, _ = integrate.quad(lambda u: dwell_pdf(u, 5.0, g, m), tmin, t)
        assert dwell_cdf(t, 5.0, g, m) == pytest.approx(num, abs=1e-9)


def test_pdf_monte_carlo_ks():
    # Flakes uniform on the detector disc: dwell samples must match the pdf.
    g = default_geometry()
    m = MotionParams(V20)
    rng = np.random.default_rng(5)
    n = 200_000
    r = g.radius_mm * np.sqrt(rng.uniform(0.0, 1.0, n))
    r = r[r > 0]
    samples = 1e6 * 5.0 * g.focal_mm / (m.velocity_mm_s * r)
    from scipy import stats
    ks = stats.kstest(samples, lambda t: dwell_cdf(t, 5.0, g, m)).statistic
    assert ks < 0.01


# ---------------------------------------------------------------------------
# Densities

def test_density_normalizations():
    for dens in (UniformDiameter(5.0),
                  TruncatedLogNormalDiameter(mu=0.0, sigma=0.5, d_max=5.0),
                  PointMassDiameter(2.0)):
        assert dens.normalization() == pytest.approx(1.0, abs=1e-9)


def test_density_zero_above_dmax():
    u = UniformDiameter(5.0)
    ln = TruncatedLogNormalDiameter(mu=0.0, sigma=0.5, d_max=5.0)
    assert u.pdf(5.1) == 0.0
    assert ln.pdf(5.1) == 0.0


def test_second_moment_against_quadrature():
    ln = TruncatedLogNormalDiameter(mu=0.2, sigma=0.4, d_max=5.0)
    for c in (0.5, 2.0, 5.0, 10.0):
        ref, _ = integrate.quad(lambda d: d * d * ln.pdf(d), 0.0, min(c, 5.0),
                                epsrel=1e-10)
        assert ln.second_moment_upto(c) == pytest.approx(ref, rel=1e-7)


# ---------------------------------------------------------------------------
# Likelihood ratio and thresholds

def test_likelihood_ratio_uniform_analytic():
    g = default_geometry()
    m = MotionParams(V20)
    cfg = ThresholdConfig(theta_mm=5.0)
    h0 = UniformDiameter(5.0)
    big_m = 8.0
    h1 = UniformDiameter(big_m)
    for t_us in (500.0, 1500.0, 4000.0, 10000.0):
        c = min((t_us / 1e6) * m.velocity_mm_s * g.radius_mm / g.focal_mm, big_m)
        expected = c ** 3 / (big_m * 5.0 ** 2)
        got = likelihood_ratio(t_us, h0, h1, cfg, g, m)
        assert got == pytest.approx(expected, rel=1e-6)


def test_likelihood_ratio_identical_hypotheses_saturate():
    g = default_geometry()
    m = MotionParams(V20)
    cfg = ThresholdConfig(theta_mm=5.0)
    h = UniformDiameter(5.0)
    t_sat = 1e6 * 5.0 * g.focal_mm / (m.velocity_mm_s * g.radius_mm)
    assert likelihood_ratio(t_sat * 1.01, h, h, cfg, g, m) == pytest.approx(1.0, rel=1e-9)


def test_likelihood_ratio_monotone_grid():
    g = default_geometry()
    m = MotionParams(V20)
    cfg = ThresholdConfig(theta_mm=5.0)
    t_crit = 1e6 * 5.0 * g.focal_mm / (m.velocity_mm_s * g.radius_mm)
    grid = np.linspace(t_crit, t_crit * 20, 200)
    pairs = [
        (UniformDiameter(5.0), UniformDiameter(8.0)),
        (UniformDiameter(5.0), TruncatedLogNormalDiameter(0.5, 0.6, 20.0)),
        (TruncatedLogNormalDiameter(0.0, 0.5, 5.0), UniformDiameter(10.0)),
    ]
    for h0, h1 in pairs:
        vals = [likelihood_ratio(t, h0, h1, cfg, g, m) for t in grid]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_likelihood_ratio_rejects_bad_h0():
    g = default_geometry()
    m = MotionParams(V20)
    cfg = ThresholdConfig(theta_mm=5.0)
    with pytest.raises(ValueError):
        likelihood_ratio(1000.0, UniformDiameter(6.0), UniformDiameter(5.0), cfg, g, m)


def test_np_threshold_alpha_values():
    wide = CameraGeometry(5.0, 10.0, 1280, 720, 0.005, (640.0, 360.0))
    alpha_unit = (wide.focal_mm / wide.radius_mm) ** 2
    assert np_threshold_alpha(alpha_unit, wide) == pytest.approx(1.0, rel=1e-12)
    g = GEOM_R36
    assert np_threshold_alpha(0.05, g) == pytest.approx(6.211, abs=5e-4)
    assert fp_rate_bound(np_threshold_alpha(0.05, g), g) == pytest.approx(0.05, rel=1e-12)


def test_fp_rate_bound_limits():
    g = GEOM_R36
    assert fp_rate_bound(1e12, g) == pytest.approx(0.0, abs=1e-12)
    assert fp_rate_bound(g.focal_mm / g.radius_mm, g) == pytest.approx(1.0)
    assert fp_rate_bound(6.211, g) == pytest.approx(0.05, abs=1e-4)


def test_fp_rate_point_masses():
    g = GEOM_R36
    cfg = ThresholdConfig(theta_mm=5.0)
    tau = 2.0
    assert fp_rate(tau, PointMassDiameter(5.0), cfg, g) == pytest.approx(
        fp_rate_bound(tau, g), rel=1e-12)
    tau_unit = g.focal_mm / g.radius_mm
    assert fp_rate(tau_unit, PointMassDiameter(2.5), cfg, g) == pytest.approx(0.25, rel=1e-12)


def test_fp_rate_below_bound():
    g = default_geometry()
    cfg = ThresholdConfig(theta_mm=5.0)
    for tau in (2.0, 5.0, 10.0):
        for h0 in (UniformDiameter(5.0),
                   TruncatedLogNormalDiameter(0.0, 0.5, 5.0),
                   PointMassDiameter(3.0)):
            assert fp_rate(tau, h0, cfg, g) <= fp_rate_bound(tau, g) + 1e-12


def test_fn_rate_reference_points():
    assert fn_rate(15.8, 0.05, 5.0) == pytest.approx(0.50, abs=0.01)
    cutoff = 5.0 / math.sqrt(0.05)  # 22.3607 mm
    assert fn_rate(cutoff, 0.05, 5.0) == 0.0
    assert fn_rate(cutoff + 1.0, 0.05, 5.0) == 0.0
    # The two-decimal rounding of the cutoff sits just inside the ramp.
    assert fn_rate(22.36, 0.05, 5.0) < 1e-4
    assert fn_rate(0.0, 0.05, 5.0) == 1.0


def test_eta_from_tau_values():
    m = MotionParams(V20)
    assert eta_from_tau(6.211, 5.0, m) == pytest.approx(5590.0, abs=0.5)
    assert eta_from_tau(1.0, 5.0, MotionParams(2 * V20)) == pytest.approx(
        eta_from_tau(1.0, 5.0, m) / 2.0, rel=1e-12)
    assert eta_from_tau(1.0, 5.0, MotionParams(1e12)) < 1e-2


def test_tau_eta_round_trip():
    m = MotionParams(V20)
    tau = 3.7
    assert tau_from_eta(eta_from_tau(tau, 5.0, m), 5.0, m) == pytest.approx(tau, rel=1e-12)


# ---------------------------------------------------------------------------
# Empirical calibration

def test_calibrate_tau_beta_example():
    tau = calibrate_tau_beta([1000.0, 2000.0, 3000.0, 4000.0], 0.5, 5.0, 5000.0)
    assert tau == pytest.approx(2.0, rel=1e-12)


def test_calibrate_tau_beta_zero_quantile():
    samples = [1000.0, 2000.0, 3000.0]
    tau = calibrate_tau_beta(samples, 0.0, 5.0, 5000.0)
    eta = 1e6 * tau * 5.0 / 5000.0
    assert eta < min(samples)


def test_calibrate_tau_beta_empty_rejected():
    with pytest.raises(ValueError):
        calibrate_tau_beta([], 0.5, 5.0, 5000.0)


def test_calibrate_tau_beta_fraction_matches():
    rng = np.random.default_rng(8)
    samples = rng.uniform(100.0, 10_000.0, 500)
    for beta in (0.1, 0.25, 0.5, 0.9):
        tau = calibrate_tau_beta(samples, beta, 5.0, 5000.0)
        eta = 1e6 * tau * 5.0 / 5000.0
        frac = np.mean(samples <= eta)
        assert frac == pytest.approx(beta, abs=1.0 / len(samples) + 1e-9)
