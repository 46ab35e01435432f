import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.optimize import brentq

from unifloc.channel import (
    PHASE_ERROR_THRESHOLD,
    Region,
    SignalModelParams,
    bs_ris_channel,
    cascaded_channel,
    classify_region,
    complex_noise,
    ff_channel,
    max_phase_error,
    nf_channel,
    received_signal,
    spherical_wave,
)
from unifloc.geometry import (
    CartesianPoint,
    GeometryError,
    RisGeometry,
    SphericalLocation,
    cartesian_to_spherical,
)

PARAMS = SignalModelParams()
LAM = PARAMS.wavelength


def _raw_nf(geom, p, gain=1.0):
    x = p.R * np.sin(p.theta) * np.cos(p.phi)
    y = p.R * np.sin(p.theta) * np.sin(p.phi)
    z = p.R * np.cos(p.theta)
    out = []
    for n in range(geom.n_elements):
        row, col = divmod(n, geom.cols)
        ey = (col - (geom.cols - 1) / 2) * geom.spacing
        ez = (row - (geom.rows - 1) / 2) * geom.spacing
        d = np.sqrt(x**2 + (y - ey) ** 2 + (z - ez) ** 2)
        out.append(np.sqrt(gain) * geom.wavelength / (4 * np.pi * d)
                   * np.exp(-2j * np.pi * d / geom.wavelength))
    return np.array(out)


def test_params_validation():
    with pytest.raises(ValueError):
        SignalModelParams(gain_t=0)
    with pytest.raises(ValueError):
        SignalModelParams(noise_power=-1)
    with pytest.raises(ValueError):
        SignalModelParams(frequency=0)
    assert LAM == pytest.approx(299_792_458.0 / 28e9)
    assert PARAMS.with_noise(2.0).noise_power == 2.0


def test_nf_single_element_unit_wavelength():
    g = RisGeometry(1, 1, 0.5, 1.0)
    params = SignalModelParams(frequency=299_792_458.0)
    h = nf_channel(g, SphericalLocation(1.0, 1.0, 0.3), params)
    assert h[0] == pytest.approx(1 / (4 * np.pi), abs=1e-15)


def test_nf_inverse_distance():
    g = RisGeometry(1, 1, 0.5, LAM)
    a = nf_channel(g, SphericalLocation(2.0, 0.5, 0.5), PARAMS)
    b = nf_channel(g, SphericalLocation(4.0, 0.5, 0.5), PARAMS)
    assert abs(b[0]) == pytest.approx(abs(a[0]) / 2, rel=1e-14)


def test_nf_against_raw_coordinates(rng):
    for _ in range(5):
        g = RisGeometry(int(rng.integers(1, 6)), int(rng.integers(1, 6)), LAM / 2, LAM)
        p = SphericalLocation(rng.uniform(0.05, 2), rng.uniform(0, np.pi), rng.uniform(-1.5, 1.5))
        gain = rng.uniform(0.5, 4)
        np.testing.assert_allclose(nf_channel(g, p, SignalModelParams(gain_t=gain)),
                                   _raw_nf(g, p, gain), rtol=1e-12, atol=0)


def test_nf_zero_distance():
    with pytest.raises(GeometryError):
        spherical_wave(np.array([0.0]), 1.0, LAM)


def test_ff_broadside_identical():
    g = RisGeometry.square(6)
    h = ff_channel(g, np.pi / 2, 0.0, 3.0, PARAMS)
    np.testing.assert_allclose(h, h[0], rtol=1e-12)
    assert abs(h[0]) == pytest.approx(LAM / (4 * np.pi * 3.0))


def test_ff_adjacent_columns_differ_by_pi():
    g = RisGeometry.square(4)
    R = 5.0
    h = ff_channel(g, np.pi / 2, np.pi / 2, R, PARAMS)
    np.testing.assert_allclose(np.angle(h * np.exp(2j * np.pi * (R - g.y) / LAM)), 0, atol=1e-9)
    ratio = h[1] / h[0]
    assert ratio == pytest.approx(-1.0, abs=1e-9)


def test_ff_rejects_nonpositive_range():
    with pytest.raises(GeometryError):
        ff_channel(RisGeometry.square(2), 1.0, 0.0, 0.0, PARAMS)


def _nf_ff_gap(g, R, rng, n=20):
    worst = 0.0
    for _ in range(n):
        th, ph = rng.uniform(0, np.pi), rng.uniform(-np.pi / 2, np.pi / 2)
        a = nf_channel(g, SphericalLocation(R, th, ph), PARAMS)
        b = ff_channel(g, th, ph, R, PARAMS)
        worst = max(worst, np.max(np.abs(a - b) / np.abs(b)))
    return worst


def test_nf_tends_to_ff_small_array(rng):
    g = RisGeometry.square(2)
    aperture = np.hypot(np.ptp(g.y), np.ptp(g.z))
    assert _nf_ff_gap(g, 1000 * aperture, rng) < 1e-3


def test_nf_ff_gap_shrinks_like_inverse_range(rng):
    # the gap is about pi * aperture / (4000 lambda) at 1000 apertures, so a
    # 10x10 array needs a larger range to reach the same accuracy
    g = RisGeometry.square(10)
    aperture = np.hypot(np.ptp(g.y), np.ptp(g.z))
    gaps = [_nf_ff_gap(g, f * aperture, np.random.default_rng(1)) for f in (1e3, 1e4)]
    assert gaps[1] < gaps[0] / 9
    assert gaps[1] < 1e-3


def test_phase_error_single_element(rng):
    g = RisGeometry(1, 1, 0.5, LAM)
    for _ in range(10):
        p = SphericalLocation(rng.uniform(0.01, 5), rng.uniform(0, np.pi), rng.uniform(-1.5, 1.5))
        assert max_phase_error(g, p) == pytest.approx(0.0, abs=1e-12)
        assert classify_region(g, p) is Region.FAR_FIELD


def test_phase_error_matches_brute_force(rng):
    g = RisGeometry.square(5)
    for _ in range(20):
        p = SphericalLocation(rng.uniform(0.02, 1), rng.uniform(0, np.pi), rng.uniform(-1.5, 1.5))
        d = np.abs(_raw_nf(g, p))
        dist = LAM / (4 * np.pi * d)
        lin = p.R - g.y * np.sin(p.theta) * np.sin(p.phi) - g.z * np.cos(p.theta)
        ref = np.max(2 * np.pi / LAM * (dist - lin))
        assert max_phase_error(g, p) == pytest.approx(ref, rel=1e-9, abs=1e-12)


@settings(max_examples=100)
@given(st.floats(0.005, 5), st.floats(0, np.pi), st.floats(-np.pi / 2, np.pi / 2))
def test_phase_error_nonnegative(R, theta, phi):
    g = RisGeometry.square(6)
    assert max_phase_error(g, SphericalLocation(R, theta, phi)) >= -1e-12


def test_phase_error_decreasing_in_range():
    g = RisGeometry.square(10)
    Rs = np.linspace(5 * LAM, 300 * LAM, 200)
    errs = [max_phase_error(g, SphericalLocation(R, np.pi / 2, 0.0)) for R in Rs]
    assert np.all(np.diff(errs) < 0)


def test_crossover_bisection():
    g = RisGeometry.square(10)
    f = lambda R: max_phase_error(g, SphericalLocation(R, np.pi / 2, 0.0)) - PHASE_ERROR_THRESHOLD
    r_star = brentq(f, LAM, 1000 * LAM, xtol=1e-14)
    assert classify_region(g, SphericalLocation(r_star / 2, np.pi / 2, 0.0)) is Region.NEAR_FIELD
    assert classify_region(g, SphericalLocation(2 * r_star, np.pi / 2, 0.0)) is Region.FAR_FIELD


def test_classification_partition_and_geometry_only(rng):
    g = RisGeometry.square(8)
    for _ in range(50):
        p = SphericalLocation(rng.uniform(0.01, 3), rng.uniform(0, np.pi), rng.uniform(-1.5, 1.5))
        region = classify_region(g, p)
        assert region in (Region.NEAR_FIELD, Region.FAR_FIELD)
        assert (region is Region.NEAR_FIELD) == (max_phase_error(g, p) > PHASE_ERROR_THRESHOLD)


def test_bs_channel_single_element():
    g = RisGeometry(1, 1, LAM / 2, LAM)
    R = 3.0
    h = bs_ris_channel(g, CartesianPoint(R, 0, 0), gain_r=2.0)
    expected = np.sqrt(2.0) * LAM / (4 * np.pi * R) * np.exp(-2j * np.pi * R / LAM)
    assert h[0] == pytest.approx(expected, rel=1e-12)


def test_bs_channel_far_magnitudes_flat():
    g = RisGeometry.square(10)
    aperture = np.hypot(np.ptp(g.y), np.ptp(g.z))
    h = bs_ris_channel(g, CartesianPoint(100 * aperture, 0.3 * aperture, -0.2 * aperture))
    mag = np.abs(h)
    assert mag.max() / mag.min() - 1 < 0.01


def test_bs_channel_matches_nf_channel():
    g = RisGeometry.square(4)
    bs = CartesianPoint(0.7, -0.2, 0.3)
    loc = cartesian_to_spherical(bs)
    ref = nf_channel(g, loc, SignalModelParams(gain_t=3.0))
    np.testing.assert_array_equal(bs_ris_channel(g, bs, gain_r=3.0), ref)


def test_bs_channel_rejects_plane():
    with pytest.raises(GeometryError):
        bs_ris_channel(RisGeometry.square(2), CartesianPoint(0.0, 1.0, 0.0))


def test_cascaded_channel(rng):
    h_t = rng.normal(size=6) + 1j * rng.normal(size=6)
    h_A = rng.normal(size=6) + 1j * rng.normal(size=6)
    np.testing.assert_array_equal(cascaded_channel(np.ones(6), h_t), h_t)
    c = cascaded_channel(h_A, h_t)
    np.testing.assert_allclose(np.abs(c), np.abs(h_A) * np.abs(h_t), rtol=1e-14)
    np.testing.assert_allclose(np.exp(1j * np.angle(c)),
                               np.exp(1j * (np.angle(h_A) + np.angle(h_t))), atol=1e-12)
    with pytest.raises(ValueError):
        cascaded_channel(h_A, h_t[:5])


def test_received_signal_basic(rng):
    assert received_signal(np.ones(7), np.ones(7)) == 7
    h = rng.normal(size=9) + 1j * rng.normal(size=9)
    y = received_signal(np.conj(h) / np.abs(h), h)
    assert y.real == pytest.approx(np.abs(h).sum())
    assert y.imag == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        received_signal(np.ones(3), np.ones(4))


def test_received_signal_linear(rng):
    beta = np.exp(2j * np.pi * rng.random(5))
    h1 = rng.normal(size=5) + 1j * rng.normal(size=5)
    h2 = rng.normal(size=5) + 1j * rng.normal(size=5)
    s = 0.3 - 1.2j
    assert received_signal(beta, h1, 2 * s) == pytest.approx(2 * received_signal(beta, h1, s))
    assert received_signal(beta, h1 + h2, s) == pytest.approx(
        received_signal(beta, h1, s) + received_signal(beta, h2, s))


def test_noise_variance_and_rayleigh(rng):
    sigma2 = 0.37
    noise = complex_noise(rng, sigma2, 100_000)
    assert np.var(noise) == pytest.approx(sigma2, rel=0.03)
    assert np.var(noise.real) == pytest.approx(sigma2 / 2, rel=0.03)
    beta = np.ones(4)
    h = np.array([1, 1j, -1, 0.5])
    y = np.array([received_signal(beta, h, 1, n) for n in noise[:5000]])
    dev = np.abs(y - received_signal(beta, h))
    assert stats.kstest(dev, "rayleigh", args=(0, np.sqrt(sigma2 / 2))).pvalue > 1e-3


def test_mirror_symmetry_of_magnitudes():
    g = RisGeometry.square(6)
    p = SphericalLocation(0.3, 1.1, 0.4)
    q = SphericalLocation(0.3, 1.1, -0.4)
    a = np.abs(nf_channel(g, p, PARAMS))
    b = np.abs(nf_channel(g, q, PARAMS))
    # reflecting y maps element (row, col) to (row, cols-1-col)
    b_mirrored = b.reshape(6, 6)[:, ::-1].ravel()
    np.testing.assert_allclose(a, b_mirrored, rtol=1e-12)
