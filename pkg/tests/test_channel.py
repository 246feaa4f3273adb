"""Tests for the LEO geometry, tapped-delay-line profile, and fading channel."""

import math

import numpy as np
import pytest

from dvbs2link.channel import (
    EARTH_RADIUS_M,
    SPEED_OF_LIGHT,
    ChannelRealization,
    Geometry,
    TdlProfile,
    TdlTap,
    apply_channel,
    doppler_shift,
    load_ntn_tdl_c,
    realize_channel,
    signal_power,
)
from dvbs2link.iq import IqBlock

CARRIER_HZ = 437e6


def test_central_angle_default_geometry():
    g = Geometry()  # 500 km, 45 deg elevation
    assert math.degrees(g.central_angle_rad) == pytest.approx(4.0310, abs=1e-3)


def test_doppler_matches_hand_formula():
    # Independent arithmetic: f_D = (v*f0/c) * (Re*sin(psi)/(Re+h)) * direction
    g = Geometry()
    psi = math.radians(10.0)
    expected = (
        (g.speed_mps * CARRIER_HZ / SPEED_OF_LIGHT)
        * (EARTH_RADIUS_M * math.sin(psi) / (EARTH_RADIUS_M + g.altitude_m))
    )
    got = doppler_shift(g, CARRIER_HZ, central_angle_rad=psi)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(1830.68, abs=0.01)


def test_doppler_default_elevation_value():
    assert doppler_shift(Geometry(), CARRIER_HZ) == pytest.approx(741.09, abs=0.01)


def test_doppler_direction_sign():
    fwd = doppler_shift(Geometry(direction=1), CARRIER_HZ)
    rev = doppler_shift(Geometry(direction=-1), CARRIER_HZ)
    assert rev == -fwd
    assert fwd > 0


def test_doppler_zero_at_zenith():
    # Satellite directly overhead: no radial velocity component.
    g = Geometry(elevation_deg=90.0)
    assert g.central_angle_rad == pytest.approx(0.0, abs=1e-12)
    assert doppler_shift(g, CARRIER_HZ) == pytest.approx(0.0, abs=1e-9)


def test_slant_range_at_zenith_equals_altitude():
    g = Geometry(elevation_deg=90.0)
    assert g.slant_range_m() == pytest.approx(g.altitude_m, rel=1e-9)


def test_profile_load_normalization():
    p = load_ntn_tdl_c()
    assert p.version == 1
    assert p.rician_k_db == pytest.approx(10.224)
    assert len(p.taps) == 3
    assert sum(t.power_linear for t in p.taps) == pytest.approx(1.0, rel=1e-9)
    los = [t for t in p.taps if t.is_los]
    assert len(los) == 1 and los[0].delay_s == 0.0


def test_profile_rms_delay_spread_scaling():
    p80 = load_ntn_tdl_c(rms_delay_spread_s=80e-9)
    assert p80.rms_delay_spread() == pytest.approx(80e-9, rel=0.01)
    p40 = load_ntn_tdl_c(rms_delay_spread_s=40e-9)
    assert p40.rms_delay_spread() == pytest.approx(40e-9, rel=0.01)


def test_profile_k_factor_is_los_to_codelay_diffuse_gap():
    # K is the dB gap between the specular ray and the diffuse tap at the
    # same delay (normalization shifts both, so the gap survives loading).
    p = load_ntn_tdl_c()
    los = next(t for t in p.taps if t.is_los)
    co_delay = next(t for t in p.taps if not t.is_los and t.delay_s == los.delay_s)
    assert los.power_db - co_delay.power_db == pytest.approx(p.rician_k_db, abs=1e-6)


def test_profile_rejects_missing_los():
    taps = (TdlTap(0.0, -3.0, False), TdlTap(1e-7, -3.0, False))
    with pytest.raises(ValueError):
        TdlProfile(taps=taps, rician_k_db=10.0, rms_delay_spread_s=80e-9)


def test_tap_delay_sample_rounding():
    # Longest tap: 14.8124 * 80 ns = 1185 ns -> 2 samples at 2 MHz.
    p = load_ntn_tdl_c()
    r = realize_channel(p, Geometry(), CARRIER_HZ, 2e6, 1024, seed=0)
    assert list(r.tap_delays_samples) == [0, 2]


def test_realization_deterministic_per_seed():
    p = load_ntn_tdl_c()
    g = Geometry()
    a = realize_channel(p, g, CARRIER_HZ, 2e6, 2048, seed=11)
    b = realize_channel(p, g, CARRIER_HZ, 2e6, 2048, seed=11)
    c = realize_channel(p, g, CARRIER_HZ, 2e6, 2048, seed=12)
    assert a.shadow_db == b.shadow_db
    for ga, gb in zip(a.tap_gains, b.tap_gains):
        np.testing.assert_array_equal(ga, gb)
    assert a.shadow_db != c.shadow_db or any(
        not np.array_equal(ga, gc) for ga, gc in zip(a.tap_gains, c.tap_gains)
    )


def test_los_doppler_override():
    p = load_ntn_tdl_c()
    r = realize_channel(p, Geometry(), CARRIER_HZ, 2e6, 256, seed=5, los_doppler_hz=0.0)
    assert r.los_doppler_hz == 0.0
    r2 = realize_channel(p, Geometry(), CARRIER_HZ, 2e6, 256, seed=5)
    assert r2.los_doppler_hz == pytest.approx(741.09, abs=0.01)


def test_diffuse_tap_time_average_power():
    # Long realization so the fading time average converges to the tap power.
    p = load_ntn_tdl_c()
    r = realize_channel(
        p, Geometry(), CARRIER_HZ, 2e6, 2_000_000, seed=3, shadow_sigma_db=0.0
    )
    for gains, power in zip(r.tap_gains, r.tap_powers):
        measured = np.mean(np.abs(gains) ** 2)
        assert measured == pytest.approx(power, rel=0.1)


def test_fading_spectrum_confined_to_doppler_band():
    p = load_ntn_tdl_c()
    fs = 2e6
    n = 1_000_000
    r = realize_channel(p, Geometry(), CARRIER_HZ, fs, n, seed=7)
    f_max = abs(r.los_doppler_hz)
    g = r.tap_gains[0]
    spec = np.abs(np.fft.fft(g)) ** 2
    freqs = np.fft.fftfreq(n, 1 / fs)
    inband = spec[np.abs(freqs) <= 1.25 * f_max].sum()
    assert inband / spec.sum() > 0.99


def test_zero_doppler_gain_is_static():
    p = load_ntn_tdl_c()
    g = Geometry(speed_mps=0.0)
    r = realize_channel(p, g, CARRIER_HZ, 2e6, 4096, seed=9)
    for gains in r.tap_gains:
        assert np.unique(gains).size == 1


def test_apply_pure_los_rotates_only():
    r = ChannelRealization(
        sample_rate=2e6,
        n_samples=128,
        los_amplitude=1.0,
        los_phase=0.25,
        los_doppler_hz=150.0,
        tap_delays_samples=np.zeros(0, dtype=np.int64),
        tap_gains=(),
        tap_powers=np.zeros(0),
        shadow_db=0.0,
    )
    x = np.exp(1j * 0.05 * np.arange(128))
    y = apply_channel(IqBlock(x, 2e6), r)
    np.testing.assert_allclose(np.abs(y.samples), 1.0, rtol=1e-12)
    ph = np.angle(y.samples * np.conj(x))
    assert ph[0] == pytest.approx(0.25, abs=1e-9)
    step = np.angle(np.exp(1j * (ph[1] - ph[0])))
    assert step == pytest.approx(2 * np.pi * 150.0 / 2e6, rel=1e-9)
    assert signal_power(r) == pytest.approx(1.0)


def test_apply_channel_power_matches_prediction():
    p = load_ntn_tdl_c()
    fs = 2e6
    n = 200_000
    r = realize_channel(p, Geometry(), CARRIER_HZ, fs, n, seed=17)
    rng = np.random.default_rng(3)
    x = (rng.normal(size=n) + 1j * rng.normal(size=n)) / np.sqrt(2.0)
    y = apply_channel(IqBlock(x, fs), r)
    assert y.power() == pytest.approx(signal_power(r), rel=0.05)


def test_apply_channel_rejects_longer_block():
    p = load_ntn_tdl_c()
    r = realize_channel(p, Geometry(), CARRIER_HZ, 2e6, 100, seed=1)
    x = np.ones(101, dtype=np.complex128)
    with pytest.raises(ValueError):
        apply_channel(IqBlock(x, 2e6), r)


def test_shadowing_statistics():
    p = load_ntn_tdl_c()
    g = Geometry()
    draws = np.array(
        [
            realize_channel(p, g, CARRIER_HZ, 2e6, 8, seed=k, shadow_sigma_db=0.8).shadow_db
            for k in range(2000)
        ]
    )
    assert np.mean(draws) == pytest.approx(0.0, abs=0.06)
    assert np.std(draws) == pytest.approx(0.8, rel=0.1)


def test_shadowing_disabled():
    p = load_ntn_tdl_c()
    r = realize_channel(p, Geometry(), CARRIER_HZ, 2e6, 8, seed=0, shadow_sigma_db=0.0)
    assert r.shadow_db == 0.0
