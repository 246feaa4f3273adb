"""LEO pass geometry, Doppler and the tapped-delay-line fading emulator.

The channel is a sparse tapped delay line: one deterministic specular (LOS)
tap rotating at the LOS Doppler frequency plus Rayleigh taps with a classic
Doppler (Jakes) spectrum, all behind a single log-normal shadowing gain drawn
once per burst. Noise is *not* added here — it belongs to the receiver front
end together with any interference.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .iq import IqBlock

SPEED_OF_LIGHT = 299792458.0
EARTH_RADIUS_M = 6_371_000.0

_JAKES_OSCILLATORS = 16
_FADING_GRID_OVERSAMPLING = 32  # grid points per fading cycle


@dataclass(frozen=True)
class Geometry:
    """Circular-orbit pass geometry between satellite and ground station."""

    altitude_m: float = 500e3
    elevation_deg: float = 45.0
    speed_mps: float = 7.8e3
    direction: int = 1            # +1 approaching, -1 receding

    def __post_init__(self):
        if self.altitude_m <= 0:
            raise ValueError("altitude_m must be positive")
        if not 0.0 <= self.elevation_deg <= 90.0:
            raise ValueError("elevation_deg must be within [0, 90]")
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")

    @property
    def central_angle_rad(self) -> float:
        """Earth-central angle between ground station and subsatellite point."""
        re = EARTH_RADIUS_M
        el = np.radians(self.elevation_deg)
        return float(np.arccos(re / (re + self.altitude_m) * np.cos(el)) - el)

    def slant_range_m(self, central_angle_rad: float | None = None) -> float:
        psi = self.central_angle_rad if central_angle_rad is None else central_angle_rad
        re = EARTH_RADIUS_M
        rs = re + self.altitude_m
        return float(np.sqrt(re ** 2 + rs ** 2 - 2 * re * rs * np.cos(psi)))


def doppler_shift(geom: Geometry, carrier_hz: float,
                  central_angle_rad: float | None = None) -> float:
    """LOS Doppler shift in Hz for the given pass geometry.

    Positive while the satellite approaches (``direction = +1``).
    """
    psi = geom.central_angle_rad if central_angle_rad is None else central_angle_rad
    re = EARTH_RADIUS_M
    return (geom.speed_mps * carrier_hz / SPEED_OF_LIGHT
            * re * np.sin(psi) / (re + geom.altitude_m)
            * geom.direction)


# ---------------------------------------------------------------------------
# delay profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TdlTap:
    delay_s: float
    power_db: float
    is_los: bool

    @property
    def power_linear(self) -> float:
        return 10.0 ** (self.power_db / 10.0)


@dataclass(frozen=True)
class TdlProfile:
    """A normalized tapped-delay-line power/delay profile."""

    taps: tuple[TdlTap, ...]
    rician_k_db: float
    rms_delay_spread_s: float
    version: int = 1

    def __post_init__(self):
        los = [t for t in self.taps if t.is_los]
        if len(los) != 1:
            raise ValueError("profile must hold exactly one LOS tap")
        if los[0].delay_s != 0.0:
            raise ValueError("the LOS tap must sit at zero delay")
        total = sum(t.power_linear for t in self.taps)
        if abs(total - 1.0) > 1e-6:
            raise ValueError("tap powers must be normalized to unit sum")

    @property
    def los_tap(self) -> TdlTap:
        return next(t for t in self.taps if t.is_los)

    def rms_delay_spread(self) -> float:
        """Power-weighted RMS delay spread of the profile, in seconds."""
        p = np.array([t.power_linear for t in self.taps])
        d = np.array([t.delay_s for t in self.taps])
        mean = np.sum(p * d) / np.sum(p)
        return float(np.sqrt(np.sum(p * (d - mean) ** 2) / np.sum(p)))


def _profile_text(path=None) -> str:
    if path is not None:
        with open(path) as fh:
            return fh.read()
    return resources.files("dvbs2link.data").joinpath("ntn_tdl_c.txt").read_text()


def load_ntn_tdl_c(rms_delay_spread_s: float = 80e-9, path=None) -> TdlProfile:
    """Load the bundled LOS suburban tap table, scaled to the given spread.

    The file stores delays normalized to unit RMS delay spread, so the
    realized spread of the loaded profile equals ``rms_delay_spread_s``.
    """
    version = None
    k_db = None
    rows = []
    for line in _profile_text(path).splitlines():
        stripped = line.strip()
        if stripped.startswith("# version:"):
            version = int(stripped.split(":", 1)[1])
        elif stripped.startswith("# rician_k_db:"):
            k_db = float(stripped.split(":", 1)[1])
        if not stripped or stripped.startswith("#"):
            continue
        delay_norm, power_db, los = stripped.split()
        rows.append((float(delay_norm), float(power_db), bool(int(los))))
    if version is None or k_db is None or not rows:
        raise ValueError("malformed tap table: missing version, K factor or rows")

    total = sum(10.0 ** (p / 10.0) for _, p, _ in rows)
    norm_db = 10.0 * np.log10(total)
    taps = tuple(
        TdlTap(delay_norm * rms_delay_spread_s, power_db - norm_db, los)
        for delay_norm, power_db, los in rows
    )
    return TdlProfile(taps, k_db, rms_delay_spread_s, version)


# ---------------------------------------------------------------------------
# realization
# ---------------------------------------------------------------------------

def _jakes_gains(rng: np.random.Generator, power: float, max_doppler_hz: float,
                 n_samples: int, sample_rate: float) -> np.ndarray:
    """Rayleigh tap gain series with the classic Doppler spectrum.

    Sum-of-sinusoids synthesis on a coarse time grid, interpolated to the
    sample grid; mean squared gain converges to ``power``.
    """
    m = _JAKES_OSCILLATORS
    theta = rng.uniform(0, 2 * np.pi)
    phi_i = rng.uniform(0, 2 * np.pi, m)
    phi_q = rng.uniform(0, 2 * np.pi, m)
    alpha = (2 * np.pi * np.arange(1, m + 1) - np.pi + theta) / (4.0 * m)
    if max_doppler_hz <= 0.0:
        h = (np.sum(np.cos(phi_i)) + 1j * np.sum(np.cos(phi_q))) / np.sqrt(m)
        return np.full(n_samples, np.sqrt(power) * h)
    step = max(1, int(sample_rate / (max_doppler_hz * _FADING_GRID_OVERSAMPLING)))
    grid = np.arange(0, n_samples + step, step, dtype=np.float64)
    t = grid / sample_rate
    w_i = 2 * np.pi * max_doppler_hz * np.cos(alpha)
    w_q = 2 * np.pi * max_doppler_hz * np.sin(alpha)
    h_i = np.cos(np.outer(w_i, t) + phi_i[:, None]).sum(axis=0)
    h_q = np.cos(np.outer(w_q, t) + phi_q[:, None]).sum(axis=0)
    coarse = (h_i + 1j * h_q) / np.sqrt(m)
    n = np.arange(n_samples, dtype=np.float64)
    gains = np.interp(n, grid, coarse.real) + 1j * np.interp(n, grid, coarse.imag)
    return np.sqrt(power) * gains


@dataclass(frozen=True)
class ChannelRealization:
    """One burst worth of channel state, ready to apply to a waveform."""

    sample_rate: float
    n_samples: int
    los_amplitude: float
    los_phase: float
    los_doppler_hz: float
    tap_delays_samples: np.ndarray      # integer delays of the Rayleigh taps
    tap_gains: tuple[np.ndarray, ...]   # per-tap gain series, len n_samples
    tap_powers: np.ndarray              # mean-square design power per tap
    shadow_db: float

    @property
    def shadow_linear_amplitude(self) -> float:
        return 10.0 ** (self.shadow_db / 20.0)


def realize_channel(profile: TdlProfile, geom: Geometry, carrier_hz: float,
                    sample_rate: float, n_samples: int, seed=None, *,
                    los_doppler_hz: float | None = None,
                    shadow_sigma_db: float = 0.8) -> ChannelRealization:
    """Draw one seeded channel realization.

    The LOS tap rotates at ``los_doppler_hz`` (defaulting to the geometric
    LOS Doppler) with a uniform random phase; Rayleigh taps fade with a
    maximum Doppler equal to the geometric LOS Doppler magnitude, reflecting
    the platform motion even when the mean shift is already compensated.
    Shadowing is drawn once for the whole realization.
    """
    rng = np.random.default_rng(seed)
    geo_doppler = doppler_shift(geom, carrier_hz)
    f_d0 = geo_doppler if los_doppler_hz is None else los_doppler_hz
    max_doppler = abs(geo_doppler)

    los_phase = rng.uniform(0, 2 * np.pi)
    shadow_db = rng.normal(0.0, shadow_sigma_db) if shadow_sigma_db > 0 else 0.0

    delays = []
    gains = []
    powers = []
    for tap in profile.taps:
        if tap.is_los:
            continue
        delays.append(int(round(tap.delay_s * sample_rate)))
        gains.append(_jakes_gains(rng, tap.power_linear, max_doppler,
                                  n_samples, sample_rate))
        powers.append(tap.power_linear)

    return ChannelRealization(
        sample_rate=sample_rate,
        n_samples=n_samples,
        los_amplitude=float(np.sqrt(profile.los_tap.power_linear)),
        los_phase=float(los_phase),
        los_doppler_hz=float(f_d0),
        tap_delays_samples=np.asarray(delays, dtype=int),
        tap_gains=tuple(gains),
        tap_powers=np.asarray(powers, dtype=float),
        shadow_db=float(shadow_db),
    )


def apply_channel(block: IqBlock, realization: ChannelRealization) -> IqBlock:
    """Run a waveform through the realized tapped delay line."""
    x = block.samples
    if len(block) > realization.n_samples:
        raise ValueError("realization is shorter than the input block")
    n = len(block)
    t = np.arange(n) / block.sample_rate
    los = (realization.los_amplitude
           * np.exp(1j * (2 * np.pi * realization.los_doppler_hz * t
                          + realization.los_phase)))
    out = los * x
    for k, gains in zip(realization.tap_delays_samples, realization.tap_gains):
        shifted = np.zeros(n, dtype=np.complex128)
        if k == 0:
            shifted = x
        elif k < n:
            shifted[k:] = x[:n - k]
        out = out + gains[:n] * shifted
    return IqBlock(out * realization.shadow_linear_amplitude, block.sample_rate)


def signal_power(realization: ChannelRealization) -> float:
    """Mean received signal power for unit-power input.

    Specular power plus the mean-square sum of the fading taps, scaled by
    the realized shadowing gain.
    """
    base = realization.los_amplitude ** 2 + float(np.sum(realization.tap_powers))
    return base * 10.0 ** (realization.shadow_db / 10.0)
