"""Oscillator, noise and interference impairments for baseband blocks.

Everything here operates on :class:`~dvbs2link.iq.IqBlock` streams and is
seeded explicitly, so a burst can be replayed sample for sample.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as _signal

from ._interp import eval_at
from .iq import IqBlock

# Sanity ceiling for fractional frequency errors: practical radio references
# sit orders of magnitude below this.
_MAX_FRACTIONAL_ERROR = 1e-3


@dataclass(frozen=True)
class OscillatorModel:
    """Reference-oscillator error state for one radio.

    ``fractional_freq_error`` shifts the carrier; ``sampling_clock_error``
    stretches the sample clock derived from the same reference;
    ``phase_noise_std`` is the per-sample standard deviation of the
    random-walk phase increment in radians.
    """

    fractional_freq_error: float = 0.0
    sampling_clock_error: float = 0.0
    phase_noise_std: float = 0.0

    def __post_init__(self):
        for name in ("fractional_freq_error", "sampling_clock_error"):
            if abs(getattr(self, name)) > _MAX_FRACTIONAL_ERROR:
                raise ValueError(f"{name} out of range")
        if self.phase_noise_std < 0:
            raise ValueError("phase_noise_std must be non-negative")


def draw_internal_oscillator(seed, ppm: float = 2.5,
                             phase_noise_std: float = 1e-4) -> OscillatorModel:
    """Free-running reference: frequency error uniform within +/- ppm."""
    rng = np.random.default_rng(seed)
    ffe = rng.uniform(-ppm, ppm) * 1e-6
    # the sample clock is derived from the same reference
    return OscillatorModel(ffe, ffe, phase_noise_std)


def gpsdo_discipline(osc: OscillatorModel, stability: float = 1e-11,
                     seed=None, phase_noise_factor: float = 0.01) -> OscillatorModel:
    """Discipline an oscillator to a GPS reference.

    Frequency and sample-clock errors are redrawn uniformly within the
    disciplined stability bound, and the phase-noise walk shrinks by
    ``phase_noise_factor``.
    """
    rng = np.random.default_rng(seed)
    return replace(
        osc,
        fractional_freq_error=rng.uniform(-stability, stability),
        sampling_clock_error=rng.uniform(-stability, stability),
        phase_noise_std=osc.phase_noise_std * phase_noise_factor,
    )


def cfo_between(carrier_hz: float, tx: OscillatorModel,
                rx: OscillatorModel) -> float:
    """Carrier frequency offset seen by the receiver, in Hz."""
    return carrier_hz * (tx.fractional_freq_error - rx.fractional_freq_error)


def apply_cfo_phase_noise(block: IqBlock, cfo_hz: float,
                          phase_noise_std: float = 0.0, seed=None) -> IqBlock:
    """Rotate a block by a frequency offset plus a random-walk phase."""
    n = np.arange(len(block))
    phase = 2.0 * np.pi * cfo_hz / block.sample_rate * n
    if phase_noise_std > 0:
        rng = np.random.default_rng(seed)
        phase = phase + np.cumsum(rng.normal(0.0, phase_noise_std, len(block)))
    if cfo_hz == 0.0 and phase_noise_std == 0.0:
        return IqBlock(block.samples.copy(), block.sample_rate)
    return IqBlock(block.samples * np.exp(1j * phase), block.sample_rate)


def apply_sco(block: IqBlock, clock_error: float) -> IqBlock:
    """Resample a block as seen through a stretched receive sample clock.

    Output sample ``n`` reads the input at position ``n * (1 + clock_error)``,
    so the sampling instants drift by ``n * Ts * clock_error`` — a zero error
    returns the block unchanged (minus nothing: the grid is exact).
    """
    if clock_error == 0.0:
        return IqBlock(block.samples.copy(), block.sample_rate)
    n_in = len(block)
    n_out = int(np.floor((n_in - 1) / (1.0 + clock_error))) + 1
    positions = np.arange(n_out) * (1.0 + clock_error)
    return IqBlock(eval_at(block.samples, positions), block.sample_rate)


def fractional_delay(block: IqBlock, delay_samples: float) -> IqBlock:
    """Shift the sampling grid by a constant fractional offset."""
    if delay_samples == 0.0:
        return IqBlock(block.samples.copy(), block.sample_rate)
    positions = np.arange(len(block)) + delay_samples
    keep = (positions >= 0.0) & (positions <= len(block) - 1)
    return IqBlock(eval_at(block.samples, positions[keep]), block.sample_rate)


def add_awgn(block: IqBlock, noise_variance: float, seed=None) -> IqBlock:
    """Add circular complex Gaussian noise of the given total variance."""
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    if noise_variance == 0.0:
        return IqBlock(block.samples.copy(), block.sample_rate)
    rng = np.random.default_rng(seed)
    scale = np.sqrt(noise_variance / 2.0)
    noise = rng.normal(0.0, scale, len(block)) + 1j * rng.normal(0.0, scale, len(block))
    return IqBlock(block.samples + noise, block.sample_rate)


@dataclass(frozen=True)
class InterfererConfig:
    """Band-limited Gaussian interferer riding on the received signal."""

    bandwidth_hz: float = 300e3
    center_offset_hz: float = 0.0
    power: float = 0.1          # relative to unit nominal signal power

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.power < 0:
            raise ValueError("power must be non-negative")


def make_interferer(cfg: InterfererConfig, n_samples: int, sample_rate: float,
                    seed=None) -> IqBlock:
    """Generate the interferer waveform: filtered complex noise at an offset.

    White complex Gaussian noise is low-passed to ``bandwidth_hz`` with a
    Kaiser-windowed FIR (>= 60 dB stopband), mixed to the center offset and
    scaled so the block's mean power equals ``cfg.power`` exactly.
    """
    if cfg.power == 0.0 or n_samples == 0:
        return IqBlock(np.zeros(n_samples, dtype=np.complex128), sample_rate)
    if cfg.bandwidth_hz >= sample_rate:
        raise ValueError("interferer bandwidth exceeds the sample rate")
    rng = np.random.default_rng(seed)
    white = (rng.normal(size=n_samples) + 1j * rng.normal(size=n_samples))
    cutoff = cfg.bandwidth_hz / 2.0
    transition = max(cfg.bandwidth_hz * 0.05, sample_rate * 1e-3)
    numtaps, beta = _signal.kaiserord(65.0, transition / (sample_rate / 2.0))
    numtaps |= 1
    taps = _signal.firwin(numtaps, cutoff, window=("kaiser", beta), fs=sample_rate)
    shaped = _signal.fftconvolve(white, taps, mode="same")
    n = np.arange(n_samples)
    shaped = shaped * np.exp(2j * np.pi * cfg.center_offset_hz / sample_rate * n)
    mean_power = np.mean(np.abs(shaped) ** 2)
    shaped *= np.sqrt(cfg.power / mean_power)
    return IqBlock(shaped, sample_rate)


@dataclass(frozen=True)
class ImpairmentConfig:
    """Everything the harness applies between modulator and receiver."""

    tx_oscillator: OscillatorModel = OscillatorModel()
    rx_oscillator: OscillatorModel = OscillatorModel()
    extra_cfo_hz: float = 0.0            # e.g. uncompensated Doppler
    noise_variance: float = 0.0
    interferer: InterfererConfig | None = None
    timing_offset_s: float = 0.0

    def total_cfo_hz(self, carrier_hz: float) -> float:
        return cfo_between(carrier_hz, self.tx_oscillator, self.rx_oscillator) \
            + self.extra_cfo_hz

    def net_clock_error(self) -> float:
        """Relative sample-clock stretch between receiver and transmitter."""
        return (self.rx_oscillator.sampling_clock_error
                - self.tx_oscillator.sampling_clock_error)


def apply_oscillator_chain(block: IqBlock, cfg: ImpairmentConfig,
                           carrier_hz: float, seed=None) -> IqBlock:
    """Apply CFO + phase noise, sample-clock stretch and start-time offset.

    Noise and interference are added separately (after the channel), as they
    enter at the receiver front end.
    """
    pn = np.hypot(cfg.tx_oscillator.phase_noise_std,
                  cfg.rx_oscillator.phase_noise_std)
    out = apply_cfo_phase_noise(block, cfg.total_cfo_hz(carrier_hz), pn, seed)
    sco = cfg.net_clock_error()
    if sco:
        out = apply_sco(out, sco)
    if cfg.timing_offset_s:
        out = fractional_delay(out, cfg.timing_offset_s * block.sample_rate)
    return out
