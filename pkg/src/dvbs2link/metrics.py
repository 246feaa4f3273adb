"""Link-quality metrics: BER/FER with erasure accounting, data-aided SNR
estimation, throughput, and the normalized gain used to compare sync modes.

Error rates are floored at ``RATE_FLOOR`` so that ratio metrics such as
``npg`` stay defined when a run decodes error-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

RATE_FLOOR = 1e-8
SNR_CAP_DB = 40.0
MIN_PILOTS = 36


@dataclass(frozen=True)
class LinkMetrics:
    """Aggregated measurements for one burst (or a mean over bursts)."""

    ber: float
    fer: float
    snr_estimate_db: float
    bits_counted: int
    frames_counted: int

    def __post_init__(self):
        if not (RATE_FLOOR <= self.ber <= 1.0):
            raise ValueError(f"ber out of range: {self.ber}")
        if not (RATE_FLOOR <= self.fer <= 1.0):
            raise ValueError(f"fer out of range: {self.fer}")
        if self.bits_counted < 0 or self.frames_counted < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class NpgReport:
    """Sync-vs-unsync comparison for one cell."""

    npg_ber: float
    npg_fer: float
    snr_gain_db: float

    def __post_init__(self):
        if abs(self.npg_ber) > 1.0 or abs(self.npg_fer) > 1.0:
            raise ValueError("npg values must lie in [-1, 1]")


def _erasure_mask(shape: tuple[int, int], erased_frames) -> np.ndarray:
    """Expand per-frame erasure flags to a per-bit boolean mask."""
    erased = np.asarray(erased_frames, dtype=bool)
    if erased.ndim != 1 or erased.size == 0:
        raise ValueError("erased_frames must be a non-empty 1-D flag array")
    if len(shape) != 2 or shape[1] % erased.size:
        raise ValueError(
            f"frame flags ({erased.size}) do not tile the bit matrix {shape}"
        )
    per_frame = shape[1] // erased.size
    return np.broadcast_to(np.repeat(erased, per_frame), shape)


def ber(tx_bits, rx_bits, erased_frames=None) -> float:
    """Bit error rate; erased frames contribute every bit as an error."""
    tx = np.asarray(tx_bits)
    rx = np.asarray(rx_bits)
    if tx.shape != rx.shape:
        raise ValueError(f"bit layouts differ: {tx.shape} vs {rx.shape}")
    if tx.size == 0:
        raise ValueError("empty bit matrix")
    diff = tx != rx
    if erased_frames is not None:
        diff = diff | _erasure_mask(tx.shape, erased_frames)
    return max(int(np.count_nonzero(diff)) / tx.size, RATE_FLOOR)


def fer(frame_ok) -> float:
    """Frame error rate from per-frame success flags (True = error-free)."""
    ok = np.asarray(frame_ok, dtype=bool)
    if ok.size == 0:
        raise ValueError("need at least one frame")
    return max(int(np.count_nonzero(~ok)) / ok.size, RATE_FLOOR)


def frame_ok_flags(tx_bits, rx_bits, erased_frames) -> np.ndarray:
    """Per-frame flags: True when the frame is detected and bit-exact."""
    tx = np.asarray(tx_bits)
    rx = np.asarray(rx_bits)
    if tx.shape != rx.shape:
        raise ValueError(f"bit layouts differ: {tx.shape} vs {rx.shape}")
    erased = np.asarray(erased_frames, dtype=bool)
    if tx.ndim != 2 or tx.shape[1] % erased.size:
        raise ValueError("frame flags do not tile the bit matrix")
    per_frame = tx.shape[1] // erased.size
    diff = (tx != rx).reshape(tx.shape[0], erased.size, per_frame)
    return ~erased & ~diff.any(axis=(0, 2))


def estimate_snr(rx_pilots, known_pilots, cap_db: float = SNR_CAP_DB) -> float:
    """Data-aided SNR estimate (dB) from received pilots.

    Signal power comes from the coherent mean of the modulation-stripped
    pilots; noise power is the residual variance about that mean.  The
    result is capped at ``cap_db`` so noise-free input stays finite.
    """
    y = np.asarray(rx_pilots, dtype=np.complex128).ravel()
    p = np.asarray(known_pilots, dtype=np.complex128).ravel()
    if y.size != p.size:
        raise ValueError("pilot vectors must have equal length")
    if y.size < MIN_PILOTS:
        raise ValueError(f"need at least {MIN_PILOTS} pilot symbols, got {y.size}")
    stripped = y * np.conj(p) / np.abs(p) ** 2
    mean = np.mean(stripped)
    signal = float(np.abs(mean) ** 2)
    total = float(np.mean(np.abs(stripped) ** 2))
    noise = total - signal
    if noise <= 0.0 or signal / noise > 10 ** (cap_db / 10):
        return cap_db
    return float(10 * np.log10(signal / noise))


def npg(value_unsync: float, value_sync: float) -> float:
    """Normalized gain (unsync − sync)/(unsync + sync), in [−1, 1]."""
    u = float(value_unsync)
    s = float(value_sync)
    if u < 0 or s < 0:
        raise ValueError("npg inputs must be non-negative")
    if u == 0 and s == 0:
        raise ValueError("npg undefined for two zero values (floor rates first)")
    return (u - s) / (u + s)


def throughput(symbol_rate_hz: float, bits_per_symbol: float, code_rate: float) -> float:
    """Effective link throughput in bits/s."""
    if symbol_rate_hz <= 0 or bits_per_symbol <= 0 or code_rate <= 0:
        raise ValueError("throughput inputs must be positive")
    return symbol_rate_hz * bits_per_symbol * code_rate


def snr_gain(snr_sync_db: float, snr_unsync_db: float) -> float:
    """SNR gain of the synchronized mode, in dB."""
    return float(snr_sync_db) - float(snr_unsync_db)


def link_metrics(tx_bits, rx_bits, erased_frames, snr_estimate_db: float) -> LinkMetrics:
    """Bundle one burst's bits + erasures + SNR estimate into LinkMetrics."""
    erased = np.asarray(erased_frames, dtype=bool)
    return LinkMetrics(
        ber=ber(tx_bits, rx_bits, erased),
        fer=fer(frame_ok_flags(tx_bits, rx_bits, erased)),
        snr_estimate_db=float(snr_estimate_db),
        bits_counted=int(np.asarray(tx_bits).size),
        frames_counted=int(erased.size),
    )


def aggregate_metrics(per_iteration: Sequence[LinkMetrics] | Iterable[LinkMetrics]) -> LinkMetrics:
    """Mean over iterations (rates and SNR averaged, counts summed)."""
    items = list(per_iteration)
    if not items:
        raise ValueError("nothing to aggregate")
    return LinkMetrics(
        ber=float(np.mean([m.ber for m in items])),
        fer=float(np.mean([m.fer for m in items])),
        snr_estimate_db=float(np.mean([m.snr_estimate_db for m in items])),
        bits_counted=sum(m.bits_counted for m in items),
        frames_counted=sum(m.frames_counted for m in items),
    )


def compare_modes(unsync: LinkMetrics, sync: LinkMetrics) -> NpgReport:
    """NPG/SNR-gain report for a (sync, unsync) pair of aggregates."""
    return NpgReport(
        npg_ber=npg(unsync.ber, sync.ber),
        npg_fer=npg(unsync.fer, sync.fer),
        snr_gain_db=snr_gain(sync.snr_estimate_db, unsync.snr_estimate_db),
    )
