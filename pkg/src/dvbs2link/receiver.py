"""Data-aided burst receiver: AGC, timing, frame sync, carrier recovery.

The chain runs in two stages over a whole captured burst.  Stage one
works at sample rate and acquires: gain normalization, matched
filtering, Gardner timing recovery and differential start-of-frame
correlation, followed by a coarse frequency estimate over every
detected header and pilot block.  Stage two works at symbol rate and
refines: per-block complex-gain anchors (header + pilot blocks), a
fine frequency/phase correction interpolated between anchors, a
decision-directed residual phase tracker, then descrambling and hard
demapping back to the transmitted bit layout.

Frames whose header is never found — or that run past the end of the
capture — are erased: their bits are reported as zeros and flagged so
the metrics layer can count them as fully errored.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal as _signal
from scipy.ndimage import uniform_filter1d

from . import _interp
from ._kernels import dd_track, timing_loop
from .framing import (
    HEADER_SYMBOLS,
    PILOT_BLOCK_SYMBOLS,
    PILOT_SYMBOL,
    SOF_SYMBOLS,
    constellation,
    demap_symbols,
    descramble_payload,
    frame_layout,
    get_modcod,
    packets_from_frame_bits,
    plheader_symbols,
    rrc_taps,
    sof_symbols,
    PACKET_BITS,
)
from .iq import IqBlock
from .metrics import MIN_PILOTS, estimate_snr

# Shortest assembled frame across the supported MODCOD family (32APSK,
# pilots off): default spacing floor for start-of-frame candidates.
MIN_FRAME_SYMBOLS = 3330

# One-symbol-lag coarse estimator: unambiguous to a quarter of the
# symbol rate with margin against noise-driven wraps.
COARSE_CFO_RANGE = 0.25

# A detection this close to its predicted grid slot claims that slot.
_GRID_TOLERANCE = 3

# A trailing partial frame shorter than this is filter tail, not a frame.
_MIN_PARTIAL_SYMBOLS = 2 * HEADER_SYMBOLS

_DD_ERR_CLIP = 0.5


@dataclass(frozen=True)
class ReceiverConfig:
    """Loop bandwidths and front-end settings for one receiver instance."""

    samples_per_symbol: int = 2
    rolloff: float = 0.35
    span_symbols: int = 10
    fll_loop_bw: float = 0.8e-3
    timing_loop_bw: float = 0.6e-3
    timing_acq_bw: float = 8e-3          # widened gear while acquiring
    timing_acq_symbols: int = 2000
    frame_sync_threshold: float = 0.6
    pilot_spacing: int = 1476            # symbols between pilot-block starts
    agc_window: int = 1024
    dd_gain: float = 0.01
    collect_trace: bool = False
    trace_decimation: int = 1

    def __post_init__(self):
        if self.samples_per_symbol < 2:
            raise ValueError("need at least 2 samples per symbol")
        for name in ("fll_loop_bw", "timing_loop_bw", "timing_acq_bw"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must sit in (0, 1)")
        if not 0.0 <= self.frame_sync_threshold <= 1.0:
            raise ValueError("frame_sync_threshold must sit in [0, 1]")
        if self.trace_decimation < 1:
            raise ValueError("trace_decimation must be >= 1")


@dataclass(frozen=True)
class LockFlags:
    """Acquisition milestones; once a flag is set it stays set."""

    timing: bool = False
    frame: bool = False
    coarse_freq: bool = False
    fine_freq: bool = False

    def union(self, **asserted: bool) -> "LockFlags":
        """Raise the named flags; lowering one is structurally impossible."""
        return LockFlags(
            timing=self.timing or asserted.get("timing", False),
            frame=self.frame or asserted.get("frame", False),
            coarse_freq=self.coarse_freq or asserted.get("coarse_freq", False),
            fine_freq=self.fine_freq or asserted.get("fine_freq", False),
        )


@dataclass(frozen=True)
class SyncState:
    """Synchronizer state: timing phase, frequency estimate, phase track.

    ``timing_phase`` lives in fractional samples within one symbol period;
    ``freq_estimate`` is normalized (cycles per sample at symbol spacing);
    ``phase_trajectory`` holds per-symbol phase corrections once stage two
    has produced them.
    """

    timing_phase: float = 0.0
    symbol_index: int = 0
    freq_estimate: float = 0.0
    phase_trajectory: np.ndarray | None = None
    lock: LockFlags = field(default_factory=LockFlags)


@dataclass(frozen=True)
class SyncTrace:
    """Decimated per-symbol diagnostics for plotting loop convergence."""

    symbol_index: np.ndarray
    timing_position: np.ndarray
    timing_error: np.ndarray
    freq_estimate_hz: np.ndarray
    phase_rad: np.ndarray
    pilot_phase_rad: np.ndarray          # NaN away from anchor centers
    lock_timing: np.ndarray
    lock_frame: np.ndarray
    lock_coarse: np.ndarray
    lock_fine: np.ndarray


@dataclass(frozen=True)
class DemodReport:
    """Everything the receiver recovered from one burst."""

    recovered_bits: np.ndarray           # (1504, packets/frame * n_frames)
    frame_start_indices: np.ndarray      # sample index per frame, -1 if erased
    per_frame_decode_ok: np.ndarray
    erased_frames: np.ndarray
    coarse_cfo_normalized: float
    estimated_cfo_hz: float
    residual_cfo_hz: float
    snr_estimate_db: float
    n_frames: int
    state: SyncState
    trace: SyncTrace | None = None


# ---------------------------------------------------------------------------
# stage-one front end
# ---------------------------------------------------------------------------

def agc_normalize(block: IqBlock, window: int = 1024) -> IqBlock:
    """Normalize to unit average power with a sliding-window estimate."""
    s = block.samples
    power = np.abs(s) ** 2
    if not np.any(power > 0.0):
        raise ValueError("cannot normalize an all-zero block")
    local = uniform_filter1d(power, size=int(window), mode="reflect")
    floor = 1e-12 * float(np.max(local))
    gain = 1.0 / np.sqrt(np.maximum(local, floor))
    return IqBlock(s * gain, block.sample_rate)


def matched_filter(block: IqBlock, cfg: ReceiverConfig) -> IqBlock:
    """Root-raised-cosine matched filter (full convolution)."""
    taps = rrc_taps(cfg.rolloff, cfg.span_symbols, cfg.samples_per_symbol)
    return IqBlock(_signal.fftconvolve(block.samples, taps, mode="full"),
                   block.sample_rate)


def interpolate_at(block: IqBlock, tau):
    """Spline-interpolated sample value(s) at fractional position ``tau``."""
    pos = np.atleast_1d(np.asarray(tau, dtype=np.float64))
    if np.any(pos < 0.0) or np.any(pos > len(block) - 1):
        raise ValueError("interpolation position outside the block")
    out = _interp.eval_at(block.samples, pos)
    return out[0] if np.isscalar(tau) or np.ndim(tau) == 0 else out


def gardner_ted(mid_sample: complex, current_symbol: complex,
                previous_symbol: complex) -> float:
    """Timing error from one on-time pair and the sample between them."""
    return float((mid_sample
                  * np.conj(current_symbol - previous_symbol)).real)


def timing_loop_step(state: SyncState, error: float, loop_bw: float,
                     samples_per_symbol: int = 2) -> SyncState:
    """Advance the first-order timing loop by one detector output.

    The phase wraps into ``[0, samples_per_symbol)``; wrapping carries
    into the symbol count so downstream indexing stays consistent.
    """
    raw = state.timing_phase + loop_bw * error
    wraps = int(np.floor(raw / samples_per_symbol))
    return replace(state,
                   timing_phase=raw - wraps * samples_per_symbol,
                   symbol_index=state.symbol_index + wraps)


def recover_symbols(block: IqBlock, cfg: ReceiverConfig,
                    start_position: float = 0.0):
    """Run timing recovery over a matched-filtered block.

    Returns ``(symbols, midpoints, positions, errors)`` — one entry per
    recovered symbol, with ``positions`` giving the fractional sample
    index each on-time value was taken at.
    """
    coeffs = _interp.spline_coeffs(block.samples)
    max_symbols = len(block) // cfg.samples_per_symbol + 8
    symbols, mids, positions, errors, _ = timing_loop(
        np.ascontiguousarray(coeffs.real), np.ascontiguousarray(coeffs.imag),
        float(cfg.samples_per_symbol), float(start_position),
        cfg.timing_acq_bw, cfg.timing_loop_bw, cfg.timing_acq_symbols,
        -1.0, max_symbols)
    return symbols, mids, positions, errors


# ---------------------------------------------------------------------------
# frame synchronization
# ---------------------------------------------------------------------------

def _sof_diffs() -> np.ndarray:
    sof = sof_symbols()
    return sof[1:] * np.conj(sof[:-1])


def frame_sync(symbols, threshold: float = 0.6,
               min_spacing: int = MIN_FRAME_SYMBOLS) -> np.ndarray:
    """Locate start-of-frame positions in a symbol-rate stream.

    Correlates the lag-one differential of the input against the known
    differential of the 26-symbol start-of-frame word, so a frequency
    offset only rotates the correlation without shrinking it.  Returns
    the indices whose normalized metric reaches ``threshold``, keeping
    the strongest candidate within any ``min_spacing`` window.
    """
    y = np.asarray(symbols, dtype=np.complex128).ravel()
    if y.size < SOF_SYMBOLS:
        return np.empty(0, dtype=np.intp)
    u = y[1:] * np.conj(y[:-1])
    d = _sof_diffs()
    corr = _signal.fftconvolve(u, np.conj(d[::-1]), mode="valid")
    mag = np.abs(u)
    sums = np.cumsum(np.concatenate(([0.0], mag)))
    denom = sums[d.size:] - sums[:-d.size]
    metric = np.abs(corr) / np.maximum(denom, 1e-12)
    candidates = np.flatnonzero(metric >= threshold)
    if candidates.size == 0:
        return np.empty(0, dtype=np.intp)
    order = candidates[np.argsort(-metric[candidates], kind="stable")]
    accepted: list[int] = []
    for idx in order:
        if all(abs(idx - a) >= min_spacing for a in accepted):
            accepted.append(int(idx))
    return np.array(sorted(accepted), dtype=np.intp)


# ---------------------------------------------------------------------------
# frequency and phase estimation
# ---------------------------------------------------------------------------

def coarse_cfo_estimate(symbols, known_ref) -> float:
    """Average per-symbol phase increment over a known reference run.

    Strips the reference modulation and accumulates lag-one products;
    the result is the normalized frequency offset in cycles per symbol,
    unambiguous within ``±COARSE_CFO_RANGE``.
    """
    y = np.asarray(symbols, dtype=np.complex128).ravel()
    ref = np.asarray(known_ref, dtype=np.complex128).ravel()
    if y.size != ref.size:
        raise ValueError("received and reference runs differ in length")
    if y.size < 2:
        raise ValueError("need at least 2 reference symbols")
    z = y * np.conj(ref) / np.abs(ref) ** 2
    acc = np.sum(z[1:] * np.conj(z[:-1]))
    return float(np.angle(acc) / (2.0 * np.pi))


def fll_step(freq_estimate: float, error_indicator: float,
             loop_bw: float) -> float:
    """First-order frequency-locked-loop update."""
    return freq_estimate + loop_bw * error_indicator


def pilot_phase_estimate(rx_pilot_block, known_pilots) -> float:
    """Block phase: argument of the modulation-stripped block sum."""
    y = np.asarray(rx_pilot_block, dtype=np.complex128).ravel()
    p = np.asarray(known_pilots, dtype=np.complex128).ravel()
    if y.size != p.size or y.size == 0:
        raise ValueError("pilot block and reference must match in length")
    return float(np.angle(np.sum(y * np.conj(p))))


def pilot_freq_estimate(block_phases, pilot_spacing: int,
                        symbol_period: float) -> float:
    """Frequency from the mean phase increment between pilot blocks.

    Phases must already be unwrapped; a single block carries no slope,
    which is reported as an error so the caller can fall back to a
    phase-only correction.
    """
    phases = np.asarray(block_phases, dtype=np.float64).ravel()
    if phases.size < 2:
        raise ValueError("need at least two pilot blocks for a frequency")
    increment = float(np.mean(np.diff(phases)))
    return increment / (2.0 * np.pi * pilot_spacing * symbol_period)


def phase_interpolate(block_phases, block_indices, data_indices) -> np.ndarray:
    """Linear phase between anchor blocks, held constant past the ends."""
    phases = np.asarray(block_phases, dtype=np.float64).ravel()
    centers = np.asarray(block_indices, dtype=np.float64).ravel()
    if phases.size != centers.size or phases.size == 0:
        raise ValueError("anchor phases and indices must match in length")
    return np.interp(np.asarray(data_indices, dtype=np.float64),
                     centers, phases)


def demap(symbols, modcod) -> np.ndarray:
    """Hard-decision demapping (minimum distance, ties to lowest label)."""
    return demap_symbols(symbols, modcod)


# ---------------------------------------------------------------------------
# whole-burst receive path
# ---------------------------------------------------------------------------

def _reference_layout(modcod, pilots: bool):
    """Known-symbol runs within one frame: (offset, reference) pairs."""
    mc = get_modcod(modcod)
    refs = [(0, plheader_symbols(mc.name, pilots))]
    if pilots:
        _, _, block_starts = frame_layout(mc.name, pilots)
        pilot_ref = np.full(PILOT_BLOCK_SYMBOLS, PILOT_SYMBOL)
        refs.extend((int(s), pilot_ref) for s in block_starts)
    return refs


def _lag_products(symbols, starts, refs, lag: int):
    """Accumulate ``z[k+lag]·conj(z[k])`` over every known reference run."""
    acc = 0.0 + 0.0j
    for start in starts:
        for offset, ref in refs:
            seg = symbols[start + offset:start + offset + ref.size]
            if seg.size != ref.size:
                continue
            z = seg * np.conj(ref)
            acc += np.sum(z[lag:] * np.conj(z[:-lag]))
    return acc


def _empty_report(mc, n_frames: int, state: SyncState) -> DemodReport:
    cols = mc.packets_per_frame * n_frames
    return DemodReport(
        recovered_bits=np.zeros((PACKET_BITS, cols), dtype=np.uint8),
        frame_start_indices=np.full(n_frames, -1, dtype=np.int64),
        per_frame_decode_ok=np.zeros(n_frames, dtype=bool),
        erased_frames=np.ones(n_frames, dtype=bool),
        coarse_cfo_normalized=0.0,
        estimated_cfo_hz=0.0,
        residual_cfo_hz=float("nan"),
        snr_estimate_db=float("nan"),
        n_frames=n_frames,
        state=state,
    )


def receive_burst(x: IqBlock, cfg: ReceiverConfig, modcod, *,
                  pilots: bool = True,
                  expected_frames: int | None = None) -> DemodReport:
    """Demodulate a pulse-shaped burst back to its transmitted bit layout.

    ``expected_frames`` pins how many frames the caller transmitted;
    left unset, every full frame slot found on the detected grid is
    reported (plus a trailing partial slot, which is always erased).
    """
    mc = get_modcod(modcod)
    sps = cfg.samples_per_symbol
    symbol_rate = x.sample_rate / sps
    frame_len = mc.frame_symbols(pilots)
    state = SyncState()

    front = matched_filter(agc_normalize(x, cfg.agc_window), cfg)
    symbols, _, positions, errors = recover_symbols(front, cfg)
    n_sym = symbols.size
    state = replace(state, timing_phase=float(positions[-1] % sps),
                    symbol_index=n_sym - 1,
                    lock=state.lock.union(timing=n_sym > cfg.timing_acq_symbols))

    detections = frame_sync(symbols, cfg.frame_sync_threshold,
                            min_spacing=frame_len)
    if detections.size == 0:
        return _empty_report(mc, expected_frames or 0, state)
    state = replace(state, lock=state.lock.union(frame=True))

    # Lay a frame grid through the first detection and match detections
    # to slots; a frame decodes only if detected and fully captured.
    anchor = int(detections[0])
    first = anchor % frame_len
    if expected_frames is None:
        n_frames = (n_sym - first) // frame_len
        if (n_sym - first) % frame_len >= _MIN_PARTIAL_SYMBOLS:
            n_frames += 1
    else:
        n_frames = expected_frames
    if n_frames <= 0:
        return _empty_report(mc, 0, state)
    starts = first + frame_len * np.arange(n_frames)
    matched = np.zeros(n_frames, dtype=bool)
    for det in detections:
        slot = int(np.rint((det - first) / frame_len))
        if 0 <= slot < n_frames and abs(det - starts[slot]) <= _GRID_TOLERANCE:
            matched[slot] = True
            starts[slot] = det
    decoded = matched & (starts + frame_len <= n_sym)
    erased = ~decoded

    # Coarse frequency: lag-one then lag-18 delay-and-multiply over every
    # detected header and pilot block.  The short lag is unambiguous over
    # the full oscillator range; the longer lag divides its noise by 18.
    refs = _reference_layout(mc, pilots)
    det_starts = starts[matched]
    index = np.arange(n_sym)
    acc1 = _lag_products(symbols, det_starts, refs, 1)
    nu_coarse = float(np.angle(acc1) / (2.0 * np.pi))
    work = symbols * np.exp(-2j * np.pi * nu_coarse * index)
    long_lag = PILOT_BLOCK_SYMBOLS // 2
    acc2 = _lag_products(work, det_starts, refs, long_lag)
    nu_fine = float(np.angle(acc2) / (2.0 * np.pi * long_lag))
    nu_coarse += nu_fine
    work *= np.exp(-2j * np.pi * nu_fine * index)
    state = replace(state, freq_estimate=nu_coarse / sps,
                    lock=state.lock.union(coarse_freq=True))

    # Complex-gain anchors at each known-symbol run: the interpolated
    # phase removes residual frequency and slow fading rotation exactly;
    # the interpolated magnitude calibrates the ring decisions.
    centers, gains = [], []
    for start in det_starts:
        for offset, ref in refs:
            seg = work[start + offset:start + offset + ref.size]
            if seg.size != ref.size:
                continue
            centers.append(start + offset + (ref.size - 1) / 2.0)
            gains.append(np.mean(seg * np.conj(ref)))
    if not centers:
        # every matched frame lost its header to the capture edge
        return _empty_report(mc, n_frames, state)
    centers = np.asarray(centers, dtype=np.float64)
    gains = np.asarray(gains, dtype=np.complex128)
    anchor_phases = np.unwrap(np.angle(gains))
    anchor_amps = np.abs(gains)
    if centers.size >= 2:
        slope = float(np.polyfit(centers, anchor_phases, 1)[0])
    else:
        slope = 0.0
    phase_traj = phase_interpolate(anchor_phases, centers, index)
    amp_floor = 0.1 * float(np.median(anchor_amps))
    amp_traj = np.maximum(np.interp(index, centers, anchor_amps), amp_floor)
    corrected = work * np.exp(-1j * phase_traj) / amp_traj
    estimated_cfo_hz = (nu_coarse + slope / (2.0 * np.pi)) * symbol_rate
    state = replace(state,
                    freq_estimate=(nu_coarse + slope / (2.0 * np.pi)) / sps,
                    phase_trajectory=phase_traj,
                    lock=state.lock.union(fine_freq=centers.size >= 2))

    # Residual decision-directed phase tracking, then bits, frame by frame.
    table = np.ascontiguousarray(constellation(mc.constellation))
    payload_idx, _, _ = frame_layout(mc.name, pilots)
    bits = np.zeros((PACKET_BITS, mc.packets_per_frame * n_frames),
                    dtype=np.uint8)
    dd_phases = np.zeros(n_sym)
    for k in np.flatnonzero(decoded):
        lo = int(starts[k])
        frame_syms, traj = dd_track(corrected[lo:lo + frame_len], table,
                                    cfg.dd_gain, _DD_ERR_CLIP)
        corrected[lo:lo + frame_len] = frame_syms
        dd_phases[lo:lo + frame_len] = traj
        payload = descramble_payload(frame_syms[payload_idx])
        frame_bits = demap_symbols(payload, mc)
        cols = packets_from_frame_bits(frame_bits, mc)
        bits[:, k * mc.packets_per_frame:(k + 1) * mc.packets_per_frame] = cols

    # Estimated SNR over the known-symbol runs of every frame slot —
    # erased slots contribute whatever sits at their expected positions,
    # so acquisition failures show up in the estimate as they would on
    # hardware.
    rx_refs, known_refs = [], []
    for k in range(n_frames):
        for offset, ref in refs:
            lo = int(starts[k]) + offset
            seg = corrected[lo:lo + ref.size]
            if seg.size:
                rx_refs.append(seg)
                known_refs.append(ref[:seg.size])
    rx_cat = np.concatenate(rx_refs) if rx_refs else np.empty(0, complex)
    if rx_cat.size >= MIN_PILOTS:
        snr_db = estimate_snr(rx_cat, np.concatenate(known_refs))
    else:
        snr_db = float("nan")

    # Residual frequency: slope of the anchor phases re-measured after
    # every correction has been applied.
    post_centers, post_phases = [], []
    for start in det_starts:
        for offset, ref in refs:
            seg = corrected[start + offset:start + offset + ref.size]
            if seg.size != ref.size:
                continue
            post_centers.append(start + offset + (ref.size - 1) / 2.0)
            post_phases.append(pilot_phase_estimate(seg, ref))
    if len(post_centers) >= 2:
        residual_slope = float(np.polyfit(
            np.asarray(post_centers), np.unwrap(post_phases), 1)[0])
        residual_cfo_hz = residual_slope / (2.0 * np.pi) * symbol_rate
    else:
        residual_cfo_hz = 0.0

    sample_starts = np.where(
        erased, -1, np.rint(positions[np.minimum(starts, n_sym - 1)])
    ).astype(np.int64)

    trace = None
    if cfg.collect_trace:
        step = cfg.trace_decimation
        picks = np.arange(0, n_sym, step)
        freq_traj = np.gradient(2.0 * np.pi * nu_coarse * index
                                + phase_traj + dd_phases) \
            / (2.0 * np.pi) * symbol_rate
        pilot_col = np.full(n_sym, np.nan)
        pilot_col[np.rint(centers).astype(int)] = anchor_phases
        trace = SyncTrace(
            symbol_index=picks,
            timing_position=positions[picks],
            timing_error=errors[picks],
            freq_estimate_hz=freq_traj[picks],
            phase_rad=(phase_traj + dd_phases)[picks],
            pilot_phase_rad=pilot_col[picks],
            lock_timing=picks >= cfg.timing_acq_symbols,
            lock_frame=picks >= anchor,
            lock_coarse=picks >= anchor,
            lock_fine=picks >= (int(centers[1]) if centers.size >= 2
                                else n_sym - 1),
        )

    return DemodReport(
        recovered_bits=bits,
        frame_start_indices=sample_starts,
        per_frame_decode_ok=decoded,
        erased_frames=erased,
        coarse_cfo_normalized=nu_coarse,
        estimated_cfo_hz=estimated_cfo_hz,
        residual_cfo_hz=residual_cfo_hz,
        snr_estimate_db=snr_db,
        n_frames=n_frames,
        state=state,
        trace=trace,
    )
