"""DVB-S2 physical-layer framing for short FECFRAMEs.

Covers the transmit-side bit and symbol plumbing: MODCOD definitions,
packet-matrix burst generation, constellation mapping, physical-layer
scrambling, PLHEADER construction (SOF + PLS code), pilot insertion and
root-raised-cosine pulse shaping.

A physical-layer frame is a 90-symbol header followed by the modulated
16200-bit frame payload cut into 90-symbol slots, with an optional 36-symbol
pilot block after every 16 slots (never after the last slot).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import signal as _signal

from .iq import IqBlock

FRAME_BITS = 16200            # short FECFRAME length
PACKET_BITS = 1504
SLOT_SYMBOLS = 90
PILOT_BLOCK_SYMBOLS = 36
PILOT_PERIOD_SLOTS = 16
SOF_SYMBOLS = 26
HEADER_SYMBOLS = 90

PILOT_SYMBOL = (1.0 + 1.0j) / np.sqrt(2.0)

# Start-of-frame word, 26 bits, MSB first.
SOF_WORD = 0x18D2E82

# 64-bit scrambling word applied to the encoded PLS field of the header.
_PLS_SCRAMBLE = np.array(
    [int(b) for b in
     "0111000110011101100000111100100101010011010000100010110111111010"],
    dtype=np.uint8,
)

# Generator rows of the (32, 6) code protecting the PLS field.
_PLS_GENERATOR = np.array(
    [
        [0, 1] * 16,
        [0, 0, 1, 1] * 8,
        [0, 0, 0, 0, 1, 1, 1, 1] * 4,
        ([0] * 8 + [1] * 8) * 2,
        [0] * 16 + [1] * 16,
        [1] * 32,
    ],
    dtype=np.uint8,
)

_PL_SEQUENCE_PERIOD = 2 ** 18 - 1


@dataclass(frozen=True)
class ModCod:
    """One modulation-and-coding point of the short-frame family."""

    name: str
    index: int                   # MODCOD number signalled in the header
    constellation: str
    bits_per_symbol: int
    code_rate: Fraction
    packets_per_frame: int

    @property
    def payload_symbols(self) -> int:
        return FRAME_BITS // self.bits_per_symbol

    @property
    def payload_slots(self) -> int:
        return self.payload_symbols // SLOT_SYMBOLS

    @property
    def pilot_blocks(self) -> int:
        """Pilot blocks per frame: one after every 16 slots, none trailing."""
        return (self.payload_slots - 1) // PILOT_PERIOD_SLOTS

    def frame_symbols(self, pilots: bool) -> int:
        n = HEADER_SYMBOLS + self.payload_symbols
        if pilots:
            n += PILOT_BLOCK_SYMBOLS * self.pilot_blocks
        return n

    @property
    def frame_info_bits(self) -> int:
        """Payload bits per frame that carry packet data."""
        return PACKET_BITS * self.packets_per_frame


MODCODS = {
    "MC4": ModCod("MC4", 4, "qpsk", 2, Fraction(1, 2), 4),
    "MC12": ModCod("MC12", 12, "8psk", 3, Fraction(3, 5), 6),
    "MC24": ModCod("MC24", 24, "32apsk", 5, Fraction(3, 4), 7),
}


def get_modcod(name) -> ModCod:
    if isinstance(name, ModCod):
        return name
    key = str(name).upper()
    if key not in MODCODS:
        raise KeyError(f"unknown MODCOD {name!r}; expected one of {sorted(MODCODS)}")
    return MODCODS[key]


# ---------------------------------------------------------------------------
# constellations
# ---------------------------------------------------------------------------

def _qpsk_table() -> np.ndarray:
    # Gray-mapped: each bit picks the sign of one rail.
    table = np.empty(4, dtype=np.complex128)
    for idx in range(4):
        b0, b1 = (idx >> 1) & 1, idx & 1
        table[idx] = ((1 - 2 * b0) + 1j * (1 - 2 * b1)) / np.sqrt(2.0)
    return table


# Angle (in units of pi/4) per 3-bit label; Gray around the circle.
_PSK8_ANGLE_STEPS = (1, 0, 4, 5, 2, 7, 3, 6)


def _psk8_table() -> np.ndarray:
    return np.exp(1j * np.pi / 4.0 * np.asarray(_PSK8_ANGLE_STEPS, dtype=float))


# Ring radius ratios for the rate-3/4 operating point of the 4+12+16 layout.
APSK32_GAMMA1 = 2.84
APSK32_GAMMA2 = 5.27


def _apsk32_table() -> np.ndarray:
    r1, r2, r3 = 1.0, APSK32_GAMMA1, APSK32_GAMMA2
    pts = np.empty(32, dtype=np.complex128)
    for k in range(4):
        pts[k] = r1 * np.exp(1j * (np.pi / 4 + k * np.pi / 2))
    for k in range(12):
        pts[4 + k] = r2 * np.exp(1j * (np.pi / 12 + k * np.pi / 6))
    for k in range(16):
        pts[16 + k] = r3 * np.exp(1j * (np.pi / 16 + k * np.pi / 8))
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


@lru_cache(maxsize=None)
def constellation(name: str) -> np.ndarray:
    """Unit-average-energy constellation table, indexed by the symbol label."""
    builders = {"qpsk": _qpsk_table, "8psk": _psk8_table, "32apsk": _apsk32_table}
    if name not in builders:
        raise KeyError(f"unknown constellation {name!r}")
    table = builders[name]()
    table.setflags(write=False)
    return table


def map_symbols(bits, modcod) -> np.ndarray:
    """Map a bit vector onto constellation symbols, MSB first per symbol."""
    mc = get_modcod(modcod)
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    nb = mc.bits_per_symbol
    if bits.size % nb:
        raise ValueError(f"bit count {bits.size} not divisible by {nb}")
    weights = 1 << np.arange(nb - 1, -1, -1)
    labels = bits.reshape(-1, nb) @ weights
    return constellation(mc.constellation)[labels]


def demap_symbols(symbols, modcod) -> np.ndarray:
    """Hard demap by minimum Euclidean distance (ties pick the lower label)."""
    mc = get_modcod(modcod)
    table = constellation(mc.constellation)
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    # distance to every point; argmin returns the first (lowest) label on ties
    d2 = np.abs(symbols[:, None] - table[None, :]) ** 2
    labels = np.argmin(d2, axis=1)
    nb = mc.bits_per_symbol
    shifts = np.arange(nb - 1, -1, -1)
    return ((labels[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()


# ---------------------------------------------------------------------------
# physical-layer scrambler
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4)
def _pl_mseq() -> tuple[np.ndarray, np.ndarray]:
    """The two binary m-sequences feeding the payload scrambler."""
    n = _PL_SEQUENCE_PERIOD
    x = np.zeros(n, dtype=np.uint8)
    y = np.ones(n, dtype=np.uint8)
    x[0] = 1
    for i in range(n - 18):
        x[i + 18] = x[i + 7] ^ x[i]
        y[i + 18] = y[i + 10] ^ y[i + 7] ^ y[i + 5] ^ y[i]
    x.setflags(write=False)
    y.setflags(write=False)
    return x, y


@lru_cache(maxsize=8)
def _scramble_rotation(scrambling_index: int, length: int) -> np.ndarray:
    """Complex rotation sequence exp(j*pi/2*R[i]) for i = 0..length-1."""
    x, y = _pl_mseq()
    n = _PL_SEQUENCE_PERIOD
    i = np.arange(length)
    z = x[(i + scrambling_index) % n] ^ y[i % n]
    z_shift = x[(i + scrambling_index + 131072) % n] ^ y[(i + 131072) % n]
    r = (2 * z_shift.astype(np.int64) + z) % 4
    rot = np.exp(1j * np.pi / 2.0 * r)
    rot.setflags(write=False)
    return rot


def scramble_payload(symbols, scrambling_index: int = 0) -> np.ndarray:
    """Rotate each payload symbol by the physical-layer scrambling sequence."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    return symbols * _scramble_rotation(int(scrambling_index), symbols.size)


def descramble_payload(symbols, scrambling_index: int = 0) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.complex128)
    return symbols * np.conj(_scramble_rotation(int(scrambling_index), symbols.size))


# ---------------------------------------------------------------------------
# PLHEADER
# ---------------------------------------------------------------------------

def sof_bits() -> np.ndarray:
    return np.array([(SOF_WORD >> (SOF_SYMBOLS - 1 - i)) & 1
                     for i in range(SOF_SYMBOLS)], dtype=np.uint8)


def pls_bits(modcod, pilots: bool) -> np.ndarray:
    """Encoded and scrambled 64-bit PLS field (short-frame family)."""
    mc = get_modcod(modcod)
    # 5 MODCOD bits then the short-frame flag feed the generator...
    info = np.array([(mc.index >> (4 - i)) & 1 for i in range(5)] + [1],
                    dtype=np.uint8)
    y = (info @ _PLS_GENERATOR) % 2
    out = np.empty(64, dtype=np.uint8)
    out[0::2] = y
    # ...and the pilot flag rides on the odd positions.
    out[1::2] = y ^ (1 if pilots else 0)
    return out ^ _PLS_SCRAMBLE


def _pi2bpsk(bits: np.ndarray) -> np.ndarray:
    """pi/2-BPSK: unit-magnitude symbols alternating between the two diagonals."""
    a = 1.0 - 2.0 * bits.astype(np.float64)
    syms = np.empty(bits.size, dtype=np.complex128)
    syms[0::2] = a[0::2] * (1 + 1j) / np.sqrt(2.0)
    syms[1::2] = a[1::2] * (-1 + 1j) / np.sqrt(2.0)
    return syms


@lru_cache(maxsize=None)
def plheader_symbols(modcod_name: str, pilots: bool) -> np.ndarray:
    """The 90 known header symbols for one MODCOD/pilot configuration."""
    mc = get_modcod(modcod_name)
    bits = np.concatenate([sof_bits(), pls_bits(mc, pilots)])
    syms = _pi2bpsk(bits)
    syms.setflags(write=False)
    return syms


@lru_cache(maxsize=None)
def sof_symbols() -> np.ndarray:
    syms = _pi2bpsk(sof_bits())
    syms.setflags(write=False)
    return syms


# ---------------------------------------------------------------------------
# frame assembly
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def frame_layout(modcod_name: str, pilots: bool):
    """Index arrays describing where header, payload and pilots sit in a frame.

    Returns ``(payload_idx, pilot_idx, pilot_block_starts)`` as positions in
    the assembled frame symbol vector.
    """
    mc = get_modcod(modcod_name)
    n = mc.frame_symbols(pilots)
    payload_idx = []
    pilot_idx = []
    block_starts = []
    pos = HEADER_SYMBOLS
    for slot in range(1, mc.payload_slots + 1):
        payload_idx.extend(range(pos, pos + SLOT_SYMBOLS))
        pos += SLOT_SYMBOLS
        if pilots and slot % PILOT_PERIOD_SLOTS == 0 and slot != mc.payload_slots:
            block_starts.append(pos)
            pilot_idx.extend(range(pos, pos + PILOT_BLOCK_SYMBOLS))
            pos += PILOT_BLOCK_SYMBOLS
    assert pos == n
    out = (np.array(payload_idx), np.array(pilot_idx, dtype=int),
           np.array(block_starts, dtype=int))
    for a in out:
        a.setflags(write=False)
    return out


@dataclass(frozen=True)
class PlFrame:
    """One assembled physical-layer frame.

    ``payload`` holds the scrambled payload symbols only; pilots and header
    are inserted when the full symbol vector is materialized.
    """

    modcod: ModCod
    pilots: bool
    payload: np.ndarray
    ground_truth_bits: np.ndarray

    def __post_init__(self):
        if self.payload.size != self.modcod.payload_symbols:
            raise ValueError(
                f"payload must hold {self.modcod.payload_symbols} symbols, "
                f"got {self.payload.size}")
        if self.ground_truth_bits.size != FRAME_BITS:
            raise ValueError("ground truth must be one FECFRAME of bits")

    @property
    def n_symbols(self) -> int:
        return self.modcod.frame_symbols(self.pilots)

    def symbols(self) -> np.ndarray:
        """Header + payload with pilot blocks interleaved."""
        payload_idx, pilot_idx, _ = frame_layout(self.modcod.name, self.pilots)
        out = np.empty(self.n_symbols, dtype=np.complex128)
        out[:HEADER_SYMBOLS] = plheader_symbols(self.modcod.name, self.pilots)
        out[payload_idx] = self.payload
        if pilot_idx.size:
            out[pilot_idx] = PILOT_SYMBOL
        return out


@dataclass(frozen=True)
class BitBurst:
    """Packet bit matrix for a burst: one column per 1504-bit packet."""

    bits: np.ndarray
    modcod: ModCod
    n_frames: int

    def __post_init__(self):
        expected = (PACKET_BITS, self.modcod.packets_per_frame * self.n_frames)
        if self.bits.shape != expected:
            raise ValueError(f"bit matrix must be {expected}, got {self.bits.shape}")

    def frame_columns(self, frame: int) -> np.ndarray:
        p = self.modcod.packets_per_frame
        return self.bits[:, frame * p:(frame + 1) * p]


def build_bit_burst(seed, modcod, n_frames: int) -> BitBurst:
    """Draw a seeded random packet matrix for ``n_frames`` frames."""
    mc = get_modcod(modcod)
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(PACKET_BITS, mc.packets_per_frame * n_frames),
                        dtype=np.uint8)
    return BitBurst(bits, mc, n_frames)


class IdentityCodec:
    """Pass-through FEC stand-in: the FECFRAME carries the payload verbatim."""

    info_bits = FRAME_BITS

    def encode(self, info):
        info = np.asarray(info, dtype=np.uint8)
        if info.size != self.info_bits:
            raise ValueError(f"expected {self.info_bits} info bits")
        return info.copy()

    def decode(self, frame_bits):
        frame_bits = np.asarray(frame_bits, dtype=np.uint8)
        if frame_bits.size != FRAME_BITS:
            raise ValueError(f"expected {FRAME_BITS} frame bits")
        return frame_bits.copy()


def frame_bits_from_packets(packet_cols: np.ndarray, codec=None) -> np.ndarray:
    """Serialize packet columns into one padded FECFRAME worth of bits."""
    codec = codec or IdentityCodec()
    flat = np.ascontiguousarray(packet_cols.T).reshape(-1)
    if flat.size > codec.info_bits:
        raise ValueError("packets exceed the codec info capacity")
    info = np.zeros(codec.info_bits, dtype=np.uint8)
    info[:flat.size] = flat
    return codec.encode(info)


def packets_from_frame_bits(frame_bits, modcod, codec=None) -> np.ndarray:
    """Inverse of :func:`frame_bits_from_packets`: recover the packet columns."""
    codec = codec or IdentityCodec()
    mc = get_modcod(modcod)
    info = codec.decode(frame_bits)
    n = PACKET_BITS * mc.packets_per_frame
    return info[:n].reshape(mc.packets_per_frame, PACKET_BITS).T


def assemble_plframe(payload_symbols, modcod, pilots: bool,
                     ground_truth_bits=None) -> PlFrame:
    """Wrap already-scrambled payload symbols into a frame."""
    mc = get_modcod(modcod)
    payload = np.asarray(payload_symbols, dtype=np.complex128)
    if ground_truth_bits is None:
        ground_truth_bits = np.zeros(FRAME_BITS, dtype=np.uint8)
    return PlFrame(mc, pilots, payload, np.asarray(ground_truth_bits, np.uint8))


def make_frames(burst: BitBurst, *, pilots: bool = True,
                scrambling_index: int = 0, codec=None) -> list[PlFrame]:
    """Build the per-frame symbol payloads for a whole burst."""
    mc = burst.modcod
    frames = []
    for f in range(burst.n_frames):
        coded = frame_bits_from_packets(burst.frame_columns(f), codec)
        syms = map_symbols(coded, mc)
        payload = scramble_payload(syms, scrambling_index)
        frames.append(PlFrame(mc, pilots, payload, coded))
    return frames


def burst_symbols(frames) -> np.ndarray:
    """Concatenate the symbol vectors of a list of frames."""
    return np.concatenate([fr.symbols() for fr in frames])


# ---------------------------------------------------------------------------
# pulse shaping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PulseShapeConfig:
    rolloff: float = 0.35
    span_symbols: int = 10
    samples_per_symbol: int = 2

    def __post_init__(self):
        if not 0.0 < self.rolloff <= 1.0:
            raise ValueError("rolloff must be in (0, 1]")
        if self.span_symbols < 2 or self.span_symbols % 2:
            raise ValueError("span_symbols must be even and >= 2")
        if self.samples_per_symbol < 2:
            raise ValueError("need at least 2 samples per symbol")


@lru_cache(maxsize=None)
def rrc_taps(rolloff: float, span_symbols: int, samples_per_symbol: int) -> np.ndarray:
    """Unit-energy root-raised-cosine taps over ``span_symbols`` symbols."""
    beta = rolloff
    sps = samples_per_symbol
    n = span_symbols * sps
    t = np.arange(-n // 2, n // 2 + 1, dtype=np.float64) / sps
    taps = np.empty_like(t)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            taps[i] = 1.0 - beta + 4.0 * beta / np.pi
        elif beta > 0 and abs(abs(4.0 * beta * ti) - 1.0) < 1e-9:
            taps[i] = (beta / np.sqrt(2.0)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta)))
        else:
            num = (np.sin(np.pi * ti * (1 - beta))
                   + 4 * beta * ti * np.cos(np.pi * ti * (1 + beta)))
            den = np.pi * ti * (1 - (4 * beta * ti) ** 2)
            taps[i] = num / den
    taps /= np.sqrt(np.sum(taps ** 2))
    taps.setflags(write=False)
    return taps


def pulse_shape(symbols, cfg: PulseShapeConfig = PulseShapeConfig(),
                symbol_rate: float = 1e6) -> IqBlock:
    """Upsample a symbol stream and shape it with the root-raised cosine.

    The output holds ``(n_symbols + span) * sps`` samples at
    ``symbol_rate * sps``.
    """
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    sps = cfg.samples_per_symbol
    up = np.zeros(symbols.size * sps, dtype=np.complex128)
    up[::sps] = symbols
    taps = rrc_taps(cfg.rolloff, cfg.span_symbols, sps)
    shaped = _signal.fftconvolve(up, taps, mode="full")
    return IqBlock(shaped, symbol_rate * sps)
