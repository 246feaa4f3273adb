import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvbs2link import framing
from dvbs2link.framing import (
    FRAME_BITS,
    HEADER_SYMBOLS,
    PILOT_BLOCK_SYMBOLS,
    PILOT_SYMBOL,
    MODCODS,
    PulseShapeConfig,
    build_bit_burst,
    burst_symbols,
    constellation,
    demap_symbols,
    descramble_payload,
    frame_bits_from_packets,
    frame_layout,
    get_modcod,
    make_frames,
    map_symbols,
    packets_from_frame_bits,
    plheader_symbols,
    pls_bits,
    pulse_shape,
    rrc_taps,
    scramble_payload,
    sof_bits,
    sof_symbols,
)


# ---------------------------------------------------------------------------
# frame geometry
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name,with_pilots,without,blocks", [
    ("MC4", 8370, 8190, 5),
    ("MC12", 5598, 5490, 3),
    ("MC24", 3402, 3330, 2),
])
def test_frame_symbol_counts(name, with_pilots, without, blocks):
    mc = get_modcod(name)
    assert mc.frame_symbols(True) == with_pilots
    assert mc.frame_symbols(False) == without
    assert mc.pilot_blocks == blocks


def test_payload_slots_are_whole():
    for mc in MODCODS.values():
        assert FRAME_BITS % mc.bits_per_symbol == 0
        assert mc.payload_symbols % 90 == 0


def test_no_pilot_block_after_final_slot():
    for mc in MODCODS.values():
        payload_idx, pilot_idx, starts = frame_layout(mc.name, True)
        # the frame must end on payload, not on a pilot block
        assert payload_idx[-1] == mc.frame_symbols(True) - 1
        assert len(starts) == mc.pilot_blocks
        # pilot blocks land every 16 slots after the header
        for k, s in enumerate(starts):
            expected = HEADER_SYMBOLS + (k + 1) * 16 * 90 + k * PILOT_BLOCK_SYMBOLS
            assert s == expected


def test_pilot_spacing_between_block_starts():
    _, _, starts = frame_layout("MC4", True)
    assert list(np.diff(starts)) == [16 * 90 + 36] * 4  # 1476 symbols


# ---------------------------------------------------------------------------
# constellations
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["qpsk", "8psk", "32apsk"])
def test_constellation_unit_energy(name):
    table = constellation(name)
    assert np.mean(np.abs(table) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert len(np.unique(np.round(table, 9))) == len(table)


def test_qpsk_all_zero_bits_map_to_first_quadrant():
    sym = map_symbols([0, 0], "MC4")
    assert sym[0] == pytest.approx((1 + 1j) / np.sqrt(2))


def test_qpsk_gray_axis_separation():
    # flipping one bit moves one rail only
    s00 = map_symbols([0, 0], "MC4")[0]
    s01 = map_symbols([0, 1], "MC4")[0]
    s10 = map_symbols([1, 0], "MC4")[0]
    assert s01.real == pytest.approx(s00.real)
    assert s01.imag == pytest.approx(-s00.imag)
    assert s10.real == pytest.approx(-s00.real)
    assert s10.imag == pytest.approx(s00.imag)


def test_8psk_unit_modulus():
    assert np.allclose(np.abs(constellation("8psk")), 1.0)


def test_32apsk_ring_structure():
    table = constellation("32apsk")
    radii = np.abs(table)
    rings = np.unique(np.round(radii, 9))
    assert len(rings) == 3
    counts = [np.sum(np.isclose(radii, r)) for r in rings]
    assert counts == [4, 12, 16]
    assert rings[1] / rings[0] == pytest.approx(2.84)
    assert rings[2] / rings[0] == pytest.approx(5.27)


@pytest.mark.parametrize("name", ["MC4", "MC12", "MC24"])
def test_map_demap_round_trip(name):
    mc = get_modcod(name)
    rng = np.random.default_rng(7)
    bits = rng.integers(0, 2, 960 * mc.bits_per_symbol, dtype=np.uint8)
    syms = map_symbols(bits, mc)
    assert np.array_equal(demap_symbols(syms, mc), bits)


def test_demap_tie_prefers_lower_label():
    # the origin is equidistant from every point: label 0 must win
    bits = demap_symbols(np.array([0.0 + 0.0j]), "MC4")
    assert list(bits) == [0, 0]


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["MC4", "MC12", "MC24"]))
@settings(max_examples=20, deadline=None)
def test_map_demap_property(seed, name):
    mc = get_modcod(name)
    bits = np.random.default_rng(seed).integers(0, 2, 30 * mc.bits_per_symbol,
                                                dtype=np.uint8)
    assert np.array_equal(demap_symbols(map_symbols(bits, mc), mc), bits)


# ---------------------------------------------------------------------------
# scrambler
# ---------------------------------------------------------------------------

def test_scrambler_preserves_magnitude():
    rng = np.random.default_rng(3)
    syms = rng.normal(size=500) + 1j * rng.normal(size=500)
    out = scramble_payload(syms, 0)
    assert np.allclose(np.abs(out), np.abs(syms))


def test_scrambler_round_trip():
    rng = np.random.default_rng(4)
    syms = rng.normal(size=8100) + 1j * rng.normal(size=8100)
    assert np.allclose(descramble_payload(scramble_payload(syms, 0), 0), syms)


def test_scrambler_is_deterministic_and_index_dependent():
    syms = np.ones(256, dtype=complex)
    a = scramble_payload(syms, 0)
    b = scramble_payload(syms, 0)
    c = scramble_payload(syms, 1)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_scrambler_rotations_are_quarter_turns():
    rot = scramble_payload(np.ones(4096, dtype=complex), 0)
    angles = np.angle(rot) / (np.pi / 2)
    assert np.allclose(angles, np.round(angles), atol=1e-9)
    # all four rotations show up
    assert len(np.unique(np.round(angles) % 4)) == 4


# ---------------------------------------------------------------------------
# PLHEADER
# ---------------------------------------------------------------------------

def test_sof_word():
    bits = sof_bits()
    assert bits.size == 26
    assert int("".join(map(str, bits)), 2) == 0x18D2E82


def test_header_is_90_unit_magnitude_symbols():
    for name in MODCODS:
        for pilots in (False, True):
            h = plheader_symbols(name, pilots)
            assert h.size == 90
            assert np.allclose(np.abs(h), 1.0)


def test_header_alternates_between_diagonals():
    h = sof_symbols()
    # odd-position (1-based) symbols sit on the +45/-135 diagonal,
    # even-position symbols on the +135/-45 diagonal
    assert np.allclose(np.abs(h[0::2].real - h[0::2].imag), 0)
    assert np.allclose(np.abs(h[1::2].real + h[1::2].imag), 0)


def test_pls_field_encodes_pilot_flag():
    a = pls_bits("MC4", True)
    b = pls_bits("MC4", False)
    assert a.size == b.size == 64
    assert not np.array_equal(a, b)
    # even positions carry the same code word either way
    assert np.array_equal(a[0::2], b[0::2])


def test_headers_differ_between_modcods():
    h4 = plheader_symbols("MC4", True)
    h12 = plheader_symbols("MC12", True)
    assert np.allclose(h4[:26], h12[:26])      # shared start-of-frame
    assert not np.allclose(h4[26:], h12[26:])  # distinct signalling field


# ---------------------------------------------------------------------------
# bursts and frames
# ---------------------------------------------------------------------------

def test_bit_burst_shape_and_determinism():
    burst = build_bit_burst(42, "MC12", 3)
    assert burst.bits.shape == (1504, 6 * 3)
    again = build_bit_burst(42, "MC12", 3)
    assert np.array_equal(burst.bits, again.bits)
    other = build_bit_burst(43, "MC12", 3)
    assert not np.array_equal(burst.bits, other.bits)


def test_packet_round_trip_through_frame_bits():
    burst = build_bit_burst(5, "MC24", 2)
    cols = burst.frame_columns(1)
    coded = frame_bits_from_packets(cols)
    assert coded.size == FRAME_BITS
    back = packets_from_frame_bits(coded, "MC24")
    assert np.array_equal(back, cols)


@pytest.mark.parametrize("name", ["MC4", "MC12", "MC24"])
def test_frame_assembly_and_symbol_level_loopback(name):
    burst = build_bit_burst(11, name, 2)
    frames = make_frames(burst, pilots=True)
    mc = burst.modcod
    for f, frame in enumerate(frames):
        syms = frame.symbols()
        assert syms.size == mc.frame_symbols(True)
        payload_idx, pilot_idx, _ = frame_layout(mc.name, True)
        assert np.allclose(syms[pilot_idx], PILOT_SYMBOL)
        assert np.allclose(syms[:90], plheader_symbols(mc.name, True))
        # descramble + demap recovers the coded bits exactly
        recovered = demap_symbols(descramble_payload(syms[payload_idx]), mc)
        assert np.array_equal(recovered, frame.ground_truth_bits)
        assert np.array_equal(packets_from_frame_bits(recovered, mc),
                              burst.frame_columns(f))


def test_burst_symbols_concatenates_frames():
    burst = build_bit_burst(1, "MC4", 3)
    frames = make_frames(burst, pilots=False)
    stream = burst_symbols(frames)
    assert stream.size == 3 * 8190


# ---------------------------------------------------------------------------
# pulse shaping
# ---------------------------------------------------------------------------

def test_rrc_taps_unit_energy_and_symmetry():
    taps = rrc_taps(0.35, 10, 2)
    assert taps.size == 21
    assert np.sum(taps ** 2) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(taps, taps[::-1])


def test_pulse_shape_output_length():
    cfg = PulseShapeConfig(rolloff=0.35, span_symbols=10, samples_per_symbol=2)
    out = pulse_shape(np.ones(100, dtype=complex), cfg, symbol_rate=1e6)
    assert len(out) == (100 + 10) * 2
    assert out.sample_rate == 2e6


def test_matched_cascade_isi_below_minus_40db():
    # TX filter against itself: the combined pulse sampled at symbol spacing
    # must leave every off-peak tap at least 40 dB (power) below the peak.
    cfg = PulseShapeConfig()
    taps = rrc_taps(cfg.rolloff, cfg.span_symbols, cfg.samples_per_symbol)
    cascade = np.convolve(taps, taps)
    center = cascade.size // 2
    peak = cascade[center]
    isi = []
    k = cfg.samples_per_symbol
    for off in range(k, center + 1, k):
        isi.extend([cascade[center - off], cascade[center + off]])
    worst = np.max(np.abs(isi)) / peak
    assert worst ** 2 < 1e-4


def test_pulse_shape_recovers_symbols_after_matched_filter():
    cfg = PulseShapeConfig()
    rng = np.random.default_rng(9)
    syms = map_symbols(rng.integers(0, 2, 400, dtype=np.uint8), "MC4")
    shaped = pulse_shape(syms, cfg)
    taps = rrc_taps(cfg.rolloff, cfg.span_symbols, cfg.samples_per_symbol)
    filtered = np.convolve(shaped.samples, taps)
    delay = cfg.span_symbols * cfg.samples_per_symbol
    picked = filtered[delay::cfg.samples_per_symbol][:syms.size]
    assert np.max(np.abs(picked - syms)) < 1e-2
