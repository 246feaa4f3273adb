import json

import numpy as np
import pytest

from dvbs2link.iq import IqBlock, read_iq, write_iq


def test_block_validation():
    with pytest.raises(ValueError):
        IqBlock(np.zeros((2, 2), dtype=complex), 1e6)
    with pytest.raises(ValueError):
        IqBlock(np.zeros(4, dtype=complex), 0.0)


def test_duration_and_power():
    blk = IqBlock(np.full(2000, 0.5 + 0.5j), 2e6)
    assert blk.duration == pytest.approx(1e-3)
    assert blk.power() == pytest.approx(0.5)


def test_round_trip_is_float32_exact(tmp_path):
    rng = np.random.default_rng(0)
    samples = rng.normal(size=333) + 1j * rng.normal(size=333)
    blk = IqBlock(samples, 2e6)
    path = tmp_path / "burst.iq"
    write_iq(path, blk, modcod="MC4")
    back, meta = read_iq(path)
    assert back.sample_rate == 2e6
    assert meta["modcod"] == "MC4"
    assert np.array_equal(back.samples.astype(np.complex64),
                          samples.astype(np.complex64))
    # the raw file is interleaved little-endian float32
    raw = np.fromfile(path, dtype="<f4")
    assert raw.size == 2 * 333
    assert raw[0] == np.float32(samples[0].real)
    assert raw[1] == np.float32(samples[0].imag)


def test_sidecar_contents(tmp_path):
    blk = IqBlock(np.zeros(8, dtype=complex), 1e6)
    path = tmp_path / "z.iq"
    write_iq(path, blk)
    meta = json.loads((tmp_path / "z.iq.json").read_text())
    assert meta["sample_rate"] == 1e6
    assert meta["num_samples"] == 8
    assert meta["format"] == "cf32le"


def test_reader_rejects_truncated_file(tmp_path):
    blk = IqBlock(np.ones(16, dtype=complex), 1e6)
    path = tmp_path / "t.iq"
    write_iq(path, blk)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError):
        read_iq(path)
