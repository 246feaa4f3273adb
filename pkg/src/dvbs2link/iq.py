"""Complex-baseband sample blocks and raw I/Q file interchange.

The on-disk format is interleaved 32-bit little-endian floats (I, Q, I, Q, ...)
with a JSON sidecar (``<file>.json``) recording the sample rate and, when the
block carries modulated frames, the MODCOD name.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IQ_FORMAT = "cf32le"
SIDECAR_VERSION = 1


@dataclass(frozen=True)
class IqBlock:
    """A finite run of complex baseband samples at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if s.ndim != 1:
            raise ValueError("samples must be a one-dimensional vector")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Block length in seconds."""
        return self.samples.size / self.sample_rate

    def power(self) -> float:
        """Mean squared magnitude of the block."""
        return float(np.mean(np.abs(self.samples) ** 2)) if len(self) else 0.0


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_iq(path, block: IqBlock, modcod: str | None = None) -> None:
    """Write a block as interleaved float32 I/Q plus a JSON sidecar."""
    interleaved = np.empty(2 * len(block), dtype="<f4")
    interleaved[0::2] = block.samples.real
    interleaved[1::2] = block.samples.imag
    interleaved.tofile(path)
    meta = {
        "version": SIDECAR_VERSION,
        "format": IQ_FORMAT,
        "sample_rate": block.sample_rate,
        "num_samples": len(block),
    }
    if modcod is not None:
        meta["modcod"] = modcod
    _sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_iq(path) -> tuple[IqBlock, dict]:
    """Read an I/Q file written by :func:`write_iq`.

    Returns the block and the sidecar metadata dictionary.
    """
    meta = json.loads(_sidecar_path(path).read_text())
    if meta.get("format") != IQ_FORMAT:
        raise ValueError(f"unsupported I/Q format: {meta.get('format')!r}")
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % 2:
        raise ValueError("I/Q file holds an odd number of floats")
    n = raw.size // 2
    if meta.get("num_samples", n) != n:
        raise ValueError("sidecar sample count does not match file length")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return IqBlock(samples, float(meta["sample_rate"])), meta
