"""Link-level DVB-S2 burst simulator for LEO downlinks.

The package is organized along the signal path:

- :mod:`dvbs2link.framing` — bits, constellations, scrambling, PLHEADER,
  pilots and pulse shaping
- :mod:`dvbs2link.impairments` — oscillator, noise and interference models
- :mod:`dvbs2link.channel` — LEO geometry, Doppler and the tapped-delay-line
  fading emulator
- :mod:`dvbs2link.receiver` — AGC, timing recovery, frame sync, carrier
  recovery and demodulation
- :mod:`dvbs2link.metrics` — BER/FER/SNR bookkeeping and the normalized
  performance gain
- :mod:`dvbs2link.harness` — the scenario matrix runner
"""
from .iq import IqBlock, read_iq, write_iq
from .framing import (
    FRAME_BITS,
    MODCODS,
    BitBurst,
    IdentityCodec,
    ModCod,
    PlFrame,
    PulseShapeConfig,
    build_bit_burst,
    get_modcod,
    make_frames,
    burst_symbols,
    pulse_shape,
)

__version__ = "0.1.0"

__all__ = [
    "IqBlock", "read_iq", "write_iq",
    "FRAME_BITS", "MODCODS", "BitBurst", "IdentityCodec", "ModCod",
    "PlFrame", "PulseShapeConfig", "build_bit_burst", "get_modcod",
    "make_frames", "burst_symbols", "pulse_shape",
    "__version__",
]
