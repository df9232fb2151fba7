"""Monostatic MIMO-OFDM sensing simulator.

Synthesizes multi-target echo captures for a co-located OFDM transceiver,
separates targets in the spatial domain, repairs CP-overrun interference by
coherent tail compensation, forms range-Doppler maps with CFAR detection,
and checks the measured SINR against closed-form models.
"""

from .numerology import (
    ArrayGeometry,
    NoiseSpec,
    OfdmNumerology,
    Scenario,
    Target,
    doppler_shift,
    load_scenario,
    max_cp_range,
    max_unambiguous_range,
    round_trip_delay,
    sample_offsets,
)

__all__ = [
    "ArrayGeometry",
    "NoiseSpec",
    "OfdmNumerology",
    "Scenario",
    "Target",
    "doppler_shift",
    "load_scenario",
    "max_cp_range",
    "max_unambiguous_range",
    "round_trip_delay",
    "sample_offsets",
]

__version__ = "0.1.0"
