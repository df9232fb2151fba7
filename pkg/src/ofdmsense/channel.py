"""Multi-antenna echo synthesis: delay, Doppler, path loss, CSCG noise.

Each target contributes an integer-sample delayed copy of the transmit frame,
a continuous per-sample Doppler phase, a complex attenuation from the two-way
free-space budget, and the transmit-beam gain toward its angle; the receive
steering vector spreads it over the antennas. Synthesis is deterministic
given (scenario, generator), so Monte-Carlo trials parallelize with spawned
substreams.

The receive capture runs one extra FFT-length past the transmit frame so
that every delayed echo tail and every compensation window stays in-bounds.
"""

from __future__ import annotations

import cmath
import math
import struct
from dataclasses import dataclass

import numpy as np

from .array import beam_gain, ls_beamformer, rx_steering
from .numerology import (
    NoiseSpec,  # noqa: F401  (re-exported: noise parameters live with the channel)
    C0,
    Scenario,
    Target,
    doppler_shift,
    round_trip_delay,
    sample_offsets,
)
from .waveform import TimeSignal


@dataclass(frozen=True)
class MultiAntennaSignal:
    """Receive-array sample block, one row per antenna."""

    samples: np.ndarray  # nr x n_samples
    sample_rate: float
    t0: float = 0.0

    @property
    def nr(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class Attenuation:
    """Complex echo gain and its factors for one target."""

    complex_gain: complex
    rcs: float
    path_loss: float    # beta_u, amplitude
    phase: complex      # exp(-j 2 pi fc tau), unit modulus
    power_scale: float  # sqrt(Pt Gt Gr / Nt)


def attenuation_of(target: Target, scenario: Scenario) -> Attenuation:
    """Two-way link budget: sqrt(Pt Gt Gr / Nt) * rcs * beta * exp(-j 2 pi fc tau)."""
    num = scenario.numerology
    tau = round_trip_delay(target.range_m)
    lam = num.wavelength
    beta = math.sqrt(lam ** 2 / ((4 * math.pi) ** 3 * target.range_m ** 4))
    power_scale = math.sqrt(scenario.pt_watts * scenario.gt_linear * scenario.gr_linear
                            / scenario.geometry.nt)
    phase = cmath.exp(-2j * math.pi * num.fc * tau)
    return Attenuation(
        complex_gain=power_scale * target.rcs * beta * phase,
        rcs=target.rcs,
        path_loss=beta,
        phase=phase,
        power_scale=power_scale,
    )


def target_gain(target: Target, scenario: Scenario) -> complex:
    """Echo gain including the transmit-beam response toward the target."""
    w_tx = ls_beamformer(scenario.steer_angle_deg, scenario.geometry, side="tx")
    g_beam = beam_gain(target.angle_deg, w_tx, scenario.geometry, side="tx")
    return attenuation_of(target, scenario).complex_gain * g_beam


_RAMP_CACHE: dict[tuple, np.ndarray] = {}


def _doppler_ramp(fd: float, ts: float, n: int, dtype) -> np.ndarray:
    key = (fd, ts, n, np.dtype(dtype).name)
    ramp = _RAMP_CACHE.get(key)
    if ramp is None:
        ramp = np.exp(2j * math.pi * fd * ts * np.arange(n)).astype(dtype)
        if len(_RAMP_CACHE) > 32:
            _RAMP_CACHE.clear()
        _RAMP_CACHE[key] = ramp
    return ramp


def synthesize_rx(tx: TimeSignal, scenario: Scenario,
                  rng: np.random.Generator | None = None,
                  include_noise: bool = True,
                  capture_samples: int | None = None) -> MultiAntennaSignal:
    """Superimpose all target echoes on the receive array and add noise."""
    num = scenario.numerology
    geom = scenario.geometry
    dtype = tx.samples.dtype if np.iscomplexobj(tx.samples) else np.complex128
    n_tx = tx.samples.size
    total = capture_samples if capture_samples is not None else n_tx + num.nc

    rx = np.zeros((geom.nr, total), dtype=dtype)
    for target in scenario.targets:
        tau = round_trip_delay(target.range_m)
        _, ns = sample_offsets(tau, num)
        if ns >= total:
            raise ValueError(f"target at {target.range_m} m delays past the capture")
        gain = target_gain(target, scenario)
        fd = doppler_shift(target.velocity, num.fc)
        stop = min(total, ns + n_tx)
        echo = tx.samples[: stop - ns] * _doppler_ramp(fd, num.ts, total, dtype)[ns:stop]
        echo *= np.asarray(gain, dtype=dtype)
        b = rx_steering(target.angle_deg, geom).elements.astype(dtype)
        for r in range(geom.nr):
            rx[r, ns:stop] += b[r] * echo

    if include_noise:
        if rng is None:
            rng = np.random.default_rng(scenario.seed)
        scale = math.sqrt(scenario.sigma2 / 2.0)
        fdtype = np.float32 if dtype == np.complex64 else np.float64
        noise = rng.standard_normal((geom.nr, total), dtype=fdtype) * scale
        noise = noise + 1j * (rng.standard_normal((geom.nr, total), dtype=fdtype) * scale)
        rx += noise.astype(dtype)

    return MultiAntennaSignal(samples=rx, sample_rate=tx.sample_rate, t0=tx.t0)


def beamform_combine(rx: MultiAntennaSignal | np.ndarray, w_rx: np.ndarray) -> np.ndarray:
    """Combine antennas with w_rx^T (conjugation lives inside the weights)."""
    samples = rx.samples if isinstance(rx, MultiAntennaSignal) else np.asarray(rx)
    if w_rx.size != samples.shape[0]:
        raise ValueError("weight length must equal the antenna count")
    return w_rx.astype(samples.dtype) @ samples


# ---------------------------------------------------------------------------
# Raw capture dump
# ---------------------------------------------------------------------------
# Layout: 8-byte magic "OFDMRXC1", then little-endian header
# (uint32 nr, uint64 n_samples, float64 sample_rate_hz, float64 t0_s),
# then antenna-major interleaved complex64 samples (re, im per sample).

_RAW_MAGIC = b"OFDMRXC1"
_RAW_HEADER = struct.Struct("<IQdd")


def write_raw_capture(path, rx: MultiAntennaSignal) -> None:
    data = np.ascontiguousarray(rx.samples.astype(np.complex64))
    with open(path, "wb") as fh:
        fh.write(_RAW_MAGIC)
        fh.write(_RAW_HEADER.pack(rx.nr, data.shape[1], rx.sample_rate, rx.t0))
        fh.write(data.view(np.float32).tobytes())


def read_raw_capture(path) -> MultiAntennaSignal:
    with open(path, "rb") as fh:
        if fh.read(len(_RAW_MAGIC)) != _RAW_MAGIC:
            raise ValueError("not a raw capture file")
        nr, n_samples, rate, t0 = _RAW_HEADER.unpack(fh.read(_RAW_HEADER.size))
        raw = np.frombuffer(fh.read(), dtype=np.float32)
    if raw.size != 2 * nr * n_samples:
        raise ValueError("raw capture truncated")
    samples = raw.astype(np.float32).view(np.complex64).reshape(nr, n_samples)
    return MultiAntennaSignal(samples=samples, sample_rate=rate, t0=t0)
