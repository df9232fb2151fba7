"""16-QAM payloads and OFDM modulation/demodulation.

The discrete frame layout puts each symbol's CP ahead of its useful part, so
sample ``j`` of the stream sits at time ``-tcp + j*ts`` and the receive window
of symbol ``n`` starts ``cp_samples`` into block ``n``. The DFT is scaled by
``1/sqrt(nc)`` in both directions, which keeps per-block energy equal in time
and frequency.

Functions here are pure and dtype-preserving: feed complex64 grids for fast
Monte-Carlo pipelines, complex128 for tight numeric checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .numerology import OfdmNumerology

# Gray-coded 16-QAM, unit average power. Bit pairs map to PAM levels
# 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3; first two bits drive I, last two Q.
_GRAY_PAM = np.array([-3.0, -1.0, 3.0, 1.0])  # indexed by (b0 b1) as an integer
QAM16_NORM = 1.0 / np.sqrt(10.0)
QAM16_POINTS = np.array(
    [(_GRAY_PAM[i >> 2] + 1j * _GRAY_PAM[i & 3]) * QAM16_NORM for i in range(16)]
)
# Exact constellation moments used by the closed-form models.
QAM16_MEAN_POWER = float(np.mean(np.abs(QAM16_POINTS) ** 2))          # = 1
QAM16_MEAN_INV_POWER = float(np.mean(1.0 / np.abs(QAM16_POINTS) ** 2))  # = 17/9


@dataclass(frozen=True)
class SymbolGrid:
    """Frequency-domain payload, one column per OFDM symbol (nc x m)."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError("symbol grid must be 2-D (subcarriers x symbols)")


@dataclass(frozen=True)
class TimeSignal:
    """Baseband sample stream with its rate and start-time offset."""

    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0


def _grid_data(grid) -> np.ndarray:
    return grid.data if isinstance(grid, SymbolGrid) else np.asarray(grid)


def qam16_map(bits) -> np.ndarray:
    """Map a bit sequence (multiple of 4 bits) onto unit-power 16-QAM."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % 4 != 0:
        raise ValueError("bit count must be divisible by 4")
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0/1")
    nibbles = bits.reshape(-1, 4)
    idx = (nibbles[:, 0] << 3) | (nibbles[:, 1] << 2) | (nibbles[:, 2] << 1) | nibbles[:, 3]
    return QAM16_POINTS[idx]


def random_qam16_grid(num: OfdmNumerology, rng: np.random.Generator,
                      dtype=np.complex128) -> SymbolGrid:
    """Payload grid drawn i.i.d. uniform over the constellation."""
    idx = rng.integers(0, 16, size=(num.nc, num.m_symbols))
    return SymbolGrid(QAM16_POINTS[idx].astype(dtype))


def ofdm_modulate(grid, num: OfdmNumerology) -> TimeSignal:
    """IDFT each symbol column, prepend its CP, concatenate the blocks."""
    data = _grid_data(grid)
    if data.shape != (num.nc, num.m_symbols):
        raise ValueError(
            f"grid shape {data.shape} does not match numerology "
            f"({num.nc} x {num.m_symbols})"
        )
    # scipy.fft preserves complex64 inputs; 1/sqrt(nc) overall scaling.
    body = scipy.fft.ifft(data, axis=0, norm="ortho")
    blocks = np.concatenate([body[num.nc - num.cp_samples:, :], body], axis=0)
    samples = blocks.reshape(-1, order="F")
    return TimeSignal(samples=samples, sample_rate=1.0 / num.ts, t0=-num.cp_samples * num.ts)


def ofdm_demod_window(samples, n: int, num: OfdmNumerology) -> np.ndarray:
    """DFT of the CP-stripped receive window of symbol ``n``."""
    samples = np.asarray(samples)
    start = n * num.block_samples + num.cp_samples
    stop = start + num.nc
    if n < 0 or stop > samples.shape[-1]:
        raise ValueError(f"receive window for symbol {n} is out of bounds")
    return scipy.fft.fft(samples[..., start:stop], axis=-1, norm="ortho")


def frame_energy(sig: TimeSignal) -> float:
    """Total |s|^2 over the frame (Parseval-comparable to the grid energy)."""
    return float(np.sum(np.abs(sig.samples) ** 2))
