"""Receive chain: spatial separation, coherent compensation, RDM, CFAR.

Coherent compensation adds the ``n_a`` samples that trail each receive
window back onto the window head. For an echo delayed past the CP this
restores (part of) the circular symbol structure, trading doubled noise on
the head samples for a larger coherent payload term; the optimum ``n_a``
sits at the CP-overrun count or at the full delay offset.

The range-Doppler map divides the demodulated grid by the known payload and
takes an IDFT across subcarriers and a DFT across symbols, so a target at
integer delay ``n_s`` and Doppler ``f_d`` peaks at bin
``(n_s, round(M f_d T))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .array import SeparationOperator
from .channel import MultiAntennaSignal
from .numerology import C0, OfdmNumerology, Target, doppler_shift, round_trip_delay, sample_offsets
from .waveform import SymbolGrid, _grid_data

DEFAULT_GUARD = (8, 4)  # SINR-measurement exclusion half-widths (range, Doppler)


@dataclass(frozen=True)
class SeparatedStream:
    """One target's echo after LS separation, full capture length."""

    samples: np.ndarray
    target_index: int
    lambda_u: float      # noise amplification of this stream

    def __post_init__(self):
        if self.lambda_u <= 0:
            raise ValueError("lambda_u must be positive")


@dataclass(frozen=True)
class DemodResult:
    """Frequency-domain symbols (nc x m) after optional compensation."""

    grid: np.ndarray
    na: int
    fully_compensated: bool


@dataclass(frozen=True)
class RangeDopplerMap:
    bins: np.ndarray          # nc x m complex
    range_bin_m: float
    velocity_bin_mps: float

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.bins) ** 2

    def range_axis(self) -> np.ndarray:
        return np.arange(self.bins.shape[0]) * self.range_bin_m

    def velocity_axis(self) -> np.ndarray:
        return np.arange(self.bins.shape[1]) * self.velocity_bin_mps


@dataclass(frozen=True)
class Detection:
    k: int
    l: int
    power: float
    threshold: float

    def __post_init__(self):
        if self.power < self.threshold:
            raise ValueError("detections must exceed their threshold")


def target_bin(num: OfdmNumerology, target: Target) -> tuple[int, int]:
    """RDM bin (k, l) a target lands on: delay samples, rounded Doppler bin."""
    _, ns = sample_offsets(round_trip_delay(target.range_m), num)
    fd = doppler_shift(target.velocity, num.fc)
    l = round(num.m_symbols * fd * num.t_total) % num.m_symbols
    return ns, l


# ---------------------------------------------------------------------------
# Separation and demodulation
# ---------------------------------------------------------------------------

def ls_separate(rx: MultiAntennaSignal, sep: SeparationOperator) -> list[SeparatedStream]:
    """Apply the manifold pseudoinverse; stream u carries target u's echo."""
    if sep.pinv.shape[1] != rx.nr:
        raise ValueError("separator antenna count does not match the capture")
    streams = sep.pinv.astype(rx.samples.dtype) @ rx.samples
    return [
        SeparatedStream(samples=streams[u], target_index=u, lambda_u=float(sep.lam[u]))
        for u in range(streams.shape[0])
    ]


def coherent_compensate(samples, n: int, na: int, num: OfdmNumerology) -> np.ndarray:
    """Receive window of symbol ``n`` with ``na`` trailing samples added to its head.

    On the final symbol the compensation window may run off the capture; the
    addition is then clipped to the available samples.
    """
    samples = np.asarray(samples)
    if not 0 <= na <= num.nc:
        raise ValueError("compensation length must lie in [0, nc]")
    start = n * num.block_samples + num.cp_samples
    stop = start + num.nc
    if n < 0 or stop > samples.size:
        raise ValueError(f"receive window for symbol {n} is out of bounds")
    win = samples[start:stop].copy()
    comp_start = (n + 1) * num.block_samples
    avail = min(na, max(0, samples.size - comp_start))
    if avail:
        win[:avail] += samples[comp_start:comp_start + avail]
    return win


def demod_grid(samples, na: int, num: OfdmNumerology) -> DemodResult:
    """Compensate and demodulate every symbol of a stream into an nc x m grid."""
    samples = np.asarray(samples)
    if not 0 <= na <= num.nc:
        raise ValueError("compensation length must lie in [0, nc]")
    m, nc, block = num.m_symbols, num.nc, num.block_samples
    if samples.size < m * block:
        raise ValueError("stream shorter than one full frame")

    starts = np.arange(m) * block + num.cp_samples
    wins = samples[starts[:, None] + np.arange(nc)[None, :]].copy()
    fully = True
    if na > 0:
        comp_idx = (np.arange(m) + 1)[:, None] * block + np.arange(na)[None, :]
        in_bounds = comp_idx < samples.size
        fully = bool(in_bounds.all())
        comp = samples[np.minimum(comp_idx, samples.size - 1)]
        if not fully:
            comp = np.where(in_bounds, comp, 0)
        wins[:, :na] += comp
    grid = scipy.fft.fft(wins, axis=1, norm="ortho").T
    return DemodResult(grid=np.ascontiguousarray(grid), na=na, fully_compensated=fully)


# ---------------------------------------------------------------------------
# Range-Doppler map
# ---------------------------------------------------------------------------

def build_rdm(rx_grid, tx_grid, num: OfdmNumerology) -> RangeDopplerMap:
    """Point-division equalization, IDFT over subcarriers, DFT over symbols."""
    rx = _grid_data(rx_grid)
    tx = _grid_data(tx_grid)
    if rx.shape != tx.shape:
        raise ValueError("received and transmitted grids must share a shape")
    if not np.all(tx):
        raise ValueError("transmit grid contains zero symbols; cannot divide")
    z = rx / tx
    bins = scipy.fft.ifft(scipy.fft.fft(z, axis=1), axis=0) / num.m_symbols
    return RangeDopplerMap(
        bins=bins,
        range_bin_m=C0 / (2.0 * num.bandwidth),
        velocity_bin_mps=C0 / (2.0 * num.fc * num.m_symbols * num.t_total),
    )


def _power_of(rdm) -> np.ndarray:
    if isinstance(rdm, RangeDopplerMap):
        return rdm.power
    arr = np.asarray(rdm)
    return np.abs(arr) ** 2 if np.iscomplexobj(arr) else arr


def _wrapped_box(shape, center, half) -> tuple[np.ndarray, np.ndarray]:
    rows = (center[0] + np.arange(-half[0], half[0] + 1)) % shape[0]
    cols = (center[1] + np.arange(-half[1], half[1] + 1)) % shape[1]
    return rows, cols


def measure_rdm_sinr(rdm, k: int, l: int, peaks=None,
                     guard: tuple[int, int] = DEFAULT_GUARD) -> float:
    """Peak power at (k, l) over the mean floor, in dB.

    The floor excludes a guard box around every known peak (the measured one
    included), since nearby straddle lobes are part of the peak, not the
    interference background.
    """
    power = _power_of(rdm)
    boxes = list(peaks) if peaks is not None else []
    if (k, l) not in boxes:
        boxes.append((k, l))
    flat_excluded = set()
    for center in boxes:
        rows, cols = _wrapped_box(power.shape, center, guard)
        flat_excluded.update(
            (int(r) * power.shape[1] + int(c)) for r in rows for c in cols
        )
    n_floor = power.size - len(flat_excluded)
    if n_floor <= 0:
        raise ValueError("guard boxes cover the whole map")
    excluded_sum = power.ravel()[np.fromiter(flat_excluded, dtype=np.int64)].sum()
    floor = (float(power.sum()) - float(excluded_sum)) / n_floor
    return float(10.0 * np.log10(power[k, l] / floor))


# ---------------------------------------------------------------------------
# CFAR detection
# ---------------------------------------------------------------------------

def cfar_threshold_factor(pfa: float, n_train: int) -> float:
    """Exact cell-averaging CFAR scale for exponential cell powers."""
    if not 0.0 < pfa < 1.0:
        raise ValueError("probability of false alarm must lie in (0, 1)")
    return n_train * (pfa ** (-1.0 / n_train) - 1.0)


def _cfar_geometry(shape, train: int, guard: int) -> tuple[int, int, int]:
    if train < 1 or guard < 0:
        raise ValueError("need train >= 1 and guard >= 0")
    outer = 2 * (train + guard) + 1
    inner = 2 * guard + 1
    if outer > min(shape):
        raise ValueError("CFAR window larger than the map")
    return outer, inner, outer * outer - inner * inner


def cfar_detect(rdm, pfa: float, train: int = 16, guard: int = 4) -> list[Detection]:
    """2-D cell-averaging CFAR over the full map with toroidal wrap."""
    from scipy.ndimage import uniform_filter

    power = _power_of(rdm)
    outer, inner, n_train = _cfar_geometry(power.shape, train, guard)
    alpha = cfar_threshold_factor(pfa, n_train)
    outer_sum = uniform_filter(power, size=outer, mode="wrap") * (outer * outer)
    inner_sum = uniform_filter(power, size=inner, mode="wrap") * (inner * inner)
    noise = (outer_sum - inner_sum) / n_train
    threshold = alpha * noise
    hits = np.argwhere(power > threshold)
    detections = [
        Detection(k=int(k), l=int(l), power=float(power[k, l]),
                  threshold=float(threshold[k, l]))
        for k, l in hits
    ]
    detections.sort(key=lambda d: d.power, reverse=True)
    return detections


def cfar_hit_near(rdm, cell: tuple[int, int], pfa: float, train: int = 16,
                  guard: int = 4, tolerance: int = 1) -> bool:
    """CFAR decision restricted to ``cell`` and its ``tolerance``-neighborhood.

    Equivalent to running the full-map detector and asking whether any hit
    lands within the neighborhood; evaluates only the needed cells.
    """
    power = _power_of(rdm)
    _, _, n_train = _cfar_geometry(power.shape, train, guard)
    alpha = cfar_threshold_factor(pfa, n_train)
    w = train + guard
    for dk in range(-tolerance, tolerance + 1):
        for dl in range(-tolerance, tolerance + 1):
            center = ((cell[0] + dk) % power.shape[0], (cell[1] + dl) % power.shape[1])
            rows, cols = _wrapped_box(power.shape, center, (w, w))
            patch = power[np.ix_(rows, cols)]
            g_rows, g_cols = _wrapped_box(power.shape, center, (guard, guard))
            guard_sum = power[np.ix_(g_rows, g_cols)].sum()
            noise = (patch.sum() - guard_sum) / n_train
            if power[center] > alpha * noise:
                return True
    return False


# ---------------------------------------------------------------------------
# Block-SINR measurement (diagnostic against the closed forms)
# ---------------------------------------------------------------------------

def measure_block_sinr(rx_grid, tx_grid, ns: int, num: OfdmNumerology) -> float:
    """Linear SINR of a demodulated grid against the known useful component.

    Fits one complex gain per symbol (absorbing attenuation and the
    per-symbol Doppler rotation), subtracts the fitted useful part, and
    returns useful power over residual power.
    """
    rx = _grid_data(rx_grid)
    tx = _grid_data(tx_grid)
    ramp = np.exp(-2j * np.pi * np.arange(num.nc) * ns / num.nc)
    ref = tx * ramp[:, None]
    gains = np.sum(rx * ref.conj(), axis=0) / np.sum(np.abs(ref) ** 2, axis=0)
    useful = gains[None, :] * ref
    resid = rx - useful
    return float(np.sum(np.abs(useful) ** 2) / np.sum(np.abs(resid) ** 2))


# ---------------------------------------------------------------------------
# Dumps
# ---------------------------------------------------------------------------

def write_rdm_csv(path, rdm: RangeDopplerMap, min_power_db: float | None = None) -> None:
    """Per-bin CSV (k, l, range_m, velocity_mps, power_db); optional floor cut."""
    power = rdm.power
    ref = power.max()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "l", "range_m", "velocity_mps", "power_db"])
        for k in range(power.shape[0]):
            row_m = k * rdm.range_bin_m
            for l in range(power.shape[1]):
                p_db = 10.0 * np.log10(max(power[k, l], 1e-300))
                if min_power_db is not None and p_db < 10 * np.log10(ref) + min_power_db:
                    continue
                writer.writerow([k, l, f"{row_m:.3f}",
                                 f"{l * rdm.velocity_bin_mps:.3f}", f"{p_db:.3f}"])


def write_rdm_npy(path, rdm: RangeDopplerMap) -> None:
    np.save(path, rdm.bins)


def write_detections_csv(path, detections, rdm: RangeDopplerMap | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["k", "l", "power_db", "threshold_db"]
        if rdm is not None:
            header += ["range_m", "velocity_mps"]
        writer.writerow(header)
        for d in detections:
            row = [d.k, d.l, f"{10 * np.log10(d.power):.3f}",
                   f"{10 * np.log10(d.threshold):.3f}"]
            if rdm is not None:
                row += [f"{d.k * rdm.range_bin_m:.3f}", f"{d.l * rdm.velocity_bin_mps:.3f}"]
            writer.writerow(row)
