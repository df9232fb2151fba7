"""MUSIC direction finding on receive-array snapshots.

The search is restricted to the known transmit-beam window, which is what
makes a fine grid affordable: the default is 0.01 degrees inside
``beam_center +/- beam_halfwidth``. Source count is taken as known by
default; an eigenvalue-gap estimate is available for blind runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .array import rx_manifold
from .channel import MultiAntennaSignal
from .numerology import ArrayGeometry, OfdmNumerology

SPECTRUM_FLOOR = 1e-12  # on the projected denominator, guards exact orthogonality


class UnderDetectionError(RuntimeError):
    """Fewer spectrum peaks than requested sources; carries what was found."""

    def __init__(self, requested: int, found_deg):
        self.requested = requested
        self.found_deg = tuple(found_deg)
        super().__init__(
            f"found {len(self.found_deg)} spectrum peaks, expected {requested}"
        )


@dataclass(frozen=True)
class SubspaceSplit:
    signal_basis: np.ndarray   # nr x u
    noise_basis: np.ndarray    # nr x (nr - u)
    eigenvalues: np.ndarray    # descending


@dataclass(frozen=True)
class MusicSpectrum:
    grid_deg: np.ndarray
    values: np.ndarray


def snapshot_matrix(rx: MultiAntennaSignal, num: OfdmNumerology,
                    n_snapshots: int, symbol_index: int = 1) -> np.ndarray:
    """Stack ``n_snapshots`` consecutive CP-stripped samples as columns.

    Defaults to the second symbol interval: by then every echo with delay
    below one symbol duration is present at full power, no matter how far
    the target is.
    """
    start = symbol_index * num.block_samples + num.cp_samples
    stop = start + n_snapshots
    if stop > rx.samples.shape[1]:
        raise ValueError("capture too short for the requested snapshots")
    return rx.samples[:, start:stop]


def sample_covariance(snapshots: np.ndarray) -> np.ndarray:
    """Sample correlation matrix Y Y^H / N (Hermitian PSD)."""
    snapshots = np.asarray(snapshots)
    if snapshots.ndim != 2 or snapshots.shape[1] < 1:
        raise ValueError("need an nr x N snapshot matrix with N >= 1")
    r = snapshots @ snapshots.conj().T / snapshots.shape[1]
    return 0.5 * (r + r.conj().T)


def split_subspaces(r: np.ndarray, n_sources: int) -> SubspaceSplit:
    """Eigendecompose and split into signal (top) and noise eigenvectors."""
    nr = r.shape[0]
    if not 1 <= n_sources < nr:
        raise ValueError("need 1 <= source count < antenna count")
    evals, evecs = np.linalg.eigh(r)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    return SubspaceSplit(
        signal_basis=evecs[:, :n_sources],
        noise_basis=evecs[:, n_sources:],
        eigenvalues=evals,
    )


def estimate_num_sources(eigenvalues: np.ndarray) -> int:
    """Largest-ratio eigenvalue gap (simple blind source-count estimate)."""
    ev = np.maximum(np.sort(np.asarray(eigenvalues))[::-1], 1e-300)
    ratios = ev[:-1] / ev[1:]
    return int(np.argmax(ratios)) + 1


def music_spectrum(split: SubspaceSplit, grid_deg: np.ndarray,
                   geom: ArrayGeometry) -> MusicSpectrum:
    """Pseudo-spectrum 1 / ||A_N^H b(theta)||^2 over the grid."""
    grid_deg = np.asarray(grid_deg, dtype=float)
    if grid_deg.size == 0:
        raise ValueError("empty search grid")
    b = rx_manifold(grid_deg, geom).columns          # nr x n_grid
    proj = split.noise_basis.conj().T @ b            # (nr-u) x n_grid
    denom = np.maximum(np.sum(np.abs(proj) ** 2, axis=0), SPECTRUM_FLOOR)
    return MusicSpectrum(grid_deg=grid_deg, values=1.0 / denom)


def _refine_peak(grid: np.ndarray, values: np.ndarray, i: int) -> float:
    if i == 0 or i == grid.size - 1:
        return float(grid[i])
    y0, y1, y2 = values[i - 1], values[i], values[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return float(grid[i])
    shift = 0.5 * (y0 - y2) / denom
    shift = min(0.5, max(-0.5, shift))
    return float(grid[i] + shift * (grid[1] - grid[0]))


def estimate_doas(snapshots: np.ndarray, n_sources: int, geom: ArrayGeometry,
                  beam_center_deg: float, beam_halfwidth_deg: float,
                  grid_step_deg: float = 0.01) -> np.ndarray:
    """Top local maxima of the beam-restricted spectrum, sorted ascending."""
    lo = max(-89.9, beam_center_deg - beam_halfwidth_deg)
    hi = min(89.9, beam_center_deg + beam_halfwidth_deg)
    if lo >= hi:
        raise ValueError("search window is empty or outside (-90, 90)")
    grid = np.arange(lo, hi + grid_step_deg / 2, grid_step_deg)

    split = split_subspaces(sample_covariance(snapshots), n_sources)
    spec = music_spectrum(split, grid, geom)
    v = spec.values
    interior = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1
    if interior.size < n_sources:
        found = sorted(_refine_peak(grid, v, i) for i in interior)
        raise UnderDetectionError(n_sources, found)
    top = interior[np.argsort(v[interior])[::-1][:n_sources]]
    return np.array(sorted(_refine_peak(grid, v, i) for i in top))


def write_spectrum_csv(path, spectrum: MusicSpectrum) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg", "p_music"])
        for angle, value in zip(spectrum.grid_deg, spectrum.values):
            writer.writerow([f"{angle:.6f}", f"{value:.8e}"])
