"""ULA steering vectors, LS beamforming weights, and the separation operator.

The separation operator is the Moore-Penrose pseudoinverse of the receive
manifold built from the (estimated or true) target angles; its row norms give
the per-stream noise amplification factors ``lambda_u``. Angles are degrees at
the API boundary, radians internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerology import ArrayGeometry

COND_LIMIT = 1e8  # on the manifold normal matrix B^H B


class IllConditionedManifoldError(ValueError):
    """Raised when target angles are too close for a usable pseudoinverse."""


@dataclass(frozen=True)
class SteeringVector:
    elements: np.ndarray
    angle_deg: float
    side: str  # "tx" | "rx"


@dataclass(frozen=True)
class Manifold:
    """Receive steering vectors stacked column-wise, one per target angle."""

    columns: np.ndarray            # nr x u
    angles_deg: tuple[float, ...]


@dataclass(frozen=True)
class SeparationOperator:
    """Pseudoinverse of the manifold plus per-stream noise scale factors."""

    pinv: np.ndarray               # u x nr
    lam: np.ndarray                # length u, lambda_u > 0
    angles_deg: tuple[float, ...]


def _steering(angle_deg: float, n: int, spacing: float, wavelength: float) -> np.ndarray:
    if not -90.0 < angle_deg < 90.0:
        raise ValueError("steering angle must lie in (-90, 90) degrees")
    phase = -2j * math.pi * spacing * math.sin(math.radians(angle_deg)) / wavelength
    return np.exp(phase * np.arange(n))


def tx_steering(angle_deg: float, geom: ArrayGeometry) -> SteeringVector:
    return SteeringVector(_steering(angle_deg, geom.nt, geom.dt, geom.wavelength),
                          angle_deg, "tx")


def rx_steering(angle_deg: float, geom: ArrayGeometry) -> SteeringVector:
    return SteeringVector(_steering(angle_deg, geom.nr, geom.dr, geom.wavelength),
                          angle_deg, "rx")


def ls_beamformer(angle_deg: float, geom: ArrayGeometry, side: str = "tx") -> np.ndarray:
    """Pseudoinverse of the steering row a^T: weights with a^T(theta) w = 1."""
    vec = (tx_steering if side == "tx" else rx_steering)(angle_deg, geom).elements
    # Unit-modulus entries make the row pseudoinverse simply conj(a)/N.
    return vec.conj() / vec.size


def beam_gain(angle_deg: float, weights: np.ndarray, geom: ArrayGeometry,
              side: str = "tx") -> complex:
    """Scalar array response a^T(theta) w toward ``angle_deg``."""
    vec = (tx_steering if side == "tx" else rx_steering)(angle_deg, geom).elements
    return complex(vec @ weights)


def half_power_beamwidth_deg(n: int, spacing: float, wavelength: float) -> float:
    """Full width between the half-power points of the broadside beam."""
    lo, hi = 0.0, 90.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        psi = 2 * math.pi * spacing * math.sin(math.radians(mid)) / wavelength
        if abs(psi) < 1e-12:
            af = 1.0
        else:
            af = abs(math.sin(n * psi / 2) / (n * math.sin(psi / 2)))
        if af > math.sqrt(0.5):
            lo = mid
        else:
            hi = mid
    return 2 * lo


def rx_manifold(angles_deg, geom: ArrayGeometry) -> Manifold:
    angles = tuple(float(a) for a in angles_deg)
    cols = np.stack([rx_steering(a, geom).elements for a in angles], axis=1)
    return Manifold(columns=cols, angles_deg=angles)


def build_separator(angles_deg, geom: ArrayGeometry) -> SeparationOperator:
    """LS separation operator B^+ = (B^H B)^-1 B^H with lambda_u row norms."""
    angles = tuple(float(a) for a in angles_deg)
    if len(set(angles)) != len(angles):
        raise ValueError("separation angles must be distinct")
    if len(angles) > geom.nr:
        raise ValueError("cannot separate more targets than receive elements")
    b = rx_manifold(angles, geom).columns
    gram = b.conj().T @ b
    if np.linalg.cond(gram) > COND_LIMIT:
        raise IllConditionedManifoldError(
            f"manifold for angles {angles} is numerically rank-deficient"
        )
    pinv = np.linalg.solve(gram, b.conj().T)
    lam = np.einsum("ur,ur->u", pinv, pinv.conj()).real
    return SeparationOperator(pinv=pinv, lam=lam, angles_deg=angles)
