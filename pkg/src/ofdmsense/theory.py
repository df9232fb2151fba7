"""Closed-form block and range-Doppler SINR models.

All expressions work on dimensionless delay fractions: ``ne = n_e/nc`` (CP
overrun), ``na = n_a/nc`` (compensation length), ``ns = n_s/nc`` (total
offset). Powers are linear; convert to dB only at reporting.

The payload-dependent constant ``E[|1/S|^2]`` enters through the
point-division equalizer and is computed exactly from the constellation
(17/9 for unit-power 16-QAM), never estimated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .waveform import QAM16_MEAN_INV_POWER, QAM16_MEAN_POWER


@dataclass(frozen=True)
class BlockSinrInputs:
    """Inputs of the per-symbol (pre-transform) SINR expressions."""

    ne_tilde: float
    na_tilde: float
    ns_tilde: float
    gamma0: float        # interference-free frequency-domain SNR
    fd_T: float = 0.0    # Doppler shift times full symbol duration

    def __post_init__(self):
        for name in ("ne_tilde", "na_tilde", "ns_tilde"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")


@dataclass(frozen=True)
class RdmSinrInputs:
    """Inputs of the range-Doppler map SINR expressions."""

    ne_tilde: float
    na_tilde: float
    ns_tilde: float
    fd_T: float
    m_symbols: int
    nc: int
    gain2: float         # |attenuation x tx-beam response|^2
    lambda_u: float      # separation noise amplification
    sigma2: float
    symbol_power: float = QAM16_MEAN_POWER
    mean_inv_symbol_power: float = QAM16_MEAN_INV_POWER

    def __post_init__(self):
        if self.gain2 <= 0 or self.lambda_u <= 0 or self.sigma2 <= 0:
            raise ValueError("gain2, lambda_u and sigma2 must be positive")
        if self.mean_inv_symbol_power < 1.0:
            raise ValueError("E[|1/S|^2] below 1 violates Jensen for unit-power symbols")


@dataclass(frozen=True)
class TradTarget:
    """Per-target terms of the beamformed 2D-FFT model."""

    gain2: float         # |attenuation x rx-combine x tx-beam response|^2
    ne_tilde: float


@dataclass(frozen=True)
class TradSinrInputs:
    targets: tuple[TradTarget, ...]
    m_symbols: int
    nc: int
    w_rx_norm2: float    # ||w_rx||^2, scales the combined noise
    sigma2: float
    symbol_power: float = QAM16_MEAN_POWER
    mean_inv_symbol_power: float = QAM16_MEAN_INV_POWER


# ---------------------------------------------------------------------------
# Per-symbol (block) SINR
# ---------------------------------------------------------------------------

def gamma0(gain2: float, lambda_u: float, sigma2: float,
           symbol_power: float = QAM16_MEAN_POWER) -> float:
    """Frequency-domain SNR of an interference-free block."""
    if gain2 <= 0 or lambda_u <= 0 or sigma2 <= 0:
        raise ValueError("gamma0 inputs must be positive")
    return gain2 * symbol_power / (lambda_u * sigma2)


def powers_before(ne_tilde: float, gain2: float,
                  symbol_power: float = QAM16_MEAN_POWER) -> tuple[float, float, float]:
    """(useful, ISI, ICI) powers of an uncompensated over-CP block."""
    if not 0.0 <= ne_tilde < 1.0:
        raise ValueError("ne_tilde must lie in [0, 1)")
    g = gain2 * symbol_power
    return (1.0 - ne_tilde) ** 2 * g, ne_tilde * g, ne_tilde * (1.0 - ne_tilde) * g


def sinr_block_before(ne_tilde: float, gamma0_value: float) -> float:
    """Block SINR with no compensation: (1-ne)^2 / (ne(2-ne) + 1/g0)."""
    return (1.0 - ne_tilde) ** 2 / (ne_tilde * (2.0 - ne_tilde) + 1.0 / gamma0_value)


def _ici_coeff(na_tilde: float, ne_tilde: float, b: float) -> float:
    return (na_tilde * (1.0 - na_tilde)
            + (2.0 * na_tilde * ne_tilde - 2.0 * min(ne_tilde, na_tilde)) * b
            + ne_tilde * (1.0 - ne_tilde))


def ici_coeff_a(na_tilde: float, ne_tilde: float, fd_T: float = 0.0) -> float:
    """Residual-ICI power coefficient after compensating ``na`` samples.

    Reduces to |na-ne| (1-|na-ne|) at zero Doppler and vanishes at na = ne.
    """
    return _ici_coeff(na_tilde, ne_tilde, math.cos(2.0 * math.pi * fd_T))


def _useful_coeff(ne: float, na_eff: float, b: float) -> float:
    # |(1 - ne) + na_eff e^{j 2 pi fd T}|^2: coherent window + compensated head.
    return (1.0 - ne) ** 2 + na_eff ** 2 + 2.0 * na_eff * (1.0 - ne) * b


def sinr_block_after(inputs: BlockSinrInputs) -> float:
    """Block SINR with ``na`` compensated samples (either delay regime)."""
    ne, na, ns = inputs.ne_tilde, inputs.na_tilde, inputs.ns_tilde
    b = math.cos(2.0 * math.pi * inputs.fd_T)
    na_eff = min(na, ns)
    num = _useful_coeff(ne, na_eff, b)
    if na <= ns:
        den = _ici_coeff(na, ne, b) + ne + (1.0 + na) / inputs.gamma0
    else:
        den = (ns * (1.0 - ns) + ne * (2.0 - ne) + (na - ns)
               + 2.0 * ne * (ns - 1.0) * b + (1.0 + na) / inputs.gamma0)
    return num / den


@dataclass(frozen=True)
class OptimalNa:
    ne_samples: int
    ns_samples: int
    sinr_ne: float
    sinr_ns: float

    @property
    def best_na(self) -> int:
        return self.ne_samples if self.sinr_ne >= self.sinr_ns else self.ns_samples

    @property
    def best_sinr(self) -> float:
        return max(self.sinr_ne, self.sinr_ns)


def optimal_na(ne_samples: int, ns_samples: int, nc: int, gamma0_value: float,
               fd_T: float = 0.0) -> OptimalNa:
    """Block SINR at the two candidate optima ``na = n_e`` and ``na = n_s``."""
    if ne_samples > ns_samples:
        raise ValueError("n_e cannot exceed n_s")
    ne, ns = ne_samples / nc, ns_samples / nc

    def at(na_samples: int) -> float:
        return sinr_block_after(BlockSinrInputs(
            ne_tilde=ne, na_tilde=na_samples / nc, ns_tilde=ns,
            gamma0=gamma0_value, fd_T=fd_T,
        ))

    return OptimalNa(ne_samples=ne_samples, ns_samples=ns_samples,
                     sinr_ne=at(ne_samples), sinr_ns=at(ns_samples))


# ---------------------------------------------------------------------------
# Range-Doppler map SINR
# ---------------------------------------------------------------------------

def sinr_rdm(method: str, inputs: RdmSinrInputs | None = None,
             trad: TradSinrInputs | None = None, target_index: int = 0) -> float:
    """Map-level SINR (>= 1 linear) for one processing method.

    ``cc`` picks the matching compensation regime from ``na`` vs ``ns``;
    ``cc_large_na`` forces the next-symbol-ISI branch; ``sep`` is separation
    only (na = 0); ``trad`` is the beamformed 2D-FFT baseline and draws from
    the per-target list instead.
    """
    if method == "trad":
        if trad is None:
            raise ValueError("trad method needs TradSinrInputs")
        return sinr_rdm_traditional(target_index, trad)
    if inputs is None:
        raise ValueError(f"method {method!r} needs RdmSinrInputs")
    ne, na, ns = inputs.ne_tilde, inputs.na_tilde, inputs.ns_tilde
    b = math.cos(2.0 * math.pi * inputs.fd_T)
    if method == "sep":
        na = 0.0
    elif method == "cc":
        pass
    elif method == "cc_large_na":
        if na <= ns:
            raise ValueError("cc_large_na expects na > ns")
    else:
        raise ValueError(f"unknown method {method!r}")

    na_eff = min(na, ns)
    useful = _useful_coeff(ne, na_eff, b) * inputs.gain2
    if na <= ns:
        coeff = _ici_coeff(na, ne, b) + ne
    else:
        coeff = (ns * (1.0 - ns) + ne * (2.0 - ne) + (na - ns)
                 + 2.0 * ne * (ns - 1.0) * b)
    variance = inputs.mean_inv_symbol_power * (
        coeff * inputs.gain2 * inputs.symbol_power
        + (1.0 + na) * inputs.lambda_u * inputs.sigma2
    ) / (inputs.m_symbols * inputs.nc)
    return 1.0 + useful / variance


def sinr_rdm_traditional(target_index: int, inputs: TradSinrInputs) -> float:
    """2D-FFT baseline: every target's ISI/ICI lands in one combined map."""
    tgt = inputs.targets[target_index]
    num = (inputs.m_symbols * inputs.nc * (1.0 - tgt.ne_tilde) ** 2 * tgt.gain2)
    interference = sum(
        t.ne_tilde * (2.0 - t.ne_tilde) * t.gain2 for t in inputs.targets
    ) * inputs.symbol_power
    den = (interference + inputs.w_rx_norm2 * inputs.sigma2) * inputs.mean_inv_symbol_power
    return 1.0 + num / den


def doppler_straddle_loss(m_symbols: int, fd_T: float) -> float:
    """Power factor from sampling a fractional Doppler peak at its nearest bin.

    The closed forms place the target's energy at the continuous Doppler
    frequency; the map is read at integer bins. This Dirichlet-kernel factor
    converts one to the other when comparing theory to measured peaks.
    """
    nu = m_symbols * fd_T
    delta = nu - round(nu)
    if abs(delta) < 1e-12:
        return 1.0
    return (math.sin(math.pi * delta)
            / (m_symbols * math.sin(math.pi * delta / m_symbols))) ** 2


def apply_straddle(sinr_linear: float, straddle: float) -> float:
    """Scale the beyond-noise part of an SINR by a peak sampling loss."""
    return 1.0 + straddle * (sinr_linear - 1.0)
