"""OFDM numerology, array geometry, and scenario definitions.

Everything downstream (waveform synthesis, channel, receive chain, theory)
consumes the sample-count quantities derived here: the FFT size, the CP length
in samples, and the per-target delay offsets (CP overrun ``n_e`` and total
offset ``n_s``). Delays are quantized to integer samples with round-half-even
so that channel synthesis and the closed-form models agree exactly.

All types are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

C0 = 3.0e8  # propagation speed, m/s
BOLTZMANN = 1.380649e-23  # J/K


# ---------------------------------------------------------------------------
# Core parameter blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OfdmNumerology:
    """Carrier/subcarrier timing parameters of one OFDM frame.

    Defaults are the mmWave numerology used throughout: 28 GHz carrier,
    120 kHz subcarrier spacing, 4096 subcarriers, 256 symbols, 0.59 us CP.
    """

    fc: float = 28e9          # carrier frequency, Hz
    delta_f: float = 120e3    # subcarrier spacing, Hz
    nc: int = 4096            # subcarriers (= FFT size)
    m_symbols: int = 256      # OFDM symbols per frame
    tcp: float = 0.59e-6      # cyclic-prefix duration, s

    def __post_init__(self):
        if self.fc <= 0 or self.delta_f <= 0 or self.tcp <= 0:
            raise ValueError("fc, delta_f and tcp must be positive")
        if self.nc < 2 or self.m_symbols < 1:
            raise ValueError("need nc >= 2 subcarriers and >= 1 symbol")
        if self.cp_samples < 1:
            raise ValueError("CP shorter than one sample")
        if self.cp_samples >= self.nc:
            raise ValueError("CP must be shorter than the useful symbol")

    @property
    def td(self) -> float:
        """Useful (FFT) symbol duration 1/delta_f, s."""
        return 1.0 / self.delta_f

    @property
    def t_total(self) -> float:
        """Full symbol duration CP + useful part, s."""
        return self.tcp + self.td

    @property
    def ts(self) -> float:
        """Sample interval td/nc, s."""
        return self.td / self.nc

    @property
    def bandwidth(self) -> float:
        """Occupied bandwidth nc * delta_f, Hz."""
        return self.nc * self.delta_f

    @property
    def cp_samples(self) -> int:
        """CP length in samples (round half-even)."""
        return round(self.tcp / self.ts)

    @property
    def block_samples(self) -> int:
        """Samples per symbol block including CP."""
        return self.cp_samples + self.nc

    @property
    def frame_samples(self) -> int:
        """Samples in one full transmit frame."""
        return self.m_symbols * self.block_samples

    @property
    def wavelength(self) -> float:
        return C0 / self.fc


@dataclass(frozen=True)
class ArrayGeometry:
    """Transmit/receive ULA dimensions. Default spacing is half-wavelength."""

    nt: int
    nr: int
    dt: float          # transmit element spacing, m
    dr: float          # receive element spacing, m
    wavelength: float  # m

    def __post_init__(self):
        if self.nt < 1 or self.nr < 1:
            raise ValueError("need at least one element per array")
        if self.dt <= 0 or self.dr <= 0 or self.wavelength <= 0:
            raise ValueError("spacings and wavelength must be positive")

    @classmethod
    def for_carrier(cls, fc: float, nt: int = 16, nr: int = 16) -> "ArrayGeometry":
        lam = C0 / fc
        return cls(nt=nt, nr=nr, dt=lam / 2, dr=lam / 2, wavelength=lam)


@dataclass(frozen=True)
class Target:
    """Point scatterer: range, radial velocity, elevation angle, RCS.

    Velocity sign convention: the Doppler shift applied in synthesis is
    ``exp(+j 2 pi f_d t)`` with ``f_d = 2 v fc / c0``, so positive velocity
    means positive Doppler. Map physical approach/recession onto the sign in
    the scenario file, not in code.
    """

    range_m: float
    velocity: float = 0.0   # m/s, radial
    angle_deg: float = 0.0  # elevation
    rcs: float = 10.0       # m^2

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError("target range must be positive")
        if self.rcs <= 0:
            raise ValueError("target RCS must be positive")
        if not -90.0 < self.angle_deg < 90.0:
            raise ValueError("target angle must lie in (-90, 90) degrees")


@dataclass(frozen=True)
class NoiseSpec:
    """Receiver noise: either an explicit variance or a thermal floor.

    With ``sigma2`` unset the per-antenna noise power resolves to
    ``k * temperature_k * bandwidth * 10^(noise_figure_db/10)``. The explicit
    override exists so that simulation and closed-form predictions can share
    one exact noise power.
    """

    sigma2: float | None = None
    temperature_k: float = 290.0
    noise_figure_db: float = 0.0

    def resolve(self, bandwidth: float) -> float:
        """Per-antenna complex noise variance in watts."""
        if self.sigma2 is not None:
            if self.sigma2 <= 0:
                raise ValueError("explicit sigma2 must be positive")
            return self.sigma2
        if self.temperature_k <= 0 or bandwidth <= 0:
            raise ValueError("temperature and bandwidth must be positive")
        return BOLTZMANN * self.temperature_k * bandwidth * 10.0 ** (self.noise_figure_db / 10.0)


def _default_targets() -> tuple[Target, ...]:
    # Beam-steered far target plus a near target inside the same beam.
    return (
        Target(range_m=500.0, velocity=60.0, angle_deg=0.0, rcs=10.0),
        Target(range_m=260.0, velocity=40.0, angle_deg=3.1, rcs=10.0),
    )


@dataclass(frozen=True)
class Scenario:
    """Full experiment description.

    ``targets[0]`` is the beam-steered (communication-user) target; the
    transmit and receive beams point at its angle.
    """

    numerology: OfdmNumerology = OfdmNumerology()
    geometry: ArrayGeometry | None = None
    targets: tuple[Target, ...] = field(default_factory=_default_targets)
    pt_dbm: float = 46.0
    gt_db: float = 32.0
    gr_db: float = 32.0
    noise: NoiseSpec = NoiseSpec(sigma2=8.7e-11)
    seed: int = 1
    music_snapshots: int = 256

    def __post_init__(self):
        if self.geometry is None:
            object.__setattr__(self, "geometry", ArrayGeometry.for_carrier(self.numerology.fc))
        object.__setattr__(self, "targets", tuple(self.targets))
        if not 1 <= len(self.targets) <= self.geometry.nr:
            raise ValueError("need 1 <= target count <= nr")
        angles = [t.angle_deg for t in self.targets]
        if len(set(angles)) != len(angles):
            raise ValueError("target angles must be pairwise distinct")
        if self.music_snapshots < 1:
            raise ValueError("music_snapshots must be positive")

    @property
    def pt_watts(self) -> float:
        return 10.0 ** (self.pt_dbm / 10.0) / 1000.0

    @property
    def gt_linear(self) -> float:
        return 10.0 ** (self.gt_db / 10.0)

    @property
    def gr_linear(self) -> float:
        return 10.0 ** (self.gr_db / 10.0)

    @property
    def sigma2(self) -> float:
        """Per-antenna noise variance, watts."""
        return self.noise.resolve(self.numerology.bandwidth)

    @property
    def steer_angle_deg(self) -> float:
        """Beam-steering direction (angle of the user target)."""
        return self.targets[0].angle_deg


# ---------------------------------------------------------------------------
# Delay / Doppler bookkeeping
# ---------------------------------------------------------------------------

def round_trip_delay(range_m: float, c0: float = C0) -> float:
    """Two-way propagation delay 2 d / c0 in seconds."""
    if range_m <= 0:
        raise ValueError("range must be positive")
    return 2.0 * range_m / c0


def doppler_shift(velocity: float, fc: float, c0: float = C0) -> float:
    """Two-way Doppler shift 2 v fc / c0 in Hz; sign follows velocity."""
    if fc <= 0:
        raise ValueError("carrier frequency must be positive")
    return 2.0 * velocity * fc / c0


def sample_offsets(tau: float, num: OfdmNumerology) -> tuple[int, int]:
    """Delay expressed in samples: ``(n_e, n_s)``.

    ``n_s = round(tau / ts)`` is the total echo offset and
    ``n_e = max(0, round((tau - tcp) / ts))`` the part exceeding the CP.
    Delays of a full useful-symbol duration or more are outside the
    one-symbol echo model and rejected.
    """
    if tau < 0:
        raise ValueError("delay must be non-negative")
    if tau >= num.td:
        raise ValueError(
            f"delay {tau:.3e} s reaches the useful symbol duration {num.td:.3e} s; "
            "beyond the one-symbol echo model"
        )
    ne = max(0, round((tau - num.tcp) / num.ts))
    ns = round(tau / num.ts)
    return ne, ns


def max_unambiguous_range(num: OfdmNumerology, c0: float = C0) -> float:
    """Largest range the subcarrier phase ramp resolves without aliasing."""
    return c0 / (2.0 * num.delta_f)


def max_cp_range(num: OfdmNumerology, c0: float = C0) -> float:
    """Largest range whose echo stays inside the cyclic prefix."""
    return c0 * num.tcp / 2.0


# ---------------------------------------------------------------------------
# Scenario config files
# ---------------------------------------------------------------------------
#
# Plain "key = value" lines, "#" comments, all keys optional. Target fields
# use a "targetN." prefix; providing any target key replaces the default
# target set entirely.

_SCALAR_KEYS = {
    "fc_hz": float,
    "delta_f_hz": float,
    "subcarriers": int,
    "symbols": int,
    "tcp_s": float,
    "nt": int,
    "nr": int,
    "dt_m": float,
    "dr_m": float,
    "pt_dbm": float,
    "gt_db": float,
    "gr_db": float,
    "sigma2_w": float,
    "temperature_k": float,
    "noise_figure_db": float,
    "seed": int,
    "music_snapshots": int,
}

_TARGET_KEYS = {"range_m", "velocity_mps", "angle_deg", "rcs_m2"}
_TARGET_RE = re.compile(r"^target(\d+)\.(\w+)$")


def parse_scenario_text(text: str) -> Scenario:
    scalars: dict[str, float | int] = {}
    targets: dict[int, dict[str, float]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        m = _TARGET_RE.match(key)
        if m:
            idx, fld = int(m.group(1)), m.group(2)
            if fld not in _TARGET_KEYS:
                raise ValueError(f"line {lineno}: unknown target field {fld!r}")
            targets.setdefault(idx, {})[fld] = float(value)
        elif key in _SCALAR_KEYS:
            scalars[key] = _SCALAR_KEYS[key](float(value))
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")

    num = OfdmNumerology(
        fc=scalars.get("fc_hz", 28e9),
        delta_f=scalars.get("delta_f_hz", 120e3),
        nc=scalars.get("subcarriers", 4096),
        m_symbols=scalars.get("symbols", 256),
        tcp=scalars.get("tcp_s", 0.59e-6),
    )
    lam = num.wavelength
    geom = ArrayGeometry(
        nt=scalars.get("nt", 16),
        nr=scalars.get("nr", 16),
        dt=scalars.get("dt_m", lam / 2),
        dr=scalars.get("dr_m", lam / 2),
        wavelength=lam,
    )
    if targets:
        built = []
        for idx in sorted(targets):
            fields = targets[idx]
            built.append(Target(
                range_m=fields.get("range_m", 500.0),
                velocity=fields.get("velocity_mps", 0.0),
                angle_deg=fields.get("angle_deg", 0.0),
                rcs=fields.get("rcs_m2", 10.0),
            ))
        target_tuple = tuple(built)
    else:
        target_tuple = _default_targets()

    noise = NoiseSpec(
        sigma2=scalars.get("sigma2_w"),
        temperature_k=scalars.get("temperature_k", 290.0),
        noise_figure_db=scalars.get("noise_figure_db", 0.0),
    )
    if "sigma2_w" not in scalars and "noise_figure_db" not in scalars \
            and "temperature_k" not in scalars:
        noise = NoiseSpec(sigma2=8.7e-11)

    return Scenario(
        numerology=num,
        geometry=geom,
        targets=target_tuple,
        pt_dbm=scalars.get("pt_dbm", 46.0),
        gt_db=scalars.get("gt_db", 32.0),
        gr_db=scalars.get("gr_db", 32.0),
        noise=noise,
        seed=scalars.get("seed", 1),
        music_snapshots=scalars.get("music_snapshots", 256),
    )


def load_scenario(path) -> Scenario:
    """Read a scenario config file. Unknown keys are rejected."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_text(fh.read())


def with_power(scenario: Scenario, pt_dbm: float) -> Scenario:
    return replace(scenario, pt_dbm=pt_dbm)


def with_target_range(scenario: Scenario, index: int, range_m: float) -> Scenario:
    targets = list(scenario.targets)
    targets[index] = replace(targets[index], range_m=range_m)
    return replace(scenario, targets=tuple(targets))
