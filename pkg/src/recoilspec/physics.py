"""Domain types of the interferometer and the closed-form scalar relations.

All quantities are SI. The types are frozen dataclasses that validate their
own invariants on construction, so every downstream function may assume a
consistent setup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

from .constants import C, H, HBAR
from .errors import DomainError
from .spectrum import SpectrumTable


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class Molecule:
    mass: float
    polarizability_volume: float
    sigma_abs: float
    sigma_abs_grating: float = 0.0
    p_fluo: float = 0.0
    fluorescence_spectrum: Optional[SpectrumTable] = field(default=None, compare=False)
    heat_capacity: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        _require(self.mass > 0, "mass must be positive")
        _require(self.polarizability_volume >= 0, "polarizability_volume must be >= 0")
        _require(self.sigma_abs >= 0, "sigma_abs must be >= 0")
        _require(self.sigma_abs_grating >= 0, "sigma_abs_grating must be >= 0")
        _require(0.0 <= self.p_fluo <= 1.0, "p_fluo must lie in [0, 1]")
        _require(
            self.p_fluo == 0 or self.fluorescence_spectrum is not None,
            "a fluorescence spectrum is required when p_fluo > 0",
        )


@dataclass(frozen=True)
class RecoilLaser:
    power: float
    wavelength: float
    waist_y: float
    distance_D: float

    def __post_init__(self):
        _require(self.power >= 0, "recoil laser power must be >= 0")
        _require(self.wavelength > 0, "recoil laser wavelength must be positive")
        _require(self.waist_y > 0, "recoil laser waist must be positive")
        _require(self.distance_D > 0, "recoil laser distance D must be positive")


@dataclass(frozen=True)
class GratingLaser:
    power: float
    wavelength: float
    waist_y: float

    def __post_init__(self):
        _require(self.power >= 0, "grating laser power must be >= 0")
        _require(self.wavelength > 0, "grating laser wavelength must be positive")
        _require(self.waist_y > 0, "grating laser waist must be positive")


@dataclass(frozen=True)
class MaterialGrating:
    open_fraction: float

    def __post_init__(self):
        _require(0 < self.open_fraction < 1, "open fraction must lie in (0, 1)")


@dataclass(frozen=True)
class LaserPhaseGrating:
    """Standing-wave phase grating.

    ``phi0_override`` pins the eikonal phase at ``reference_velocity``
    instead of evaluating it from the laser; it still scales as 1/v.
    """

    laser: GratingLaser
    phi0_override: Optional[float] = None
    reference_velocity: Optional[float] = None

    def __post_init__(self):
        if self.phi0_override is not None:
            _require(self.phi0_override >= 0, "phi0 override must be >= 0")
            _require(
                self.reference_velocity is not None and self.reference_velocity > 0,
                "phi0 override needs a positive reference velocity",
            )


SecondGrating = Union[MaterialGrating, LaserPhaseGrating]


@dataclass(frozen=True)
class InterferometerConfig:
    period_d: float
    open_fraction_g1: float
    open_fraction_g3: float
    second_grating: SecondGrating
    separation_L: float
    recoil_laser: Optional[RecoilLaser] = None

    def __post_init__(self):
        _require(self.period_d > 0, "grating period must be positive")
        _require(self.separation_L > 0, "grating separation must be positive")
        _require(0 < self.open_fraction_g1 < 1, "open_fraction_g1 must lie in (0, 1)")
        _require(0 < self.open_fraction_g3 < 1, "open_fraction_g3 must lie in (0, 1)")
        if isinstance(self.second_grating, LaserPhaseGrating):
            lam = self.second_grating.laser.wavelength
            _require(
                math.isclose(lam, 2 * self.period_d, rel_tol=1e-9),
                "standing-wave grating needs wavelength = 2 * period",
            )
        if self.recoil_laser is not None:
            _require(
                self.recoil_laser.distance_D < self.separation_L,
                "recoil laser must sit between the second and third grating (D < L)",
            )

    @property
    def is_kdtli(self) -> bool:
        return isinstance(self.second_grating, LaserPhaseGrating)

    def with_power(self, power: float) -> "InterferometerConfig":
        from dataclasses import replace

        if self.recoil_laser is None:
            raise DomainError("configuration has no recoil laser")
        return replace(self, recoil_laser=replace(self.recoil_laser, power=power))


@dataclass(frozen=True)
class VelocityModel:
    mean_v: float
    relative_width: float = 0.0
    node_count: int = 64
    truncation: float = 5.0

    def __post_init__(self):
        _require(self.mean_v > 0, "mean velocity must be positive")
        _require(self.relative_width >= 0, "relative width must be >= 0")
        _require(self.relative_width < 0.2, "relative width must be < 0.2")
        _require(self.node_count >= 1, "need at least one quadrature node")
        _require(self.truncation > 0, "truncation must be positive")
        _require(
            self.relative_width * self.truncation < 1,
            "truncated velocity domain reaches v <= 0",
        )


def de_broglie(molecule: Molecule, v: float) -> float:
    """de Broglie wavelength h/(m v)."""
    _require(v > 0, f"velocity must be positive, got {v}")
    return H / (molecule.mass * v)


def talbot_length(period: float, lambda_dB: float) -> float:
    _require(period > 0 and lambda_dB > 0, "period and wavelength must be positive")
    return period**2 / lambda_dB


def mean_photon_number(molecule: Molecule, laser: RecoilLaser, v: float) -> float:
    """Mean number of photons absorbed while crossing a Gaussian beam once."""
    _require(v > 0, f"velocity must be positive, got {v}")
    return (
        math.sqrt(2 / math.pi)
        * molecule.sigma_abs
        * laser.power
        * laser.wavelength
        / (H * C * laser.waist_y * v)
    )


def recoil_shift(lambda_dB: float, lambda_L: float, D: float) -> float:
    """Fringe displacement per absorbed photon."""
    _require(lambda_dB > 0 and lambda_L > 0, "wavelengths must be positive")
    _require(D >= 0, "distance must be >= 0")
    return lambda_dB * D / lambda_L


def validate_wavelength_bound(lambda_L: float, lambda_dB: float, L: float, d: float) -> bool:
    """True if a shift below one period is possible at this wavelength (D < L)."""
    _require(min(lambda_L, lambda_dB, L, d) > 0, "all inputs must be positive")
    return lambda_L <= lambda_dB * L / d


def eikonal_phase(molecule: Molecule, grating: Union[GratingLaser, LaserPhaseGrating], v: float) -> float:
    """Peak eikonal phase of the standing-wave grating at an antinode.

    Integrating the dipole potential of a retro-reflected Gaussian beam along
    the flight path gives sqrt(8/pi) * 4 pi alpha P / (hbar c v w_y).
    """
    _require(v > 0, f"velocity must be positive, got {v}")
    if isinstance(grating, LaserPhaseGrating):
        if grating.phi0_override is not None:
            return grating.phi0_override * grating.reference_velocity / v
        grating = grating.laser
    return (
        math.sqrt(8 / math.pi)
        * 4
        * math.pi
        * molecule.polarizability_volume
        * grating.power
        / (HBAR * C * v * grating.waist_y)
    )


def grating_mean_absorption(molecule: Molecule, grating: Union[GratingLaser, LaserPhaseGrating], v: float) -> float:
    """Mean photon number absorbed at a standing-wave antinode.

    The antinode of a retro-reflected beam carries four times the running-wave
    intensity.
    """
    _require(v > 0, f"velocity must be positive, got {v}")
    if isinstance(grating, LaserPhaseGrating):
        grating = grating.laser
    return (
        4
        * math.sqrt(2 / math.pi)
        * molecule.sigma_abs_grating
        * grating.power
        * grating.wavelength
        / (H * C * grating.waist_y * v)
    )


def photon_heating(molecule: Molecule, lambda_L: float) -> float:
    """Internal temperature rise per absorbed, non-reemitted photon."""
    cap = molecule.heat_capacity
    _require(cap is not None and cap > 0, "heat capacity must be positive")
    _require(lambda_L > 0, "wavelength must be positive")
    return H * C / (lambda_L * cap)
