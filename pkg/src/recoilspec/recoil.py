"""Photon-recoil and fluorescence channel acting on fringe harmonics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy.special import gammaln

from .constants import C, H
from .errors import DomainError, NumericalError, PhysicsWarning
from .physics import Molecule, RecoilLaser, de_broglie, mean_photon_number, recoil_shift
from .spectrum import SpectrumTable
from .talbot import FringeCoefficients

HALF_PERIOD_TOL = 1e-12


@dataclass(frozen=True)
class RecoilChannel:
    """Poissonian absorption with optional immediate fluorescence.

    ``gamma_values`` maps a harmonic order l to gamma(l lambda_L s / d);
    orders not listed use gamma = 1, which is exact when p_fluo = 0.
    """

    n0: float
    shift_s: float
    p_fluo: float = 0.0
    gamma_values: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n0 < 0:
            raise DomainError(f"n0 must be >= 0, got {self.n0}")
        if not 0 <= self.p_fluo <= 1:
            raise DomainError("p_fluo must lie in [0, 1]")
        if any(abs(g) > 1 for g in self.gamma_values.values()):
            raise DomainError("decoherence values must lie in [-1, 1]")
        if self.gamma_values.get(0, 1.0) != 1.0:
            raise DomainError("gamma at zero argument must be 1")

    def gamma(self, ell: int) -> float:
        return self.gamma_values.get(ell, self.gamma_values.get(-ell, 1.0))


def poisson_pmf(n0: float, n) -> np.ndarray:
    """P_n(n0) = n0^n exp(-n0) / n!."""
    if n0 < 0:
        raise DomainError("n0 must be >= 0")
    n = np.asarray(n)
    if np.any(n < 0):
        raise DomainError("photon number must be >= 0")
    if n0 == 0:
        return np.where(n == 0, 1.0, 0.0)[()]
    return np.exp(n * math.log(n0) - n0 - gammaln(n + 1))[()]


def multiphoton_probability(n0: float) -> float:
    """P(n >= 2) = 1 - exp(-n0)(1 + n0)."""
    return float(-math.expm1(-n0) - n0 * math.exp(-n0))


def recoil_multipliers(orders, period: float, channel: RecoilChannel) -> np.ndarray:
    ell = np.asarray(orders)
    gam = np.array([channel.gamma(int(l)) for l in ell.ravel()]).reshape(ell.shape)
    keep = channel.p_fluo * gam + 1 - channel.p_fluo
    rot = np.exp(2j * np.pi * ell * channel.shift_s / period)
    return np.exp(-channel.n0 * (1 - rot * keep))


def apply_recoil(pattern: FringeCoefficients, channel: RecoilChannel) -> FringeCoefficients:
    """Multiply each harmonic by exp[-n0 {1 - e^{2 pi i l s/d} (P gamma_l + 1 - P)}].

    With density sum_l w_l e^{2 pi i l x/d}, each absorbed photon displaces
    the pattern by -s, i.e. the recoil beam travels towards negative x.
    """
    return pattern.with_coefficients(
        pattern.coefficients * recoil_multipliers(pattern.orders, pattern.period, channel)
    )


@dataclass(frozen=True)
class HalfPeriodDecomposition:
    main_weight: float
    side_weight: float
    pattern: FringeCoefficients

    @property
    def ratio(self) -> float:
        return self.side_weight / self.main_weight if self.main_weight else 0.0


def half_period_pattern(pattern: FringeCoefficients, n0: float) -> HalfPeriodDecomposition:
    """Split a half-period recoil into unshifted and half-shifted copies.

    Returns weights e^{-n0} cosh n0 and e^{-n0} sinh n0 and checks them
    against the harmonic transform.
    """
    main = 0.5 * (1 + math.exp(-2 * n0))
    side = 0.5 * -math.expm1(-2 * n0)
    shifted = apply_recoil(pattern, RecoilChannel(n0, pattern.period / 2))
    flip = np.where(pattern.orders % 2 == 0, 1.0, -1.0)
    expected = pattern.coefficients * (main + side * flip)
    scale = max(np.max(np.abs(pattern.coefficients)), 1e-300)
    if np.max(np.abs(shifted.coefficients - expected)) > HALF_PERIOD_TOL * scale:
        raise NumericalError("half-period decomposition does not match the recoil transform")
    return HalfPeriodDecomposition(main, side, shifted)


def reduction_factor(n0: float, s: float, period: float) -> float:
    """Visibility reduction exp(-n0 [1 - cos(2 pi s / d)])."""
    if n0 < 0:
        raise DomainError("n0 must be >= 0")
    return math.exp(-n0 * (1 - math.cos(2 * math.pi * s / period)))


def log_reduction_slope(molecule: Molecule, laser: RecoilLaser, v: float) -> float:
    """d ln(1/R) / dP at a half-period shift, per watt."""
    if v <= 0:
        raise DomainError("velocity must be positive")
    return 2 * math.sqrt(2 / math.pi) * laser.wavelength * molecule.sigma_abs / (H * C * laser.waist_y * v)


def decoherence_gamma(spectrum: SpectrumTable, x) -> np.ndarray:
    """gamma(x) = int F(omega) sinc(omega x / c) d omega, clamped to [-1, 1]."""
    x = np.asarray(x, dtype=float)
    z = np.multiply.outer(x, spectrum.omega) / C
    kern = np.sinc(z / np.pi)
    if spectrum.omega.size == 1:
        g = kern[..., 0] * spectrum.weights[0]
    else:
        g = np.trapezoid(kern * spectrum.weights, spectrum.omega, axis=-1)
    return np.clip(g, -1.0, 1.0)[()]


def ln_reduction_half_shift(n0: float, p_fluo: float, gamma_half: float) -> float:
    return 2 * n0 - p_fluo * n0 * (1 - gamma_half)


def ln_reduction_full_shift(n0: float, p_fluo: float, gamma_full: float) -> float:
    return p_fluo * n0 * (1 - gamma_full)


def recoil_channel(
    molecule: Molecule,
    laser: RecoilLaser,
    v: float,
    period: float,
    order_max: int,
    spectrum: Optional[SpectrumTable] = None,
) -> RecoilChannel:
    """Channel for one velocity; fluorescence from the molecule unless ``spectrum`` overrides."""
    n0 = mean_photon_number(molecule, laser, v)
    s = recoil_shift(de_broglie(molecule, v), laser.wavelength, laser.distance_D)
    gammas = {}
    spectrum = spectrum or molecule.fluorescence_spectrum
    if molecule.p_fluo > 0:
        ell = np.arange(1, order_max + 1)
        gammas = dict(zip(ell.tolist(), np.atleast_1d(decoherence_gamma(spectrum, ell * laser.wavelength * s / period)).tolist()))
    return RecoilChannel(n0, s, molecule.p_fluo, gammas)


def warn_if_saturating(n0: float) -> None:
    if n0 > 1:
        warnings.warn(
            f"mean photon number {n0:.3g} exceeds 1; multi-photon effects may bias the result",
            PhysicsWarning,
            stacklevel=2,
        )
