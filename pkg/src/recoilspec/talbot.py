"""Near-field fringe synthesis with Talbot coefficients.

Conventions (positions in units of the period d unless stated):

* grating transmission t(x) = sum_j b_j exp(2 pi i j x), slits and
  standing-wave antinodes centred on x = 0;
* Talbot coefficient B_m(xi) = sum_j b_j conj(b_{j-m}) exp(i pi xi (m - 2j)),
  which equals the m-th Fourier coefficient of t(x - xi/2) conj(t(x + xi/2));
* for equal periods and equal separations L the density harmonic at the
  third grating is w_l = A_l B_{2l}(l L / L_T), with A_l the harmonics of
  the first grating's intensity transmission. The factor two in the index
  comes from the geometric magnification 2 of each point source's image;
  only even harmonics of the 2d-periodic images survive the incoherent sum
  over the first grating. The resonant TLI pattern then peaks at x = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, PhysicsWarning, TruncationWarning
from .physics import (
    InterferometerConfig,
    LaserPhaseGrating,
    MaterialGrating,
    Molecule,
    de_broglie,
    eikonal_phase,
    grating_mean_absorption,
    talbot_length,
)

DEFAULT_ORDER_TLI = 40
DEFAULT_ORDER_KDTLI = 10
ORDER_GROWTH_CAP = 4
LASER_SAMPLES = 4096
LASER_GRATING_ORDER = 64
TRUNCATION_TOL = 1e-12
HARMONIC_WARN_RATIO = 0.1


@dataclass(frozen=True, eq=False)
class FringeCoefficients:
    """Fourier coefficients w_l, l = -order_max..order_max, of a d-periodic pattern."""

    coefficients: np.ndarray
    period: float
    velocity: float

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1:
            raise DomainError("coefficients must be a 1-d array of odd length")
        object.__setattr__(self, "coefficients", c)

    @property
    def order_max(self) -> int:
        return (self.coefficients.size - 1) // 2

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.order_max, self.order_max + 1)

    def __getitem__(self, ell: int) -> complex:
        if abs(ell) > self.order_max:
            return 0j
        return self.coefficients[ell + self.order_max]

    def with_coefficients(self, coefficients) -> "FringeCoefficients":
        return FringeCoefficients(coefficients, self.period, self.velocity)

    def density(self, x) -> np.ndarray:
        """Reconstructed pattern at positions x (metres)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phase = np.exp(2j * np.pi * np.outer(x / self.period, self.orders))
        return (phase @ self.coefficients).real


@dataclass(frozen=True)
class Binary:
    open_fraction: float


@dataclass(frozen=True)
class ComplexExponential:
    phi0: float
    eta: float


@dataclass(frozen=True, eq=False)
class GratingCoefficients:
    """Amplitude transmission harmonics b_j, j = -J..J."""

    coefficients: np.ndarray
    descriptor: Union[Binary, ComplexExponential]

    @property
    def max_order(self) -> int:
        return (self.coefficients.size - 1) // 2

    def __getitem__(self, j: int) -> complex:
        if abs(j) > self.max_order:
            return 0j
        return self.coefficients[j + self.max_order]


def binary_coefficients(open_fraction: float, max_order: int) -> GratingCoefficients:
    if not 0 < open_fraction < 1:
        raise DomainError(f"open fraction must lie in (0, 1), got {open_fraction}")
    j = np.arange(-max_order, max_order + 1)
    # np.sinc(x) = sin(pi x) / (pi x)
    return GratingCoefficients(open_fraction * np.sinc(j * open_fraction) + 0j, Binary(open_fraction))


def intensity_coefficients(open_fraction: float, orders) -> np.ndarray:
    """Harmonics of a binary mask's intensity transmission (|t|^2 = t)."""
    return open_fraction * np.sinc(np.asarray(orders) * open_fraction)


def laser_grating_coefficients(
    phi0: float, eta: float, max_order: int = LASER_GRATING_ORDER, samples: int = LASER_SAMPLES
) -> GratingCoefficients:
    """Harmonics of t(x) = exp[(i phi0 - eta/2) cos^2(pi x)] by DFT."""
    if eta < 0:
        raise DomainError(f"absorption parameter must be >= 0, got {eta}")
    if samples < 2 * max_order + 1:
        raise DomainError("too few samples for the requested order")
    x = np.arange(samples) / samples
    t = np.exp((1j * phi0 - eta / 2) * np.cos(np.pi * x) ** 2)
    spec = np.fft.fft(t) / samples
    j = np.arange(-max_order, max_order + 1)
    b = spec[j % samples]
    peak = np.max(np.abs(b))
    if max(abs(b[0]), abs(b[-1])) > TRUNCATION_TOL * peak:
        warnings.warn(
            f"laser grating harmonics not converged at order {max_order} (phi0={phi0:.3g})",
            TruncationWarning,
            stacklevel=2,
        )
    return GratingCoefficients(b, ComplexExponential(phi0, eta))


def talbot_coefficients(grating: GratingCoefficients, xi, ell) -> np.ndarray:
    """B_ell(xi) by direct summation over the grating harmonics.

    ``xi`` and ``ell`` broadcast against each other.
    """
    b = grating.coefficients
    J = grating.max_order
    xi_b, ell_b = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(ell, dtype=int))
    out = np.zeros(xi_b.shape, dtype=complex)
    for idx in np.ndindex(xi_b.shape):
        m = int(ell_b[idx])
        lo, hi = max(-J, m - J), min(J, m + J)
        if lo > hi:
            continue
        j = np.arange(lo, hi + 1)
        terms = b[j + J] * np.conj(b[j - m + J]) * np.exp(1j * np.pi * xi_b[idx] * (m - 2 * j))
        out[idx] = terms.sum()
    return out if out.ndim else out[()]


def binary_talbot_coefficients(open_fraction: float, xi, ell) -> np.ndarray:
    """Exact B_ell(xi) of an ideal binary mask.

    The product t(x - xi/2) t(x + xi/2) is the indicator of the overlap of
    two slits, whose Fourier coefficients are closed-form. This avoids the
    slowly (1/j) converging harmonic sum for material gratings.
    """
    f = open_fraction
    xi_b, ell_b = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(ell, dtype=float))
    out = np.zeros(xi_b.shape, dtype=complex)
    a = xi_b / 2
    # slit copies k with |2a - k| < f overlap the slit centred at +a
    kmin = np.floor(2 * a.min() - f) if a.size else 0
    kmax = np.ceil(2 * a.max() + f) if a.size else 0
    for k in np.arange(kmin, kmax + 1):
        lo = np.maximum(a - f / 2, -a + k - f / 2)
        hi = np.minimum(a + f / 2, -a + k + f / 2)
        width = np.clip(hi - lo, 0.0, None)
        out += width * np.sinc(ell_b * width) * np.exp(-1j * np.pi * ell_b * (lo + hi))
    return out if out.ndim else out[()]


def _second_grating_talbot(config: InterferometerConfig, molecule: Molecule, v: float, ell, xi):
    g2 = config.second_grating
    if isinstance(g2, MaterialGrating):
        return binary_talbot_coefficients(g2.open_fraction, xi, 2 * ell)
    grating = laser_grating_coefficients(
        eikonal_phase(molecule, g2, v), grating_mean_absorption(molecule, g2, v)
    )
    return talbot_coefficients(grating, xi, 2 * ell)


def default_order(config: InterferometerConfig) -> int:
    return DEFAULT_ORDER_KDTLI if config.is_kdtli else DEFAULT_ORDER_TLI


def pattern_coefficients(
    config: InterferometerConfig,
    molecule: Molecule,
    v: float,
    max_order: int | None = None,
    adaptive: bool = True,
) -> FringeCoefficients:
    """Unperturbed density harmonics at the third grating for velocity v.

    Normalized to unit incident flux, so w_0 is the mean transmitted density.
    The order grows until the tail is negligible only for a laser second
    grating. Slit images fall off algebraically, so for a material grating
    the requested order is kept; w_0 and w_1 are exact at any order.
    """
    n = max_order or default_order(config)
    adaptive = adaptive and config.is_kdtli
    cap = n * ORDER_GROWTH_CAP
    ratio = config.separation_L / talbot_length(config.period_d, de_broglie(molecule, v))
    while True:
        ell = np.arange(-n, n + 1)
        w = intensity_coefficients(config.open_fraction_g1, ell) * _second_grating_talbot(
            config, molecule, v, ell, ell * ratio
        )
        peak = np.max(np.abs(w))
        # judge the outer quarter, not one order: slit envelopes have exact zeros
        tail = np.max(np.abs(w[-(n // 4 + 1) :]))
        if not adaptive or tail <= TRUNCATION_TOL * peak:
            break
        if 2 * n > cap:
            warnings.warn(
                f"fringe harmonics not converged at order {n}", TruncationWarning, stacklevel=2
            )
            break
        n *= 2
    return FringeCoefficients(w, config.period_d, v)


def signal_coefficients(pattern: FringeCoefficients, g3_open_fraction: float) -> np.ndarray:
    """Harmonics S_l of the detector signal versus third-grating displacement."""
    return pattern.coefficients * intensity_coefficients(g3_open_fraction, pattern.orders)


def detector_signal(pattern: FringeCoefficients, g3_open_fraction: float, positions) -> np.ndarray:
    """Transmitted flux behind the third grating, per unit incident flux."""
    x = np.atleast_1d(np.asarray(positions, dtype=float))
    if not np.all(np.isfinite(x)):
        raise DomainError("positions must be finite")
    s = signal_coefficients(pattern, g3_open_fraction)
    phase = np.exp(2j * np.pi * np.outer(x / pattern.period, pattern.orders))
    return (phase @ s).real


def sinusoidal_visibility(pattern: FringeCoefficients, g3_open_fraction: float) -> float:
    """V = 2 |S_1 / S_0|."""
    s = signal_coefficients(pattern, g3_open_fraction)
    n = pattern.order_max
    s0 = s[n].real
    if not s0 > 0:
        raise DomainError("mean signal must be positive")
    s1 = abs(s[n + 1]) if n >= 1 else 0.0
    if n >= 2 and np.max(np.abs(s[n + 2 :])) > HARMONIC_WARN_RATIO * s1:
        warnings.warn(
            "higher harmonics exceed 10% of the first; the sine model is degraded",
            PhysicsWarning,
            stacklevel=2,
        )
    return 2 * s1 / s0


def classical_moire_visibility(f1: float, f3: float, f2: float) -> float:
    """Visibility of the geometric shadow pattern (xi -> 0 limit of a binary TLI)."""
    return 2 * abs(
        intensity_coefficients(f1, 1) * intensity_coefficients(f2, 2) * intensity_coefficients(f3, 1)
    ) / (f1 * f2 * f3)
