"""Tabulated fluorescence spectra on an angular-frequency axis."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constants import C, NM
from .errors import DomainError

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Normalized spectral density F(omega).

    A single-entry table is a monochromatic line carrying unit weight.
    Otherwise ``weights`` are density samples whose trapezoidal integral
    over ``omega`` is one.
    """

    omega: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if omega.ndim != 1 or omega.shape != weights.shape or omega.size == 0:
            raise DomainError("spectrum needs matching 1-d frequency and weight arrays")
        if np.any(omega <= 0) or np.any(np.diff(omega) <= 0):
            raise DomainError("spectrum frequencies must be positive and strictly increasing")
        if np.any(weights < 0):
            raise DomainError("spectrum weights must be non-negative")
        if abs(self.norm(omega, weights) - 1.0) > NORMALIZATION_TOL:
            raise DomainError("spectrum is not normalized")
        omega.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "weights", weights)

    @staticmethod
    def norm(omega, weights) -> float:
        if len(omega) == 1:
            return float(weights[0])
        return float(np.trapezoid(weights, omega))

    @classmethod
    def from_density(cls, omega, density) -> "SpectrumTable":
        omega = np.asarray(omega, dtype=float)
        density = np.asarray(density, dtype=float)
        order = np.argsort(omega)
        omega, density = omega[order], density[order]
        total = cls.norm(omega, density)
        if not total > 0:
            raise DomainError("spectrum has zero total weight")
        return cls(omega, density / total)

    @classmethod
    def monochromatic(cls, wavelength: float) -> "SpectrumTable":
        return cls(np.array([2 * math.pi * C / wavelength]), np.array([1.0]))

    @classmethod
    def from_wavelength_density(cls, wavelength, density) -> "SpectrumTable":
        """Convert a per-unit-wavelength density to a per-unit-omega one."""
        wavelength = np.asarray(wavelength, dtype=float)
        density = np.asarray(density, dtype=float)
        if np.any(wavelength <= 0):
            raise DomainError("wavelengths must be positive")
        omega = 2 * math.pi * C / wavelength
        # |d lambda / d omega| = lambda^2 / (2 pi c)
        return cls.from_density(omega, density * wavelength**2 / (2 * math.pi * C))


def load_spectrum(path) -> SpectrumTable:
    """Read a two-column ``wavelength_nm,relative_weight`` CSV.

    Weights are read as a density per unit wavelength. Lines starting with
    ``#`` and a non-numeric header row are skipped.
    """
    lam, w = [], []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                a, b = float(row[0]), float(row[1])
            except ValueError:
                continue
            lam.append(a * NM)
            w.append(b)
    if not lam:
        raise DomainError(f"no spectrum rows in {path}")
    if len(lam) == 1:
        return SpectrumTable.monochromatic(lam[0])
    return SpectrumTable.from_wavelength_density(lam, w)
