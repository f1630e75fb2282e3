"""Physical constants (CODATA 2018, exact where SI defines them) and unit conversions.

Everything inside the package is SI. Configuration files use the laboratory
units below and are converted once, at load time.
"""

import math

H = 6.62607015e-34  # J s (exact)
HBAR = H / (2.0 * math.pi)
C = 299792458.0  # m/s (exact)
K_B = 1.380649e-23  # J/K (exact)
EPS0 = 8.8541878128e-12  # F/m
AMU = 1.66053906660e-27  # kg

ANGSTROM = 1e-10
NM = 1e-9
UM = 1e-6
CM = 1e-2


def amu_to_kg(m):
    return m * AMU


def kg_to_amu(m):
    return m / AMU


def a2_to_m2(a):
    return a * ANGSTROM**2


def m2_to_a2(a):
    return a / ANGSTROM**2


def a3_to_m3(v):
    return v * ANGSTROM**3


def m3_to_a3(v):
    return v / ANGSTROM**3
