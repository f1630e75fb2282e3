import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import binomial_fluorescence_factor, fourier_series, poisson_superposition
from recoilspec.constants import C
from recoilspec.errors import DomainError, PhysicsWarning
from recoilspec.physics import Molecule, RecoilLaser, mean_photon_number
from recoilspec.recoil import (
    RecoilChannel,
    apply_recoil,
    decoherence_gamma,
    half_period_pattern,
    ln_reduction_full_shift,
    ln_reduction_half_shift,
    log_reduction_slope,
    multiphoton_probability,
    poisson_pmf,
    recoil_channel,
    recoil_multipliers,
    reduction_factor,
    warn_if_saturating,
)
from recoilspec.spectrum import SpectrumTable, load_spectrum
from recoilspec.talbot import pattern_coefficients, sinusoidal_visibility


@pytest.fixture(scope="module")
def pattern(kdtli):
    return pattern_coefficients(kdtli.interferometer, kdtli.molecule, 175.0)


def test_poisson_examples():
    assert poisson_pmf(1.6, 1) == pytest.approx(0.3230, abs=1e-4)
    assert multiphoton_probability(0.5) == pytest.approx(0.0902, abs=1e-4)
    assert poisson_pmf(0.0, 0) == 1.0 and poisson_pmf(0.0, 3) == 0.0
    assert np.sum(poisson_pmf(2.3, np.arange(80))) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(DomainError):
        poisson_pmf(-1.0, 1)
    with pytest.raises(DomainError):
        poisson_pmf(1.0, -1)


def test_recoil_identities(pattern):
    d = pattern.period
    c = pattern.coefficients
    assert np.array_equal(apply_recoil(pattern, RecoilChannel(0.0, 0.3 * d)).coefficients, c)
    assert np.allclose(apply_recoil(pattern, RecoilChannel(1.3, 0.0)).coefficients, c, atol=1e-17)
    assert np.allclose(apply_recoil(pattern, RecoilChannel(1.3, d)).coefficients, c, atol=1e-15)
    half = apply_recoil(pattern, RecoilChannel(0.8, d / 2))
    assert half[1] == pytest.approx(pattern[1] * math.exp(-1.6), abs=1e-16)
    assert half[2] == pytest.approx(pattern[2], abs=1e-16)
    assert half[0] == pytest.approx(pattern[0], abs=1e-16)


@pytest.mark.parametrize("n0,s_over_d", [(0.4, 0.5), (1.3, 0.37), (2.5, 0.11)])
def test_recoil_matches_position_space_superposition(pattern, n0, s_over_d):
    u = np.arange(512) / 512
    # each photon moves the pattern towards negative x
    shifted = poisson_superposition(lambda y: pattern.density(y * pattern.period), n0, -s_over_d, u)
    got = apply_recoil(pattern, RecoilChannel(n0, s_over_d * pattern.period))
    ell = np.arange(-6, 7)
    assert np.allclose([got[k] for k in ell], fourier_series(shifted, ell), atol=1e-12)


@pytest.mark.parametrize("n0,p,g,s", [(1.6, 0.11, 0.49, 0.5), (0.7, 1.0, -0.16, 0.5), (2.0, 0.4, 0.8, 0.23)])
def test_fluorescence_matches_binomial_enumeration(n0, p, g, s):
    ch = RecoilChannel(n0, s, p, {1: g})
    got = recoil_multipliers(np.array([1]), 1.0, ch)[0]
    assert got == pytest.approx(binomial_fluorescence_factor(n0, p, g, 2 * math.pi * s), abs=1e-10)


def test_half_period_tanh(pattern):
    for n0 in (0.1, 0.8, 1.6):
        dec = half_period_pattern(pattern, n0)
        assert dec.ratio == pytest.approx(math.tanh(n0), rel=1e-13)
        assert dec.main_weight + dec.side_weight == pytest.approx(1.0, abs=1e-15)


def test_reduction_factor_grid(pattern):
    base = sinusoidal_visibility(pattern, 0.42)
    worst = 0.0
    for n0 in np.linspace(0, 2, 9):
        for s in np.linspace(0, 1, 11):
            v = sinusoidal_visibility(apply_recoil(pattern, RecoilChannel(n0, s * pattern.period)), 0.42)
            worst = max(worst, abs(v / base - reduction_factor(n0, s * pattern.period, pattern.period)))
    assert worst < 1e-12
    with pytest.raises(DomainError):
        reduction_factor(-0.1, 1, 1)


def test_log_reduction_slope(kdtli):
    laser = RecoilLaser(1.0, 420e-9, 900e-6, 1.51e-2)
    slope = log_reduction_slope(kdtli.molecule, laser, 175.0)
    assert slope == pytest.approx(3.2, rel=0.01)
    assert slope == pytest.approx(2 * mean_photon_number(kdtli.molecule, laser, 175.0), rel=1e-14)
    with pytest.raises(DomainError):
        log_reduction_slope(kdtli.molecule, laser, 0.0)


def test_gamma_monochromatic():
    line = SpectrumTable.monochromatic(650e-9)
    # sinc(2.0300) = 0.44159; the commonly quoted 0.4415 is truncated
    assert decoherence_gamma(line, 210e-9) == pytest.approx(0.4415, abs=2e-4)
    assert decoherence_gamma(line, 0.0) == 1.0
    x = np.linspace(1e-9, 2e-6, 7)
    z = 2 * math.pi * x / 650e-9
    assert np.allclose(decoherence_gamma(line, x), np.sin(z) / z, atol=1e-15)


def test_gamma_shipped_spectrum(data_dir):
    spec = load_spectrum(data_dir / "h2tpp_fluorescence.csv")
    assert decoherence_gamma(spec, 210e-9) == pytest.approx(0.49000, abs=5e-5)
    assert decoherence_gamma(spec, 420e-9) == pytest.approx(-0.16237, abs=5e-5)
    g = decoherence_gamma(spec, np.linspace(0, 3e-6, 301))
    assert np.all(np.abs(g) <= 1)


def test_gamma_matches_wavelength_domain_quadrature(data_dir):
    # integrate the raw per-wavelength table directly, without the frequency grid
    raw = np.loadtxt(data_dir / "h2tpp_fluorescence.csv", delimiter=",", comments="#", skiprows=3)
    lam, dens = raw[:, 0] * 1e-9, raw[:, 1]
    spec = load_spectrum(data_dir / "h2tpp_fluorescence.csv")
    for x in (100e-9, 210e-9, 420e-9, 1e-6):
        ref = np.trapezoid(dens * np.sinc(2 * x / lam), lam) / np.trapezoid(dens, lam)
        assert decoherence_gamma(spec, x) == pytest.approx(ref, abs=1e-7)


def test_regression_constants(data_dir):
    spec = load_spectrum(data_dir / "h2tpp_fluorescence.csv")
    g_full = float(decoherence_gamma(spec, 420e-9))
    assert ln_reduction_full_shift(1.6, 0.11, g_full) == pytest.approx(0.20458, abs=1e-4)
    g_half = float(decoherence_gamma(spec, 210e-9))
    assert ln_reduction_half_shift(1.6, 0.11, g_half) == pytest.approx(3.2 - 0.11 * 1.6 * 0.51, abs=1e-4)
    assert ln_reduction_half_shift(1.6, 0.0, g_half) == pytest.approx(3.2)


@given(st.floats(0.01, 3), st.floats(0, 1), st.floats(-1, 0.99))
def test_half_shift_formula_matches_multiplier(n0, p, g):
    m = recoil_multipliers(np.array([1]), 1.0, RecoilChannel(n0, 0.5, p, {1: g}))[0]
    assert -math.log(abs(m)) == pytest.approx(ln_reduction_half_shift(n0, p, g), rel=1e-12, abs=1e-14)
    # more fluorescence keeps more fringe contrast when gamma < 1
    assert ln_reduction_half_shift(n0, min(p + 0.1, 1), g) <= ln_reduction_half_shift(n0, p, g) + 1e-15


def test_recoil_channel_uses_spectrum(kdtli_fluo):
    mol = kdtli_fluo.molecule
    laser = kdtli_fluo.recoil_laser
    d = kdtli_fluo.interferometer.period_d
    ch = recoil_channel(mol, laser, 175.0, d, 3)
    assert ch.shift_s == pytest.approx(d / 2, rel=1e-12)
    assert ch.p_fluo == 0.11
    for ell in (1, 2, 3):
        ref = decoherence_gamma(mol.fluorescence_spectrum, ell * laser.wavelength / 2)
        assert ch.gamma(ell) == pytest.approx(ref, rel=1e-9)
        assert ch.gamma(-ell) == ch.gamma(ell)
    plain = recoil_channel(Molecule(mol.mass, mol.polarizability_volume, mol.sigma_abs), laser, 175.0, d, 3)
    assert dict(plain.gamma_values) == {}


def test_channel_validation():
    with pytest.raises(DomainError):
        RecoilChannel(-1.0, 0.0)
    with pytest.raises(DomainError):
        RecoilChannel(1.0, 0.0, 1.2)
    with pytest.raises(DomainError):
        RecoilChannel(1.0, 0.0, 0.5, {1: 1.5})
    with pytest.raises(DomainError):
        RecoilChannel(1.0, 0.0, 0.5, {0: 0.5})


def test_saturation_warning():
    with pytest.warns(PhysicsWarning):
        warn_if_saturating(1.6)
    warn_if_saturating(0.9)


# -- spectra ------------------------------------------------------------------


def test_spectrum_validation():
    with pytest.raises(DomainError):
        SpectrumTable(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        SpectrumTable(np.array([2.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        SpectrumTable.from_density([1.0, 2.0], [0.0, 0.0])
    s = SpectrumTable.from_density([3.0, 1.0, 2.0], [1.0, 1.0, 1.0])
    assert np.all(np.diff(s.omega) > 0)
    assert np.trapezoid(s.weights, s.omega) == pytest.approx(1.0)


def test_wavelength_density_jacobian():
    lam = np.linspace(500e-9, 900e-9, 4001)
    flat = SpectrumTable.from_wavelength_density(lam, np.ones_like(lam))
    # uniform in wavelength means density proportional to 1/omega^2 in frequency
    ratio = flat.weights * flat.omega**2
    assert np.allclose(ratio / ratio[0], 1.0, rtol=1e-12)


def test_load_spectrum_formats(tmp_path):
    p = tmp_path / "line.csv"
    p.write_text("# one line\nwavelength_nm,relative_weight\n650,3\n")
    s = load_spectrum(p)
    assert s.omega.size == 1 and s.omega[0] == pytest.approx(2 * math.pi * C / 650e-9)
    empty = tmp_path / "empty.csv"
    empty.write_text("wavelength_nm,relative_weight\n")
    with pytest.raises(DomainError):
        load_spectrum(empty)
