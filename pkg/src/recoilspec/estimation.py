"""Visibility fits and inversion of contrast reductions to cross sections."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .constants import C, H, m2_to_a2
from .errors import DomainError, IdentifiabilityError, NumericalError, PhysicsWarning
from .physics import RecoilLaser

CONFIDENCE = 0.95
NONLINEAR_CHI2 = 2.0
DRIFT_SIGMAS = 3.0
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class VisibilityEstimate:
    visibility: float
    phase: float
    mean_level: float
    se_visibility: float
    se_phase: float
    se_mean: float
    power: float = 0.0


def sine_fit(positions, counts, period: float, power: float = 0.0) -> VisibilityEstimate:
    """Fit c0 + a cos(2 pi x/d) + b sin(2 pi x/d) with Poisson weights.

    Variances are max(count, 1). Visibility is sqrt(a^2 + b^2) / c0, i.e.
    2 |S_1 / S_0| for the fitted signal.
    """
    x = np.asarray(positions, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("positions and counts must be matching 1-d arrays")
    if x.size < 8:
        raise DomainError("need at least 8 positions")
    spacing = np.median(np.diff(np.sort(x))) if x.size > 1 else 0.0
    if np.ptp(x) + spacing < period * (1 - 1e-9):
        raise DomainError("positions must span at least one period")
    theta = 2 * np.pi * x / period
    X = np.column_stack([np.ones_like(x), np.cos(theta), np.sin(theta)])
    w = 1.0 / np.maximum(y, 1.0)
    normal = X.T @ (w[:, None] * X)
    if np.linalg.cond(normal) > MAX_CONDITION:
        raise DomainError("degenerate positions: sine design matrix is singular")
    cov = np.linalg.inv(normal)
    c0, a, b = cov @ (X.T @ (w * y))
    if c0 <= 0:
        raise DomainError("fitted mean level is not positive")
    amp = math.hypot(a, b)
    if amp > 0:
        grad_v = np.array([-amp / c0**2, a / (c0 * amp), b / (c0 * amp)])
        grad_p = np.array([0.0, -b / amp**2, a / amp**2])
        se_v = math.sqrt(grad_v @ cov @ grad_v)
        se_p = math.sqrt(grad_p @ cov @ grad_p)
    else:
        se_v = math.sqrt(cov[1, 1] + cov[2, 2]) / c0
        se_p = math.pi
    return VisibilityEstimate(amp / c0, math.atan2(b, a), c0, se_v, se_p, math.sqrt(cov[0, 0]), power)


def fit_record(record) -> list:
    """Sine-fit every power step of an experiment record and fill its slots."""
    est = [
        sine_fit(record.positions, record.counts[i], record.period, float(p))
        for i, p in enumerate(record.powers)
    ]
    record.visibilities = list(est)
    return est


@dataclass(frozen=True)
class LineFit:
    slope: float
    se: float
    se_model: float
    chi2: float
    dof: int
    residuals: np.ndarray = field(repr=False)

    @property
    def chi2_red(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")


def fit_through_origin(x, y, cov) -> LineFit:
    """Generalized least squares for y = k x with a full covariance matrix.

    The slope error is scaled by sqrt(chi2/dof) when dof > 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    ci = np.linalg.inv(cov)
    info = x @ ci @ x
    if not info > 0:
        raise NumericalError("regression has no leverage (all powers zero?)")
    k = (x @ ci @ y) / info
    r = y - k * x
    chi2 = float(r @ ci @ r)
    dof = x.size - 1
    se_model = math.sqrt(1 / info)
    se = se_model * math.sqrt(chi2 / dof) if dof > 0 else se_model
    return LineFit(float(k), se, se_model, chi2, dof, r / np.sqrt(np.diag(cov)))


def _log_ratios(estimates: Sequence[VisibilityEstimate], slope: float | None = None):
    """Log visibility ratios against the 0 W baseline and their covariance.

    With ``slope`` given, variances use the model visibility V0 exp(-slope P)
    rather than the noisy fitted one, which would otherwise favour upward
    fluctuations and bias the slope low. The fitted amplitude is Rice
    distributed, so ln V is corrected by se^2 / (2 V^2).
    """
    base = [e for e in estimates if e.power == 0]
    if not base:
        raise DomainError("a 0 W baseline visibility is required")
    b = base[0]
    rest = [e for e in estimates if e is not b]
    if b.visibility <= 0 or any(e.visibility <= 0 for e in rest):
        raise DomainError("all visibilities must be positive")
    p = np.array([e.power for e in rest])
    v = np.array([e.visibility for e in rest])
    se = np.array([e.se_visibility for e in rest])
    ref = v if slope is None else b.visibility * np.exp(-slope * p)
    rel0 = (b.se_visibility / b.visibility) ** 2
    rel = (se / ref) ** 2
    y = (math.log(b.visibility) - 0.5 * rel0) - (np.log(v) - 0.5 * rel)
    # the shared baseline correlates every log ratio
    cov = np.diag(rel) + rel0
    return p, y, cov


REWEIGHT_PASSES = 3


def regress_log_reduction(estimates: Sequence[VisibilityEstimate]):
    """Through-origin GLS of ln(V0/V) on power, reweighted from the fitted line."""
    p, y, cov = _log_ratios(estimates)
    fit = fit_through_origin(p, y, cov)
    for _ in range(REWEIGHT_PASSES):
        p, y, cov = _log_ratios(estimates, fit.slope)
        fit = fit_through_origin(p, y, cov)
    return fit, p, y, cov


def sigma_per_slope(laser: RecoilLaser, v_bar: float) -> float:
    """Cross section per unit of d ln(1/R)/dP at a half-period shift."""
    if v_bar <= 0:
        raise DomainError("mean velocity must be positive")
    return H * C * laser.waist_y * v_bar / (2 * math.sqrt(2 / math.pi) * laser.wavelength)


@dataclass(frozen=True)
class CrossSectionResult:
    sigma_abs: float
    ci95: tuple
    slope: float
    slope_se: float
    dof: int
    chi2_red: float
    residuals: np.ndarray = field(repr=False)
    nonlinear: bool = False
    intercept: float = float("nan")
    intercept_se: float = float("nan")
    baseline_drift: bool = False

    @property
    def sigma_abs_A2(self) -> float:
        return m2_to_a2(self.sigma_abs)

    @property
    def ci95_A2(self) -> tuple:
        return (m2_to_a2(self.ci95[0]), m2_to_a2(self.ci95[1]))

    def summary(self) -> dict:
        return {
            "sigma_abs_A2": self.sigma_abs_A2,
            "ci95_A2": list(self.ci95_A2),
            "slope_per_W": self.slope,
            "slope_se_per_W": self.slope_se,
            "dof": self.dof,
            "chi2_red": self.chi2_red,
            "nonlinear": self.nonlinear,
            "intercept": self.intercept,
            "intercept_se": self.intercept_se,
            "baseline_drift": self.baseline_drift,
            "standardized_residuals": [float(r) for r in self.residuals],
        }


def _t_quantile(dof: int) -> float:
    if dof <= 0:
        return stats.norm.ppf(0.5 + CONFIDENCE / 2)
    return stats.t.ppf(0.5 + CONFIDENCE / 2, dof)


def _intercept_diagnostic(p, y, cov):
    X = np.column_stack([np.ones_like(p), p])
    ci = np.linalg.inv(cov)
    info = X.T @ ci @ X
    if np.linalg.cond(info) > MAX_CONDITION:
        return float("nan"), float("nan")
    beta = np.linalg.solve(info, X.T @ ci @ y)
    return float(beta[0]), float(math.sqrt(np.linalg.inv(info)[0, 0]))


def extract_cross_section(
    estimates: Sequence[VisibilityEstimate], laser: RecoilLaser, v_bar: float
) -> CrossSectionResult:
    """Regress ln(V0/V) on power through the origin and convert the slope."""
    if len({e.power for e in estimates}) < 3:
        raise DomainError("need at least three distinct powers including 0 W")
    fit, p, y, cov = regress_log_reduction(estimates)
    scale = sigma_per_slope(laser, v_bar)
    half = _t_quantile(fit.dof) * fit.se * scale
    sigma = fit.slope * scale
    b0, b0_se = _intercept_diagnostic(p, y, cov)
    return CrossSectionResult(
        sigma_abs=sigma,
        ci95=(sigma - half, sigma + half),
        slope=fit.slope,
        slope_se=fit.se,
        dof=fit.dof,
        chi2_red=fit.chi2_red,
        residuals=fit.residuals,
        nonlinear=bool(fit.chi2_red > NONLINEAR_CHI2),
        intercept=b0,
        intercept_se=b0_se,
        baseline_drift=bool(abs(b0) > DRIFT_SIGMAS * b0_se),
    )


@dataclass(frozen=True)
class FluorescenceResult:
    sigma_abs: float
    sigma_ci95: tuple
    p_fluo: float
    p_fluo_ci95: tuple
    slope_half: float
    slope_full: float
    n0_per_watt: float
    clamped: bool = False

    def summary(self) -> dict:
        return {
            "sigma_abs_A2": m2_to_a2(self.sigma_abs),
            "sigma_ci95_A2": [m2_to_a2(c) for c in self.sigma_ci95],
            "p_fluo": self.p_fluo,
            "p_fluo_ci95": list(self.p_fluo_ci95),
            "slope_half_per_W": self.slope_half,
            "slope_full_per_W": self.slope_full,
            "n0_per_W": self.n0_per_watt,
            "p_fluo_clamped": self.clamped,
        }


def solve_two_shift(slope_half, slope_full, gamma_half, gamma_full):
    """(n0 per watt, P_fluo) from the half- and full-period slopes."""
    if 1 - gamma_full <= 1e-12:
        raise IdentifiabilityError("gamma(lambda_L) = 1: the quantum yield is not identifiable")
    q = (1 - gamma_half) / (1 - gamma_full)
    n0 = 0.5 * (slope_half + q * slope_full)
    if n0 <= 0:
        raise NumericalError("non-positive absorption slope")
    return n0, slope_full / ((1 - gamma_full) * n0)


def extract_fluorescence(
    estimates_half: Sequence[VisibilityEstimate],
    estimates_full: Sequence[VisibilityEstimate],
    gamma_half: float,
    gamma_full: float,
    laser: RecoilLaser,
    v_bar: float,
) -> FluorescenceResult:
    """Cross section and quantum yield from scans at s = d/2 and s = d."""
    for est in (estimates_half, estimates_full):
        if len({e.power for e in est}) < 3:
            raise DomainError("each record needs at least three distinct powers including 0 W")
    fh = regress_log_reduction(estimates_half)[0]
    ff = regress_log_reduction(estimates_full)[0]
    n0, pf = solve_two_shift(fh.slope, ff.slope, gamma_half, gamma_full)
    g = 1 - gamma_full
    q = (1 - gamma_half) / g
    se_n0 = 0.5 * math.hypot(fh.se, q * ff.se)
    dp_dkf = 1 / (g * n0) - ff.slope * q / (2 * g * n0**2)
    dp_dkh = -ff.slope / (2 * g * n0**2)
    se_p = math.hypot(dp_dkf * ff.se, dp_dkh * fh.se)
    t = _t_quantile(min(fh.dof, ff.dof))
    clamped = False
    if pf < 0:
        warnings.warn("solved quantum yield is negative; clamped to 0", PhysicsWarning, stacklevel=2)
        pf, clamped = 0.0, True
    scale = sigma_per_slope(laser, v_bar) * 2  # sigma per unit n0-per-watt
    sigma = n0 * scale
    return FluorescenceResult(
        sigma_abs=sigma,
        sigma_ci95=(sigma - t * se_n0 * scale, sigma + t * se_n0 * scale),
        p_fluo=pf,
        p_fluo_ci95=(pf - t * se_p, pf + t * se_p),
        slope_half=fh.slope,
        slope_full=ff.slope,
        n0_per_watt=n0,
        clamped=clamped,
    )
