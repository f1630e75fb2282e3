"""Averaging over the longitudinal velocity distribution of the beam."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .physics import InterferometerConfig, Molecule, VelocityModel
from .recoil import RecoilChannel, recoil_channel, recoil_multipliers
from .talbot import FringeCoefficients, pattern_coefficients, sinusoidal_visibility

ChannelBuilder = Callable[[float], Optional[RecoilChannel]]


def gaussian_weights(model: VelocityModel):
    """Gauss-Legendre nodes on the truncated Gaussian, weights summing to one.

    Returns ``(v, w)`` arrays.
    """
    if model.relative_width == 0:
        return np.array([model.mean_v]), np.array([1.0])
    sigma = model.relative_width * model.mean_v
    lo = max(model.mean_v - model.truncation * sigma, 0.0)
    hi = model.mean_v + model.truncation * sigma
    x, w = np.polynomial.legendre.leggauss(model.node_count)
    v = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    w = w * np.exp(-0.5 * ((v - model.mean_v) / sigma) ** 2)
    return v, w / w.sum()


@dataclass(frozen=True, eq=False)
class NodeTable:
    """Unperturbed patterns evaluated once per quadrature node."""

    velocities: np.ndarray
    weights: np.ndarray
    patterns: list

    @property
    def orders(self) -> np.ndarray:
        return self.patterns[0].orders

    def matrix(self) -> np.ndarray:
        return np.stack([p.coefficients for p in self.patterns])


def node_table(
    config: InterferometerConfig, molecule: Molecule, model: VelocityModel, max_order: int | None = None
) -> NodeTable:
    v, w = gaussian_weights(model)
    patterns = [pattern_coefficients(config, molecule, vi, max_order, adaptive=False) for vi in v]
    return NodeTable(v, w, patterns)


def _weighted_sum(weights, rows) -> np.ndarray:
    # pairwise summation keeps the reduction independent of evaluation order
    return np.sum(weights[:, None] * rows, axis=0)


def average_nodes(
    table: NodeTable, channel_builder: Optional[ChannelBuilder], mean_v: float
) -> FringeCoefficients:
    rows = table.matrix()
    if channel_builder is not None:
        mult = np.ones_like(rows)
        for i, v in enumerate(table.velocities):
            ch = channel_builder(v)
            if ch is not None:
                mult[i] = recoil_multipliers(table.orders, table.patterns[0].period, ch)
        rows = rows * mult
    return FringeCoefficients(_weighted_sum(table.weights, rows), table.patterns[0].period, mean_v)


def averaged_pattern(
    config: InterferometerConfig,
    molecule: Molecule,
    model: VelocityModel,
    channel_builder: Optional[ChannelBuilder] = None,
    max_order: int | None = None,
) -> FringeCoefficients:
    """Velocity-averaged harmonics; pattern, n0 and s are re-evaluated per node."""
    return average_nodes(node_table(config, molecule, model, max_order), channel_builder, model.mean_v)


def channel_builder_for(config: InterferometerConfig, molecule: Molecule, power: float, order_max: int):
    cfg = config.with_power(power)

    def build(v):
        return recoil_channel(molecule, cfg.recoil_laser, v, cfg.period_d, order_max)

    return build


def averaged_reduction(
    config: InterferometerConfig,
    molecule: Molecule,
    model: VelocityModel,
    power: float,
    table: NodeTable | None = None,
) -> float:
    """|<w_1 e^{...}>| / |<w_1>| with the recoil laser at ``power``."""
    table = table or node_table(config, molecule, model)
    n = table.patterns[0].order_max
    base = average_nodes(table, None, model.mean_v)
    if abs(base[1]) == 0:
        raise DomainError("baseline contrast vanishes; reduction undefined")
    on = average_nodes(table, channel_builder_for(config, molecule, power, n), model.mean_v)
    return abs(on[1]) / abs(base[1])


def spread_error_estimate(n0_bar: float, rel_width: float, v_bar: float, contrast_log_derivative: float) -> float:
    """Quadratic-order error estimate for <R> relative to R(v_bar).

    ``contrast_log_derivative`` is d ln V0 / dv in 1/(m/s).
    """
    if not 0 <= rel_width < 0.2:
        raise DomainError("relative width must lie in [0, 0.2)")
    return 2 * n0_bar * rel_width**2 * (n0_bar - 1 + math.pi**2 / 2 + v_bar * contrast_log_derivative)


def second_order_spread_deviation(n0_bar: float, rel_width: float) -> float:
    """Second-order (<R> - R(v_bar)) / R(v_bar) for flat contrast and s(v_bar) = d/2.

    Expanding n0 ~ 1/v and s ~ 1/v about v_bar and averaging the complex
    first harmonic over a Gaussian gives w^2 n0 (n0 - 1) (2 - pi^2/2);
    the phase spread of the harmonic cancels most of the magnitude gain.
    """
    return rel_width**2 * n0_bar * (n0_bar - 1) * (2 - math.pi**2 / 2)


def contrast_velocity_derivative(
    config: InterferometerConfig, molecule: Molecule, v_bar: float, rel_step: float = 1e-3
) -> float:
    """d ln V0 / dv at v_bar: central difference with one Richardson step."""

    def lnv(v):
        return math.log(sinusoidal_visibility(pattern_coefficients(config, molecule, v), config.open_fraction_g3))

    def central(h):
        return (lnv(v_bar + h) - lnv(v_bar - h)) / (2 * h)

    h = rel_step * v_bar
    return (4 * central(h / 2) - central(h)) / 3
