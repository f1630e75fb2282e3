"""Simulated power-ramped fringe scans with shot noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .beam import NodeTable, average_nodes, channel_builder_for, node_table
from .errors import DomainError
from .physics import InterferometerConfig, Molecule, VelocityModel
from .talbot import detector_signal

INVERSION_LIMIT = 30.0
SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ScanProtocol:
    power_steps: tuple = tuple(np.linspace(0.0, 1.0, 20).tolist())
    positions_per_scan: int = 100
    scan_span: float = 5.0
    molecules_per_sample: int = 10_000
    seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.power_steps, dtype=float)
        object.__setattr__(self, "power_steps", tuple(p.tolist()))
        if p.size < 1 or p[0] != 0.0:
            raise DomainError("the first power step must be 0 W (baseline)")
        if np.any(p < 0) or np.any(np.diff(p) < 0):
            raise DomainError("power steps must be non-negative and ascending")
        if self.positions_per_scan < 8:
            raise DomainError("need at least 8 positions per scan")
        if self.scan_span <= 0:
            raise DomainError("scan span must be positive")
        if self.molecules_per_sample <= 0:
            raise DomainError("molecules_per_sample must be positive")
        if not 0 <= self.seed <= SEED_MASK:
            raise DomainError("seed must be a 64-bit unsigned integer")

    @classmethod
    def ramp(cls, power_max: float = 1.0, steps: int = 20, **kw) -> "ScanProtocol":
        return cls(power_steps=tuple(np.linspace(0.0, power_max, steps).tolist()), **kw)

    def positions(self, period: float) -> np.ndarray:
        n = self.positions_per_scan
        return np.arange(n) * (self.scan_span * period / n)

    def as_dict(self) -> dict:
        return {
            "power_steps_W": list(self.power_steps),
            "positions_per_scan": self.positions_per_scan,
            "scan_span_periods": self.scan_span,
            "molecules_per_sample": self.molecules_per_sample,
            "seed": self.seed,
        }


@dataclass(eq=False)
class ExperimentRecord:
    powers: np.ndarray
    positions: np.ndarray
    counts: np.ndarray
    seed: int
    protocol: ScanProtocol
    period: float
    config_echo: dict = field(default_factory=dict)
    visibilities: list = field(default_factory=list)

    def __post_init__(self):
        if self.counts.shape != (len(self.powers), len(self.positions)):
            raise DomainError("counts must have shape (power steps, positions)")
        if np.any(self.counts < 0):
            raise DomainError("counts must be non-negative")
        if np.any(np.diff(self.positions) <= 0):
            raise DomainError("positions must be strictly increasing")
        if not self.visibilities:
            self.visibilities = [None] * len(self.powers)

    def same_data(self, other: "ExperimentRecord") -> bool:
        return (
            np.array_equal(self.powers, other.powers)
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.counts, other.counts)
            and self.seed == other.seed
        )


def substream(seed: int, step: int, index: int) -> np.random.Generator:
    """Independent generator for one (power step, position) cell.

    Philox is keyed by the seed; the cell indices occupy the upper counter
    words, so draws inside a cell only advance the lowest word and cells
    never overlap.
    """
    bitgen = np.random.Philox(key=seed & SEED_MASK, counter=[0, index, step, 0])
    return np.random.Generator(bitgen)


def poisson_sample(rng: np.random.Generator, lam: float) -> int:
    """Exact Poisson draw: CDF inversion below 30, NumPy's PTRS sampler above."""
    if lam < 0:
        raise DomainError("Poisson mean must be >= 0")
    if lam == 0:
        return 0
    if lam >= INVERSION_LIMIT:
        return int(rng.poisson(lam))
    u = rng.random()
    k, p = 0, math.exp(-lam)
    cdf = p
    while u > cdf and p > 0:
        k += 1
        p *= lam / k
        cdf += p
    return k


def _rates(table: NodeTable, config, molecule, model, power, positions) -> np.ndarray:
    order = table.patterns[0].order_max
    builder = channel_builder_for(config, molecule, power, order) if power > 0 else None
    avg = average_nodes(table, builder, model.mean_v)
    return detector_signal(avg, config.open_fraction_g3, positions)


def expected_rate(
    config: InterferometerConfig,
    molecule: Molecule,
    model: VelocityModel,
    power: float,
    position,
    table: Optional[NodeTable] = None,
) -> np.ndarray:
    """Velocity-averaged detected fraction of incident molecules at the given displacement(s)."""
    table = table or node_table(config, molecule, model)
    return _rates(table, config, molecule, model, power, position)


def run_experiment(
    protocol: ScanProtocol,
    config: InterferometerConfig,
    molecule: Molecule,
    model: VelocityModel,
    config_echo: Optional[dict] = None,
    table: Optional[NodeTable] = None,
) -> ExperimentRecord:
    """Poisson counts for every power step and third-grating position."""
    table = table or node_table(config, molecule, model)
    positions = protocol.positions(config.period_d)
    powers = np.asarray(protocol.power_steps)
    counts = np.empty((powers.size, positions.size), dtype=np.int64)
    for step, power in enumerate(powers):
        rate = np.clip(_rates(table, config, molecule, model, power, positions), 0.0, None)
        mean = protocol.molecules_per_sample * rate
        for i, lam in enumerate(mean):
            counts[step, i] = poisson_sample(substream(protocol.seed, step, i), float(lam))
    return ExperimentRecord(
        powers=powers,
        positions=positions,
        counts=counts,
        seed=protocol.seed,
        protocol=protocol,
        period=config.period_d,
        config_echo=dict(config_echo or {}),
    )


@dataclass(frozen=True)
class SweepRow:
    width: float
    sigma_abs: float
    ci_low: float
    ci_high: float
    result: object = field(repr=False, compare=False, default=None)

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def sweep_velocity_spread(
    widths: Sequence[float],
    protocol: ScanProtocol,
    config: InterferometerConfig,
    molecule: Molecule,
    mean_v: float,
    node_count: int = 64,
    truncation: float = 5.0,
) -> list:
    """Simulate and fit one experiment per relative velocity width."""
    from .estimation import extract_cross_section, fit_record

    rows = []
    for width in widths:
        if not 0 <= width < 0.2:
            raise DomainError(f"relative width must lie in [0, 0.2), got {width}")
        model = VelocityModel(mean_v, width, node_count, truncation)
        record = run_experiment(protocol, config, molecule, model)
        res = extract_cross_section(fit_record(record), config.recoil_laser, mean_v)
        rows.append(SweepRow(width, res.sigma_abs, res.ci95[0], res.ci95[1], res))
    return rows
