from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from recoilspec.beam import average_nodes, node_table
from recoilspec.constants import a2_to_m2
from recoilspec.errors import DomainError
from recoilspec.estimation import extract_cross_section, sine_fit
from recoilspec.montecarlo import (
    ExperimentRecord,
    ScanProtocol,
    expected_rate,
    poisson_sample,
    run_experiment,
    substream,
    sweep_velocity_spread,
)
from recoilspec.physics import VelocityModel
from recoilspec.talbot import detector_signal, sinusoidal_visibility

SIGMA = a2_to_m2(15.0)


@pytest.fixture(scope="module")
def setup(kdtli):
    ifm, mol = kdtli.interferometer, kdtli.molecule
    model = VelocityModel(kdtli.mean_v, 0.01)
    return ifm, mol, model, node_table(ifm, mol, model)


def noise_free_sigma(ifm, mol, model, protocol):
    """Cross section from expected counts, i.e. the estimator's systematic offset."""
    table = node_table(ifm, mol, model)
    x = protocol.positions(ifm.period_d)
    est = [
        sine_fit(x, protocol.molecules_per_sample * expected_rate(ifm, mol, model, p, x, table), ifm.period_d, p)
        for p in protocol.power_steps
    ]
    return extract_cross_section(est, ifm.recoil_laser, model.mean_v).sigma_abs


# -- protocol and record types ---------------------------------------------------


def test_protocol_defaults_and_validation():
    p = ScanProtocol()
    assert len(p.power_steps) == 20 and p.power_steps[0] == 0 and p.power_steps[-1] == 1.0
    assert p.positions(266e-9)[1] == pytest.approx(5 * 266e-9 / 100)
    with pytest.raises(DomainError):
        ScanProtocol(power_steps=(0.1, 0.5))
    with pytest.raises(DomainError):
        ScanProtocol(power_steps=(0.0, 0.5, 0.2))
    with pytest.raises(DomainError):
        ScanProtocol(positions_per_scan=4)
    with pytest.raises(DomainError):
        ScanProtocol(molecules_per_sample=0)
    with pytest.raises(DomainError):
        ScanProtocol(seed=-1)


def test_record_invariants():
    x = np.arange(8.0)
    with pytest.raises(DomainError):
        ExperimentRecord(np.zeros(1), x, -np.ones((1, 8), dtype=int), 0, ScanProtocol(), 1.0)
    with pytest.raises(DomainError):
        ExperimentRecord(np.zeros(1), x[::-1], np.ones((1, 8), dtype=int), 0, ScanProtocol(), 1.0)
    with pytest.raises(DomainError):
        ExperimentRecord(np.zeros(2), x, np.ones((1, 8), dtype=int), 0, ScanProtocol(), 1.0)


# -- expected rate -------------------------------------------------------------------


def test_rate_at_zero_power_is_unperturbed(setup):
    ifm, mol, model, table = setup
    x = np.linspace(0, ifm.period_d, 31)
    ref = detector_signal(average_nodes(table, None, model.mean_v), ifm.open_fraction_g3, x)
    assert np.array_equal(expected_rate(ifm, mol, model, 0.0, x, table), ref)


def test_rate_periodic_bounded_and_conserving(setup):
    ifm, mol, model, table = setup
    d = ifm.period_d
    x = np.arange(64) * d / 64
    means = []
    for power in (0.0, 0.4, 1.0):
        r = expected_rate(ifm, mol, model, power, x, table)
        assert np.allclose(r, expected_rate(ifm, mol, model, power, x + d, table), atol=1e-15)
        assert np.all((r >= 0) & (r <= 1))
        means.append(r.mean())
    # recoil moves molecules around but never removes them
    assert np.allclose(means, means[0], rtol=1e-13)
    assert means[0] == pytest.approx(average_nodes(table, None, model.mean_v)[0].real * ifm.open_fraction_g3, rel=1e-13)


# -- sampling ----------------------------------------------------------------------------


def test_poisson_inversion_distribution():
    draws = np.array([poisson_sample(substream(11, 0, i), 3.7) for i in range(20000)])
    k = np.arange(13)
    observed = np.array([np.sum(draws == j) for j in k] + [np.sum(draws > 12)])
    expected = np.append(stats.poisson.pmf(k, 3.7), stats.poisson.sf(12, 3.7)) * draws.size
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_poisson_edge_cases():
    assert poisson_sample(substream(0, 0, 0), 0.0) == 0
    with pytest.raises(DomainError):
        poisson_sample(substream(0, 0, 0), -1.0)
    big = [poisson_sample(substream(3, 0, i), 400.0) for i in range(4000)]
    assert np.mean(big) == pytest.approx(400, abs=4 * np.sqrt(400 / 4000))


def test_substreams_are_keyed_not_sequential():
    a = substream(5, 2, 7).random(4)
    substream(5, 2, 6).random(1000)
    assert np.array_equal(a, substream(5, 2, 7).random(4))
    assert not np.array_equal(a, substream(5, 7, 2).random(4))
    assert not np.array_equal(a, substream(6, 2, 7).random(4))


def test_run_is_deterministic(setup):
    ifm, mol, model, table = setup
    proto = ScanProtocol.ramp(1.0, 4, seed=123)
    a = run_experiment(proto, ifm, mol, model, table=table)
    b = run_experiment(proto, ifm, mol, model)
    assert a.same_data(b)
    c = run_experiment(ScanProtocol.ramp(1.0, 4, seed=124), ifm, mol, model, table=table)
    assert not np.array_equal(a.counts, c.counts)


def test_law_of_large_numbers(setup):
    ifm, mol, model, table = setup
    n = 10_000_000
    proto = ScanProtocol(molecules_per_sample=n, seed=7)
    rec = run_experiment(proto, ifm, mol, model, table=table)
    z = []
    for step, p in enumerate(proto.power_steps):
        rate = expected_rate(ifm, mol, model, p, rec.positions, table)
        z.append((rec.counts[step] / n - rate) / np.sqrt(rate / n))
    z = np.abs(np.concatenate(z))
    # 2000 cells: about 5 expected beyond 3 sigma
    assert np.mean(z <= 3) >= 0.99
    assert z.max() < 5


def test_counts_unbiased_over_repetitions(setup):
    ifm, mol, model, table = setup
    reps = 1000
    proto = ScanProtocol((0.0, 1.0), 8, 1.0, 10_000)
    counts = np.array(
        [run_experiment(replace(proto, seed=seed), ifm, mol, model, table=table).counts for seed in range(reps)]
    )
    x = proto.positions(ifm.period_d)
    for step, p in enumerate((0.0, 1.0)):
        lam = 10_000 * expected_rate(ifm, mol, model, p, x, table)
        se = np.sqrt(lam / reps)
        assert np.all(np.abs(counts[:, step].mean(axis=0) - lam) < 4 * se)


@pytest.mark.slow
def test_baseline_visibility_coverage(setup):
    ifm, mol, model, table = setup
    v_true = sinusoidal_visibility(average_nodes(table, None, model.mean_v), ifm.open_fraction_g3)
    hits, seeds = 0, 300
    for seed in range(seeds):
        rec = run_experiment(ScanProtocol((0.0,), seed=seed), ifm, mol, model, table=table)
        e = sine_fit(rec.positions, rec.counts[0], rec.period)
        hits += abs(e.visibility - v_true) <= 1.96 * e.se_visibility
    assert hits / seeds >= 0.93


# -- width sweep ----------------------------------------------------------------------


def test_sweep_rows(kdtli):
    ifm, mol = kdtli.interferometer, kdtli.molecule
    proto = ScanProtocol.ramp(1.0, 6, seed=0)
    rows = sweep_velocity_spread([0.0, 0.05], proto, ifm, mol, kdtli.mean_v)
    assert [r.width for r in rows] == [0.0, 0.05]
    for r in rows:
        assert r.ci_low < r.sigma_abs < r.ci_high
        assert r.sigma_abs == pytest.approx(SIGMA, rel=0.05)
    with pytest.raises(DomainError):
        sweep_velocity_spread([0.2], proto, ifm, mol, kdtli.mean_v)


@pytest.mark.slow
def test_zero_width_coverage(kdtli):
    ifm, mol = kdtli.interferometer, kdtli.molecule
    model = VelocityModel(kdtli.mean_v, 0.0)
    table = node_table(ifm, mol, model)
    hits, seeds = 0, 300
    for seed in range(seeds):
        rec = run_experiment(ScanProtocol(seed=seed), ifm, mol, model, table=table)
        est = [sine_fit(rec.positions, c, rec.period, p) for c, p in zip(rec.counts, rec.powers)]
        lo, hi = extract_cross_section(est, ifm.recoil_laser, model.mean_v).ci95
        hits += lo <= SIGMA <= hi
    assert 0.93 <= hits / seeds <= 0.97


@pytest.mark.parametrize("width", [0.0, 0.05, 0.10])
def test_noise_free_systematic_small_below_ten_percent(kdtli, width):
    ifm, mol = kdtli.interferometer, kdtli.molecule
    model = VelocityModel(kdtli.mean_v, width)
    assert noise_free_sigma(ifm, mol, model, ScanProtocol()) == pytest.approx(SIGMA, rel=0.01)


@pytest.mark.xfail(strict=True, reason="under this model the spread systematic at 15% stays far below 1%")
def test_fifteen_percent_spread_deviates(kdtli):
    ifm, mol = kdtli.interferometer, kdtli.molecule
    model = VelocityModel(kdtli.mean_v, 0.15)
    assert abs(noise_free_sigma(ifm, mol, model, ScanProtocol()) / SIGMA - 1) > 0.01
