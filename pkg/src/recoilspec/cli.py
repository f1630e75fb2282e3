"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .beam import averaged_pattern, channel_builder_for
from .config import ResolvedConfig, load_config, parse_protocol_override
from .constants import m2_to_a2
from .errors import ConfigError, DomainError, NumericalError
from .estimation import extract_cross_section, extract_fluorescence, fit_record
from .montecarlo import run_experiment, sweep_velocity_spread
from .physics import VelocityModel, de_broglie, mean_photon_number, recoil_shift
from .recoil import decoherence_gamma, ln_reduction_half_shift
from .spectrum import load_spectrum
from .talbot import detector_signal

log = logging.getLogger("recoilspec")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_WIDTHS = "0,0.01,0.02,0.04,0.06,0.08,0.10,0.12,0.14,0.16,0.18"


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _recoil_or_fail(cfg: ResolvedConfig):
    if cfg.recoil_laser is None:
        raise ConfigError("recoil_laser: section required for this command")
    return cfg.recoil_laser


def cmd_pattern(args) -> int:
    cfg = load_config(args.config)
    ifm = cfg.interferometer
    model = cfg.beam
    if args.velocity is not None:
        if not args.velocity > 0:
            raise ConfigError(f"--velocity: must be positive, got {args.velocity}")
        model = VelocityModel(args.velocity)
    x = np.linspace(0.0, args.span * ifm.period_d, args.points, endpoint=False)
    off = averaged_pattern(ifm, cfg.molecule, model)
    cols, data = ["position_m", "signal"], [x, detector_signal(off, ifm.open_fraction_g3, x)]
    if args.power > 0:
        _recoil_or_fail(cfg)
        n = off.order_max
        on = averaged_pattern(ifm, cfg.molecule, model, channel_builder_for(ifm, cfg.molecule, args.power, n))
        cols.append("signal_recoil")
        data.append(detector_signal(on, ifm.open_fraction_g3, x))
    io.write_csv(
        args.out,
        cols,
        zip(*data),
        io.header_comments(
            cfg, mean_velocity_m_per_s=model.mean_v, relative_width=model.relative_width, recoil_power_W=args.power
        ),
    )
    log.info("wrote %s", args.out)
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = load_config(args.config)
    _recoil_or_fail(cfg)
    if args.shift is not None:
        cfg = cfg.with_shift(args.shift)
    protocol = parse_protocol_override(args.protocol or "", cfg.protocol, args.seed)
    record = run_experiment(protocol, cfg.interferometer, cfg.molecule, cfg.beam, config_echo=cfg.echo)
    io.write_record(args.out, record, cfg)
    log.info("wrote %d steps to %s", len(record.powers), args.out)
    return EXIT_OK


def _gamma_at_shift(spectrum, cfg: ResolvedConfig) -> float:
    laser = cfg.recoil_laser
    s = recoil_shift(de_broglie(cfg.molecule, cfg.mean_v), laser.wavelength, laser.distance_D)
    return float(decoherence_gamma(spectrum, laser.wavelength * s / cfg.interferometer.period_d))


def cmd_extract(args) -> int:
    record, cfg = io.read_record(args.record_dir)
    laser = _recoil_or_fail(cfg)
    est = fit_record(record)
    vis = [(e.power, e.visibility, e.se_visibility, e.phase, e.se_phase) for e in est]
    out = Path(args.out) if args.out else Path(args.record_dir)
    summary = {"mode": args.mode, "config_sha256": cfg.sha256, "seed": record.seed}
    if args.mode == "plain":
        res = extract_cross_section(est, laser, cfg.mean_v)
        summary["cross_section"] = res.summary()
        log.info("sigma_abs = %.4g A^2, 95%% CI [%.4g, %.4g]", res.sigma_abs_A2, *res.ci95_A2)
    else:
        if not args.spectrum or not args.full_record:
            raise ConfigError("fluorescence mode needs --spectrum and --full-record")
        full, cfg_full = io.read_record(args.full_record)
        if cfg_full.echo["molecule"] != cfg.echo["molecule"] or cfg_full.echo["beam"] != cfg.echo["beam"]:
            raise ConfigError("--full-record: molecule or beam differ from the half-period record")
        spectrum = load_spectrum(args.spectrum)
        g_half, g_full = _gamma_at_shift(spectrum, cfg), _gamma_at_shift(spectrum, cfg_full)
        res = extract_fluorescence(est, fit_record(full), g_half, g_full, laser, cfg.mean_v)
        summary["fluorescence"] = {**res.summary(), "gamma_half": g_half, "gamma_full": g_full}
        summary["full_record_sha256"] = cfg_full.sha256
        log.info("sigma_abs = %.4g A^2, p_fluo = %.4g", m2_to_a2(res.sigma_abs), res.p_fluo)
    summary["visibilities"] = [
        {"power_W": p, "visibility": v, "se_visibility": sv, "phase": ph, "se_phase": sp} for p, v, sv, ph, sp in vis
    ]
    io.write_csv(
        out / "visibilities.csv",
        ["power_W", "visibility", "se_visibility"],
        [(p, v, sv) for p, v, sv, _, _ in vis],
        io.header_comments(cfg, seed=record.seed),
    )
    io.write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    _recoil_or_fail(cfg)
    protocol = parse_protocol_override(args.protocol or "", cfg.protocol, args.seed)
    rows = sweep_velocity_spread(
        args.widths, protocol, cfg.interferometer, cfg.molecule, cfg.mean_v, cfg.beam.node_count, cfg.beam.truncation
    )
    for r in rows:
        log.info("width %.3f: sigma %.4g A^2 [%.4g, %.4g]", r.width, *(m2_to_a2(v) for v in (r.sigma_abs, r.ci_low, r.ci_high)))
    io.write_sweep(args.out, rows, cfg, args.seed, {"protocol": protocol.as_dict()})
    return EXIT_OK


def cmd_fluo_curve(args) -> int:
    cfg = load_config(args.config)
    laser = _recoil_or_fail(cfg)
    spectrum = load_spectrum(args.spectrum) if args.spectrum else cfg.molecule.fluorescence_spectrum
    if spectrum is None:
        raise ConfigError("molecule.fluorescence_spectrum: required (or pass --spectrum)")
    gamma_half = float(decoherence_gamma(spectrum, laser.wavelength / 2))
    powers = np.asarray(cfg.protocol.power_steps)
    n0_per_w = mean_photon_number(cfg.molecule, replace(laser, power=1.0), cfg.mean_v)
    cols = ["power_W"] + [f"ln_inv_R_pfluo_{p:g}" for p in args.p_fluo]
    curves = [powers] + [np.array([ln_reduction_half_shift(n0_per_w * P, pf, gamma_half) for P in powers]) for pf in args.p_fluo]
    io.write_csv(
        args.out,
        cols,
        zip(*curves),
        io.header_comments(cfg, gamma_half=repr(gamma_half), n0_per_W=repr(n0_per_w)),
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="recoilspec", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pattern", help="detector signal versus third-grating position")
    p.add_argument("config")
    p.add_argument("--velocity", type=float, help="single velocity in m/s (default: the configured beam)")
    p.add_argument("--power", type=float, default=0.0, help="recoil laser power in W")
    p.add_argument("--span", type=float, default=3.0, help="span in grating periods")
    p.add_argument("--points", type=int, default=600)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("scan", help="simulate a power-ramped experiment")
    p.add_argument("config")
    p.add_argument("--protocol", help="YAML file or inline key=value,... overrides")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--shift", type=float, help="place the recoil laser for this shift in periods at v_bar")
    p.add_argument("--out", required=True, help="record directory")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("extract", help="fit a record and invert to a cross section")
    p.add_argument("record_dir")
    p.add_argument("--mode", choices=["plain", "fluorescence"], default="plain")
    p.add_argument("--spectrum", help="fluorescence spectrum CSV (wavelength_nm,relative_weight)")
    p.add_argument("--full-record", help="record taken at a full-period shift (fluorescence mode)")
    p.add_argument("--out", help="output directory (default: the record directory)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("sweep", help="recovered cross section versus velocity spread")
    p.add_argument("config")
    p.add_argument("--widths", type=_floats, default=_floats(DEFAULT_WIDTHS))
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--protocol", help="YAML file or inline key=value,... overrides")
    p.add_argument("--out", required=True, help="CSV path; a JSON summary is written beside it")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fluo-curve", help="analytic ln(1/R) versus power for several quantum yields")
    p.add_argument("config")
    p.add_argument("--p-fluo", type=_floats, default=_floats("0,0.11,1.0"))
    p.add_argument("--spectrum", help="override the configured fluorescence spectrum")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fluo_curve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
