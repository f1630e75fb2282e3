"""CSV tables and record directories with manifests.

CSV files are comma separated with LF line endings and ``#`` header
comments. Floats are written with ``repr`` so that a re-run produces
byte-identical files. Nothing time-dependent is ever written.
"""

from __future__ import annotations

import json
import math
import warnings
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import ResolvedConfig, config_from_dict, config_hash
from .errors import ConfigError, PhysicsWarning
from .montecarlo import ExperimentRecord, ScanProtocol

RECORD_FORMAT = "recoilspec-record/1"
MANIFEST = "manifest.json"


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(columns))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Return (comments, columns, float array of shape (rows, columns))."""
    comments, header, rows = [], None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
    if header is None:
        raise ConfigError(f"{path}: no header row")
    return comments, header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def _clean(obj):
    """JSON-safe copy: arrays to lists, NaN and inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def header_comments(cfg: ResolvedConfig, **extra) -> list:
    out = [f"config_sha256: {cfg.sha256}"]
    out += [f"{k}: {v}" for k, v in extra.items()]
    out.append("config: " + json.dumps(cfg.echo, sort_keys=True, separators=(",", ":")))
    return out


def step_filename(step: int) -> str:
    return f"step_{step:03d}.csv"


def write_record(directory, record: ExperimentRecord, cfg: ResolvedConfig) -> Path:
    """One CSV per power step plus a manifest sufficient for a bit-identical re-run."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for step, power in enumerate(record.powers):
        name = step_filename(step)
        write_csv(
            directory / name,
            ["position_m", "count"],
            zip(record.positions, record.counts[step]),
            header_comments(cfg, step=step, power_W=_fmt(power), seed=record.seed),
        )
        files.append(name)
    manifest = {
        "format": RECORD_FORMAT,
        "config": cfg.echo,
        "config_sha256": cfg.sha256,
        "seed": record.seed,
        "protocol": record.protocol.as_dict(),
        "period_m": record.period,
        "powers_W": [float(p) for p in record.powers],
        "files": files,
    }
    write_json(directory / MANIFEST, manifest)
    return directory


def protocol_from_dict(d: dict) -> ScanProtocol:
    return ScanProtocol(
        power_steps=tuple(d["power_steps_W"]),
        positions_per_scan=int(d["positions_per_scan"]),
        scan_span=float(d["scan_span_periods"]),
        molecules_per_sample=int(d["molecules_per_sample"]),
        seed=int(d["seed"]),
    )


def read_record(directory):
    """Load a record directory; returns (ExperimentRecord, ResolvedConfig).

    Raises ConfigError if the manifest and step files disagree.
    """
    directory = Path(directory)
    path = directory / MANIFEST
    if not path.is_file():
        raise ConfigError(f"{directory}: no {MANIFEST}")
    man = read_json(path)
    if man.get("format") != RECORD_FORMAT:
        raise ConfigError(f"{path}: unknown record format {man.get('format')!r}")
    if config_hash(man["config"]) != man["config_sha256"]:
        raise ConfigError(f"{path}: config_sha256 does not match the configuration echo")
    with warnings.catch_warnings():
        # already reported when the record was written
        warnings.simplefilter("ignore", PhysicsWarning)
        cfg = config_from_dict(man["config"])
    protocol = protocol_from_dict(man["protocol"])
    if list(protocol.power_steps) != list(man["powers_W"]) or len(man["files"]) != len(man["powers_W"]):
        raise ConfigError(f"{path}: power steps and step files are inconsistent")
    positions, counts = None, []
    for step, name in enumerate(man["files"]):
        comments, cols, data = read_csv(directory / name)
        if cols != ["position_m", "count"]:
            raise ConfigError(f"{name}: unexpected columns {cols}")
        if f"config_sha256: {man['config_sha256']}" not in comments:
            raise ConfigError(f"{name}: written for a different configuration")
        if positions is None:
            positions = data[:, 0]
        elif not np.array_equal(positions, data[:, 0]):
            raise ConfigError(f"{name}: positions differ from {man['files'][0]}")
        counts.append(data[:, 1].astype(np.int64))
    record = ExperimentRecord(
        powers=np.asarray(man["powers_W"], dtype=float),
        positions=positions,
        counts=np.vstack(counts),
        seed=int(man["seed"]),
        protocol=protocol,
        period=float(man["period_m"]),
        config_echo=man["config"],
    )
    return record, cfg


def write_sweep(path, rows, cfg: ResolvedConfig, seed: int, extra: Optional[dict] = None):
    """Cross-section versus width table (width, sigma_A2, ci_low, ci_high) and a JSON summary beside it."""
    from .constants import m2_to_a2

    path = Path(path)
    write_csv(
        path,
        ["width", "sigma_A2", "ci_low", "ci_high"],
        [(r.width, m2_to_a2(r.sigma_abs), m2_to_a2(r.ci_low), m2_to_a2(r.ci_high)) for r in rows],
        header_comments(cfg, seed=seed),
    )
    summary = {
        "config_sha256": cfg.sha256,
        "config": cfg.echo,
        "seed": seed,
        "rows": [{"width": r.width, **r.result.summary()} for r in rows],
        **(extra or {}),
    }
    write_json(path.with_suffix(".json"), summary)
    return path
