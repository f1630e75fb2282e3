"""YAML configuration: schema validation, unit conversion and hashing.

Keys carry their laboratory unit (``period_nm``, ``power_W``). The schema
is checked with pydantic so that error messages name the offending field;
the validated document is then converted once into the SI dataclasses.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .constants import CM, NM, UM, a2_to_m2, a3_to_m3, amu_to_kg
from .errors import ConfigError, DomainError, PhysicsWarning
from .montecarlo import ScanProtocol
from .physics import (
    GratingLaser,
    InterferometerConfig,
    LaserPhaseGrating,
    MaterialGrating,
    Molecule,
    RecoilLaser,
    VelocityModel,
    de_broglie,
    mean_photon_number,
    recoil_shift,
    validate_wavelength_bound,
)
from .spectrum import SpectrumTable, load_spectrum

DATA_DIR = Path(__file__).parent / "data"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MoleculeSchema(_Strict):
    name: str = ""
    mass_amu: float = Field(gt=0)
    polarizability_A3: float = Field(ge=0)
    sigma_abs_A2: float = Field(ge=0)
    sigma_abs_grating_A2: float = Field(0.0, ge=0)
    p_fluo: float = Field(0.0, ge=0, le=1)
    fluorescence_spectrum: Optional[str] = None
    heat_capacity_J_per_K: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _spectrum_if_fluorescent(self):
        if self.p_fluo > 0 and not self.fluorescence_spectrum:
            raise ValueError("fluorescence_spectrum is required when p_fluo > 0")
        return self


class MaterialSchema(_Strict):
    type: Literal["material"]
    open_fraction: float = Field(gt=0, lt=1)


class LaserGratingSchema(_Strict):
    type: Literal["laser"]
    power_W: float = Field(ge=0)
    wavelength_nm: float = Field(gt=0)
    waist_um: float = Field(gt=0)
    phi0_rad: Optional[float] = Field(None, ge=0)


class InterferometerSchema(_Strict):
    period_nm: float = Field(gt=0)
    open_fraction_g1: float = Field(gt=0, lt=1)
    open_fraction_g3: float = Field(gt=0, lt=1)
    separation_cm: float = Field(gt=0)
    second_grating: Union[MaterialSchema, LaserGratingSchema] = Field(discriminator="type")


class RecoilLaserSchema(_Strict):
    power_W: float = Field(ge=0)
    wavelength_nm: float = Field(gt=0)
    waist_um: float = Field(gt=0)
    distance_cm: Optional[float] = Field(None, gt=0)
    shift_periods: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_placement(self):
        if (self.distance_cm is None) == (self.shift_periods is None):
            raise ValueError("give exactly one of distance_cm or shift_periods")
        return self


class BeamSchema(_Strict):
    mean_velocity_m_per_s: float = Field(gt=0)
    relative_width: float = Field(0.0, ge=0, lt=0.2)
    node_count: int = Field(64, ge=1)
    truncation: float = Field(5.0, gt=0)


class ProtocolSchema(_Strict):
    power_max_W: float = Field(1.0, gt=0)
    power_steps: int = Field(20, ge=3)
    positions_per_scan: int = Field(100, ge=8)
    scan_span_periods: float = Field(5.0, gt=0)
    molecules_per_sample: int = Field(10_000, gt=0)


class ConfigSchema(_Strict):
    molecule: MoleculeSchema
    interferometer: InterferometerSchema
    recoil_laser: Optional[RecoilLaserSchema] = None
    beam: BeamSchema
    protocol: ProtocolSchema = ProtocolSchema()


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"] if not str(p).startswith(("function-", "tagged-union")))
        lines.append(f"{loc or '<root>'}: {err['msg']}")
    return "; ".join(lines)


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def config_hash(echo: dict) -> str:
    """sha256 of the canonical JSON form of a resolved configuration."""
    blob = json.dumps(echo, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ResolvedConfig:
    """Validated configuration in SI units plus its canonical echo."""

    molecule: Molecule
    interferometer: InterferometerConfig
    beam: VelocityModel
    protocol: ScanProtocol
    echo: dict
    sha256: str

    @property
    def mean_v(self) -> float:
        return self.beam.mean_v

    @property
    def recoil_laser(self) -> Optional[RecoilLaser]:
        return self.interferometer.recoil_laser

    def with_shift(self, shift_periods: float) -> "ResolvedConfig":
        """Same setup with the recoil laser moved to give the requested shift at v_bar."""
        echo = json.loads(json.dumps(self.echo))
        rl = echo.get("recoil_laser")
        if rl is None:
            raise ConfigError("recoil_laser: required to set a shift")
        rl.pop("distance_cm", None)
        rl["shift_periods"] = shift_periods
        return config_from_dict(echo)

    def with_width(self, relative_width: float) -> "ResolvedConfig":
        echo = json.loads(json.dumps(self.echo))
        echo["beam"]["relative_width"] = relative_width
        return config_from_dict(echo)


def _resolve_spectrum_path(name: str, base_dir: Optional[Path]) -> Path:
    p = Path(name)
    candidates = [p] if p.is_absolute() else [(base_dir or Path.cwd()) / p, DATA_DIR / p]
    for c in candidates:
        if c.is_file():
            return c.resolve()
    raise ConfigError(f"molecule.fluorescence_spectrum: file not found: {name}")


def _build(doc: ConfigSchema, base_dir: Optional[Path]) -> ResolvedConfig:
    m = doc.molecule
    spectrum: Optional[SpectrumTable] = None
    echo = doc.model_dump(mode="json")
    if m.fluorescence_spectrum:
        path = _resolve_spectrum_path(m.fluorescence_spectrum, base_dir)
        try:
            spectrum = load_spectrum(path)
        except DomainError as exc:
            raise ConfigError(f"molecule.fluorescence_spectrum: {exc}") from exc
        echo["molecule"]["fluorescence_spectrum"] = str(path)
        echo["molecule"]["fluorescence_spectrum_sha256"] = _sha256_file(path)

    molecule = Molecule(
        mass=amu_to_kg(m.mass_amu),
        polarizability_volume=a3_to_m3(m.polarizability_A3),
        sigma_abs=a2_to_m2(m.sigma_abs_A2),
        sigma_abs_grating=a2_to_m2(m.sigma_abs_grating_A2),
        p_fluo=m.p_fluo,
        fluorescence_spectrum=spectrum,
        heat_capacity=m.heat_capacity_J_per_K,
        name=m.name,
    )
    b = doc.beam
    try:
        beam = VelocityModel(b.mean_velocity_m_per_s, b.relative_width, b.node_count, b.truncation)
    except DomainError as exc:
        raise ConfigError(f"beam: {exc}") from exc

    ifm = doc.interferometer
    d = ifm.period_nm * NM
    L = ifm.separation_cm * CM
    g2 = ifm.second_grating
    if isinstance(g2, MaterialSchema):
        second = MaterialGrating(g2.open_fraction)
    else:
        laser = GratingLaser(g2.power_W, g2.wavelength_nm * NM, g2.waist_um * UM)
        if abs(laser.wavelength - 2 * d) > 1e-9 * laser.wavelength:
            raise ConfigError(
                "interferometer.second_grating.wavelength_nm: must equal twice period_nm "
                f"({2 * ifm.period_nm:g} nm)"
            )
        second = LaserPhaseGrating(laser, g2.phi0_rad, b.mean_velocity_m_per_s if g2.phi0_rad is not None else None)

    lam_db = de_broglie(molecule, beam.mean_v)
    recoil = None
    rl = doc.recoil_laser
    if rl is not None:
        lam_l = rl.wavelength_nm * NM
        if not validate_wavelength_bound(lam_l, lam_db, L, d):
            raise ConfigError(
                f"recoil_laser.wavelength_nm: {rl.wavelength_nm:g} nm exceeds the bound "
                f"lambda_dB L / d = {lam_db * L / d / NM:.4g} nm; no shift below one period is possible"
            )
        D = rl.distance_cm * CM if rl.distance_cm is not None else rl.shift_periods * d * lam_l / lam_db
        if not D < L:
            raise ConfigError(
                f"recoil_laser: distance {D / CM:.4g} cm must be smaller than separation_cm ({ifm.separation_cm:g})"
            )
        s = recoil_shift(lam_db, lam_l, D)
        if s > d * (1 + 1e-12):
            raise ConfigError(
                f"recoil_laser: shift s(v_bar) = {s / d:.4g} periods exceeds one period; "
                "fringe assignment would be ambiguous"
            )
        recoil = RecoilLaser(rl.power_W, lam_l, rl.waist_um * UM, D)

    try:
        interferometer = InterferometerConfig(d, ifm.open_fraction_g1, ifm.open_fraction_g3, second, L, recoil)
    except DomainError as exc:
        raise ConfigError(f"interferometer: {exc}") from exc

    pr = doc.protocol
    protocol = ScanProtocol.ramp(
        pr.power_max_W,
        pr.power_steps,
        positions_per_scan=pr.positions_per_scan,
        scan_span=pr.scan_span_periods,
        molecules_per_sample=pr.molecules_per_sample,
    )
    if recoil is not None:
        n0_max = mean_photon_number(molecule, replace(recoil, power=pr.power_max_W), beam.mean_v)
        if n0_max > 1:
            warnings.warn(
                f"protocol.power_max_W: n0 at full power is {n0_max:.3g} > 1; "
                "multi-photon events contribute",
                PhysicsWarning,
                stacklevel=3,
            )
    return ResolvedConfig(molecule, interferometer, beam, protocol, echo, config_hash(echo))


def config_from_dict(data: dict, base_dir: Optional[Path] = None) -> ResolvedConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>: configuration must be a mapping")
    clean = dict(data)
    mol = clean.get("molecule")
    if isinstance(mol, dict) and "fluorescence_spectrum_sha256" in mol:
        mol = dict(mol)
        digest = mol.pop("fluorescence_spectrum_sha256")
        clean["molecule"] = mol
    else:
        digest = None
    try:
        doc = ConfigSchema.model_validate(clean)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    resolved = _build(doc, base_dir)
    if digest is not None and resolved.echo["molecule"].get("fluorescence_spectrum_sha256") != digest:
        raise ConfigError("molecule.fluorescence_spectrum: file content differs from the recorded hash")
    return resolved


def load_config(path) -> ResolvedConfig:
    """Read and validate a YAML configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return config_from_dict(data, path.parent)


def parse_protocol_override(text: str, base: ScanProtocol, seed: int) -> ScanProtocol:
    """Protocol from a YAML file path or inline ``key=value,key=value`` pairs.

    Keys are those of the ``protocol`` section of a configuration file.
    """
    p = Path(text)
    if p.is_file():
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"--protocol: not valid YAML ({exc})") from None
        data = data.get("protocol", data)
    else:
        data = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            if "=" not in item:
                raise ConfigError(f"--protocol: expected key=value, got {item!r}")
            k, v = item.split("=", 1)
            data[k.strip()] = yaml.safe_load(v)
    current = {
        "power_max_W": base.power_steps[-1],
        "power_steps": len(base.power_steps),
        "positions_per_scan": base.positions_per_scan,
        "scan_span_periods": base.scan_span,
        "molecules_per_sample": base.molecules_per_sample,
    }
    try:
        pr = ProtocolSchema.model_validate({**current, **data})
    except ValidationError as exc:
        raise ConfigError("protocol." + _format_errors(exc)) from None
    return ScanProtocol.ramp(
        pr.power_max_W,
        pr.power_steps,
        positions_per_scan=pr.positions_per_scan,
        scan_span=pr.scan_span_periods,
        molecules_per_sample=pr.molecules_per_sample,
        seed=seed,
    )
