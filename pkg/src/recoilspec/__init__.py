"""Recoil-based absorption spectroscopy in near-field matter-wave interferometers."""

from .beam import averaged_pattern, averaged_reduction, gaussian_weights, spread_error_estimate
from .config import ResolvedConfig, config_from_dict, load_config
from .errors import (
    ConfigError,
    DomainError,
    IdentifiabilityError,
    NumericalError,
    PhysicsWarning,
    RecoilSpecError,
    TruncationWarning,
)
from .estimation import extract_cross_section, extract_fluorescence, fit_record, sine_fit
from .montecarlo import ExperimentRecord, ScanProtocol, run_experiment, sweep_velocity_spread
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
    talbot_length,
)
from .recoil import RecoilChannel, apply_recoil, decoherence_gamma, reduction_factor
from .spectrum import SpectrumTable, load_spectrum
from .talbot import FringeCoefficients, detector_signal, pattern_coefficients, sinusoidal_visibility

__version__ = "0.1.0"
