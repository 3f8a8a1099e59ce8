"""Simulation toolkit for a broadband single-photon emitter coupled to a
fiber Fabry-Perot microcavity, covering the dephasing-assisted feeding
regime at room temperature and the Purcell transition at low dephasing.

All internal rates and frequencies are angular (rad/s); see
``nvcavity.constants`` and the README for the unit conventions.
"""

from .cavity import (
    CavityGeometry,
    MirrorLossBudget,
    PumpModulation,
    coupling_rate,
    finesse_from_losses,
    fsr_from_length,
    length_from_fsr,
    length_from_linewidth,
    linewidth,
    mode_geometry,
    outcoupling_efficiency,
    pump_modulation_factor,
)
from .core import (
    CavityMode,
    CoupledSystem,
    EmitterModel,
    SaturationParams,
    VibronicLevel,
    branch_couplings,
    build_emitter_from_peaks,
    validate_system,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DimensionError,
    StiffnessError,
    ValidationError,
)
from .experiments import (
    dephasing_sweep,
    efficiency_vs_wavelength,
    filtering_baseline,
    predict_count_rate,
    projected_source,
    tuning_spectrum,
)
from .lindblad import (
    Liouvillian,
    QuantumState,
    Trajectory,
    build_liouvillian,
    emission_efficiency_me,
    evolve,
    extract_lifetime,
)
from .photophysics import (
    G2Params,
    ThreeLevelRates,
    fit_g2,
    g2_from_rates,
    g2_model,
    params_from_rates,
    power_dependence,
    rates_from_power_series,
)
from .ratemodel import (
    PurcellEstimate,
    RateModelResult,
    effective_rate,
    emission_efficiencies,
    purcell_estimate,
    saturation_curve,
    spectral_density,
)
from .spectra import LorentzianPeak, branching_ratios, fit_lorentzians, synth_spectrum

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
