"""Shipped calibration assets and convenience system builders."""

from importlib import resources

import numpy as np

from .cavity import MirrorLossBudget
from .constants import NM, omega_from_wavelength
from .core import CavityMode, CoupledSystem, branch_couplings, build_emitter_from_peaks
from .io import load_csv_series
from .spectra import LorentzianPeak

PAPER_TOTAL_GAMMA = 35e6  # rad/s
PAPER_G_ZPL = 1.1e9  # rad/s
PAPER_SCATTER_LOSS = 0.0054


def _data_path(name):
    return resources.files("nvcavity.data").joinpath(name)


def default_peaks():
    """The shipped 8-line emitter decomposition as LorentzianPeak objects."""
    with resources.as_file(_data_path("nv_default_peaks.csv")) as path:
        cols = load_csv_series(path, ("center_nm", "fwhm_THz", "area"))
    return [
        LorentzianPeak.from_nm(c, w, a)
        for c, w, a in zip(cols["center_nm"], cols["fwhm_THz"], cols["area"])
    ]


def default_loss_budget(scatter_loss=0.0):
    """The shipped mirror loss table, optionally with extra scattering loss."""
    with resources.as_file(_data_path("mirror_losses.csv")) as path:
        cols = load_csv_series(
            path, ("lambda_nm", "t_plane_ppm", "t_fiber_ppm", "absorption_ppm")
        )
    return MirrorLossBudget(
        wavelengths_m=tuple(cols["lambda_nm"] * NM),
        t_plane=tuple(cols["t_plane_ppm"] * 1e-6),
        t_fiber=tuple(cols["t_fiber_ppm"] * 1e-6),
        absorption=tuple(cols["absorption_ppm"] * 1e-6),
        scatter_loss=scatter_loss,
    )


def default_emitter(total_gamma=PAPER_TOTAL_GAMMA, gamma_star=None):
    """Emitter calibrated from the shipped peak table."""
    return build_emitter_from_peaks(
        default_peaks(), total_gamma, zpl_index=0, gamma_star=gamma_star
    )


def reference_system(
    tune_nm=639.0,
    effective_length=3.5e-6,
    finesse=3500.0,
    g_zpl=PAPER_G_ZPL,
    gamma_star=None,
    emitter=None,
    mode_number=None,
):
    """Coupled system with the shipped emitter and a (length, finesse) cavity."""
    if emitter is None:
        emitter = default_emitter(gamma_star=gamma_star)
    cavity = CavityMode.from_length_finesse(
        effective_length, finesse, omega_from_wavelength(tune_nm * NM), mode_number
    )
    return CoupledSystem(emitter, cavity, branch_couplings(emitter, g_zpl))


def zpl_reduced_system(system):
    """Two-level reduction: all radiative decay lumped into the ZPL branch.

    Keeps gamma (total decay) and the ZPL coupling, drops the sidebands.
    Used to make master-equation cross-checks tractable: sideband channels
    are orders of magnitude stiffer and contribute less than a percent to
    the ZPL-tuned rates.
    """
    from .core import EmitterModel, VibronicLevel

    em = system.emitter
    reduced = EmitterModel(
        zpl_frequency=em.zpl_frequency,
        levels=(VibronicLevel(0, 0.0, em.total_radiative, 0.0),),
        pure_dephasing=em.pure_dephasing,
    )
    return CoupledSystem(reduced, system.cavity, (system.couplings[0],))


def wavelength_grid(lambda_min_nm, lambda_max_nm, points):
    """Angular-frequency grid corresponding to an inclusive wavelength range."""
    lam = np.linspace(lambda_min_nm, lambda_max_nm, points) * NM
    return lam, omega_from_wavelength(lam)
