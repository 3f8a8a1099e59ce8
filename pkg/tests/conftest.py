import numpy as np
import pytest

from nvcavity.constants import NM, omega_from_wavelength
from nvcavity.core import CavityMode, CoupledSystem, EmitterModel, VibronicLevel, branch_couplings
from nvcavity.lindblad import _observable_rows
from nvcavity.presets import (
    default_emitter,
    default_loss_budget,
    default_peaks,
    reference_system,
    zpl_reduced_system,
)

PAPER_GAMMA = 35e6
PAPER_G = 1.1e9
PAPER_KAPPA = 7.7e10
PAPER_GAMMA_STAR = 15e12


@pytest.fixture(scope="session")
def nv_peaks():
    return default_peaks()


@pytest.fixture(scope="session")
def nv_emitter():
    return default_emitter()


@pytest.fixture(scope="session")
def paper_system():
    """Calibrated emitter, cavity on the ZPL with kappa = 77 GHz (F = 3500)."""
    return reference_system()


@pytest.fixture(scope="session")
def loaded_budget():
    """Loss budget including the nanodiamond scattering loss."""
    return default_loss_budget(scatter_loss=0.0054)


@pytest.fixture(scope="session")
def clean_budget():
    return default_loss_budget()


def make_two_level_system(gamma=PAPER_GAMMA, g=PAPER_G, kappa=PAPER_KAPPA,
                          gamma_star=0.0, detuning=0.0):
    """Minimal system: one radiative branch, cavity detuned by ``detuning``."""
    zpl = omega_from_wavelength(639.0 * NM)
    emitter = EmitterModel(zpl, (VibronicLevel(0, 0.0, gamma, 0.0),), gamma_star)
    cavity = CavityMode(zpl - detuning, kappa)
    return CoupledSystem(emitter, cavity, (g,))


def make_sideband_system(gamma0=0.6e9, gamma1=0.4e9, relax=4e11, offset=1.5e12,
                         g_zpl=5e9, kappa=77e9, gamma_star=7.7e12, detuning=0.0):
    """Small two-branch system with mild stiffness for master-equation checks."""
    zpl = omega_from_wavelength(639.0 * NM)
    emitter = EmitterModel(
        zpl,
        (VibronicLevel(0, 0.0, gamma0, 0.0), VibronicLevel(1, offset, gamma1, relax)),
        gamma_star,
    )
    cavity = CavityMode(zpl - detuning, kappa)
    return CoupledSystem(emitter, cavity, branch_couplings(emitter, g_zpl))


def efficiency_by_eig(liouv, initial=None):
    """Oracle: kappa * integral of <a'a> dt via the generator's eigenmodes.

    Independent of the time stepper: expands the initial state in
    eigenmodes and integrates each decaying mode analytically.
    """
    gen = liouv.generator
    vals, vecs = np.linalg.eig(gen)
    rho0 = (initial or liouv.excited_vacuum()).density_matrix.reshape(-1)
    coeffs = np.linalg.solve(vecs, rho0)
    _, row_n, _ = _observable_rows(liouv)
    weights = row_n @ vecs
    scale = np.abs(vals).max()
    mask = np.abs(vals) > 1e-10 * scale
    integral = -np.sum(weights[mask] * coeffs[mask] / vals[mask])
    return float((liouv.system.cavity.loss_rate * integral).real)


__all__ = [
    "make_two_level_system",
    "make_sideband_system",
    "efficiency_by_eig",
    "zpl_reduced_system",
]
