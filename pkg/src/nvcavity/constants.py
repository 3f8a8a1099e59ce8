"""Physical constants and unit helpers.

Internal convention: every rate and frequency is an angular quantity in
rad/s. Quoted figures like "kappa = 77 GHz" or "gamma* = 15 THz" are
angular rates and map to 77e9 and 15e12 rad/s; ordinary (cycles/s)
linewidths such as a cavity FWHM delta-nu relate to the angular loss rate
by kappa = 2*pi*delta_nu. The I/O layer owns all conversions; see
``nvcavity.config`` for the ``units`` flag.
"""

import math

C_LIGHT = 299_792_458.0  # m/s

GHZ = 1e9
THZ = 1e12
NM = 1e-9
UM = 1e-6

TWO_PI = 2.0 * math.pi


def omega_from_wavelength(lambda_m):
    """Angular frequency (rad/s) of light with vacuum wavelength lambda_m."""
    return TWO_PI * C_LIGHT / lambda_m


def wavelength_from_omega(omega):
    """Vacuum wavelength (m) for angular frequency omega (rad/s)."""
    return TWO_PI * C_LIGHT / omega


def nu_from_wavelength(lambda_m):
    """Ordinary frequency (Hz) for vacuum wavelength lambda_m."""
    return C_LIGHT / lambda_m
