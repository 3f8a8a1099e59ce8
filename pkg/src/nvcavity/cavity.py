"""Fabry-Perot relations: FSR, finesse, linewidth, Gaussian mode geometry,
coupling rate from geometry, pump standing-wave modulation, outcoupling.

The loss-rate convention is finesse = 2*pi / (total round-trip loss), which
ties kappa = 2*pi*c/(2*l*F) to the quoted linewidths used everywhere else.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT, TWO_PI
from .errors import ValidationError


@dataclass(frozen=True)
class CavityGeometry:
    """Plano-concave geometry; lengths in meters. Crater fields are informational."""

    roc: float
    effective_length: float
    wavelength: float
    crater_diameter: float = None
    crater_depth: float = None

    def __post_init__(self):
        if not 0 < self.effective_length < self.roc:
            raise ValidationError(
                f"unstable geometry: need 0 < l < roc, got l={self.effective_length}, "
                f"roc={self.roc}"
            )
        if not self.wavelength > 0:
            raise ValidationError("wavelength must be > 0")


@dataclass(frozen=True)
class MirrorLossBudget:
    """Per-round-trip loss channels; transmissions tabulated against wavelength.

    ``wavelengths_m`` with parallel ``t_plane``, ``t_fiber``, ``absorption``
    arrays (dimensionless fractions) are linearly interpolated; out-of-range
    queries clamp to the table edges. ``scatter_loss`` is a flat extra loss,
    e.g. from a scatterer sitting in the mode.
    """

    wavelengths_m: tuple
    t_plane: tuple
    t_fiber: tuple
    absorption: tuple
    scatter_loss: float = 0.0

    def __post_init__(self):
        n = len(self.wavelengths_m)
        if not (len(self.t_plane) == len(self.t_fiber) == len(self.absorption) == n) or n == 0:
            raise ValidationError("loss tables must be non-empty and of equal length")
        for name in ("t_plane", "t_fiber", "absorption"):
            vals = getattr(self, name)
            if any(not 0 <= v < 1 for v in vals):
                raise ValidationError(f"{name} entries must lie in [0, 1)")
        if not 0 <= self.scatter_loss < 1:
            raise ValidationError("scatter_loss must lie in [0, 1)")
        if any(b <= a for a, b in zip(self.wavelengths_m, self.wavelengths_m[1:])):
            raise ValidationError("loss-table wavelengths must be strictly increasing")

    def _interp(self, table, lam):
        return np.interp(lam, self.wavelengths_m, table)

    def t_plane_at(self, lam):
        return self._interp(self.t_plane, lam)

    def t_fiber_at(self, lam):
        return self._interp(self.t_fiber, lam)

    def absorption_at(self, lam):
        return self._interp(self.absorption, lam)

    def total_loss(self, lam):
        return (
            self.t_plane_at(lam) + self.t_fiber_at(lam) + self.absorption_at(lam)
            + self.scatter_loss
        )

    def with_scatter(self, scatter_loss):
        return MirrorLossBudget(
            self.wavelengths_m, self.t_plane, self.t_fiber, self.absorption, scatter_loss
        )


@dataclass(frozen=True)
class PumpModulation:
    """Standing-wave modulation of the excitation intensity inside the cavity."""

    pump_wavelength: float = 532e-9
    visibility: float = 0.0
    phase_offset: float = 0.0

    def __post_init__(self):
        if not 0 <= self.visibility <= 1:
            raise ValidationError("visibility must lie in [0, 1]")
        if not self.pump_wavelength > 0:
            raise ValidationError("pump wavelength must be > 0")


def fsr_from_length(effective_length):
    """Free spectral range c/(2l), ordinary Hz."""
    if not effective_length > 0:
        raise ValidationError("length must be > 0")
    return C_LIGHT / (2.0 * effective_length)


def length_from_fsr(fsr):
    """Effective cavity length from a measured free spectral range."""
    if not fsr > 0:
        raise ValidationError("FSR must be > 0")
    return C_LIGHT / (2.0 * fsr)


def linewidth(effective_length, finesse):
    """(FWHM linewidth in Hz, angular loss rate kappa in rad/s)."""
    if not (effective_length > 0 and finesse > 0):
        raise ValidationError("length and finesse must be > 0")
    delta_nu = C_LIGHT / (2.0 * effective_length * finesse)
    return delta_nu, TWO_PI * delta_nu


def length_from_linewidth(delta_nu, finesse):
    """Effective length that gives FWHM linewidth delta_nu at the given finesse."""
    return C_LIGHT / (2.0 * delta_nu * finesse)


def finesse_from_losses(budget, lam):
    """F(lambda) = 2*pi / total round-trip loss."""
    loss = budget.total_loss(lam)
    if np.any(loss >= 1.0):
        raise ValidationError("total round-trip loss must be < 1")
    if np.any(loss <= 0.0):
        raise ValidationError("total round-trip loss must be > 0")
    return TWO_PI / loss


def mode_geometry(geometry):
    """(waist w0, mode volume V) of the plano-concave Gaussian standing-wave mode.

    w0^2 = (lambda/pi) * sqrt(l*(roc - l)) and V = (pi/4) * w0^2 * l.
    """
    l, roc, lam = geometry.effective_length, geometry.roc, geometry.wavelength
    w0_sq = (lam / math.pi) * math.sqrt(l * (roc - l))
    volume = (math.pi / 4.0) * w0_sq * l
    return math.sqrt(w0_sq), volume


def coupling_rate(mode_volume, lam, gamma_branch, field_factor=1.0):
    """Emitter-cavity coupling from the vacuum field in a mode of volume V.

    g = field_factor * sqrt(3*c*lambda^2*gamma_branch / (8*pi*V)); the
    field factor in [0, 1] absorbs emitter position and dipole orientation.
    """
    if not (mode_volume > 0 and gamma_branch >= 0):
        raise ValidationError("mode volume must be > 0 and branch rate >= 0")
    if not 0 <= field_factor <= 1:
        raise ValidationError("field_factor must lie in [0, 1]")
    return field_factor * math.sqrt(
        3.0 * C_LIGHT * lam**2 * gamma_branch / (8.0 * math.pi * mode_volume)
    )


def pump_modulation_factor(effective_length, modulation):
    """Relative excitation intensity 1 + V*cos(4*pi*l/lambda_p + phi0).

    Periodic in the cavity length with period lambda_p/2.
    """
    return 1.0 + modulation.visibility * np.cos(
        4.0 * math.pi * np.asarray(effective_length) / modulation.pump_wavelength
        + modulation.phase_offset
    )


def outcoupling_efficiency(budget, lam, mode_match=1.0):
    """Fraction of cavity photons leaving through the fiber mirror into the fiber."""
    if not 0 <= mode_match <= 1:
        raise ValidationError("mode_match must lie in [0, 1]")
    return budget.t_fiber_at(lam) / budget.total_loss(lam) * mode_match
