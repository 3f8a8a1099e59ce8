"""Domain model: vibronic emitter, cavity mode, coupled system.

All values are immutable after construction. Constructors enforce local
invariants (positivity, ordering); cross-object consistency is checked by
:func:`validate_system`, which reports violations instead of raising so
that diagnostic tooling can inspect deliberately broken systems.
"""

import math
from dataclasses import dataclass, field

from .constants import C_LIGHT, TWO_PI
from .errors import CalibrationError, ValidationError

KAPPA_CONSISTENCY_RTOL = 1e-6
GAMMA_SUM_RTOL = 1e-12
DEFAULT_RELAXATION_FLOOR = 1e9  # rad/s; guards against fit noise in sideband widths


@dataclass(frozen=True)
class VibronicLevel:
    """One ground level |g_i>: vibrational energy and the rates feeding/draining it.

    ``energy`` is the level's angular frequency offset above |g_0> (so
    energy == 0 for the zero-phonon level), ``radiative_rate`` the
    spontaneous branch |e> -> |g_i>, and ``phonon_relaxation`` the decay
    |g_i> -> |g_{i-1}| (zero for i = 0).
    """

    index: int
    energy: float
    radiative_rate: float
    phonon_relaxation: float = 0.0

    def __post_init__(self):
        if self.index < 0:
            raise ValidationError("level index must be >= 0")
        if self.radiative_rate < 0:
            raise ValidationError(f"radiative rate must be >= 0, got {self.radiative_rate}")
        if self.index == 0:
            if self.energy != 0.0:
                raise ValidationError("level 0 must sit at energy 0")
            if self.phonon_relaxation != 0.0:
                raise ValidationError("level 0 has no phonon relaxation channel")
        else:
            if not self.energy > 0:
                raise ValidationError("sideband level energies must be > 0")
            if not self.phonon_relaxation > 0:
                raise ValidationError("sideband levels must relax at a positive rate")


@dataclass(frozen=True)
class EmitterModel:
    """Excited state plus n+1 vibronic ground levels with pure dephasing."""

    zpl_frequency: float
    levels: tuple
    pure_dephasing: float
    total_radiative: float = field(init=False)

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) < 1:
            raise ValidationError("emitter needs at least the zero-phonon level")
        if self.pure_dephasing < 0:
            raise ValidationError("pure dephasing rate must be >= 0")
        if not self.zpl_frequency > 0:
            raise ValidationError("ZPL frequency must be > 0")
        energies = [lv.energy for lv in levels]
        for i, lv in enumerate(levels):
            if lv.index != i:
                raise ValidationError("level indices must be 0..n in order")
        if any(b <= a for a, b in zip(energies, energies[1:])):
            raise ValidationError("level energies must be strictly increasing")
        gamma = math.fsum(lv.radiative_rate for lv in levels)
        if not gamma > 0:
            raise ValidationError("total radiative rate must be > 0")
        object.__setattr__(self, "total_radiative", gamma)

    @property
    def n_sidebands(self):
        return len(self.levels) - 1

    def transition_frequency(self, i):
        """Angular frequency of the |e> -> |g_i> emission line."""
        return self.zpl_frequency - self.levels[i].energy

    def branching_fractions(self):
        g = self.total_radiative
        return tuple(lv.radiative_rate / g for lv in self.levels)


@dataclass(frozen=True)
class CavityMode:
    """One longitudinal resonance: frequency, energy loss rate, geometry bookkeeping.

    ``loss_rate`` is the angular energy decay rate kappa = 2*pi * c/(2*l*F).
    ``effective_length`` and ``finesse`` are optional metadata; when both are
    present, :func:`validate_system` checks them against kappa.
    """

    resonance: float
    loss_rate: float
    effective_length: float = None
    finesse: float = None
    mode_number: int = None

    def __post_init__(self):
        if not self.loss_rate > 0:
            raise ValidationError("cavity loss rate must be > 0")
        if not self.resonance > 0:
            raise ValidationError("cavity resonance must be > 0")
        if self.effective_length is not None and not self.effective_length > 0:
            raise ValidationError("effective length must be > 0")
        if self.finesse is not None and not self.finesse > 0:
            raise ValidationError("finesse must be > 0")

    @classmethod
    def from_length_finesse(cls, effective_length, finesse, resonance, mode_number=None):
        kappa = TWO_PI * C_LIGHT / (2.0 * effective_length * finesse)
        return cls(resonance, kappa, effective_length, finesse, mode_number)

    @property
    def wavelength(self):
        return TWO_PI * C_LIGHT / self.resonance

    @property
    def free_spectral_range(self):
        """Ordinary FSR in Hz; requires effective_length."""
        return C_LIGHT / (2.0 * self.effective_length)

    @property
    def linewidth_fwhm(self):
        """Ordinary FWHM linewidth in Hz."""
        return self.loss_rate / TWO_PI


@dataclass(frozen=True)
class CoupledSystem:
    """Emitter, cavity, and one coupling rate g_i per vibronic branch."""

    emitter: EmitterModel
    cavity: CavityMode
    couplings: tuple

    def __post_init__(self):
        couplings = tuple(float(g) for g in self.couplings)
        object.__setattr__(self, "couplings", couplings)
        if any(g < 0 for g in couplings):
            raise ValidationError("coupling rates must be >= 0")

    def detunings(self):
        """Per-branch detunings delta_i = (omega_ZPL - omega_i) - omega_c."""
        wc = self.cavity.resonance
        return tuple(
            self.emitter.transition_frequency(i) - wc for i in range(len(self.emitter.levels))
        )

    def retuned(self, resonance=None, loss_rate=None):
        """Copy of the system with the cavity moved and/or its loss changed."""
        cav = self.cavity
        return CoupledSystem(
            self.emitter,
            CavityMode(
                resonance if resonance is not None else cav.resonance,
                loss_rate if loss_rate is not None else cav.loss_rate,
                cav.effective_length,
                cav.finesse,
                cav.mode_number,
            ),
            self.couplings,
        )


@dataclass(frozen=True)
class SaturationParams:
    """Saturation count rate (counts/s) and saturation power (W)."""

    saturation_rate: float
    saturation_power: float

    def __post_init__(self):
        if not self.saturation_rate > 0:
            raise ValidationError("saturation rate must be > 0")
        if not self.saturation_power > 0:
            raise ValidationError("saturation power must be > 0")


def build_emitter_from_peaks(
    peaks,
    total_gamma,
    zpl_index,
    gamma_star=None,
    relaxation_floor=DEFAULT_RELAXATION_FLOOR,
):
    """Calibrate an EmitterModel from a fitted Lorentzian decomposition.

    Level energies are the peak-center offsets below the ZPL line, branch
    rates split ``total_gamma`` by peak area, and each sideband's phonon
    relaxation is its FWHM minus the pure-dephasing width (floored at
    ``relaxation_floor`` to absorb fit noise). ``gamma_star`` defaults to
    the ZPL peak's FWHM.

    Raises CalibrationError when a sideband is narrower than the dephasing
    width it is supposed to contain, or when any peak lies blue of the ZPL.
    """
    peaks = list(peaks)
    if not peaks:
        raise ValidationError("need at least one peak")
    if not 0 <= zpl_index < len(peaks):
        raise ValidationError(f"zpl_index {zpl_index} out of range for {len(peaks)} peaks")
    if not total_gamma > 0:
        raise ValidationError("total_gamma must be > 0")
    centers = [p.center for p in peaks]
    if len(set(centers)) != len(centers):
        raise ValidationError("peak centers must be distinct")
    for p in peaks:
        if p.area <= 0:
            raise ValidationError("peak areas must be positive")

    zpl = peaks[zpl_index]
    if gamma_star is None:
        gamma_star = zpl.fwhm
    if gamma_star < 0:
        raise ValidationError("gamma_star must be >= 0")

    total_area = math.fsum(p.area for p in peaks)
    sidebands = sorted(
        (p for k, p in enumerate(peaks) if k != zpl_index), key=lambda p: zpl.center - p.center
    )
    levels = [VibronicLevel(0, 0.0, total_gamma * zpl.area / total_area, 0.0)]
    for i, p in enumerate(sidebands, start=1):
        offset = zpl.center - p.center
        if offset <= 0:
            raise CalibrationError(
                f"peak at {p.center_nm:.1f} nm lies blue of the ZPL; not a vibronic sideband"
            )
        if p.fwhm < gamma_star:
            raise CalibrationError(
                f"sideband at {p.center_nm:.1f} nm is narrower ({p.fwhm:.3g}) than the "
                f"dephasing width {gamma_star:.3g}; calibration inconsistent"
            )
        relax = max(p.fwhm - gamma_star, relaxation_floor)
        levels.append(VibronicLevel(i, offset, total_gamma * p.area / total_area, relax))
    return EmitterModel(zpl.center, tuple(levels), gamma_star)


def branch_couplings(emitter, g_zpl):
    """Coupling rate per branch from the ZPL value, scaled by dipole strength.

    g_i = g_zpl * sqrt(gamma_i / gamma_0): the vacuum field is common to all
    branches, so couplings scale with the square root of the branch rate.
    """
    g0 = emitter.levels[0].radiative_rate
    if not g0 > 0:
        raise ValidationError("ZPL branch rate must be > 0 to scale couplings")
    return tuple(g_zpl * math.sqrt(lv.radiative_rate / g0) for lv in emitter.levels)


def validate_system(system):
    """Return a list of invariant violations (empty when the system is valid)."""
    report = []
    em, cav = system.emitter, system.cavity

    if len(system.couplings) != len(em.levels):
        report.append(
            f"couplings length {len(system.couplings)} != number of levels {len(em.levels)}"
        )
    if any(g < 0 for g in system.couplings):
        report.append("negative coupling rate")

    gamma_sum = math.fsum(lv.radiative_rate for lv in em.levels)
    if abs(gamma_sum - em.total_radiative) > GAMMA_SUM_RTOL * gamma_sum:
        report.append("cached total radiative rate disagrees with branch sum")
    energies = [lv.energy for lv in em.levels]
    if energies[0] != 0.0:
        report.append("level 0 energy is not 0")
    if any(b <= a for a, b in zip(energies, energies[1:])):
        report.append("level energies not strictly increasing")
    if em.pure_dephasing < 0:
        report.append("negative pure dephasing rate")

    if cav.loss_rate <= 0:
        report.append("cavity loss rate must be positive")
    if cav.effective_length is not None and cav.finesse is not None:
        kappa_geom = TWO_PI * C_LIGHT / (2.0 * cav.effective_length * cav.finesse)
        if abs(cav.loss_rate - kappa_geom) > KAPPA_CONSISTENCY_RTOL * kappa_geom:
            report.append(
                f"cavity loss rate {cav.loss_rate:.6g} inconsistent with "
                f"2*pi*c/(2*l*F) = {kappa_geom:.6g}"
            )
    return report
