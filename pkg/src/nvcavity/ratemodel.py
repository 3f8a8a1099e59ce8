"""Effective-rate description of dephasing-assisted cavity coupling.

Each emitter branch feeds the cavity at a Lorentzian rate

    R_i = [4 g_i^2 / w_i] / [1 + (2 delta_i / w_i)^2],
    w_i = kappa + gamma + gamma_star + gamma_{i,i-1},

with delta_i the detuning of the cavity from that branch's line center.
Emission efficiencies, the cavity-modified lifetime, the broad-emitter
Purcell estimate, and the saturation/spectral-density helpers live here.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

FAST_CAVITY_FACTOR = 10.0


class RateModelValidityWarning(UserWarning):
    """Cavity decay is not fast compared to gamma or the effective rates."""


@dataclass(frozen=True)
class RateModelResult:
    """Per-branch effective rates and efficiencies at one cavity tuning."""

    effective_rates: tuple
    efficiencies: tuple
    total_efficiency: float
    modified_lifetime: float
    cavity_detunings: tuple

    @property
    def rate_sum(self):
        return sum(self.effective_rates)


@dataclass(frozen=True)
class PurcellEstimate:
    factor: float


def _linewidths(system):
    em = system.emitter
    kappa = system.cavity.loss_rate
    gamma = em.total_radiative
    gstar = em.pure_dephasing
    return [kappa + gamma + gstar + lv.phonon_relaxation for lv in em.levels]


def effective_rate(i, system):
    """Effective coupling rate R_i of branch i into the cavity mode."""
    em = system.emitter
    if not 0 <= i < len(em.levels):
        raise ValidationError(f"branch index {i} out of range")
    g = system.couplings[i]
    w = _linewidths(system)[i]
    delta = system.detunings()[i]
    return (4.0 * g * g / w) / (1.0 + (2.0 * delta / w) ** 2)


def emission_efficiencies(system, resonance=None, check_validity=True):
    """Evaluate the rate model at the system's tuning (or at ``resonance``).

    Returns a RateModelResult with P_i = R_i/(gamma + sum R_j), the total
    efficiency, and the modified lifetime 1/(gamma + sum R_j). Warns when
    the fast-cavity validity condition kappa >> gamma, R_i is not met.
    """
    if resonance is not None:
        system = system.retuned(resonance=resonance)
    em = system.emitter
    if len(system.couplings) != len(em.levels):
        raise ValidationError("couplings length must match number of levels")
    gamma = em.total_radiative
    kappa = system.cavity.loss_rate
    widths = _linewidths(system)
    detunings = system.detunings()
    rates = tuple(
        (4.0 * g * g / w) / (1.0 + (2.0 * d / w) ** 2)
        for g, w, d in zip(system.couplings, widths, detunings)
    )
    if check_validity and kappa < FAST_CAVITY_FACTOR * max(gamma, max(rates)):
        warnings.warn(
            f"fast-cavity condition violated: kappa={kappa:.3g} < "
            f"{FAST_CAVITY_FACTOR:g} * max(gamma, R_i)={max(gamma, max(rates)):.3g}",
            RateModelValidityWarning,
            stacklevel=2,
        )
    total_rate = sum(rates)
    denom = gamma + total_rate
    efficiencies = tuple(r / denom for r in rates)
    return RateModelResult(
        effective_rates=rates,
        efficiencies=efficiencies,
        total_efficiency=total_rate / denom,
        modified_lifetime=1.0 / denom,
        cavity_detunings=detunings,
    )


def total_efficiency_curve(system, resonances, check_validity=False):
    """P_tot over a grid of cavity resonance frequencies."""
    return np.array(
        [
            emission_efficiencies(system, resonance=w, check_validity=check_validity
                                  ).total_efficiency
            for w in np.asarray(resonances, dtype=float)
        ]
    )


def purcell_estimate(g, gamma, gamma_star):
    """Broad-emitter Purcell factor 4 g^2 / (gamma * gamma_star)."""
    if not (gamma > 0 and gamma_star > 0):
        raise ValidationError("gamma and gamma_star must be > 0")
    return PurcellEstimate(4.0 * g * g / (gamma * gamma_star))


def saturation_curve(params, power):
    """Expected count rate I(P) = I_inf * P / (P + P_sat)."""
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise ValidationError("power must be >= 0")
    return params.saturation_rate * power / (power + params.saturation_power)


def spectral_density(count_rate, linewidth_ghz):
    """Photon flux per unit bandwidth, photons/(s GHz)."""
    if not linewidth_ghz > 0:
        raise ValidationError("linewidth must be > 0")
    return count_rate / linewidth_ghz
