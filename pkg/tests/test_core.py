import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvcavity.constants import C_LIGHT, NM, TWO_PI, omega_from_wavelength
from nvcavity.core import (
    CavityMode,
    CoupledSystem,
    EmitterModel,
    SaturationParams,
    VibronicLevel,
    branch_couplings,
    build_emitter_from_peaks,
    validate_system,
)
from nvcavity.errors import CalibrationError, ValidationError
from nvcavity.spectra import LorentzianPeak

from conftest import PAPER_GAMMA


class TestBuildEmitterFromPeaks:
    def test_nv_default_table(self, nv_peaks):
        em = build_emitter_from_peaks(nv_peaks, PAPER_GAMMA, zpl_index=0)
        assert em.n_sidebands == 7
        assert em.pure_dephasing == pytest.approx(15e12)
        relax = [lv.phonon_relaxation for lv in em.levels[1:]]
        assert all(65e12 <= r <= 88e12 for r in relax)
        assert em.total_radiative == pytest.approx(PAPER_GAMMA, rel=1e-12)
        energies = [lv.energy for lv in em.levels]
        assert energies[0] == 0.0
        assert all(b > a for a, b in zip(energies, energies[1:]))

    def test_single_peak_degenerates_to_two_level(self):
        peak = LorentzianPeak.from_nm(639.0, 15.0, 1.0)
        em = build_emitter_from_peaks([peak], 2e7, zpl_index=0)
        assert em.n_sidebands == 0
        assert em.levels[0].radiative_rate == pytest.approx(2e7)

    def test_two_equal_areas_split_evenly(self):
        peaks = [
            LorentzianPeak.from_nm(639.0, 15.0, 0.5),
            LorentzianPeak.from_nm(670.0, 80.0, 0.5),
        ]
        em = build_emitter_from_peaks(peaks, 4e7, zpl_index=0)
        assert em.levels[0].radiative_rate == pytest.approx(2e7)
        assert em.levels[1].radiative_rate == pytest.approx(2e7)

    def test_sideband_narrower_than_dephasing_rejected(self):
        peaks = [
            LorentzianPeak.from_nm(639.0, 15.0, 0.5),
            LorentzianPeak.from_nm(670.0, 10.0, 0.5),
        ]
        with pytest.raises(CalibrationError):
            build_emitter_from_peaks(peaks, 4e7, zpl_index=0)

    def test_blue_peak_rejected(self):
        peaks = [
            LorentzianPeak.from_nm(639.0, 15.0, 0.5),
            LorentzianPeak.from_nm(620.0, 80.0, 0.5),
        ]
        with pytest.raises(CalibrationError):
            build_emitter_from_peaks(peaks, 4e7, zpl_index=0)

    def test_negative_area_rejected_at_peak_construction(self):
        with pytest.raises(ValidationError):
            LorentzianPeak.from_nm(639.0, 15.0, -1.0)

    def test_relaxation_floor_applied(self):
        peaks = [
            LorentzianPeak.from_nm(639.0, 15.0, 0.5),
            # barely wider than the dephasing width: relaxation floors at 1 GHz
            LorentzianPeak.from_nm(670.0, 15.0 + 1e-4, 0.5),
        ]
        em = build_emitter_from_peaks(peaks, 4e7, zpl_index=0)
        assert em.levels[1].phonon_relaxation == pytest.approx(1e9)

    def test_explicit_gamma_star_override(self, nv_peaks):
        em = build_emitter_from_peaks(nv_peaks, PAPER_GAMMA, zpl_index=0, gamma_star=1e12)
        assert em.pure_dephasing == 1e12
        assert em.levels[1].phonon_relaxation == pytest.approx(80e12 - 1e12)

    @given(
        areas=st.lists(st.floats(0.01, 10.0), min_size=1, max_size=9),
        total=st.floats(1e5, 1e9),
    )
    @settings(max_examples=50, deadline=None)
    def test_branch_rates_sum_to_total(self, areas, total):
        peaks = [LorentzianPeak.from_nm(639.0, 15.0, areas[0])] + [
            LorentzianPeak.from_nm(650.0 + 12.0 * i, 80.0, a)
            for i, a in enumerate(areas[1:])
        ]
        em = build_emitter_from_peaks(peaks, total, zpl_index=0)
        assert math.fsum(lv.radiative_rate for lv in em.levels) == pytest.approx(
            total, rel=1e-12
        )
        assert em.total_radiative == pytest.approx(total, rel=1e-12)


class TestVibronicLevel:
    def test_level_zero_constraints(self):
        with pytest.raises(ValidationError):
            VibronicLevel(0, 1.0, 1e6, 0.0)
        with pytest.raises(ValidationError):
            VibronicLevel(0, 0.0, 1e6, 1e9)

    def test_sideband_needs_positive_relaxation(self):
        with pytest.raises(ValidationError):
            VibronicLevel(1, 1e12, 1e6, 0.0)


class TestCavityMode:
    def test_from_length_finesse_consistency(self):
        cav = CavityMode.from_length_finesse(3.5e-6, 3500.0, omega_from_wavelength(639 * NM))
        expected = TWO_PI * C_LIGHT / (2 * 3.5e-6 * 3500.0)
        assert cav.loss_rate == pytest.approx(expected, rel=1e-12)

    def test_roundtrip_through_fsr_and_linewidth(self):
        cav = CavityMode.from_length_finesse(3.5e-6, 940.0, omega_from_wavelength(639 * NM))
        fsr, dnu = cav.free_spectral_range, cav.linewidth_fwhm
        rebuilt = CavityMode.from_length_finesse(
            C_LIGHT / (2 * fsr), fsr / dnu, cav.resonance
        )
        assert rebuilt.loss_rate == pytest.approx(cav.loss_rate, rel=1e-9)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            CavityMode(omega_from_wavelength(639 * NM), 0.0)
        with pytest.raises(ValidationError):
            CavityMode.from_length_finesse(3.5e-6, -10.0, omega_from_wavelength(639 * NM))


class TestValidateSystem:
    def test_valid_reference_configuration(self, paper_system):
        assert validate_system(paper_system) == []

    def test_coupling_length_mismatch_reported(self, paper_system):
        broken = CoupledSystem(
            paper_system.emitter, paper_system.cavity, paper_system.couplings[:-1]
        )
        report = validate_system(broken)
        assert any("couplings length" in line for line in report)

    def test_kappa_inconsistency_reported(self, paper_system):
        cav = paper_system.cavity
        skewed = CavityMode(
            cav.resonance, cav.loss_rate * 1.1, cav.effective_length, cav.finesse
        )
        report = validate_system(
            CoupledSystem(paper_system.emitter, skewed, paper_system.couplings)
        )
        assert any("inconsistent" in line for line in report)


class TestCouplings:
    def test_branch_scaling_follows_sqrt_rate(self, nv_emitter):
        gs = branch_couplings(nv_emitter, 1.1e9)
        g0 = nv_emitter.levels[0].radiative_rate
        for g, lv in zip(gs, nv_emitter.levels):
            assert g == pytest.approx(1.1e9 * math.sqrt(lv.radiative_rate / g0), rel=1e-12)

    def test_detunings_zero_on_each_line(self, paper_system):
        em = paper_system.emitter
        for i in range(len(em.levels)):
            tuned = paper_system.retuned(resonance=em.transition_frequency(i))
            assert tuned.detunings()[i] == pytest.approx(0.0, abs=1e-3)


class TestSaturationParams:
    def test_positive_required(self):
        with pytest.raises(ValidationError):
            SaturationParams(0.0, 1e-3)
        with pytest.raises(ValidationError):
            SaturationParams(1e5, -1.0)
        params = SaturationParams(2.9e5, 0.46e-3)
        assert params.saturation_rate == 2.9e5


class TestEmitterModel:
    def test_requires_ordered_energies(self):
        levels = (
            VibronicLevel(0, 0.0, 1e6, 0.0),
            VibronicLevel(1, 2e12, 1e6, 1e11),
            VibronicLevel(2, 1e12, 1e6, 1e11),
        )
        with pytest.raises(ValidationError):
            EmitterModel(omega_from_wavelength(639 * NM), levels, 0.0)

    def test_transition_frequencies_red_shifted(self, nv_emitter):
        freqs = [nv_emitter.transition_frequency(i) for i in range(8)]
        assert freqs[0] == nv_emitter.zpl_frequency
        assert all(b < a for a, b in zip(freqs, freqs[1:]))

    def test_branching_fractions_normalized(self, nv_emitter):
        fr = nv_emitter.branching_fractions()
        assert math.fsum(fr) == pytest.approx(1.0, abs=1e-12)
