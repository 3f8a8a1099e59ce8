import numpy as np
import pytest

from nvcavity.constants import NM, omega_from_wavelength
from nvcavity.errors import DimensionError, ValidationError
from nvcavity.lindblad import (
    QuantumState,
    build_liouvillian,
    emission_efficiency_me,
    evolve,
    extract_lifetime,
)
from nvcavity.presets import zpl_reduced_system
from nvcavity.ratemodel import emission_efficiencies

from conftest import (
    PAPER_G,
    PAPER_GAMMA,
    PAPER_KAPPA,
    efficiency_by_eig,
    make_sideband_system,
    make_two_level_system,
)


class TestBuildLiouvillian:
    def test_reference_system_dimensions(self, paper_system):
        liouv = build_liouvillian(paper_system, fock_cutoff=1)
        assert liouv.hilbert_dim == 18  # (7 sidebands + ZPL + excited) x 2 Fock states
        assert liouv.generator.shape == (324, 324)

    def test_dimension_cap(self, paper_system):
        with pytest.raises(DimensionError):
            build_liouvillian(paper_system, fock_cutoff=4)

    def test_generator_is_trace_preserving(self):
        system = make_sideband_system()
        liouv = build_liouvillian(system, fock_cutoff=1)
        d = liouv.hilbert_dim
        rng = np.random.default_rng(0)
        for _ in range(5):
            h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            rho = h + h.conj().T
            drho = (liouv.generator @ rho.reshape(-1)).reshape(d, d)
            scale = np.abs(drho).max()
            assert abs(np.trace(drho)) <= 1e-10 * scale

    def test_channels_individually_trace_preserving(self):
        system = make_sideband_system()
        liouv = build_liouvillian(system, fock_cutoff=1)
        d = liouv.hilbert_dim
        rho = np.eye(d, dtype=complex) / d
        for name, channel in liouv.channels.items():
            drho = (channel @ rho.reshape(-1)).reshape(d, d)
            scale = max(np.abs(drho).max(), 1.0)
            assert abs(np.trace(drho)) <= 1e-12 * scale, name

    def test_uncoupled_two_level_block_structure(self):
        system = make_two_level_system(g=0.0)
        liouv = build_liouvillian(system, fock_cutoff=1)
        t = np.linspace(0.0, 5.0 / PAPER_GAMMA, 40)
        traj = evolve(liouv, liouv.excited_vacuum(), t)
        np.testing.assert_allclose(
            traj.excited_population, np.exp(-PAPER_GAMMA * t), atol=1e-6
        )
        np.testing.assert_allclose(traj.photon_number, 0.0, atol=1e-12)

    def test_coupling_length_mismatch_rejected(self, paper_system):
        from nvcavity.core import CoupledSystem

        broken = CoupledSystem(
            paper_system.emitter, paper_system.cavity, paper_system.couplings[:-1]
        )
        with pytest.raises(ValidationError):
            build_liouvillian(broken)


class TestEvolve:
    def test_ground_state_is_stationary(self):
        system = make_two_level_system()
        liouv = build_liouvillian(system, fock_cutoff=1)
        t = np.linspace(0.0, 3.0 / PAPER_GAMMA, 10)
        traj = evolve(liouv, liouv.ground_vacuum(), t)
        np.testing.assert_allclose(traj.excited_population, 0.0, atol=1e-12)
        np.testing.assert_allclose(traj.trace, 1.0, atol=1e-12)

    def test_overdamped_cavity_keeps_photon_empty(self):
        system = make_two_level_system(g=1e3, kappa=1e9, gamma=1e6)
        liouv = build_liouvillian(system, fock_cutoff=1)
        t = np.linspace(0.0, 5e-6, 30)
        traj = evolve(liouv, liouv.excited_vacuum(), t)
        assert traj.photon_number.max() <= 1e-6

    def test_trace_and_positivity_preserved(self):
        system = make_sideband_system()
        liouv = build_liouvillian(system, fock_cutoff=1)
        rng = np.random.default_rng(1)
        d = liouv.hilbert_dim
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho0 = a @ a.conj().T
        rho0 /= np.trace(rho0).real
        state = QuantumState(rho0, fock_cutoff=1)
        t = np.linspace(0.0, 3e-12, 12)
        traj = evolve(liouv, state, t)
        assert np.abs(traj.trace - 1.0).max() <= 1e-8
        for rho in traj.states:
            assert np.linalg.eigvalsh(rho).min() >= -1e-8

    def test_photon_number_bounded_by_single_excitation(self):
        system = make_two_level_system(g=5e10, kappa=2e10, gamma=1e7)
        liouv = build_liouvillian(system, fock_cutoff=2)
        t = np.linspace(0.0, 2e-9, 60)
        traj = evolve(liouv, liouv.excited_vacuum(), t)
        assert traj.photon_number.max() <= 1.0 + 1e-9

    def test_grid_must_start_at_zero(self):
        system = make_two_level_system()
        liouv = build_liouvillian(system)
        with pytest.raises(ValidationError):
            evolve(liouv, liouv.excited_vacuum(), np.array([1e-9, 2e-9]))

    def test_purcell_speedup_at_zero_dephasing(self):
        # with the cavity on resonance the decay accelerates by 1 + R0/gamma
        system = make_two_level_system(gamma_star=0.0)
        liouv = build_liouvillian(system, fock_cutoff=1)
        r0 = emission_efficiencies(system, check_validity=False).rate_sum
        t = np.linspace(0.0, 7.5 / (PAPER_GAMMA + r0), 200)
        traj = evolve(liouv, liouv.excited_vacuum(), t)
        fit = extract_lifetime(traj)
        ratio = (1.0 / PAPER_GAMMA) / fit.lifetime
        expected = (PAPER_GAMMA + r0) / PAPER_GAMMA
        assert ratio == pytest.approx(expected, rel=0.01)
        assert ratio == pytest.approx(2.8, rel=0.05)


class TestExtractLifetime:
    def test_pure_exponential_recovered(self):
        system = make_two_level_system(g=0.0)
        liouv = build_liouvillian(system)
        t = np.linspace(0.0, 7.5 / PAPER_GAMMA, 300)
        traj = evolve(liouv, liouv.excited_vacuum(), t)
        fit = extract_lifetime(traj)
        assert fit.lifetime == pytest.approx(1.0 / PAPER_GAMMA, rel=1e-3)
        assert not fit.non_exponential

    def test_vacuum_rabi_flagged_non_exponential(self):
        # strong coupling: g above kappa and gamma* makes p_e oscillate
        system = make_two_level_system(g=5e10, kappa=5e9, gamma=1e8, gamma_star=0.0)
        liouv = build_liouvillian(system, fock_cutoff=1)
        t = np.linspace(0.0, 1.2e-7, 4000)
        traj = evolve(liouv, liouv.excited_vacuum(), t)
        assert traj.excited_population.min() < 1e-3
        fit = extract_lifetime(traj)
        assert fit.non_exponential

    def test_room_temperature_lifetime_unmodified(self):
        system = make_two_level_system(gamma_star=15e12)
        liouv = build_liouvillian(system, fock_cutoff=1)
        t = np.linspace(0.0, 7.5 / PAPER_GAMMA, 240)
        traj = evolve(liouv, liouv.excited_vacuum(), t)
        fit = extract_lifetime(traj)
        assert fit.lifetime == pytest.approx(1.0 / PAPER_GAMMA, rel=0.05)

    def test_too_short_trajectory_rejected(self):
        system = make_two_level_system(g=0.0)
        liouv = build_liouvillian(system)
        t = np.linspace(0.0, 0.5 / PAPER_GAMMA, 30)
        traj = evolve(liouv, liouv.excited_vacuum(), t)
        with pytest.raises(ValidationError):
            extract_lifetime(traj)


class TestEmissionEfficiency:
    def test_uncoupled_emits_nothing_into_cavity(self):
        system = make_two_level_system(g=0.0)
        liouv = build_liouvillian(system)
        eff = emission_efficiency_me(liouv)
        assert eff.p_total == pytest.approx(0.0, abs=1e-12)
        assert eff.free_space_fraction == pytest.approx(1.0, abs=1e-3)

    def test_purcell_point_matches_reported_fraction(self):
        system = make_two_level_system(gamma_star=0.0)
        liouv = build_liouvillian(system, fock_cutoff=1)
        eff = emission_efficiency_me(liouv)
        assert abs(eff.p_total - 0.64) <= 0.02
        assert abs(eff.branching_sum - 1.0) <= 1e-3

    def test_room_temperature_matches_rate_model(self):
        system = make_two_level_system(gamma_star=15e12)
        liouv = build_liouvillian(system, fock_cutoff=1)
        eff = emission_efficiency_me(liouv)
        ref = emission_efficiencies(system, check_validity=False).total_efficiency
        assert eff.p_total == pytest.approx(ref, rel=0.05)
        assert abs(eff.branching_sum - 1.0) <= 1e-3

    def test_quadrature_matches_eigenmode_oracle(self):
        system = make_sideband_system(gamma_star=5e11)
        liouv = build_liouvillian(system, fock_cutoff=1)
        eff = emission_efficiency_me(liouv)
        oracle = efficiency_by_eig(liouv)
        assert eff.p_total == pytest.approx(oracle, rel=1e-3)

    def test_detailed_cross_check_over_tuning_grid(self):
        # gamma* = 100*kappa: rate model and master equation agree within 5%
        # across a 10-point tuning grid spanning the dephased linewidth
        kappa = 77e9
        base = make_sideband_system(kappa=kappa, gamma_star=100 * kappa)
        width = 100 * kappa + base.emitter.total_radiative + kappa
        for delta in np.linspace(-width, width, 10):
            system = make_sideband_system(kappa=kappa, gamma_star=100 * kappa,
                                          detuning=delta)
            liouv = build_liouvillian(system, fock_cutoff=1)
            eff = emission_efficiency_me(liouv)
            ref = emission_efficiencies(system, check_validity=False)
            assert eff.p_total == pytest.approx(ref.total_efficiency, rel=0.05)

    def test_backends_match_on_efficiency(self):
        from nvcavity._kernels import available_backends

        if len(available_backends()) < 2:
            pytest.skip("numba backend unavailable")
        system = make_two_level_system(gamma_star=1e11)
        liouv = build_liouvillian(system, fock_cutoff=1)
        p_nb = emission_efficiency_me(liouv, backend="numba").p_total
        p_np = emission_efficiency_me(liouv, backend="numpy").p_total
        assert p_nb == pytest.approx(p_np, rel=1e-9)


class TestQuantumState:
    def test_rejects_non_hermitian(self):
        rho = np.array([[0.5, 0.1], [0.3, 0.5]], dtype=complex)
        with pytest.raises(ValidationError):
            QuantumState(rho, fock_cutoff=0)

    def test_rejects_bad_trace(self):
        rho = np.eye(2, dtype=complex)
        with pytest.raises(ValidationError):
            QuantumState(rho, fock_cutoff=0)

    def test_rejects_negative_eigenvalue(self):
        rho = np.diag([1.5, -0.5]).astype(complex)
        with pytest.raises(ValidationError):
            QuantumState(rho, fock_cutoff=0)


class TestZplReduction:
    def test_reduction_keeps_total_gamma_and_zpl_coupling(self, paper_system):
        reduced = zpl_reduced_system(paper_system)
        assert reduced.emitter.total_radiative == pytest.approx(
            paper_system.emitter.total_radiative
        )
        assert reduced.couplings == (paper_system.couplings[0],)
        assert reduced.emitter.n_sidebands == 0

    def test_reduced_efficiency_close_to_full_at_low_dephasing(self, paper_system):
        import dataclasses

        from nvcavity.core import CoupledSystem

        em0 = dataclasses.replace(paper_system.emitter, pure_dephasing=0.0)
        full = CoupledSystem(em0, paper_system.cavity, paper_system.couplings)
        reduced = zpl_reduced_system(full)
        p_full = emission_efficiencies(full, check_validity=False).total_efficiency
        p_red = emission_efficiencies(reduced, check_validity=False).total_efficiency
        assert p_red == pytest.approx(p_full, rel=0.01)
