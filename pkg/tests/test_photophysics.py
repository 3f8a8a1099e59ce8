import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from nvcavity.errors import ValidationError
from nvcavity.photophysics import (
    G2Params,
    ThreeLevelRates,
    classifies_single_emitter,
    fit_g2,
    g2_from_rates,
    g2_model,
    params_from_rates,
    power_dependence,
    rates_from_power_series,
    saturated_excited_population,
    steady_state,
)

NV_RATES = ThreeLevelRates(
    pump=2e7, decay=3.5e7, shelve=1.05e7, deshelve=3.5e6, pump_coefficient=2.4728e10
)

rate_strategy = st.tuples(
    st.floats(1e5, 1e9),  # pump
    st.floats(1e6, 1e9),  # decay
    st.floats(1e4, 1e8),  # shelve
    st.floats(1e4, 1e8),  # deshelve
)


def expm_g2(rates, tau):
    """Direct matrix-exponential propagation oracle."""
    mat = rates.matrix()
    p_inf = steady_state(rates)[1]
    return np.array([expm(mat * t)[1, 0] / p_inf for t in np.atleast_1d(np.abs(tau))])


class TestG2FromRates:
    def test_zero_delay_vanishes(self):
        assert g2_from_rates(NV_RATES, 0.0) == pytest.approx(0.0, abs=1e-12)

    @given(rates=rate_strategy)
    @settings(max_examples=60, deadline=None)
    def test_zero_delay_vanishes_for_all_rates(self, rates):
        k12, k21, k23, k31 = rates
        r = ThreeLevelRates(k12, k21, k23, k31)
        assert g2_from_rates(r, 0.0) == pytest.approx(0.0, abs=1e-9)

    def test_long_delay_normalizes_to_one(self):
        tau = 100.0 / min(NV_RATES.deshelve, NV_RATES.decay)
        assert g2_from_rates(NV_RATES, tau) == pytest.approx(1.0, rel=1e-9)

    def test_even_in_tau(self):
        taus = np.array([1e-9, 5e-9, 2e-8])
        np.testing.assert_allclose(
            g2_from_rates(NV_RATES, taus), g2_from_rates(NV_RATES, -taus), rtol=1e-12
        )

    def test_matches_expm_oracle(self):
        taus = np.geomspace(1e-10, 1e-6, 40)
        np.testing.assert_allclose(
            g2_from_rates(NV_RATES, taus), expm_g2(NV_RATES, taus), atol=1e-10
        )

    def test_eigen_solution_equals_closed_form(self):
        params = params_from_rates(NV_RATES)
        taus = np.geomspace(1e-10, 1e-6, 60)
        np.testing.assert_allclose(
            g2_from_rates(NV_RATES, taus), g2_model(params, taus), atol=1e-10
        )

    def test_no_shelf_gives_two_level_antibunching(self):
        r = ThreeLevelRates(pump=2e7, decay=3.5e7, shelve=0.0, deshelve=3.5e6)
        params = params_from_rates(r)
        assert params.bunching_amplitude == pytest.approx(0.0, abs=1e-12)
        assert 1.0 / params.antibunching_time == pytest.approx(2e7 + 3.5e7, rel=1e-9)


class TestParamsFromRates:
    def test_low_pump_limit(self):
        r = ThreeLevelRates(pump=1.0, decay=3.5e7, shelve=1.05e7, deshelve=3.5e6)
        params = params_from_rates(r)
        # eigenvalues at k12 -> 0 are -(k21+k23) and -k31
        assert 1.0 / params.antibunching_time == pytest.approx(3.5e7 + 1.05e7, rel=1e-5)
        assert 1.0 / params.bunching_time == pytest.approx(3.5e6, rel=1e-5)

    def test_high_pump_limit(self):
        r = ThreeLevelRates(pump=1e13, decay=3.5e7, shelve=1.05e7, deshelve=3.5e6)
        params = params_from_rates(r)
        # saturated shelving relaxes at k23 + k31
        assert 1.0 / params.bunching_time == pytest.approx(1.05e7 + 3.5e6, rel=1e-3)

    @given(rates=rate_strategy, factor=st.floats(0.5, 8.0))
    @settings(max_examples=40, deadline=None)
    def test_rate_rescaling_rescales_times_only(self, rates, factor):
        k12, k21, k23, k31 = rates
        try:
            p1 = params_from_rates(ThreeLevelRates(k12, k21, k23, k31))
            p2 = params_from_rates(
                ThreeLevelRates(factor * k12, factor * k21, factor * k23, factor * k31)
            )
        except ValidationError:
            return  # oscillatory corner: no bi-exponential form to compare
        assert p2.antibunching_time == pytest.approx(p1.antibunching_time / factor, rel=1e-6)
        assert p2.bunching_time == pytest.approx(p1.bunching_time / factor, rel=1e-6)
        assert p2.bunching_amplitude == pytest.approx(p1.bunching_amplitude, rel=1e-6)

    def test_times_ordered(self):
        params = params_from_rates(NV_RATES)
        assert params.bunching_time > params.antibunching_time > 0


class TestSteadyState:
    def test_populations_sum_to_one(self):
        p = steady_state(NV_RATES)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert (p >= 0).all()

    def test_saturated_population_limit(self):
        assert saturated_excited_population(NV_RATES) == pytest.approx(
            3.5e6 / (3.5e6 + 1.05e7)
        )
        strong_pump = ThreeLevelRates(1e13, 3.5e7, 1.05e7, 3.5e6)
        assert steady_state(strong_pump)[1] == pytest.approx(
            saturated_excited_population(NV_RATES), rel=1e-3
        )


class TestFitG2:
    def synth(self, params, noise=0.0, seed=0, n=240):
        tau = np.linspace(-5e-7, 5e-7, n)
        y = g2_model(params, tau)
        if noise:
            y = y + np.random.default_rng(seed).normal(0.0, noise, n)
        return tau, y

    def test_noiseless_exact_recovery(self):
        truth = G2Params(0.5, 1e-8, 1e-7)
        tau, y = self.synth(truth)
        fit = fit_g2(tau, y, initial_guess=G2Params(0.3, 2e-8, 2e-7))
        assert fit.converged and fit.model_consistent
        assert fit.params.bunching_amplitude == pytest.approx(0.5, abs=1e-8)
        assert fit.params.antibunching_time == pytest.approx(1e-8, rel=1e-8)
        assert fit.params.bunching_time == pytest.approx(1e-7, rel=1e-8)

    def test_noisy_recovery_within_five_percent(self):
        truth = G2Params(0.5, 1e-8, 1e-7)
        tau, y = self.synth(truth, noise=0.02, seed=3)
        fit = fit_g2(tau, y)
        assert fit.params.bunching_amplitude == pytest.approx(0.5, rel=0.05)
        assert fit.params.antibunching_time == pytest.approx(1e-8, rel=0.05)
        assert fit.params.bunching_time == pytest.approx(1e-7, rel=0.05)

    def test_covariance_covers_truth(self):
        truth = G2Params(0.5, 1e-8, 1e-7)
        hits = 0
        trials = 50
        for seed in range(trials):
            tau, y = self.synth(truth, noise=0.02, seed=seed)
            fit = fit_g2(tau, y)
            sigma = np.sqrt(np.diag(fit.covariance))
            true_vec = np.array([0.5, 1e-8, 1e-7])
            got = np.array(
                [
                    fit.params.bunching_amplitude,
                    fit.params.antibunching_time,
                    fit.params.bunching_time,
                ]
            )
            if np.all(np.abs(got - true_vec) <= 3 * sigma):
                hits += 1
        assert hits >= 0.9 * trials

    def test_minimum_sample_count(self):
        with pytest.raises(ValidationError):
            fit_g2(np.linspace(0, 1e-7, 5), np.ones(5))

    def test_single_emitter_classification(self):
        truth = G2Params(0.8, 1.2e-8, 1.5e-7)
        tau, y = self.synth(truth, noise=0.03, seed=9)
        assert classifies_single_emitter(tau, y)
        # two independent emitters halve the dip: shift the data up
        assert not classifies_single_emitter(tau, 0.5 + 0.5 * y)


class TestPowerDependence:
    def test_zero_power_endpoint_matches_low_pump_limit(self):
        series = power_dependence(NV_RATES, [1e-12, 1e-3])
        limit = params_from_rates(
            ThreeLevelRates(NV_RATES.pump_coefficient * 1e-12, 3.5e7, 1.05e7, 3.5e6)
        )
        assert series[0][1].antibunching_time == pytest.approx(limit.antibunching_time)

    def test_measurement_power_range_runs(self):
        p_sat = 0.46e-3
        powers = np.array([0.25, 0.32, 0.51, 0.65, 0.84, 1.1, 2.2, 3.3, 4.3, 6.5,
                           8.7, 10.9, 15.2]) * p_sat
        series = power_dependence(NV_RATES, powers)
        assert len(series) == len(powers)

    def test_antibunching_time_strictly_decreases_with_power(self):
        powers = np.geomspace(0.1, 20, 25) * 0.46e-3
        series = power_dependence(NV_RATES, powers)
        taus = [p.antibunching_time for _, p in series]
        assert all(b < a for a, b in zip(taus, taus[1:]))


class TestRatesFromPowerSeries:
    def test_roundtrip_recovery(self):
        powers = np.geomspace(0.2, 16, 12) * 0.46e-3
        series = [params_from_rates(NV_RATES.at_power(p)) for p in powers]
        fitted, resid = rates_from_power_series(powers, series)
        assert resid < 1e-8
        assert fitted.pump_coefficient == pytest.approx(2.4728e10, rel=1e-4)
        assert fitted.decay == pytest.approx(3.5e7, rel=1e-4)
        assert fitted.shelve == pytest.approx(1.05e7, rel=1e-4)
        assert fitted.deshelve == pytest.approx(3.5e6, rel=1e-4)


class TestValidation:
    def test_rates_must_be_nonnegative(self):
        with pytest.raises(ValidationError):
            ThreeLevelRates(-1.0, 3.5e7, 0.0, 0.0)
        with pytest.raises(ValidationError):
            ThreeLevelRates(0.0, 0.0, 0.0, 0.0)

    def test_params_invariants(self):
        with pytest.raises(ValidationError):
            G2Params(0.5, 1e-7, 1e-8)  # times out of order
        with pytest.raises(ValidationError):
            G2Params(-0.1, 1e-8, 1e-7)

    def test_at_power_requires_coefficient(self):
        bare = ThreeLevelRates(0.0, 3.5e7, 1e7, 3e6)
        with pytest.raises(ValidationError):
            bare.at_power(1e-3)
