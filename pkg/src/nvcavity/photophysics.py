"""Three-level intensity-correlation model.

A ground state, an emitting excited state and a metastable shelf with
rates k12 (pump, proportional to excitation power), k21 (decay), k23
(shelving) and k31 (deshelving) produce the bi-exponential correlation

    g2(tau) = 1 - (1 + a) exp(-|tau|/tau1) + a exp(-|tau|/tau2),

whose time constants are the two nonzero eigenvalues of the population
rate matrix. The cavity does not enter: the emitter's internal dynamics
are tuning-independent at this level of description.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

from .errors import ValidationError

DEGENERACY_RTOL = 1e-6


class DegenerateRatesWarning(UserWarning):
    """The two decay eigenvalues (nearly) coincide; bi-exponential form is a limit."""


@dataclass(frozen=True)
class ThreeLevelRates:
    """Internal population rates (1/s); pump_coefficient maps power to k12."""

    pump: float
    decay: float
    shelve: float
    deshelve: float
    pump_coefficient: float = None

    def __post_init__(self):
        for name in ("pump", "decay", "shelve", "deshelve"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} rate must be >= 0")
        if not self.decay > 0:
            raise ValidationError("decay rate k21 must be > 0")
        if self.pump_coefficient is not None and not self.pump_coefficient > 0:
            raise ValidationError("pump_coefficient must be > 0 when given")

    def at_power(self, power):
        """Rates with the pump set to pump_coefficient * power."""
        if self.pump_coefficient is None:
            raise ValidationError("pump_coefficient is not set")
        if power < 0:
            raise ValidationError("power must be >= 0")
        return ThreeLevelRates(
            self.pump_coefficient * power,
            self.decay,
            self.shelve,
            self.deshelve,
            self.pump_coefficient,
        )

    def matrix(self):
        k12, k21, k23, k31 = self.pump, self.decay, self.shelve, self.deshelve
        return np.array(
            [
                [-k12, k21, k31],
                [k12, -(k21 + k23), 0.0],
                [0.0, k23, -k31],
            ]
        )


@dataclass(frozen=True)
class G2Params:
    """Bi-exponential correlation parameters: bunching amplitude and timescales."""

    bunching_amplitude: float
    antibunching_time: float
    bunching_time: float

    def __post_init__(self):
        if not (self.antibunching_time > 0 and self.bunching_time > 0):
            raise ValidationError("correlation times must be > 0")
        if not self.bunching_time > self.antibunching_time:
            raise ValidationError("bunching time must exceed antibunching time")
        if self.bunching_amplitude < 0:
            raise ValidationError("bunching amplitude must be >= 0")


def g2_model(params, tau):
    """Closed-form g2 for given parameters, even in tau."""
    at = np.abs(np.asarray(tau, dtype=float))
    a = params.bunching_amplitude
    return (
        1.0
        - (1.0 + a) * np.exp(-at / params.antibunching_time)
        + a * np.exp(-at / params.bunching_time)
    )


def _eigen_amplitudes(rates):
    """(lambda_fast, lambda_slow, A_fast, A_slow, p2_inf) of the rate matrix.

    Eigenvalues and amplitudes stay complex; a conjugate pair means the
    populations spiral into equilibrium and the bi-exponential parameter
    form does not apply (g2 values are still well defined).
    """
    mat = rates.matrix()
    vals, vecs = np.linalg.eig(mat.astype(complex))
    order = np.argsort(np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    lam_fast, lam_slow = vals[2], vals[1]
    p0 = np.array([1.0, 0.0, 0.0], dtype=complex)
    coeffs = np.linalg.solve(vecs, p0)
    p2_inf = (coeffs[0] * vecs[1, 0]).real
    if not p2_inf > 0:
        raise ValidationError("steady-state emission vanishes for these rates")
    a_slow = coeffs[1] * vecs[1, 1] / p2_inf
    a_fast = coeffs[2] * vecs[1, 2] / p2_inf
    return lam_fast, lam_slow, a_fast, a_slow, p2_inf


def _near_degenerate(lam_fast, lam_slow):
    return abs(lam_fast - lam_slow) <= DEGENERACY_RTOL * abs(lam_fast)


def _expm_g2(rates, at):
    mat = rates.matrix()
    p_inf = steady_state(rates)[1]
    flat = at.reshape(-1)
    out = np.array([expm(mat * t)[1, 0] / p_inf for t in flat])
    return out.reshape(at.shape) if at.shape else float(out[0])


def g2_from_rates(rates, tau):
    """g2(tau) = p2(|tau|)/p2(inf) with the emitter starting in the ground state.

    Evaluated from the eigen-decomposition of the rate matrix. Degenerate
    (or nearly degenerate) decay eigenvalues make the two amplitudes blow
    up against each other, so that regime is flagged and evaluated by
    direct matrix-exponential propagation, which has no such singularity.
    """
    at = np.abs(np.asarray(tau, dtype=float))
    try:
        lam_fast, lam_slow, a_fast, a_slow, _ = _eigen_amplitudes(rates)
    except np.linalg.LinAlgError:
        return _expm_g2(rates, at)
    if _near_degenerate(lam_fast, lam_slow):
        warnings.warn(
            "decay eigenvalues are (nearly) degenerate; evaluating the limiting form",
            DegenerateRatesWarning,
            stacklevel=2,
        )
        return _expm_g2(rates, at)
    vals = (1.0 + a_fast * np.exp(lam_fast * at) + a_slow * np.exp(lam_slow * at)).real
    return vals if at.shape else float(vals)


def params_from_rates(rates):
    """Map internal rates to (a, tau1, tau2) via the rate-matrix eigenvalues.

    Raises when the eigenvalues form a complex pair (spiralling dynamics)
    or when they (nearly) degenerate: no stable (a, tau1, tau2) triple
    exists in either case, though g2 values remain well defined.
    """
    lam_fast, lam_slow, a_fast, a_slow, _ = _eigen_amplitudes(rates)
    if _near_degenerate(lam_fast, lam_slow):
        warnings.warn(
            "decay eigenvalues are (nearly) degenerate", DegenerateRatesWarning, stacklevel=2
        )
        raise ValidationError(
            "degenerate decay eigenvalues: the bi-exponential parameters diverge"
        )
    if abs(lam_fast.imag) > 1e-9 * abs(lam_fast) or abs(lam_slow.imag) > 1e-9 * abs(lam_slow):
        raise ValidationError("oscillatory population dynamics; no bi-exponential form")
    lam_fast, lam_slow, a = lam_fast.real, lam_slow.real, a_slow.real
    if lam_slow >= 0 or lam_fast >= 0:
        raise ValidationError("rate matrix must have two decaying eigenvalues")
    if a < -1e-9:
        raise ValidationError(f"negative bunching amplitude {a:.3g}; model inconsistency")
    return G2Params(
        bunching_amplitude=max(a, 0.0),
        antibunching_time=-1.0 / lam_fast,
        bunching_time=-1.0 / lam_slow,
    )


def steady_state(rates):
    """Stationary populations (p1, p2, p3)."""
    mat = rates.matrix()
    sys = np.vstack([mat, np.ones(3)])
    rhs = np.array([0.0, 0.0, 0.0, 1.0])
    sol, *_ = np.linalg.lstsq(sys, rhs, rcond=None)
    return sol


def saturated_excited_population(rates):
    """Excited-state population in the infinite-pump limit, k31/(k31 + k23)."""
    return rates.deshelve / (rates.deshelve + rates.shelve)


@dataclass(frozen=True)
class G2FitResult:
    params: G2Params
    covariance: np.ndarray  # over (a, tau1, tau2)
    residual_norm: float
    converged: bool
    model_consistent: bool

    @property
    def flagged(self):
        return (not self.converged) or (not self.model_consistent)


def _heuristic_guess(tau, g2):
    at = np.abs(tau)
    span = at.max()
    a0 = max(float(np.max(g2) - 1.0), 0.05)
    # dip width: first delay at which the data recovers to ~1 - (1+a)/e
    target = 1.0 - (1.0 + a0) * 0.3679
    above = at[np.asarray(g2) >= target]
    tau1 = float(above.min()) if len(above) else span / 30.0
    tau1 = max(tau1, span * 1e-4)
    return G2Params(a0, tau1, max(10.0 * tau1, span / 3.0))


def fit_g2(tau, g2, initial_guess=None):
    """Levenberg-Marquardt fit of the bi-exponential correlation model.

    Needs at least 10 samples spanning both timescales. Timescales are fit
    in log space to stay positive. Non-convergence and tau2 <= tau1 results
    are flagged on the returned G2FitResult, with the best iterate kept.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(g2, dtype=float)
    if len(tau) < 10:
        raise ValidationError("need at least 10 samples to fit g2")
    if initial_guess is None:
        initial_guess = _heuristic_guess(tau, y)

    def resid(theta):
        a, lt1, lt2 = theta
        t1, t2 = np.exp(lt1), np.exp(lt2)
        at = np.abs(tau)
        return 1.0 - (1.0 + a) * np.exp(-at / t1) + a * np.exp(-at / t2) - y

    theta0 = np.array(
        [
            initial_guess.bunching_amplitude,
            np.log(initial_guess.antibunching_time),
            np.log(initial_guess.bunching_time),
        ]
    )
    sol = least_squares(resid, theta0, method="lm", ftol=1e-10, xtol=1e-12, max_nfev=200 * 10)
    a, t1, t2 = sol.x[0], float(np.exp(sol.x[1])), float(np.exp(sol.x[2]))
    model_consistent = t2 > t1 and a >= -1e-6

    # covariance over (a, tau1, tau2) from the log-space Jacobian
    m, n = len(y), 3
    jtj = sol.jac.T @ sol.jac
    try:
        cov_theta = np.linalg.inv(jtj) * 2.0 * sol.cost / max(m - n, 1)
        transform = np.diag([1.0, t1, t2])
        cov = transform @ cov_theta @ transform
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.nan)

    if not model_consistent:
        # keep ordering valid on the returned params; the flag carries the verdict
        t1, t2 = min(t1, t2), max(t1, t2)
        if t2 <= t1:
            t2 = t1 * (1.0 + 1e-9)
    return G2FitResult(
        params=G2Params(max(a, 0.0), t1, t2),
        covariance=cov,
        residual_norm=float(np.sqrt(2.0 * sol.cost)),
        converged=bool(sol.status > 0),
        model_consistent=bool(model_consistent),
    )


def power_dependence(rates, powers):
    """(power, G2Params) along a pump-power grid, k12 = pump_coefficient * P."""
    out = []
    for p in powers:
        out.append((float(p), params_from_rates(rates.at_power(p))))
    return out


def rates_from_power_series(powers, params_list, initial=None):
    """Recover (sigma, k21, k23, k31) from fitted (a, tau1, tau2) vs power.

    Constrained least squares in log-rate space over the whole power series;
    the exact endpoint formulas are not assumed. Returns a ThreeLevelRates
    at zero pump with the pump coefficient set.
    """
    powers = np.asarray(powers, dtype=float)
    if len(powers) != len(params_list) or len(powers) < 3:
        raise ValidationError("need >= 3 matched (power, params) samples")
    if initial is None:
        tau1_0 = params_list[0].antibunching_time
        tau2_hi = params_list[-1].bunching_time
        k21 = 1.0 / tau1_0
        k31 = 1.0 / tau2_hi
        k23 = max(params_list[-1].bunching_amplitude * k31, 0.1 * k31)
        sigma = k21 / max(powers[-1], 1e-30)
        initial = (sigma, k21, k23, k31)

    def resid(log_theta):
        sigma, k21, k23, k31 = np.exp(log_theta)
        base = ThreeLevelRates(0.0, k21, k23, k31, sigma)
        res = []
        for p, obs in zip(powers, params_list):
            try:
                pred = params_from_rates(base.at_power(p))
            except ValidationError:
                return np.full(3 * len(powers), 1e6)
            res.append(np.log(pred.antibunching_time / obs.antibunching_time))
            res.append(np.log(pred.bunching_time / obs.bunching_time))
            res.append(
                (pred.bunching_amplitude - obs.bunching_amplitude)
                / (1.0 + obs.bunching_amplitude)
            )
        return np.array(res)

    sol = least_squares(resid, np.log(np.array(initial)), method="lm", ftol=1e-12, xtol=1e-12)
    sigma, k21, k23, k31 = np.exp(sol.x)
    return ThreeLevelRates(0.0, k21, k23, k31, sigma), float(np.sqrt(2.0 * sol.cost))


def g2_zero_from_data(tau, g2):
    """Raw correlation value at zero delay, interpolated from samples."""
    tau = np.asarray(tau, dtype=float)
    order = np.argsort(tau)
    return float(np.interp(0.0, tau[order], np.asarray(g2, dtype=float)[order]))


def classifies_single_emitter(tau, g2):
    """True when the measured dip certifies a single emitter (g2(0) < 0.5)."""
    return g2_zero_from_data(tau, g2) < 0.5
