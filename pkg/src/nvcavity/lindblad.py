"""Dense master-equation solver for the coupled emitter-cavity system.

The generator acts on vectorized density matrices over the basis
{|e>, |g_0>, ..., |g_n>} x {|0>, ..., |N_ph>} in the frame rotating at the
cavity frequency. Four dissipation channels enter: photon loss (kappa),
radiative decay (gamma_i), ground-state phonon relaxation (gamma_{i,i-1})
and pure dephasing of the excited state. The dephasing jump operator is
sqrt(gamma_star) |e><e|, so each optical coherence decays at gamma_star/2
and contributes gamma_star to the emission linewidth, which is what the
adiabatically eliminated rate picture assumes.

Used as a brute-force cross-check of ``nvcavity.ratemodel``; stiff rate
ratios make trajectories expensive, so the stepping runs on the numba
kernel in ``nvcavity._kernels``.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import DEFAULT_ATOL, DEFAULT_MAX_STEPS, DEFAULT_RTOL, integrate_rk45
from .errors import DimensionError, ValidationError

DEFAULT_DIM_CAP = 32
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10


@dataclass(frozen=True)
class QuantumState:
    """Density matrix over the emitter x Fock product basis."""

    density_matrix: np.ndarray
    fock_cutoff: int

    def __post_init__(self):
        rho = np.asarray(self.density_matrix, dtype=np.complex128)
        object.__setattr__(self, "density_matrix", rho)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValidationError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
            raise ValidationError("density matrix trace must be 1")
        if np.linalg.eigvalsh(rho).min() < -POSITIVITY_TOL:
            raise ValidationError("density matrix is not positive semidefinite")


@dataclass(frozen=True)
class Liouvillian:
    """Dense generator plus its per-channel breakdown and basis bookkeeping."""

    generator: np.ndarray
    channels: dict
    n_emitter: int  # number of emitter states (n levels + excited)
    fock_cutoff: int
    system: object

    @property
    def hilbert_dim(self):
        return self.n_emitter * (self.fock_cutoff + 1)

    def state_index(self, emitter_state, photons):
        """Flat index: emitter_state 0 is |e>, 1 + i is |g_i>."""
        return emitter_state * (self.fock_cutoff + 1) + photons

    def excited_vacuum(self):
        """|e, 0><e, 0| as a QuantumState."""
        d = self.hilbert_dim
        rho = np.zeros((d, d), dtype=np.complex128)
        k = self.state_index(0, 0)
        rho[k, k] = 1.0
        return QuantumState(rho, self.fock_cutoff)

    def ground_vacuum(self, level=0):
        d = self.hilbert_dim
        rho = np.zeros((d, d), dtype=np.complex128)
        k = self.state_index(1 + level, 0)
        rho[k, k] = 1.0
        return QuantumState(rho, self.fock_cutoff)


def _dissipator(jump):
    """Superoperator for D[L] under row-major vectorization."""
    d = jump.shape[0]
    eye = np.eye(d, dtype=np.complex128)
    ll = jump.conj().T @ jump
    return (
        np.kron(jump, jump.conj())
        - 0.5 * np.kron(ll, eye)
        - 0.5 * np.kron(eye, ll.T)
    )


def build_liouvillian(system, fock_cutoff=1, dim_cap=DEFAULT_DIM_CAP):
    """Assemble the dense generator for the coupled system.

    The Fock space is truncated at ``fock_cutoff`` photons (one suffices for
    spontaneous emission). Hilbert dimensions above ``dim_cap`` are refused:
    the dense superoperator scales as d^4 and anything larger calls for a
    different solver.
    """
    if fock_cutoff < 1:
        raise ValidationError("fock_cutoff must be >= 1")
    em = system.emitter
    if len(system.couplings) != len(em.levels):
        raise ValidationError("couplings length must match number of levels")
    n_levels = len(em.levels)
    n_emitter = n_levels + 1
    n_fock = fock_cutoff + 1
    d = n_emitter * n_fock
    if d > dim_cap:
        raise DimensionError(
            f"Hilbert dimension {d} exceeds cap {dim_cap}; dense solve intractable"
        )

    eye_f = np.eye(n_fock, dtype=np.complex128)
    eye_e = np.eye(n_emitter, dtype=np.complex128)
    a_op = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), k=1).astype(np.complex128)

    def emitter_op(bra, ket):
        op = np.zeros((n_emitter, n_emitter), dtype=np.complex128)
        op[bra, ket] = 1.0
        return op

    proj_e = emitter_op(0, 0)
    lowering = [emitter_op(1 + i, 0) for i in range(n_levels)]  # |g_i><e|

    h = np.zeros((d, d), dtype=np.complex128)
    # diagonal: |e> at (omega_ZPL - omega_c), |g_i> at the vibrational energy,
    # so each |e,0><g_i,1| coherence rotates at delta_i = (omega_ZPL-omega_i)-omega_c
    h += (em.zpl_frequency - system.cavity.resonance) * np.kron(proj_e, eye_f)
    for i, lv in enumerate(em.levels):
        h += lv.energy * np.kron(emitter_op(1 + i, 1 + i), eye_f)
    for i, g in enumerate(system.couplings):
        coupling = np.kron(lowering[i], a_op.conj().T)
        h += 1j * g * (coupling - coupling.conj().T)
    eye_d = np.eye(d, dtype=np.complex128)
    hamiltonian_part = -1j * (np.kron(h, eye_d) - np.kron(eye_d, h.T))

    kappa = system.cavity.loss_rate
    channels = {
        "hamiltonian": hamiltonian_part,
        "cavity_damping": kappa * _dissipator(np.kron(eye_e, a_op)),
    }
    pol = np.zeros_like(hamiltonian_part)
    for i, lv in enumerate(em.levels):
        if lv.radiative_rate > 0:
            pol += lv.radiative_rate * _dissipator(np.kron(lowering[i], eye_f))
    channels["polarization_damping"] = pol
    relax = np.zeros_like(hamiltonian_part)
    for i, lv in enumerate(em.levels):
        if i >= 1 and lv.phonon_relaxation > 0:
            relax += lv.phonon_relaxation * _dissipator(np.kron(emitter_op(i, 1 + i), eye_f))
    channels["ground_state_relaxation"] = relax
    channels["pure_dephasing"] = em.pure_dephasing * _dissipator(np.kron(proj_e, eye_f))

    generator = sum(channels.values())
    return Liouvillian(
        generator=np.ascontiguousarray(generator),
        channels=channels,
        n_emitter=n_emitter,
        fock_cutoff=fock_cutoff,
        system=system,
    )


@dataclass(frozen=True)
class Trajectory:
    """Populations and photon number along a time grid."""

    times: np.ndarray
    excited_population: np.ndarray
    ground_populations: np.ndarray  # shape (n_times, n_levels)
    photon_number: np.ndarray
    trace: np.ndarray
    states: np.ndarray  # (n_times, d, d)
    stats: dict


def _observable_rows(liouv):
    d = liouv.hilbert_dim
    n_fock = liouv.fock_cutoff + 1
    diag_idx = np.arange(d) * d + np.arange(d)
    row_pe = np.zeros(d * d, dtype=np.complex128)
    row_n = np.zeros(d * d, dtype=np.complex128)
    for m in range(n_fock):
        row_pe[diag_idx[liouv.state_index(0, m)]] = 1.0
    for s in range(liouv.n_emitter):
        for m in range(n_fock):
            row_n[diag_idx[liouv.state_index(s, m)]] = m
    return row_pe, row_n, diag_idx


def evolve(
    liouv,
    initial,
    t_grid,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    max_steps=DEFAULT_MAX_STEPS,
    backend=None,
):
    """Propagate a state over ``t_grid`` (increasing, starting at 0).

    Adaptive embedded Runge-Kutta stepping with per-step relative error
    ``rtol``; raises StiffnessError on step underflow.
    """
    t = np.asarray(t_grid, dtype=float)
    if len(t) < 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValidationError("t_grid must be increasing and start at 0")
    d = liouv.hilbert_dim
    rho0 = initial.density_matrix
    if rho0.shape != (d, d):
        raise ValidationError(f"state dimension {rho0.shape} != Liouvillian dimension {d}")

    ys, stats = integrate_rk45(
        liouv.generator, rho0.reshape(-1), t, rtol=rtol, atol=atol,
        max_steps=max_steps, backend=backend,
    )
    states = ys.reshape(len(t), d, d)
    diags = np.einsum("tii->ti", states).real
    n_fock = liouv.fock_cutoff + 1
    by_emitter = diags.reshape(len(t), liouv.n_emitter, n_fock)
    p_e = by_emitter[:, 0, :].sum(axis=1)
    p_ground = by_emitter[:, 1:, :].sum(axis=2)
    photon = (diags.reshape(len(t), d) * np.tile(np.arange(n_fock), liouv.n_emitter)).sum(axis=1)
    return Trajectory(
        times=t,
        excited_population=p_e,
        ground_populations=p_ground,
        photon_number=photon,
        trace=diags.sum(axis=1),
        states=states,
        stats=stats,
    )


@dataclass(frozen=True)
class LifetimeFit:
    """Exponential-decay fit of the excited population."""

    lifetime: float
    log_residual_rms: float
    non_exponential: bool
    n_points: int


def extract_lifetime(trajectory, window=(0.05, 0.8), residual_threshold=0.05):
    """Effective lifetime from a log-linear fit of p_e(t) inside ``window``.

    The trajectory must extend until p_e < 1e-3 so the tail is resolved.
    A large fit residual flags non-exponential decay (e.g. vacuum Rabi
    oscillations); the fitted value is still returned.
    """
    p = trajectory.excited_population
    t = trajectory.times
    if p.min() > 1e-3:
        raise ValidationError("trajectory too short: p_e never drops below 1e-3")
    lo, hi = window
    mask = (p >= lo) & (p <= hi)
    if mask.sum() < 5:
        raise ValidationError(
            f"only {int(mask.sum())} samples inside the fit window; refine t_grid"
        )
    x, y = t[mask], np.log(p[mask])
    coeffs, residuals, _, _ = np.linalg.lstsq(np.stack([x, np.ones_like(x)], axis=1), y,
                                              rcond=None)
    slope = coeffs[0]
    if slope >= 0:
        return LifetimeFit(math.inf, math.inf, True, int(mask.sum()))
    rms = float(np.sqrt(residuals[0] / mask.sum())) if len(residuals) else 0.0
    return LifetimeFit(
        lifetime=-1.0 / slope,
        log_residual_rms=rms,
        non_exponential=bool(rms > residual_threshold),
        n_points=int(mask.sum()),
    )


@dataclass(frozen=True)
class EfficiencyResult:
    """Time-integrated emission split between cavity and free-space channels."""

    p_total: float
    free_space_fraction: float
    integration_time: float
    stats: dict

    @property
    def branching_sum(self):
        return self.p_total + self.free_space_fraction


def emission_efficiency_me(
    liouv,
    initial=None,
    tail_rtol=1e-4,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    max_steps=DEFAULT_MAX_STEPS,
    backend=None,
    max_lifetimes=2e4,
):
    """Total cavity emission efficiency kappa * integral of <a'a> dt.

    The photon-number and excited-population integrals ride along as two
    extra components of the augmented linear system, so the adaptive
    stepper controls their quadrature error as well. Windows double in
    length until the remaining excitation (p_e + <n>) can contribute less
    than ``tail_rtol`` of the accumulated result.
    """
    if initial is None:
        initial = liouv.excited_vacuum()
    d = liouv.hilbert_dim
    kappa = liouv.system.cavity.loss_rate
    gamma = liouv.system.emitter.total_radiative
    row_pe, row_n, _ = _observable_rows(liouv)

    D = d * d
    aug = np.zeros((D + 2, D + 2), dtype=np.complex128)
    aug[:D, :D] = liouv.generator
    aug[D, :D] = row_n
    aug[D + 1, :D] = row_pe

    y = np.zeros(D + 2, dtype=np.complex128)
    y[:D] = initial.density_matrix.reshape(-1)

    t_window = 2.0 / gamma
    t_elapsed = 0.0
    total_steps = {"n_steps": 0, "n_rejected": 0}
    while True:
        t_out = np.array([0.0, 0.5 * t_window, t_window])
        ys, stats = integrate_rk45(
            aug, y, t_out, rtol=rtol, atol=atol, max_steps=max_steps, backend=backend
        )
        y = ys[-1]
        t_elapsed += t_window
        for k in total_steps:
            total_steps[k] += stats[k]
        integral_n = y[D].real
        p_remaining = float(np.real(row_pe @ y[:D] + row_n @ y[:D]))
        emitted = kappa * integral_n
        if p_remaining < tail_rtol * max(emitted, 1e-12):
            break
        if t_elapsed > max_lifetimes / gamma:
            break
        t_window *= 2.0

    return EfficiencyResult(
        p_total=float(kappa * y[D].real),
        free_space_fraction=float(gamma * y[D + 1].real),
        integration_time=t_elapsed,
        stats=total_steps,
    )
