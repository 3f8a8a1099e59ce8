"""Multi-Lorentzian spectral decomposition and synthesis.

Emission lines are Lorentzian in frequency, so all model parameters
(center, FWHM, area) live in angular-frequency space; wavelength grids
are converted at the boundary with the |d(omega)/d(lambda)| Jacobian.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .constants import NM, THZ, TWO_PI, omega_from_wavelength
from .errors import ValidationError

DEFAULT_INIT_FWHM = 50.0 * THZ  # sideband scale


@dataclass(frozen=True)
class LorentzianPeak:
    """One emission line: center and FWHM in rad/s, area in photon-flux units."""

    center: float
    fwhm: float
    area: float

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValidationError(f"peak fwhm must be > 0, got {self.fwhm}")
        if not self.area > 0:
            raise ValidationError(f"peak area must be > 0, got {self.area}")

    @classmethod
    def from_nm(cls, center_nm, fwhm_thz, area):
        """Build from a table row: center in nm, FWHM in angular THz (1e12 rad/s)."""
        return cls(omega_from_wavelength(center_nm * NM), fwhm_thz * THZ, area)

    @property
    def center_nm(self):
        return TWO_PI * 299_792_458.0 / self.center / NM

    def height(self):
        """Peak intensity per unit angular frequency."""
        return 2.0 * self.area / (np.pi * self.fwhm)


def _lorentzian_sum(omega, centers, fwhms, areas):
    """Sum of area-normalized Lorentzians on an angular-frequency grid."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros_like(omega)
    for c, w, a in zip(centers, fwhms, areas):
        half = 0.5 * w
        out += (a / np.pi) * half / ((omega - c) ** 2 + half**2)
    return out


def synth_spectrum(peaks, wavelengths_m):
    """Evaluate the summed Lorentzian model on a wavelength grid.

    The model is built in frequency space and mapped to wavelength with the
    Jacobian |d(omega)/d(lambda)| = 2*pi*c/lambda^2, so integrating the
    returned samples over wavelength recovers the peak areas.
    """
    lam = np.asarray(wavelengths_m, dtype=float)
    if lam.ndim != 1 or len(lam) == 0:
        raise ValidationError("wavelength grid must be a non-empty 1-d array")
    steps = np.diff(lam)
    if len(steps) and not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValidationError("wavelength grid must be monotone")
    omega = omega_from_wavelength(lam)
    centers = [p.center for p in peaks]
    fwhms = [p.fwhm for p in peaks]
    areas = [p.area for p in peaks]
    jac = TWO_PI * 299_792_458.0 / lam**2
    return _lorentzian_sum(omega, centers, fwhms, areas) * jac


def spectral_intensity(peaks, omega):
    """Model intensity per unit angular frequency (no wavelength Jacobian)."""
    return _lorentzian_sum(
        omega, [p.center for p in peaks], [p.fwhm for p in peaks], [p.area for p in peaks]
    )


def branching_ratios(peaks):
    """Area fractions of each peak; non-negative and summing to one."""
    areas = np.array([p.area for p in peaks], dtype=float)
    return areas / areas.sum()


@dataclass(frozen=True)
class LorentzianFit:
    """Result of a multi-peak fit."""

    peaks: tuple
    offset: float
    covariance: np.ndarray  # order: (center, log fwhm, log area) per peak + offset
    residual_norm: float
    converged: bool
    degenerate_pairs: tuple

    @property
    def flagged(self):
        return (not self.converged) or bool(self.degenerate_pairs)


def _default_init(lam, counts, n_peaks):
    """Initial peaks from smoothed local maxima, equal widths.

    When the spectrum is too blended to show enough maxima, the remaining
    positions are placed at equal quantiles of the cumulative intensity so
    the initial peaks spread over the emission band instead of stacking.
    """
    kernel = np.ones(5) / 5.0
    smooth = np.convolve(counts, kernel, mode="same")
    idx, props = find_peaks(smooth, height=0)
    if len(idx) >= n_peaks:
        order = np.argsort(props["peak_heights"])[::-1][:n_peaks]
        idx = np.sort(idx[order])
    else:
        mass = np.cumsum(np.clip(smooth, 0.0, None))
        mass /= mass[-1]
        quantiles = (np.arange(n_peaks) + 0.5) / n_peaks
        q_idx = np.searchsorted(mass, quantiles)
        idx = np.unique(np.concatenate([idx, q_idx]))
        # prefer detected maxima, fill the rest in mass order
        idx = np.sort(idx[:n_peaks]) if len(idx) >= n_peaks else np.sort(
            np.unique(np.concatenate([idx, q_idx]))
        )[:n_peaks]
    peaks = []
    for i in idx:
        h = max(float(smooth[i]), 1e-30)
        center = omega_from_wavelength(lam[i])
        jac = TWO_PI * 299_792_458.0 / lam[i] ** 2
        area = max(h / jac * DEFAULT_INIT_FWHM * (np.pi / 2.0), 1e-30)
        peaks.append(LorentzianPeak(center, DEFAULT_INIT_FWHM, area))
    return peaks


def fit_lorentzians(wavelengths_m, counts, n_peaks, init=None):
    """Nonlinear least-squares decomposition of a spectrum into Lorentzians.

    Positivity of widths and areas is enforced by fitting their logs; a
    constant offset absorbs flat background. Returns a LorentzianFit whose
    ``peaks`` are sorted by center frequency (descending wavelength last).
    Non-convergence and near-degenerate peak pairs (center separation below
    0.1 FWHM) are flagged, with the best iterate still returned.
    """
    lam = np.asarray(wavelengths_m, dtype=float)
    y = np.asarray(counts, dtype=float)
    if n_peaks < 1:
        raise ValidationError("n_peaks must be >= 1")
    if len(lam) < 9 * n_peaks:
        raise ValidationError(
            f"need at least {9 * n_peaks} samples to fit {n_peaks} peaks, got {len(lam)}"
        )
    if init is None:
        init = _default_init(lam, y, n_peaks)
    if len(init) != n_peaks:
        raise ValidationError("init must supply one peak per requested peak")

    omega = omega_from_wavelength(lam)
    jac = TWO_PI * 299_792_458.0 / lam**2
    scale = max(float(np.max(np.abs(y))), 1e-30)

    def unpack(theta):
        c = theta[0:n_peaks]
        # clip the log-params so a wandering LM iterate cannot overflow exp
        w = np.exp(np.clip(theta[n_peaks : 2 * n_peaks], -200.0, 200.0))
        a = np.exp(np.clip(theta[2 * n_peaks : 3 * n_peaks], -200.0, 200.0))
        return c, w, a, theta[-1]

    def resid(theta):
        c, w, a, off = unpack(theta)
        model = _lorentzian_sum(omega, c, w, a) * jac + off * scale
        return (model - y) / scale

    theta0 = np.concatenate(
        [
            [p.center for p in init],
            [np.log(p.fwhm) for p in init],
            [np.log(p.area) for p in init],
            [0.0],
        ]
    )
    sol = least_squares(resid, theta0, method="lm", xtol=1e-14, ftol=1e-14, max_nfev=20000)
    c, w, a, off = unpack(sol.x)
    order = np.argsort(c)[::-1]  # descending frequency = ascending wavelength
    c, w, a = c[order], w[order], a[order]

    peaks = tuple(LorentzianPeak(float(ci), float(wi), float(ai)) for ci, wi, ai in zip(c, w, a))
    degenerate = []
    for i in range(n_peaks):
        for j in range(i + 1, n_peaks):
            if abs(c[i] - c[j]) < 0.1 * min(w[i], w[j]):
                degenerate.append((i, j))

    m, n = len(y), len(sol.x)
    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj) * 2.0 * sol.cost / max(m - n, 1)
    except np.linalg.LinAlgError:
        cov = np.full((n, n), np.nan)
    return LorentzianFit(
        peaks=peaks,
        offset=float(off * scale),
        covariance=cov,
        residual_norm=float(np.sqrt(2.0 * sol.cost)),
        converged=bool(sol.status > 0),
        degenerate_pairs=tuple(degenerate),
    )
