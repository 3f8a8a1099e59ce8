"""Adaptive Dormand-Prince 5(4) stepping kernel for linear ODEs y' = M y.

This is the package's hot loop: master-equation evolutions are stiff
(rate ratios up to ~1e6), so millions of small explicit steps may be
taken and per-step overhead matters. The same kernel source is compiled
with numba's @njit when available and also kept as a plain-numpy
function; set NVCAVITY_DISABLE_NUMBA=1 to force the numpy path.
``nvcavity.cli bench`` compares the two.
"""

import os

import numpy as np

from .errors import StiffnessError

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_ENV_FLAG = "NVCAVITY_DISABLE_NUMBA"

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MAX_STEPS = 2

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
DEFAULT_MAX_STEPS = 20_000_000
H_MIN_FRACTION = 1e-14  # of the integration span


def _rk45_core(M, y0, t_out, rtol, atol, max_steps, h_min_frac):
    # Dormand-Prince 5(4), FSAL. Butcher coefficients inline so the same
    # source compiles under numba and runs as plain numpy.
    a21 = 1.0 / 5.0
    a31, a32 = 3.0 / 40.0, 9.0 / 40.0
    a41, a42, a43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
    a51, a52, a53, a54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
    a61, a62, a63, a64, a65 = (
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    )
    b1, b3, b4, b5, b6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
    e1, e3, e4, e5, e6, e7 = (
        71.0 / 57600.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    )

    n_out = t_out.shape[0]
    d = y0.shape[0]
    ys = np.empty((n_out, d), dtype=np.complex128)
    y = y0.copy()
    ys[0] = y
    t = t_out[0]
    span = t_out[n_out - 1] - t
    n_steps = 0
    n_rejected = 0
    if span <= 0.0 or n_out == 1:
        return ys, n_steps, n_rejected, STATUS_OK

    h_min = span * h_min_frac
    k1 = np.dot(M, y)
    sc0 = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((np.abs(y) / sc0) ** 2))
    d1 = np.sqrt(np.mean((np.abs(k1) / sc0) ** 2))
    if d1 > 1e-300:
        h = 0.01 * d0 / d1
    else:
        h = 1e-6 * span
    if h > span:
        h = span

    status = STATUS_OK
    i_out = 1
    while i_out < n_out and status == STATUS_OK:
        t_target = t_out[i_out]
        while True:
            if n_steps >= max_steps:
                status = STATUS_MAX_STEPS
                break
            clipped = t + h >= t_target
            h_use = t_target - t if clipped else h
            if h_use <= 0.0:
                break
            if (not clipped) and h_use < h_min:
                status = STATUS_STEP_UNDERFLOW
                break

            y2 = y + h_use * (a21 * k1)
            k2 = np.dot(M, y2)
            y3 = y + h_use * (a31 * k1 + a32 * k2)
            k3 = np.dot(M, y3)
            y4 = y + h_use * (a41 * k1 + a42 * k2 + a43 * k3)
            k4 = np.dot(M, y4)
            y5 = y + h_use * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)
            k5 = np.dot(M, y5)
            y6 = y + h_use * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)
            k6 = np.dot(M, y6)
            y_new = y + h_use * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6)
            k7 = np.dot(M, y_new)
            err_vec = h_use * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)
            sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean((np.abs(err_vec) / sc) ** 2))

            if err <= 1.0:
                n_steps += 1
                y = y_new
                k1 = k7
                if err > 1e-300:
                    fac = 0.9 * err**-0.2
                    if fac > 5.0:
                        fac = 5.0
                    elif fac < 0.2:
                        fac = 0.2
                else:
                    fac = 5.0
                if clipped:
                    t = t_target
                    # keep the pre-clip h for the next leg
                    break
                t = t + h_use
                h = h_use * fac
            else:
                n_rejected += 1
                fac = 0.9 * err**-0.2
                if fac < 0.2:
                    fac = 0.2
                elif fac > 1.0:
                    fac = 1.0
                h = h_use * fac
                if h < h_min:
                    status = STATUS_STEP_UNDERFLOW
                    break
        if status != STATUS_OK:
            break
        ys[i_out] = y
        i_out += 1
    return ys, n_steps, n_rejected, status


_IMPLS = {"numpy": _rk45_core}
if numba is not None:
    _IMPLS["numba"] = numba.njit(cache=True)(_rk45_core)


def _env_disabled():
    return os.environ.get(_ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


def default_backend():
    """Kernel backend chosen from availability and NVCAVITY_DISABLE_NUMBA."""
    if "numba" in _IMPLS and not _env_disabled():
        return "numba"
    return "numpy"


def available_backends():
    return tuple(sorted(_IMPLS))


def integrate_rk45(
    M,
    y0,
    t_out,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    max_steps=DEFAULT_MAX_STEPS,
    backend=None,
):
    """Integrate y' = M y, returning states at each requested time.

    ``t_out`` must be increasing and start at the initial time. Returns
    (ys, stats) with ys of shape (len(t_out), len(y0)) and stats a dict of
    step counts. Raises StiffnessError on step-size underflow (rates span
    too many decades for the tolerance; rescale) and RuntimeError when the
    step budget is exhausted.
    """
    M = np.ascontiguousarray(M, dtype=np.complex128)
    y0 = np.ascontiguousarray(y0, dtype=np.complex128)
    t_out = np.ascontiguousarray(t_out, dtype=np.float64)
    if t_out.ndim != 1 or len(t_out) == 0:
        raise ValueError("t_out must be a non-empty 1-d array")
    if np.any(np.diff(t_out) < 0):
        raise ValueError("t_out must be non-decreasing")
    impl = _IMPLS[backend if backend is not None else default_backend()]
    ys, n_steps, n_rejected, status = impl(
        M, y0, t_out, float(rtol), float(atol), int(max_steps), H_MIN_FRACTION
    )
    if status == STATUS_STEP_UNDERFLOW:
        raise StiffnessError(
            "adaptive step size underflowed; the generator's rate ratios are too "
            "stiff for this tolerance - rescale rates or relax rtol"
        )
    if status == STATUS_MAX_STEPS:
        raise RuntimeError(f"step budget of {max_steps} exhausted before reaching t_out[-1]")
    return ys, {"n_steps": int(n_steps), "n_rejected": int(n_rejected)}
