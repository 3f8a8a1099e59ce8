"""Benchmark the stepping kernel backends against each other.

Builds representative master-equation generators (a two-level reduction
and the full multi-level emitter) and integrates the same moderately
stiff dynamics on the numba and numpy paths, reporting wall time,
per-step cost, and the maximum deviation between the two solutions.
"""

import time

import numpy as np

from ._kernels import available_backends, integrate_rk45
from .lindblad import build_liouvillian
from .presets import reference_system, zpl_reduced_system

_KAPPA_REF = 7.7e10  # rad/s


def _cases(stiffness):
    system = reference_system(gamma_star=stiffness * _KAPPA_REF)
    reduced = zpl_reduced_system(system)
    gamma = system.emitter.total_radiative
    # two-level: half a radiative lifetime; multi-level: the fast transient
    # only, since its step size is pinned by ~100 THz sideband scales
    yield "two-level", build_liouvillian(reduced, fock_cutoff=1), 0.5 / gamma
    yield "multi-level", build_liouvillian(system, fock_cutoff=1), 5e-11


def run_benchmark(stiffness=10.0, repeats=1):
    """Time each backend on each case; returns a list of result dicts."""
    rows = []
    for name, liouv, t_end in _cases(stiffness):
        t_out = np.linspace(0.0, t_end, 16)
        y0 = liouv.excited_vacuum().density_matrix.reshape(-1)
        solutions = {}
        for backend in available_backends():
            # warm-up compiles and hides first-call overhead for both paths
            integrate_rk45(liouv.generator, y0, t_out[:2], backend=backend)
            best = np.inf
            stats = None
            for _ in range(repeats):
                t0 = time.perf_counter()
                ys, stats = integrate_rk45(liouv.generator, y0, t_out, backend=backend)
                best = min(best, time.perf_counter() - t0)
            solutions[backend] = ys
            rows.append(
                {
                    "case": name,
                    "backend": backend,
                    "hilbert_dim": liouv.hilbert_dim,
                    "n_steps": stats["n_steps"],
                    "seconds": best,
                    "us_per_step": 1e6 * best / max(stats["n_steps"], 1),
                }
            )
        if len(solutions) == 2:
            a, b = solutions.values()
            dev = float(np.max(np.abs(a - b)))
            for row in rows[-2:]:
                row["max_backend_dev"] = dev
    return rows


def format_benchmark(rows):
    lines = [
        f"{'case':<12} {'backend':<8} {'dim':>4} {'steps':>9} {'seconds':>9} "
        f"{'us/step':>8} {'max dev':>10}"
    ]
    for r in rows:
        lines.append(
            f"{r['case']:<12} {r['backend']:<8} {r['hilbert_dim']:>4} {r['n_steps']:>9} "
            f"{r['seconds']:>9.3f} {r['us_per_step']:>8.2f} "
            f"{r.get('max_backend_dev', float('nan')):>10.2e}"
        )
    return "\n".join(lines)
