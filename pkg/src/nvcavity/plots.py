"""SVG plot emission for the pipeline outputs."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_spectrum_fit(path, lam_nm, counts, model=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lam_nm, counts, ".", ms=3, color="0.4", label="data")
    if model is not None:
        ax.plot(lam_nm, model, "-", color="crimson", label="fit")
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("counts")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_g2_fit(path, tau_ns, g2, model=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(tau_ns, g2, ".", ms=3, color="0.4", label="data")
    if model is not None:
        ax.plot(tau_ns, model, "-", color="crimson", label="fit")
    ax.axhline(1.0, color="0.8", lw=0.8)
    ax.axhline(0.5, color="0.8", lw=0.8, ls="--")
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("g2")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_tuning(path, points):
    fig, ax = plt.subplots(figsize=(7, 4))
    modes = sorted({p.mode_number for p in points})
    for n in modes:
        sel = [p for p in points if p.mode_number == n]
        ax.plot(
            [p.wavelength * 1e9 for p in sel],
            [p.normalized for p in sel],
            "-",
            lw=1.2,
            label=f"n={n}",
        )
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("normalized count rate")
    if len(modes) <= 10:
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return _save(fig, path)


def plot_dephasing_sweep(path, points):
    """Two-axis layout: lifetime and ZPL efficiency against the dephasing rate."""
    fig, ax1 = plt.subplots(figsize=(6, 4))
    gs = [p.gamma_star for p in points]
    ax1.semilogx(gs, [p.lifetime * 1e9 for p in points], "-", color="tab:blue")
    me = [(p.gamma_star, p.me_lifetime) for p in points if p.me_lifetime is not None]
    if me:
        ax1.semilogx(*zip(*[(g, t * 1e9) for g, t in me]), "o", color="tab:blue", mfc="none")
    ax1.set_xlabel("pure dephasing rate (rad/s)")
    ax1.set_ylabel("lifetime (ns)", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.semilogx(gs, [p.efficiency for p in points], "-", color="tab:red")
    me_e = [(p.gamma_star, p.me_efficiency) for p in points if p.me_efficiency is not None]
    if me_e:
        ax2.semilogx(*zip(*me_e), "s", color="tab:red", mfc="none")
    ax2.set_ylabel("emission efficiency", color="tab:red")
    fig.tight_layout()
    return _save(fig, path)


def plot_efficiency_curves(path, lam_nm, curves):
    """curves: {label: efficiency array}."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, vals in curves.items():
        ax.semilogy(lam_nm, vals, "-", label=label)
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("emission efficiency")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_trajectory(path, traj):
    fig, ax = plt.subplots(figsize=(6, 4))
    t_ns = traj.times * 1e9
    ax.semilogy(t_ns, traj.excited_population.clip(1e-12), label="p_e")
    ax.semilogy(t_ns, traj.photon_number.clip(1e-12), label="photon number")
    ax.set_xlabel("time (ns)")
    ax.set_ylabel("population")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
