"""Command-line interface: one subcommand per pipeline.

Exit codes: 0 success, 1 validation/config error, 2 numerical failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import plots
from ._kernels import default_backend
from .bench import format_benchmark, run_benchmark
from .cavity import MirrorLossBudget, PumpModulation, finesse_from_losses
from .config import parse_config
from .constants import NM, THZ, omega_from_wavelength
from .core import (
    CavityMode,
    CoupledSystem,
    branch_couplings,
    build_emitter_from_peaks,
    validate_system,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DimensionError,
    StiffnessError,
    ValidationError,
)
from .experiments import (
    dephasing_sweep,
    predict_count_rate,
    projected_source,
    tuning_spectrum,
)
from .io import load_csv_series, write_json, write_results, write_table
from .lindblad import build_liouvillian, emission_efficiency_me, evolve, extract_lifetime
from .photophysics import (
    ThreeLevelRates,
    classifies_single_emitter,
    fit_g2,
    g2_model,
)
from .presets import default_loss_budget, default_peaks, zpl_reduced_system
from .ratemodel import emission_efficiencies
from .spectra import LorentzianPeak, fit_lorentzians, synth_spectrum


def _emitter_from_config(cfg):
    scale = cfg.rate_scale
    inline = cfg.values["emitter.peaks"]
    table = cfg.values["emitter.peak_table"]
    if inline is not None:
        peaks = [LorentzianPeak.from_nm(c, w * scale, a) for c, w, a in inline]
    elif table == "builtin:nv-default":
        peaks = default_peaks()
        if scale != 1.0:
            peaks = [LorentzianPeak(p.center, p.fwhm * scale, p.area) for p in peaks]
    else:
        path = table if os.path.isabs(table) else os.path.join(cfg.base_dir, table)
        cols = load_csv_series(path, ("center_nm", "fwhm_THz", "area"))
        peaks = [
            LorentzianPeak.from_nm(c, w * scale, a)
            for c, w, a in zip(cols["center_nm"], cols["fwhm_THz"], cols["area"])
        ]
    return build_emitter_from_peaks(
        peaks,
        cfg.total_gamma,
        zpl_index=cfg.values["emitter.zpl_index"],
        gamma_star=cfg.gamma_star,
    )


def _budget_from_config(cfg, with_scatter=True):
    table = cfg.values["losses.table"]
    scatter = cfg.values["losses.scatter_loss"] if with_scatter else 0.0
    if table == "builtin:default":
        return default_loss_budget(scatter_loss=scatter)
    path = table if os.path.isabs(table) else os.path.join(cfg.base_dir, table)
    cols = load_csv_series(path, ("lambda_nm", "t_plane_ppm", "t_fiber_ppm", "absorption_ppm"))
    return MirrorLossBudget(
        wavelengths_m=tuple(cols["lambda_nm"] * NM),
        t_plane=tuple(cols["t_plane_ppm"] * 1e-6),
        t_fiber=tuple(cols["t_fiber_ppm"] * 1e-6),
        absorption=tuple(cols["absorption_ppm"] * 1e-6),
        scatter_loss=scatter,
    )


def _system_from_config(cfg, tune_nm=None, length_um=None):
    emitter = _emitter_from_config(cfg)
    tune = (tune_nm if tune_nm is not None else cfg.values["cavity.tune_nm"]) * NM
    length = (length_um if length_um is not None else
              cfg.values["cavity.effective_length_um"]) * 1e-6
    if cfg.values["cavity.kappa_from"] == "finesse":
        finesse = cfg.values["cavity.finesse"]
    else:
        finesse = float(finesse_from_losses(_budget_from_config(cfg), tune))
    cavity = CavityMode.from_length_finesse(
        length, finesse, omega_from_wavelength(tune), cfg.values["cavity.mode_number"]
    )
    system = CoupledSystem(emitter, cavity, branch_couplings(emitter, cfg.g_zpl))
    problems = validate_system(system)
    if problems:
        raise ValidationError("; ".join(problems))
    return system


def _rates3_from_config(cfg):
    # population rates are plain 1/s (they come from correlation fits, not
    # from optical linewidths), so the units flag does not touch them
    return ThreeLevelRates(
        pump=0.0,
        decay=cfg.values["photophysics.decay"],
        shelve=cfg.values["photophysics.shelve"],
        deshelve=cfg.values["photophysics.deshelve"],
        pump_coefficient=cfg.values["photophysics.pump_coefficient"],
    )


def _add_common(sub, config_required=True):
    sub.add_argument("--config", required=config_required, help="run configuration file")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--format", choices=("csv", "json"), default="csv",
                     help="table output format")
    sub.add_argument("--seed", type=int, default=None,
                     help="RNG seed for synthetic-noise options")


def _rng(args):
    return np.random.default_rng(args.seed)


def cmd_fit_spectrum(args):
    cols = load_csv_series(args.data, ("wavelength_nm", "counts"))
    lam, counts = cols["wavelength_nm"] * NM, cols["counts"]
    if args.synthetic_noise > 0:
        counts = counts + _rng(args).normal(0.0, args.synthetic_noise * counts.max(),
                                            len(counts))
    init = None
    if args.init:
        icols = load_csv_series(args.init, ("center_nm", "fwhm_THz", "area"))
        init = [
            LorentzianPeak.from_nm(c, w, a)
            for c, w, a in zip(icols["center_nm"], icols["fwhm_THz"], icols["area"])
        ]
    fit = fit_lorentzians(lam, counts, args.n_peaks, init=init)
    rows = [(p.center_nm, p.fwhm / THZ, p.area) for p in fit.peaks]
    write_results(os.path.join(args.out, "fitted_peaks.csv"),
                  ("center_nm", "fwhm_THz", "area"), rows, fmt=args.format)
    write_json(
        os.path.join(args.out, "fit_spectrum_report.json"),
        {
            "n_peaks": args.n_peaks,
            "residual_norm": fit.residual_norm,
            "offset": fit.offset,
            "converged": fit.converged,
            "degenerate_pairs": list(fit.degenerate_pairs),
        },
    )
    plots.plot_spectrum_fit(
        os.path.join(args.out, "fit_spectrum.svg"),
        lam / NM,
        counts,
        synth_spectrum(fit.peaks, lam) + fit.offset,
    )
    if fit.flagged:
        print("warning: fit flagged (non-convergence or degenerate peaks)", file=sys.stderr)
    return 0


def cmd_fit_g2(args):
    cols = load_csv_series(args.data, ("delay_ns", "g2"))
    tau, g2 = cols["delay_ns"] * 1e-9, cols["g2"]
    if args.synthetic_noise > 0:
        g2 = g2 + _rng(args).normal(0.0, args.synthetic_noise, len(g2))
    fit = fit_g2(tau, g2)
    p = fit.params
    report = {
        "bunching_amplitude": p.bunching_amplitude,
        "antibunching_time_ns": p.antibunching_time * 1e9,
        "bunching_time_ns": p.bunching_time * 1e9,
        "residual_norm": fit.residual_norm,
        "converged": fit.converged,
        "model_consistent": fit.model_consistent,
        "g2_zero_data": float(np.interp(0.0, tau, g2)),
        "single_emitter": bool(classifies_single_emitter(tau, g2)),
        "covariance_diag": np.diag(fit.covariance),
    }
    write_json(os.path.join(args.out, "fit_g2_report.json"), report)
    plots.plot_g2_fit(os.path.join(args.out, "fit_g2.svg"), tau * 1e9, g2,
                      g2_model(p, tau))
    return 0


def cmd_rate(args):
    cfg = parse_config(args.config)
    system = _system_from_config(cfg, tune_nm=args.tune_nm, length_um=args.length_um)
    res = emission_efficiencies(system)
    lam_nm = system.cavity.wavelength / NM
    rows = [
        (i, r, p, d)
        for i, (r, p, d) in enumerate(
            zip(res.effective_rates, res.efficiencies, res.cavity_detunings)
        )
    ]
    write_results(os.path.join(args.out, "rate_branches.csv"),
                  ("branch", "effective_rate", "efficiency", "detuning"), rows,
                  fmt=args.format)
    write_json(
        os.path.join(args.out, "rate.json"),
        {
            "lambda_c_nm": lam_nm,
            "mode_number": system.cavity.mode_number,
            "kappa": system.cavity.loss_rate,
            "P_tot": res.total_efficiency,
            "tau_cav_s": res.modified_lifetime,
            "lifetime_ratio": (1.0 / system.emitter.total_radiative) / res.modified_lifetime,
        },
    )
    print(f"P_tot({lam_nm:.1f} nm) = {res.total_efficiency:.6g}")
    return 0


def cmd_lindblad(args):
    cfg = parse_config(args.config)
    system = _system_from_config(cfg, tune_nm=args.tune_nm, length_um=args.length_um)
    if cfg.values["lindblad.reduce_to_zpl"]:
        system = zpl_reduced_system(system)
    liouv = build_liouvillian(system, fock_cutoff=cfg.values["lindblad.fock_cutoff"])
    rate_scale = system.emitter.total_radiative + emission_efficiencies(
        system, check_validity=False
    ).rate_sum
    t_end = cfg.values["lindblad.t_max_lifetimes"] / rate_scale
    t_grid = np.linspace(0.0, t_end, cfg.values["lindblad.points"])
    rtol = cfg.values["lindblad.rtol"]
    traj = evolve(liouv, liouv.excited_vacuum(), t_grid, rtol=rtol)
    eff = emission_efficiency_me(liouv, rtol=rtol)
    fit = extract_lifetime(traj)
    rate_res = emission_efficiencies(system, check_validity=False)

    n_levels = traj.ground_populations.shape[1]
    header = ["t", "p_e"] + [f"p_g{i}" for i in range(n_levels)] + ["n_photon"]
    rows = [
        [traj.times[k], traj.excited_population[k]]
        + list(traj.ground_populations[k])
        + [traj.photon_number[k]]
        for k in range(len(traj.times))
    ]
    write_results(os.path.join(args.out, "trajectory.csv"), header, rows, fmt=args.format)
    write_json(
        os.path.join(args.out, "lindblad.json"),
        {
            "hilbert_dim": liouv.hilbert_dim,
            "tau_eff_s": fit.lifetime,
            "non_exponential": fit.non_exponential,
            "P_tot_master_equation": eff.p_total,
            "P_tot_rate_model": rate_res.total_efficiency,
            "branching_sum": eff.branching_sum,
            "backend": default_backend(),
            "steps": traj.stats,
        },
    )
    plots.plot_trajectory(os.path.join(args.out, "trajectory.svg"), traj)
    print(
        f"tau_eff = {fit.lifetime:.4g} s, P_tot(ME) = {eff.p_total:.4g}, "
        f"P_tot(rate model) = {rate_res.total_efficiency:.4g}"
    )
    return 0


def cmd_tuning(args):
    cfg = parse_config(args.config)
    system = _system_from_config(cfg)
    budget = _budget_from_config(cfg)
    sec = cfg.section("tuning")
    lam = np.linspace(sec["lambda_min_nm"], sec["lambda_max_nm"], sec["points"]) * NM
    modes = range(sec["n_long_min"], sec["n_long_max"] + 1)
    modulation = PumpModulation(
        pump_wavelength=cfg.values["pump.wavelength_nm"] * NM,
        visibility=cfg.values["pump.visibility"],
        phase_offset=cfg.values["pump.phase_offset"],
    )
    points = tuning_spectrum(
        system,
        modes,
        lam,
        modulation,
        budget,
        mode_match=cfg.values["detection.mode_match"],
        collection_exponent=sec["collection_exponent"],
    )
    rows = [
        (
            p.mode_number,
            p.wavelength / NM,
            p.cavity_length * 1e6,
            p.efficiency,
            p.modulation,
            p.outcoupling,
            p.collection,
            p.intensity,
            p.normalized,
        )
        for p in points
    ]
    write_results(
        os.path.join(args.out, "tuning.csv"),
        ("mode_number", "wavelength_nm", "length_um", "efficiency", "modulation",
         "outcoupling", "collection", "intensity", "normalized"),
        rows,
        fmt=args.format,
    )
    plots.plot_tuning(os.path.join(args.out, "tuning.svg"), points)
    return 0


def cmd_sweep_dephasing(args):
    cfg = parse_config(args.config)
    system = _system_from_config(cfg)
    sec = cfg.section("sweep")
    grid = np.geomspace(sec["gamma_star_min_ghz"] * 1e9 * cfg.rate_scale,
                        sec["gamma_star_max_thz"] * 1e12 * cfg.rate_scale,
                        sec["points"])
    n_me = args.lindblad_points if args.lindblad_points is not None else sec["lindblad_points"]
    me_idx = np.unique(np.linspace(0, len(grid) - 1, n_me).astype(int)) if n_me else ()
    points = dephasing_sweep(system, grid, lindblad_at=me_idx)
    nan = float("nan")
    rows = [
        (
            p.gamma_star,
            p.lifetime,
            p.efficiency,
            p.lifetime_ratio,
            p.me_lifetime if p.me_lifetime is not None else nan,
            p.me_efficiency if p.me_efficiency is not None else nan,
            p.me_rate_reference if p.me_rate_reference is not None else nan,
        )
        for p in points
    ]
    write_results(
        os.path.join(args.out, "dephasing_sweep.csv"),
        ("gamma_star", "lifetime_s", "efficiency", "lifetime_ratio",
         "me_lifetime_s", "me_efficiency", "me_rate_reference"),
        rows,
        fmt=args.format,
    )
    plots.plot_dephasing_sweep(os.path.join(args.out, "dephasing_sweep.svg"), points)
    return 0


def cmd_predict_rate(args):
    cfg = parse_config(args.config)
    system = _system_from_config(cfg, tune_nm=args.tune_nm, length_um=args.length_um)
    budget = _budget_from_config(cfg)
    pred = predict_count_rate(
        system,
        _rates3_from_config(cfg),
        budget,
        detection_efficiency=cfg.values["detection.efficiency"],
        mode_match=cfg.values["detection.mode_match"],
    )
    write_json(
        os.path.join(args.out, "predict_rate.json"),
        {
            "wavelength_nm": pred.wavelength / NM,
            "length_um": pred.cavity_length * 1e6,
            "finesse": pred.finesse,
            "P_tot": pred.p_total,
            "outcoupling": pred.outcoupling,
            "excited_population_sat": pred.excited_population,
            "detection_efficiency": pred.detection_efficiency,
            "predicted_rate": pred.predicted_rate,
            "sensitivity": [list(s) for s in pred.sensitivity],
        },
    )
    write_table(
        os.path.join(args.out, "predict_rate_sensitivity.csv"),
        ("detection_efficiency", "predicted_rate"),
        [list(s) for s in pred.sensitivity],
    )
    print(f"predicted rate at {pred.wavelength / NM:.1f} nm: {pred.predicted_rate:.4g} /s")
    return 0


def cmd_project(args):
    cfg = parse_config(args.config)
    emitter = _emitter_from_config(cfg)
    report = projected_source(
        finesse=args.finesse,
        linewidth_hz=args.linewidth_ghz * 1e9,
        roc=args.roc_um * 1e-6,
        emitter=emitter,
        three_level_rates=_rates3_from_config(cfg),
        detection_efficiency=cfg.values["detection.efficiency"],
    )
    write_json(
        os.path.join(args.out, "projected_source.json"),
        {
            "finesse": report.finesse,
            "linewidth_ghz": report.linewidth_hz / 1e9,
            "length_um": report.cavity_length * 1e6,
            "waist_um": report.waist * 1e6,
            "mode_volume_um3": report.mode_volume * 1e18,
            "g_zpl": report.g_zpl,
            "kappa": report.kappa,
            "P_tot": report.p_total,
            "predicted_rate": report.predicted_rate,
            "target_rate": report.target_rate,
            "meets_target": report.meets_target,
            "sensitivity": [list(s) for s in report.sensitivity],
        },
    )
    print(
        f"projected source: l = {report.cavity_length * 1e6:.3g} um, "
        f"V = {report.mode_volume * 1e18:.3g} um^3, rate = {report.predicted_rate:.3g} /s "
        f"({'meets' if report.meets_target else 'misses'} {report.target_rate:.0e} /s)"
    )
    return 0


def cmd_bench(args):
    rows = run_benchmark(stiffness=args.stiffness, repeats=args.repeats)
    print(format_benchmark(rows))
    header = ("case", "backend", "hilbert_dim", "n_steps", "seconds", "us_per_step",
              "max_backend_dev")
    write_table(
        os.path.join(args.out, "bench.csv"),
        header,
        [[r["case"], r["backend"], r["hilbert_dim"], r["n_steps"], r["seconds"],
          r["us_per_step"], r.get("max_backend_dev", float("nan"))] for r in rows],
    )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nvcavity",
        description="Broadband-emitter / fiber-microcavity simulation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-spectrum", help="decompose a spectrum into Lorentzians")
    _add_common(p, config_required=False)
    p.add_argument("data", help="CSV with columns wavelength_nm,counts")
    p.add_argument("--n-peaks", type=int, default=8)
    p.add_argument("--init", help="initial peak table CSV (center_nm,fwhm_THz,area)")
    p.add_argument("--synthetic-noise", type=float, default=0.0,
                   help="add Gaussian noise of this relative level before fitting")
    p.set_defaults(func=cmd_fit_spectrum)

    p = sub.add_parser("fit-g2", help="fit the three-level correlation model")
    _add_common(p, config_required=False)
    p.add_argument("data", help="CSV with columns delay_ns,g2")
    p.add_argument("--synthetic-noise", type=float, default=0.0)
    p.set_defaults(func=cmd_fit_g2)

    p = sub.add_parser("rate", help="rate-model efficiencies at the configured tuning")
    _add_common(p)
    p.add_argument("--tune-nm", type=float, default=None)
    p.add_argument("--length-um", type=float, default=None)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("lindblad", help="master-equation evolution and efficiency")
    _add_common(p)
    p.add_argument("--tune-nm", type=float, default=None)
    p.add_argument("--length-um", type=float, default=None)
    p.set_defaults(func=cmd_lindblad)

    p = sub.add_parser("tuning", help="longitudinal-mode tuning spectrum")
    _add_common(p)
    p.set_defaults(func=cmd_tuning)

    p = sub.add_parser("sweep-dephasing", help="lifetime/efficiency vs dephasing rate")
    _add_common(p)
    p.add_argument("--lindblad-points", type=int, default=None,
                   help="number of master-equation cross-check points")
    p.set_defaults(func=cmd_sweep_dephasing)

    p = sub.add_parser("predict-rate", help="detected count-rate prediction")
    _add_common(p)
    p.add_argument("--tune-nm", type=float, default=None)
    p.add_argument("--length-um", type=float, default=None)
    p.set_defaults(func=cmd_predict_rate)

    p = sub.add_parser("project", help="high-finesse source projection")
    _add_common(p)
    p.add_argument("--finesse", type=float, default=1e4)
    p.add_argument("--linewidth-ghz", type=float, default=10.0)
    p.add_argument("--roc-um", type=float, default=5.0)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("bench", help="compare numba and numpy stepping kernels")
    _add_common(p, config_required=False)
    p.add_argument("--stiffness", type=float, default=10.0,
                   help="dephasing rate in units of kappa")
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except (ConfigError, ValidationError, CalibrationError, DimensionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StiffnessError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
