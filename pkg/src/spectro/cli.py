"""Command-line pipeline: design -> profile -> simulate -> analyze -> herald.

Every subcommand is driven by one config file and writes deterministic
artifacts into the output directory, so identical config + seed reproduce
byte-identical files.  Exit codes: 0 success, 2 invalid configuration or
usage, 3 infeasible design, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import analyze as an
from . import design as dg
from . import repeater as rp
from . import vipa as vp
from .config import RunConfig, load_config
from .errors import ConfigError, InfeasibleDesignError, SpectroError
from .simulate import EventList, read_events_csv, simulate as run_simulation, write_events_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_RUNTIME = 4


def _out_dir(cfg: RunConfig, args) -> Path:
    out = os.environ.get("SPECTRO_OUT") or args.out or cfg.out_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _det_tag(detuning: float) -> str:
    return f"{detuning:+g}MHz"


def _design_report(result: dg.DesignResult, layout: vp.OpticalLayout | None) -> str:
    d = result.to_json_dict()
    lines = [
        "spectrometer design",
        f"  theta_in            {d['theta_in_deg']:.4f} deg (nearest exact resonance: "
        f"order m={d['m']} at {result.diagnostics['theta_in_resonant_deg']:.4f} deg)",
        f"  f_x                 {d['f_x_mm']:.1f} mm",
    ]
    if result.f_in_interval is not None:
        lines.append(f"  f_in interval       [{d['f_in_min_mm']:.1f}, {d['f_in_max_mm']:.1f}] mm")
        if layout is not None:
            inside = d["f_in_min_mm"] <= layout.f_in <= d["f_in_max_mm"]
            marker = "inside" if inside else "OUTSIDE"
            lines.append(f"  configured f_in     {layout.f_in:.1f} mm ({marker} the admissible interval)")
    else:
        lines.append("  f_in interval       empty (beam cannot clear the entrance aperture)")
    lines.append(f"  f_y upper bound     {d['f_y_max_mm']:.1f} mm")
    lines.append(f"  etalon thickness    {d['t_mm']:.4g} mm" + (" (solved for target linewidth)" if result.t_required else ""))
    diag = result.diagnostics
    lines += [
        f"  linewidth (FWHM)    {diag['fwhm_freq_mhz']:.1f} MHz",
        f"  FSR                 {diag['fsr_ghz']:.2f} GHz",
        f"  virtual sources     {diag['n_virtual_sources']:.0f}",
        f"  spot FWHM           {diag['x_fwhm_um']:.1f} um",
        f"  weight off element  {diag['mode_fraction_outside_element'] * 100:.1f} %",
    ]
    return "\n".join(lines) + "\n"


def cmd_design(cfg: RunConfig, args) -> int:
    cfg.require("vipa", "goal")
    goal = cfg.goal
    if args.fwhm_target is not None:
        goal = replace(goal, fwhm_target=args.fwhm_target)
    result = dg.full_design(cfg.vipa, goal)
    out = _out_dir(cfg, args)
    (out / "design.json").write_text(json.dumps(result.to_json_dict(), indent=2, sort_keys=True) + "\n")
    report = _design_report(result, cfg.layout)
    (out / "design.txt").write_text(report)
    print(report, end="")
    return EXIT_OK


def cmd_profile(cfg: RunConfig, args) -> int:
    cfg.require("vipa", "layout")
    detunings = cfg.detunings or (0.0,)
    out = _out_dir(cfg, args)
    half = cfg.profile_half_range
    for det in detunings:
        lam = vp.resonance_aligned_wavelength(cfg.vipa, cfg.layout, det)
        grid = vp.intensity_grid(cfg.vipa, cfg.layout, lam, (-half, half), None, cfg.profile_samples)
        path = out / f"profile_{_det_tag(det)}.csv"
        vp.grid_to_csv(grid, path)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    scenario = cfg.scenario()
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    out = _out_dir(cfg, args)
    if args.pulses == 0:
        for det in scenario.detunings:
            path = out / f"events_{_det_tag(det)}.csv"
            write_events_csv(EventList.empty(), path)
            print(f"wrote {path} (0 events)")
        return EXIT_OK
    if args.pulses is not None:
        scenario = replace(scenario, pulse=replace(scenario.pulse, n_pulses=args.pulses))
    for det in scenario.detunings:
        events = run_simulation(scenario, det, workers=args.workers)
        path = out / f"events_{_det_tag(det)}.csv"
        write_events_csv(events, path)
        if args.sidecar:
            write_events_csv(events, out / f"events_{_det_tag(det)}.origin.csv", include_origin=True)
        print(f"wrote {path} ({len(events)} events)")
    return EXIT_OK


def cmd_analyze(cfg: RunConfig, args) -> int:
    cfg.require("array", "pulse")
    if not cfg.detunings:
        raise ConfigError("section [scenario] with detunings_mhz is required")
    out = _out_dir(cfg, args)
    events_dir = Path(args.events_dir) if args.events_dir else out
    fits = []
    for det in cfg.detunings:
        path = events_dir / f"events_{_det_tag(det)}.csv"
        events = read_events_csv(path)
        hists = an.build_time_histograms(events, cfg.pulse.n_pulses, cfg.array, cfg.pulse.period)
        an.histograms_to_csv(hists, out / f"time_histograms_{_det_tag(det)}.csv")
        profile = an.integrate_window(hists, cfg.window)
        if cfg.dark_subtract:
            floor = an.estimate_dark_floor(hists, cfg.window)
            profile = an.subtract_dark_floor(profile, floor, cfg.array)
        fit = an.fit_lorentzian(profile, weighting=cfg.weighting)
        fits.append(fit)
        an.profile_to_csv(profile, fit, out / f"spatial_profile_{_det_tag(det)}.csv")
    fit_doc = {_det_tag(d): an.fit_to_json_dict(f) for d, f in zip(cfg.detunings, fits)}
    (out / "fits.json").write_text(json.dumps(fit_doc, indent=2, sort_keys=True) + "\n")
    shifts = an.estimate_shifts(fits, cfg.detunings)
    (out / "shifts.json").write_text(an.shifts_to_json(shifts) + "\n")
    for s in shifts:
        err = f" +- {s.stderr:.3f}" if s.converged else " (fit not converged)"
        print(f"detuning {s.detuning:+g} MHz: shift {s.shift_elements:+.3f} elements{err}")
    return EXIT_OK


def cmd_herald(cfg: RunConfig, args) -> int:
    if cfg.herald_single is None or not cfg.herald_multis:
        raise ConfigError("section [herald] is required for this command")
    out = _out_dir(cfg, args)
    rows = rp.sweep(cfg.herald_single, cfg.herald_multis, range(1, cfg.herald_m_max + 1))
    rp.sweep_to_csv(rows, out / "herald_sweep.csv")
    crossovers = {}
    for label, lp in cfg.herald_multis.items():
        try:
            crossovers[label] = rp.crossover_modes(cfg.herald_single, lp)
        except SpectroError as exc:
            crossovers[label] = str(exc)
    (out / "herald_crossovers.json").write_text(json.dumps(crossovers, indent=2, sort_keys=True) + "\n")
    for label, m in crossovers.items():
        print(f"{label}: multiplexed configuration overtakes the baseline at M = {m}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectro", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration file")
    common.add_argument("--out", default=None, help="output directory (SPECTRO_OUT overrides)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    p = sub.add_parser("design", parents=[common], help="solve the spectrometer design equations")
    p.add_argument("--fwhm-target", type=float, default=None, help="target linewidth in MHz (solves thickness)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("profile", parents=[common], help="emit focal-plane intensity profiles per detuning")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("simulate", parents=[common], help="run the Monte Carlo and export event files")
    p.add_argument("--pulses", type=int, default=None, help="override the pulse count (0 = no light)")
    p.add_argument("--workers", type=int, default=1, help="pulse-chunk worker count (result-invariant)")
    p.add_argument("--sidecar", action="store_true", help="also write origin sidecar files")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common], help="reduce event files to histograms, profiles and fits")
    p.add_argument("--events-dir", default=None, help="directory holding the event exports (default: out dir)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("herald", parents=[common], help="heralding-probability sweep and crossover counts")
    p.set_defaults(func=cmd_herald)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleDesignError as exc:
        print(f"infeasible design: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SpectroError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
