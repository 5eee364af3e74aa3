"""Command-line front end.

Every subcommand writes CSV files (header row, '.' decimals) plus a
``manifest.json`` into the output directory; most also render PNG figures.
Exit status: 0 success, 1 configuration/validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .bend_twist import (
    BendState,
    bend_delay_variation,
    bent_dispersion,
    crosstalk_curve,
    threshold_bend_radius,
    twist_averaged_delay,
    twist_averaged_delay_exact,
)
from .config import (
    DESIGN_DEFAULTS,
    RunConfig,
    atomic_write,
    bundled_design_path,
    design_to_toml,
    validate_config,
)
from .errors import ConfigError, NumericalError, TTDLError
from .fiber_model import delay_vector, group_delay, increment_errors, mean_increment
from .mode_solver import DesignBounds, design_link
from .mwp_apps import (
    PS,
    TapConfig,
    array_factor,
    default_angle_grid,
    default_frequency_grid,
    filter_response,
    filter_response_exact,
    steering_angle,
    to_polar_convention,
)
from .tolerance_mc import PerturbationSpec, run_tolerance_study, summarize

OUT_ENV = "MCF_TTDL_OUT"
DEFAULT_OUT = "mcf_ttdl_out"
COMMANDS = ("delays", "filter", "beamform", "bend", "twist", "xtalk", "tolerance", "design", "reproduce")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


class Artifacts:
    """Collects the files written by one run, all relative to ``root``."""

    def __init__(self, root: Path, plots: bool = True, gnuplot: bool = False):
        self.root = root
        self.plots = plots
        self.gnuplot = gnuplot
        self.files: list[str] = []
        root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def csv(self, name, header, rows, plot=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
        atomic_write(self.path(name), buf.getvalue())
        self.files.append(name)
        if self.gnuplot and plot is not None:
            xcol, ycol, xlabel, ylabel = plot
            gp = name.rsplit(".", 1)[0] + ".gp"
            script = plotting.gnuplot_script(Path(name).name, xcol, ycol, xlabel, ylabel, Path(name).stem)
            atomic_write(self.path(gp), script)
            self.files.append(gp)

    def text(self, name, content):
        atomic_write(self.path(name), content)
        self.files.append(name)

    def figure(self, name, fn, *args, **kwargs):
        if not self.plots:
            return
        fn(self.path(name), *args, **kwargs)
        self.files.append(name)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _floats(values):
    return [float(v) for v in values]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="fiber design / run config (TOML); default: bundled design")
    common.add_argument("--out", help=f"output directory (env {OUT_ENV}, default ./{DEFAULT_OUT})")
    common.add_argument("--seed", type=int, help="random seed (tolerance)")
    common.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    common.add_argument("--gnuplot", action="store_true", help="also write gnuplot command files")

    p = _Parser(prog="mcf-ttdl", description="Multicore-fiber true time delay line studies")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("delays", parents=[common], help="per-core group delays")
    s.add_argument("--wavelength", nargs="+", type=float, help="nm; default 1530..1575 step 1")

    s = sub.add_parser("filter", parents=[common], help="FIR microwave filter response")
    s.add_argument("--wavelength", nargs="+", type=float, help="nm")
    s.add_argument("--length-km", type=float)
    s.add_argument("--exact", action="store_true", help="use full per-core delays (slope terms)")
    s.add_argument("--f-max", type=float, help="Hz")
    s.add_argument("--f-step", type=float, help="Hz")

    s = sub.add_parser("beamform", parents=[common], help="phased-array factor")
    s.add_argument("--wavelength", nargs="+", type=float, help="nm")
    s.add_argument("--length-km", type=float)
    s.add_argument("--spacing-m", type=float)
    s.add_argument("--carrier-hz", type=float)
    s.add_argument("--angle-step", type=float, help="deg")
    s.add_argument("--angle-convention", choices=("broadside", "polar"), default="broadside")

    s = sub.add_parser("bend", parents=[common], help="bend-induced delay variation")
    s.add_argument("--radii", nargs="+", type=float, help="mm")
    s.add_argument("--wavelength", type=float, help="nm")
    s.add_argument("--theta-radius", type=float, default=50.0, help="radius (mm) of the angle sweep")

    s = sub.add_parser("twist", parents=[common], help="twist-averaged delays")
    s.add_argument("--radii", nargs="+", type=float, help="mm")
    s.add_argument("--turns", type=float)
    s.add_argument("--wavelength", type=float, help="nm")

    s = sub.add_parser("xtalk", parents=[common], help="worst-case crosstalk vs bend radius")
    s.add_argument("--radii", nargs=3, type=float, metavar=("START", "STOP", "STEP"), help="mm")
    s.add_argument("--floor-db", type=float)

    s = sub.add_parser("tolerance", parents=[common], help="fabrication-tolerance Monte Carlo")
    s.add_argument("--trials", type=int)
    s.add_argument("--halfwidth-um", type=float)
    s.add_argument("--sensitivity", choices=("linear", "resolve"))
    s.add_argument("--wavelength", nargs="+", type=float, help="nm")

    s = sub.add_parser("design", parents=[common], help="inverse design of the cores")
    s.add_argument("--targets", nargs="+", type=float, help="D targets, ps/(km nm)")
    s.add_argument("--tau-g0", type=float, help="common anchor delay, ps/km")

    s = sub.add_parser("reproduce", parents=[common], help="run the full figure suite")
    s.add_argument("--with-design", action="store_true", help="include the (slow) design search")
    return p


def _pick(arg, default):
    return default if arg is None else arg


def _taps(cfg: RunConfig, n: int, **kwargs) -> TapConfig:
    w = cfg.run.get("weights")
    if w is None:
        return TapConfig.uniform(n, **kwargs)
    weights = [complex(*x) if isinstance(x, list) else complex(x) for x in w]
    if len(weights) != n:
        raise ConfigError(f"run: 'weights' has {len(weights)} entries for {n} cores")
    return TapConfig(weights=tuple(weights), **kwargs)


def cmd_delays(cfg, args, art):
    link = cfg.link
    lams = _floats(args.wavelength) if args.wavelength else list(np.arange(1530.0, 1575.5, 1.0))
    tau = np.stack([delay_vector(link, lam) for lam in lams], axis=1)
    ids = [c.id for c in link.cores]
    art.csv("delays.csv", ["wavelength_nm", "core_id", "delay_ps_per_km"],
            ((lam, cid, tau[i, j]) for j, lam in enumerate(lams) for i, cid in enumerate(ids)))
    if len(lams) > 1:
        art.figure("delays.png", plotting.core_delays, lams, tau, ids, link.cores[0].model.tau_g0)
    return {"wavelengths_nm": lams}


def _link_for(cfg, length):
    return cfg.link if length is None else replace(cfg.link, length=length)


def cmd_filter(cfg, args, art):
    link = _link_for(cfg, args.length_km)
    lams = _floats(_pick(args.wavelength, cfg.run["wavelengths_nm"]))
    f = default_frequency_grid(_pick(args.f_max, cfg.run["freq_max_hz"]), _pick(args.f_step, cfg.run["freq_step_hz"]))
    taps = _taps(cfg, link.n_cores)
    summary, curves = [], {}
    for lam in lams:
        inc = mean_increment(link, lam) * link.length * PS
        if args.exact:
            resp = filter_response_exact(link, lam, taps, f)
        else:
            resp = filter_response(inc, taps, f)
        name = f"filter_{lam:g}nm.csv"
        art.csv(name, ["freq_hz", "mag_db"], zip(resp.frequencies, resp.magnitude_db),
                plot=(1, 2, "Frequency (Hz)", "|H| (dB)"))
        fsr = resp.fsr if resp.fsr is not None else math.nan
        deg = resp.degradation_db if resp.degradation_db is not None else math.nan
        summary.append((lam, link.length, inc, fsr, deg))
        curves[f"{lam:g} nm"] = (resp.frequencies, resp.magnitude_db)
    art.csv("filter_summary.csv",
            ["wavelength_nm", "length_km", "delay_increment_s", "fsr_hz", "degradation_db"], summary)
    art.figure("filter.png", plotting.filter_responses, curves)
    return {"fsr_hz": {f"{s[0]:g}": s[3] for s in summary}}


def cmd_beamform(cfg, args, art):
    link = _link_for(cfg, args.length_km)
    lams = _floats(_pick(args.wavelength, cfg.run["wavelengths_nm"]))
    spacing = _pick(args.spacing_m, cfg.run["element_spacing_m"])
    carrier = _pick(args.carrier_hz, cfg.run["carrier_hz"])
    grid = default_angle_grid(_pick(args.angle_step, cfg.run["angle_step_deg"]))
    taps = _taps(cfg, link.n_cores, element_spacing=spacing, carrier=carrier)
    polar = args.angle_convention == "polar"
    conv = to_polar_convention if polar else (lambda a: np.asarray(a))
    summary, curves = [], {}
    for lam in lams:
        inc = mean_increment(link, lam) * link.length * PS
        pat = array_factor(inc, taps, grid)
        steer = steering_angle(inc, spacing, carrier)
        name = f"beamform_{lam:g}nm.csv"
        art.csv(name, ["angle_deg", "af_db"], zip(conv(pat.angles), pat.af_db),
                plot=(1, 2, "Angle (deg)", "|AF| (dB)"))
        summary.append((lam, inc, float(conv(pat.main_lobe_angle)), float(conv(steer.angle)), int(steer.aliased)))
        curves[f"{lam:g} nm"] = (conv(pat.angles), pat.af_db)
    art.csv("beamform_summary.csv",
            ["wavelength_nm", "delay_increment_s", "main_lobe_deg", "steering_deg", "aliased"], summary)
    art.figure("beamform.png", plotting.array_factors, curves, polar)
    return {"angle_convention": args.angle_convention}


def cmd_bend(cfg, args, art):
    link = cfg.link
    lam = _pick(args.wavelength, cfg.run["wavelength_nm"])
    radii = _floats(_pick(args.radii, cfg.run["bend_radii_mm"]))
    ids = [c.id for c in link.cores]
    # worst case: each core on the bend's radial direction
    var = np.array([[bend_delay_variation(c, lam, BendState(r, c.theta)) for r in radii] for c in link.cores])
    dvar = np.array([[bent_dispersion(c, lam, BendState(r, c.theta)) - bent_dispersion(c, lam, BendState(1e12))
                      for r in radii] for c in link.cores])
    art.csv("bend.csv", ["radius_mm", "core_id", "delay_ps_per_km"],
            ((r, cid, var[i, j]) for j, r in enumerate(radii) for i, cid in enumerate(ids)))
    art.csv("bend_dispersion.csv", ["radius_mm", "core_id", "dispersion_ps_per_km_nm"],
            ((r, cid, dvar[i, j]) for j, r in enumerate(radii) for i, cid in enumerate(ids)))
    thetas = np.arange(0.0, 360.0 + 1e-9, 2.0)
    rb = args.theta_radius
    sweep = np.array([[bend_delay_variation(c, lam, BendState(rb, c.theta - math.radians(t))) for t in thetas]
                      for c in link.cores])
    art.csv("bend_theta.csv", ["theta_deg", "core_id", "delay_ps_per_km"],
            ((t, cid, sweep[i, j]) for j, t in enumerate(thetas) for i, cid in enumerate(ids)))
    art.figure("bend_delay.png", plotting.per_core_curves, radii, var, ids,
               "Bend radius (mm)", "Worst-case delay variation (ps/km)")
    art.figure("bend_dispersion.png", plotting.per_core_curves, radii, dvar, ids,
               "Bend radius (mm)", "Dispersion variation (ps/(km nm))")
    art.figure("bend_theta.png", plotting.per_core_curves, thetas, sweep, ids,
               "Angle from bend direction (deg)", f"Delay variation at R_b = {rb:g} mm (ps/km)")
    return {"wavelength_nm": lam}


def cmd_twist(cfg, args, art):
    link = cfg.link
    lam = _pick(args.wavelength, cfg.run["wavelength_nm"])
    radii = _floats(_pick(args.radii, [50.0, 100.0, 500.0]))
    turns = _pick(args.turns, cfg.run["twist_turns"])
    rows = []
    for c in link.cores:
        for r in radii:
            rows.append((c.id, r, turns, group_delay(c, lam),
                         twist_averaged_delay(c, lam, r, turns), twist_averaged_delay_exact(c, lam, r, turns)))
    art.csv("twist.csv", ["core_id", "bend_radius_mm", "twist_turns", "straight_ps_per_km",
                          "twist_avg_ps_per_km", "closed_form_ps_per_km"], rows)
    return {"wavelength_nm": lam, "twist_turns": turns}


def cmd_xtalk(cfg, args, art):
    link = cfg.link
    if args.radii:
        start, stop, step = args.radii
        radii = np.arange(start, stop + step / 2, step)
    else:
        radii = np.arange(20.0, 500.0 + 2.5, 5.0)
    floor = _pick(args.floor_db, cfg.run["xtalk_floor_db"])
    curve = crosstalk_curve(link, radii, floor_db=floor)
    art.csv("xtalk.csv", ["radius_mm", "xtalk_db"], zip(curve.radii, curve.xtalk_db),
            plot=(1, 2, "Bend radius (mm)", "Crosstalk (dB)"))
    art.csv("xtalk_summary.csv", ["peak_radius_mm", "core_a", "core_b", "coupling_per_m"],
            [(curve.peak_radius, *curve.critical_pair, curve.coupling)])
    art.figure("xtalk.png", plotting.crosstalk, curve.radii, curve.xtalk_db, curve.peak_radius)
    return {"peak_radius_mm": curve.peak_radius}


def cmd_tolerance(cfg, args, art):
    link = cfg.link
    spec = PerturbationSpec(
        radius_halfwidth=_pick(args.halfwidth_um, cfg.run["radius_halfwidth_um"]),
        seed=_pick(args.seed, cfg.run["seed"]),
        trials=_pick(args.trials, cfg.run["trials"]),
    )
    lams = _floats(_pick(args.wavelength, cfg.run["sample_wavelengths_nm"]))
    report = run_tolerance_study(link, spec, lams, _pick(args.sensitivity, cfg.run["sensitivity"]))
    art.csv("tolerance.csv", ["trial", "core_id", "wavelength_nm", "delay_err_ps_per_km", "compensated"],
            report.rows())
    stats = summarize(report)
    art.csv("tolerance_summary.csv", list(stats), [list(stats.values())])
    art.csv("tolerance_trials.csv", ["trial", "rms_ps_per_km", "rms_compensated_ps_per_km"],
            zip(range(report.trials), report.rms, report.rms_comp))
    ids = list(report.core_ids)
    tau0 = link.cores[0].model.tau_g0
    nominal = np.stack([delay_vector(link, lam) for lam in lams], axis=1)
    art.figure("tolerance_uncompensated.png", plotting.core_delays, lams,
               nominal + report.delay_err[0], ids, tau0, "Trial 0, without compensation")
    art.figure("tolerance_compensated.png", plotting.core_delays, lams,
               nominal + report.delay_err_comp[0], ids, tau0, "Trial 0, with compensation")
    return {"seed": spec.seed, "trials": spec.trials, **stats}


def cmd_design(cfg, args, art):
    d = cfg.design
    targets = _floats(_pick(args.targets, d["targets_D_ps_per_km_nm"]))
    tau = _pick(args.tau_g0, d["target_tau_g0_ps_per_km"])
    bounds = DesignBounds(a1=tuple(d["a1_bounds_um"]), a2=tuple(d["a2_bounds_um"]),
                          w=tuple(d["w_bounds_um"]), delta1=tuple(d["delta1_bounds_pct"]))

    def progress(i, n, des):
        print(f"designed core {i}/{n}: a1={des.profile.a1:.4f} um, delta1={des.profile.delta1:.4f} %, "
              f"D={des.dispersion:.4f}, tau_g0={des.tau_g0:.3f}", file=sys.stderr)

    link, designs = design_link(
        targets, tau, bounds, a2=d["a2_um"], w=d["w_um"], delta1=d["delta1_pct"], delta2=d["delta2_pct"],
        length=cfg.link.length, pitch=cfg.link.core_pitch, cladding_diameter=cfg.link.cladding_diameter,
        progress=progress,
    )
    common_tau = tau if tau is not None else designs[len(designs) // 2].tau_g0
    art.text("design.toml", design_to_toml(link, common_tau))
    art.csv("design.csv", ["core_id", "a1_um", "a2_um", "w_um", "delta1_pct", "delta2_pct",
                           "D_ps_per_km_nm", "S_ps_per_km_nm2", "tau_g0_ps_per_km", "n_eff"],
            ((c.id, c.profile.a1, c.profile.a2, c.profile.w, c.profile.delta1, c.profile.delta2,
              c.model.dispersion, c.model.slope, c.model.tau_g0, c.n_eff) for c in link.cores))
    worst = max(float(np.abs(increment_errors(link, lam)).max()) for lam in np.arange(1530.0, 1570.5, 5.0))
    return {"target_tau_g0_ps_per_km": common_tau, "max_increment_error_ps_per_km": worst}


def cmd_reproduce(cfg, args, art):
    out = {}
    sub = build_parser()
    # one folder per study, default parameters throughout
    runs = [
        ("delays", ["delays"]),
        ("crosstalk", ["xtalk"]),
        ("bend", ["bend"]),
        ("twist", ["twist"]),
        ("tolerance", ["tolerance"]),
        ("filter", ["filter", "--exact"]),
        ("beamform", ["beamform"]),
    ]
    if args.with_design:
        runs.append(("design", ["design"]))
    for folder, argv in runs:
        sub_args = sub.parse_args(argv)
        sub_args.seed = args.seed
        child = Artifacts(art.root / folder, art.plots, art.gnuplot)
        out[folder] = HANDLERS[sub_args.command](cfg, sub_args, child)
        art.files.extend(f"{folder}/{f}" for f in child.files)
    return out


HANDLERS = {
    "delays": cmd_delays,
    "filter": cmd_filter,
    "beamform": cmd_beamform,
    "bend": cmd_bend,
    "twist": cmd_twist,
    "xtalk": cmd_xtalk,
    "tolerance": cmd_tolerance,
    "design": cmd_design,
    "reproduce": cmd_reproduce,
}


def _strip_out(argv):
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        config_path = Path(args.config) if args.config else bundled_design_path()
        cfg = validate_config(config_path)
        out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        try:
            art = Artifacts(out, plots=not args.no_plots, gnuplot=args.gnuplot)
        except OSError as exc:
            raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
        results = HANDLERS[args.command](cfg, args, art)
        config_bytes = config_path.read_bytes()
        manifest = {
            "tool": "mcf-ttdl",
            "version": __version__,
            "command": args.command,
            "argv": _strip_out(argv),
            "config_path": str(config_path.resolve()),
            "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
            "config_text": config_bytes.decode("utf-8"),
            "seed": args.seed,
            "artifacts": art.files,
            "results": _jsonable(results),
        }
        atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except TTDLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def replay_manifest(manifest_path, out_dir) -> int:
    """Re-run the command recorded in a manifest into ``out_dir``.

    The embedded config text is used when the original file is gone or has
    changed since the run.
    """
    manifest = json.loads(Path(manifest_path).read_text())
    argv = list(manifest["argv"])
    cfg = Path(manifest["config_path"])
    current = hashlib.sha256(cfg.read_bytes()).hexdigest() if cfg.exists() else None
    if current != manifest["config_sha256"]:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        restored = Path(out_dir) / "replayed_config.toml"
        restored.write_text(manifest["config_text"])
        cfg = restored
    if "--config" in argv:
        argv[argv.index("--config") + 1] = str(cfg)
    else:
        argv += ["--config", str(cfg)]
    return run(argv + ["--out", str(out_dir)])


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
