"""Command-line entry point: ``curvguide <command> ...``.

Exit codes: 0 success, 2 usage error, 3 invalid input, 4 numerical failure.
Errors are reported on stderr as a one-line JSON record. Every command
appends a record of the files it wrote to ``<out-dir>/manifest.jsonl``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, classical, designer, geometry, quantum, reproduce
from .errors import CurvguideError, NumericalError, ValidationError
from .scenario import PhysicalParams, QuantumSettings, RB87_MASS, Scenario, dumps_scenario, load_scenario

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3, 4


def _version():
    return __version__


# ---------------------------------------------------------------- scenario from flags


def _scenario(args, need_design=False):
    """Scenario file (if any) with command-line overrides applied."""
    base = load_scenario(args.scenario) if args.scenario else None
    omega_hz = getattr(args, "omega_hz", None)
    sdot0 = getattr(args, "sdot0_mm_s", None)
    mass = getattr(args, "mass_kg", None)
    if base is None and (omega_hz is None or sdot0 is None):
        raise _Usage("need --scenario or both --omega-hz and --sdot0-mm-s")
    if base is not None:
        p = base.params
        params = PhysicalParams(
            omega=2 * math.pi * omega_hz if omega_hz is not None else p.omega,
            sdot0=sdot0 * 1e-3 if sdot0 is not None else p.sdot0,
            mass=mass if mass is not None else p.mass,
        )
    else:
        params = PhysicalParams.from_lab(omega_hz, sdot0, mass if mass is not None else RB87_MASS)

    kind = getattr(args, "kind", None)
    if getattr(args, "adiabatic1d", False):
        kind = "adiabatic1d"
    km = getattr(args, "kappa_max_per_um", None)
    radius = getattr(args, "radius_um", None)
    dy = getattr(args, "delta_y_um", None)
    angle = getattr(args, "angle_deg", None)
    kw = {
        "design_kind": kind or (base.design_kind if base else None),
        "kappa_max": km * 1e6 if km is not None else (base.kappa_max if base else None),
        "radius": radius * 1e-6 if radius is not None else (base.radius if base else None),
        "delta_y": dy * 1e-6 if dy is not None else (base.delta_y if base else None),
        "angle": math.radians(angle) if angle is not None else (base.angle if base else math.pi / 2),
        "quantum": _quantum_settings(args, base.quantum if base else QuantumSettings()),
    }
    if kw["design_kind"] is None:
        if not need_design:
            # a placeholder design so that parameter-only commands still get a Scenario
            kw.update(design_kind="circular", radius=kw["radius"] or 1.0)
        elif km is not None:
            kw["design_kind"] = "sta2d"
        elif radius is not None:
            kw["design_kind"] = "circular"
        else:
            raise _Usage("need --kind (or --kappa-max-per-um / --radius-um / --adiabatic1d)")
    if need_design:
        k = kw["design_kind"]
        if k == "sta2d" and kw["kappa_max"] is None:
            raise _Usage("--kind sta2d needs --kappa-max-per-um")
        if k == "circular" and kw["radius"] is None:
            raise _Usage("--kind circular needs --radius-um")
        if k == "adiabatic1d" and kw["delta_y"] is None and kw["kappa_max"] is None:
            raise _Usage("--kind adiabatic1d needs --delta-y-um or --kappa-max-per-um")
    return Scenario(params=params, **kw)


def _quantum_settings(args, base: QuantumSettings):
    kw = {}
    for flag, key in (("ns", "grid_ns"), ("ny", "grid_ny"), ("y_max_sigma", "y_halfwidth_sigma"),
                      ("dt_fraction", "dt_fraction")):
        value = getattr(args, flag, None)
        if value is not None:
            kw[key] = value
    if not kw:
        return base
    merged = {f: getattr(base, f) for f in base.__dataclass_fields__}
    merged.update(kw)
    return QuantumSettings(**merged)


class _Usage(Exception):
    pass


# ---------------------------------------------------------------- commands


def cmd_design(args, out):
    sc = _scenario(args, need_design=True)
    d = designer.design_from_scenario(sc)
    sigma = sc.params.sigma
    path = geometry.reconstruct_path(d.profile, d.s_f / 4000)
    files = [out / "profile.csv", out / "design.json", out / "path.csv", out / "adiabaticity.csv",
             out / "scenario.toml"]
    d.profile.to_csv(files[0])
    d.write_metadata(files[1])
    path.to_csv(files[2])
    report = geometry.adiabaticity_report(d.profile, sigma)
    report.to_csv(files[3])
    files[4].write_text(dumps_scenario(sc))
    summary = {
        "kind": d.kind,
        "s_f_um": d.s_f * 1e6,
        "T_ms": None if d.T is None else d.T * 1e3,
        "2T_ms": None if d.T is None else 2 * d.T * 1e3,
        "delta_y_um": None if d.delta_y is None else d.delta_y * 1e6,
        "R_eq_um": geometry.equivalent_radius(path) * 1e6,
        "kappa_max_per_um": d.profile.kappa_max * 1e-6,
        "turn_angle_deg": math.degrees(d.profile.turn_angle()),
        **{k: v for k, v in report.summary().items()},
    }
    _print_summary(summary)
    return files, sc


def cmd_path(args, out):
    profile = geometry.read_profile_csv(args.profile)
    ds = args.ds_um * 1e-6 if args.ds_um is not None else profile.s_f / 4000
    path = geometry.reconstruct_path(profile, ds)
    files = [out / "path.csv"]
    path.to_csv(files[0])
    summary = {"s_f_um": profile.s_f * 1e6, "end_X_um": path.X[-1] * 1e6, "end_Y_um": path.Y[-1] * 1e6,
               "turn_angle_deg": math.degrees(path.theta[-1])}
    try:
        summary["R_eq_um"] = geometry.equivalent_radius(path) * 1e6
        summary["corner_clearance_um"] = geometry.corner_clearance(path) * 1e6
    except ValidationError:
        summary["R_eq_um"] = None  # not a right-angle connector
    _print_summary(summary)
    return files, None


def cmd_diagnose(args, out):
    sc = _scenario(args)
    profile = geometry.read_profile_csv(args.profile)
    report = geometry.adiabaticity_report(profile, sc.params.sigma)
    files = [out / "adiabaticity.csv"]
    report.to_csv(files[0])
    _print_summary({"sigma_um": sc.params.sigma * 1e6, **report.summary()})
    return files, sc


def cmd_classical(args, out):
    sc = _scenario(args)
    p = sc.params
    if args.action == "sweep-radii":
        radii = _radii(args)
        scan = classical.radius_scan(p, radii, args.epsilon, args.samples, angle=sc.angle)
        files = [out / "radii.csv"]
        scan.to_csv(files[0])
        _print_summary({
            "radius_um": (scan.radius * 1e6).round(6).tolist(),
            "alpha_c": scan.alpha_c.tolist(),
            "alpha_sta": scan.alpha_sta.tolist(),
            "min_ratio": float(scan.ratio.min()),
            "alpha_c_minima_um": [float(scan.radius[i] * 1e6) for i in scan.local_minima()],
        })
        return files, sc
    if args.profile is None:
        raise _Usage(f"classical {args.action} needs --profile")
    profile = geometry.read_profile_csv(args.profile)
    if args.action == "run":
        sdot = args.sdot_mm_s * 1e-3 if args.sdot_mm_s is not None else p.sdot0
        init = classical.ClassicalState(s=args.s0_um * 1e-6, sdot=sdot, y=args.y0_um * 1e-6,
                                        ydot=args.ydot0_mm_s * 1e-3)
        s_stop = args.s_stop_um * 1e-6 if args.s_stop_um is not None else None
        traj = classical.integrate(profile, p.omega, init, dt=args.dt_s, s_stop=s_stop, sigma=p.sigma)
        files = [out / "trajectory.csv"]
        traj.to_csv(files[0])
        summary = {"steps": len(traj.t) - 1, "energy_drift": traj.energy_drift(), "reflected": traj.reflected}
        if traj.exit is not None:
            a = classical.exit_amplitude(traj, p.omega)
            summary.update(exit_amplitude_um=a * 1e6, exit_amplitude_sigma=a / p.sigma,
                           excess_quanta=classical.excess_quanta_classical(a, p.sigma))
        _print_summary(summary)
        return files, sc
    res = classical.robustness_sweep(profile, p.omega, p.sdot0, args.epsilon, args.samples, p.sigma)
    files = [out / "sweep.csv"]
    res.to_csv(files[0])
    _print_summary({"alpha_bar": res.alpha_bar, "epsilon": args.epsilon, "samples": args.samples})
    return files, sc


def _radii(args):
    if args.radii_um:
        try:
            radii = [float(v) for v in args.radii_um.split(",") if v.strip()]
        except ValueError as exc:
            raise _Usage(f"--radii-um: {exc}") from exc
    else:
        radii = np.arange(args.r_min_um, args.r_max_um + 0.5 * args.r_step_um, args.r_step_um).tolist()
    if len(radii) < 1 or min(radii) <= 0:
        raise ValidationError("radii_um", "need positive radii")
    return np.array(radii) * 1e-6


def cmd_quantum(args, out):
    sc = _scenario(args)
    profile = geometry.read_profile_csv(args.profile)
    res = quantum.run_protocol(profile, sc)
    files = res.write(out, prefix="quantum")
    m = res.metrics
    if m["leakage_warning"]:
        print(f"warning: boundary leakage {m['leakage_max']:.2e} above {quantum.LEAKAGE_WARN:g}", file=sys.stderr)
    _print_summary({k: m[k] for k in ("nbar", "fidelity", "sdot_final_over_sdot0", "norm_drift_max",
                                      "leakage_max", "steps")})
    return files, sc


def cmd_reproduce(args, out):
    runner = reproduce.RUNNERS[args.figure]
    summary = runner(out)
    summary.write(out)
    for c in summary.checks:
        print(c.line())
    print(f"{args.figure}: {'PASS' if summary.passed else 'FAIL'}")
    return summary.files, None


def _print_summary(d):
    for k, v in d.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        print(f"{k}: {v}")


# ---------------------------------------------------------------- parser


def _common(p):
    p.add_argument("--scenario", help="scenario TOML file")
    p.add_argument("--out-dir", default=".", help="output directory (default: current)")


def _physics(p):
    p.add_argument("--omega-hz", type=float, help="trap frequency omega/2pi [Hz]")
    p.add_argument("--sdot0-mm-s", type=float, help="incident velocity [mm/s]")
    p.add_argument("--mass-kg", type=float, help="atom mass [kg] (default 87Rb)")


def build_parser():
    ap = argparse.ArgumentParser(prog="curvguide", description="Design and validate curved matter-wave guides.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design a bend and write its profile, path and diagnostics")
    _common(p)
    _physics(p)
    p.add_argument("--kind", choices=("sta2d", "adiabatic1d", "circular"))
    p.add_argument("--adiabatic1d", action="store_true", help="shorthand for --kind adiabatic1d")
    p.add_argument("--kappa-max-per-um", type=float)
    p.add_argument("--radius-um", type=float)
    p.add_argument("--delta-y-um", type=float, help="transverse excursion for adiabatic1d (negative)")
    p.add_argument("--angle-deg", type=float)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("path", help="reconstruct the planar path of a profile")
    _common(p)
    p.add_argument("--profile", required=True)
    p.add_argument("--ds-um", type=float, help="integration step (default s_f/4000)")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("diagnose", help="adiabaticity ratios of a profile")
    _common(p)
    _physics(p)
    p.add_argument("--profile", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("classical", help="classical trajectories and velocity sweeps")
    _common(p)
    _physics(p)
    p.add_argument("action", choices=("run", "sweep", "sweep-radii"))
    p.add_argument("--profile")
    p.add_argument("--sdot-mm-s", type=float, help="run: initial velocity (default sdot0)")
    p.add_argument("--s0-um", type=float, default=0.0)
    p.add_argument("--y0-um", type=float, default=0.0)
    p.add_argument("--ydot0-mm-s", type=float, default=0.0)
    p.add_argument("--dt-s", type=float)
    p.add_argument("--s-stop-um", type=float)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--radii-um", help="comma separated radii for sweep-radii")
    p.add_argument("--r-min-um", type=float, default=8.0)
    p.add_argument("--r-max-um", type=float, default=20.0)
    p.add_argument("--r-step-um", type=float, default=2.0)
    p.add_argument("--angle-deg", type=float)
    p.set_defaults(func=cmd_classical)

    p = sub.add_parser("quantum", help="2D Schroedinger propagation through a bend")
    _common(p)
    _physics(p)
    p.add_argument("action", choices=("run",))
    p.add_argument("--profile", required=True)
    p.add_argument("--ns", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--y-max-sigma", type=float)
    p.add_argument("--dt-fraction", type=float)
    p.set_defaults(func=cmd_quantum)

    p = sub.add_parser("reproduce", help="run a preset pipeline and compare with the reference numbers")
    _common(p)
    p.add_argument("figure", choices=tuple(reproduce.RUNNERS))
    p.set_defaults(func=cmd_reproduce)
    return ap


def _append_manifest(out, args, argv, files, scenario, duration):
    record = {
        "scenario_hash": scenario.digest() if scenario is not None else None,
        "command": args.command,
        "arguments": list(argv),
        "artifacts": sorted(str(Path(f).name) for f in files),
        "version": _version(),
        "duration_s": round(duration, 3),
    }
    with open(out / "manifest.jsonl", "a") as fh:
        fh.write(json.dumps(record) + "\n")


def _error(kind, exc, code):
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ValidationError):
        record["key"] = exc.key
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    out = Path(args.out_dir)
    start = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        files, sc = args.func(args, out)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        return _error("usage", exc, EXIT_USAGE)
    except ValidationError as exc:
        return _error("validation", exc, EXIT_VALIDATION)
    except NumericalError as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)
    except CurvguideError as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)
    _append_manifest(out, args, argv, files, sc, time.perf_counter() - start)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
