"""Preset pipelines (fig2, fig3, fig4) with their reference numbers.

Each ``run_figN`` computes the figure data, writes plot-ready CSVs into
``out_dir`` and returns a summary with one pass/fail check per reference
number.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classical, designer, geometry, quantum
from ._accel import thread_count
from .scenario import QuantumSettings, Scenario, fig2_params

FIG2_KAPPA_MAX = 0.22e6  # 1/m
FIG3_RADII = np.arange(8.0, 20.01, 2.0) * 1e-6  # m
FIG3_EPSILON = 0.05
FIG3_SAMPLES = 101
FIG4_T2D = 0.295e-3  # half-bend duration of the 2D comparison design, s
FIG4_Y_HALFWIDTH = 7.5  # sigma; 8 sigma would put kappa_max*y_max above 0.9


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    target: str
    passed: bool

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.6g} (target {self.target})"


def rel_check(name, value, ref, rtol):
    return Check(name, float(value), f"{ref:g} +/- {100 * rtol:g}%", bool(abs(value - ref) <= rtol * abs(ref)))


def max_check(name, value, limit):
    return Check(name, float(value), f"<= {limit:g}", bool(value <= limit))


def min_check(name, value, limit):
    return Check(name, float(value), f">= {limit:g}", bool(value >= limit))


@dataclass
class Summary:
    figure: str
    checks: list
    values: dict
    files: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "figure": self.figure,
            "passed": self.passed,
            "checks": [c.__dict__ for c in self.checks],
            "values": self.values,
        }

    def write(self, out_dir):
        path = Path(out_dir) / f"{self.figure}_summary.json"
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        self.files.append(path)
        return path


def fig2_design():
    return designer.design_sta_bend(fig2_params(), FIG2_KAPPA_MAX)


def run_fig2(out_dir) -> Summary:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = fig2_params()
    d = fig2_design()
    path = geometry.reconstruct_path(d.profile, d.s_f / 4000)
    r_eq = geometry.equivalent_radius(path)
    traj = classical.integrate(d.profile, p.omega, classical.ClassicalState(0.0, p.sdot0), sigma=p.sigma)
    a = classical.exit_amplitude(traj, p.omega)
    files = [out / "fig2_profile.csv", out / "fig2_path.csv", out / "fig2_design.json", out / "fig2_trajectory.csv"]
    d.profile.to_csv(files[0])
    path.to_csv(files[1])
    d.write_metadata(files[2])
    traj.to_csv(files[3])
    checks = [
        rel_check("s_f [um]", d.s_f * 1e6, 16.6, 0.03),
        rel_check("2T [ms]", 2 * d.T * 1e3, 0.88, 0.03),
        rel_check("R_eq [um]", r_eq * 1e6, 10.0, 0.05),
        max_check("exit amplitude [sigma]", a / p.sigma, 1e-4),
        max_check("energy drift", traj.energy_drift(), 1e-8),
    ]
    values = {
        "s_f_m": d.s_f, "T_s": d.T, "delta_y_m": d.delta_y, "R_eq_m": r_eq,
        "corner_clearance_m": geometry.corner_clearance(path), "exit_amplitude_m": a,
    }
    return Summary("fig2", checks, values, files)


def run_fig3(out_dir, radii=None, epsilon=FIG3_EPSILON, n_samples=FIG3_SAMPLES, threads=None) -> Summary:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    radii = FIG3_RADII if radii is None else np.asarray(radii)
    scan = classical.radius_scan(fig2_params(), radii, epsilon, n_samples, threads=threads)
    files = [out / "fig3_radii.csv"]
    scan.to_csv(files[0])
    checks = [
        min_check(f"alpha_c/alpha_sta at R={R * 1e6:.3g} um", ratio, 10.0)
        for R, ratio in zip(scan.radius, scan.ratio)
    ]
    minima = scan.local_minima()
    checks.append(min_check("local minima of alpha_c", len(minima), 1))
    values = {
        "radius_m": scan.radius.tolist(), "alpha_c": scan.alpha_c.tolist(),
        "alpha_sta": scan.alpha_sta.tolist(), "kappa_m_per_m": scan.kappa_m.tolist(),
        "alpha_c_minima_m": [float(scan.radius[i]) for i in minima],
    }
    return Summary("fig3", checks, values, files)


def fig4_designs():
    p = fig2_params()
    km = designer.kappa_m_for_duration(p, FIG4_T2D)
    d2 = designer.design_sta_bend(p, km)
    d1 = designer.design_adiabatic_1d_bend(p, d2.delta_y)
    return d2, d1


def fig4_scenario(kappa_m, **quantum_kw):
    kw = {"y_halfwidth_sigma": FIG4_Y_HALFWIDTH}
    kw.update(quantum_kw)
    return Scenario(params=fig2_params(), design_kind="sta2d", kappa_max=kappa_m, quantum=QuantumSettings(**kw))


def speed_minimum_position(result: quantum.ProtocolResult):
    o = result.observables
    sd = o.array("sdot_mean")
    return float(o.array("s_mean")[np.argmin(sd)])


def in_high_curvature_half(profile_nat, s):
    """True when kappa(s) is above the median of kappa over the bend."""
    grid = np.linspace(0.0, profile_nat.s_f, 2001)
    return bool(profile_nat(s) >= np.median(profile_nat(grid)))


def post_bend_amplitude(result: quantum.ProtocolResult):
    """max |<y>| once <s> >= s_f, natural units."""
    o = result.observables
    s = o.array("s_mean")
    y = o.array("y_mean")
    return float(np.max(np.abs(y[s >= o.s_f])))


def run_fig4(out_dir, threads=None, **quantum_kw) -> Summary:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = fig2_params()
    d2, d1 = fig4_designs()
    sc = fig4_scenario(d2.kappa_m, **quantum_kw)
    report = geometry.adiabaticity_report(d2.profile, p.sigma)
    with ThreadPoolExecutor(max_workers=min(2, threads or thread_count())) as pool:
        r2, r1 = pool.map(lambda d: quantum.run_protocol(d.profile, sc), (d2, d1))
    files = []
    for tag, d, r in (("2d", d2, r2), ("1d", d1, r1)):
        d.profile.to_csv(out / f"fig4_profile_{tag}.csv")
        d.write_metadata(out / f"fig4_design_{tag}.json")
        files += [out / f"fig4_profile_{tag}.csv", out / f"fig4_design_{tag}.json"]
        files += r.write(out, prefix=f"fig4_{tag}")
    report.to_csv(out / "fig4_adiabaticity_2d.csv")
    files.append(out / "fig4_adiabaticity_2d.csv")

    nat2 = d2.profile.scaled(p.sigma)
    s_min = speed_minimum_position(r2)
    amp1 = post_bend_amplitude(r1)
    checks = [
        rel_check("s_f,2D [um]", d2.s_f * 1e6, 10.37, 0.03),
        rel_check("T_1D [ms]", d1.T * 1e3, 0.334, 0.03),
        rel_check("s_f,1D [um]", d1.s_f * 1e6, 13.36, 0.03),
        max_check("nbar_2D", r2.metrics["nbar"], 1e-2),
        rel_check("nbar_1D", r1.metrics["nbar"], 1.4, 0.30),
        min_check("fidelity_2D", r2.metrics["fidelity"], 0.99),
        Check("<sdot> minimum in high-curvature half (s/s_f)", s_min / nat2.s_f, "kappa above its median",
              in_high_curvature_half(nat2, s_min)),
        Check("post-bend <y> amplitude 1D [sigma]", amp1, "> 0.5", amp1 > 0.5),
        rel_check("max sigma|kappa'|/kappa", report.max_b, 0.6, 0.2 / 0.6),
        rel_check("max sigma|kappa''|/kappa^2", report.max_c, 5.0, 2.0 / 5.0),
    ]
    values = {
        "kappa_m_2d_per_m": d2.kappa_m, "T_2d_s": d2.T, "s_f_2d_m": d2.s_f, "delta_y_m": d2.delta_y,
        "T_1d_s": d1.T, "s_f_1d_m": d1.s_f,
        "metrics_2d": r2.metrics, "metrics_1d": r1.metrics,
        "adiabaticity_2d": report.summary(),
    }
    return Summary("fig4", checks, values, files)


RUNNERS = {"fig2": run_fig2, "fig3": run_fig3, "fig4": run_fig4}
