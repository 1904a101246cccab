"""Bend design: exact inverse engineering, the 1D-adiabatic baseline and circles.

The two trajectory-based designs impose the quintic transverse trajectory
y(t) = P(t/T), P(x) = dy (10x^3 - 15x^4 + 6x^5), on the first half of the
bend and mirror it on the second half. All arithmetic is done in natural
units (sigma, 1/omega); public inputs and outputs are SI.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import _kernels
from .errors import BranchLoss, InfeasibleDesign, NoBracket, NumericalError, ValidationError
from .geometry import CurvatureProfile, equivalent_radius, reconstruct_path
from .scenario import PhysicalParams, Scenario

N_HALF = 4001  # time samples per half bend
T_RANGE = (1e-3, 1e3)  # allowed half-bend durations, units of 1/omega
ANGLE_TOL = 1e-10


def _poly(delta_y, T, tau):
    """y, y', y'', y''' at tau = t/T in [0, 1] (time derivatives)."""
    x = tau
    y = delta_y * x**3 * (10 - 15 * x + 6 * x * x)
    yd = delta_y * 30 * x * x * (1 - x) ** 2 / T
    ydd = delta_y * 60 * x * (1 - x) * (1 - 2 * x) / T**2
    yddd = delta_y * (60 - 360 * x + 360 * x * x) / T**3
    return y, yd, ydd, yddd


def polynomial_trajectory(delta_y, T, t):
    """(y, ydot, yddot) of the imposed trajectory, any consistent units.

    y(t) = P(t/T) on [0, T] and y(t) = P((2T - t)/T) on [T, 2T].
    """
    t_arr = np.asarray(t, dtype=float)
    if not T > 0:
        raise ValidationError("T", f"must be > 0, got {T!r}")
    if np.any(t_arr < 0) or np.any(t_arr > 2 * T) or not np.all(np.isfinite(t_arr)):
        raise ValidationError("t", f"must lie in [0, 2T] = [0, {2 * T!r}]")
    second = t_arr > T
    tau = np.where(second, (2 * T - t_arr) / T, t_arr / T)
    y, yd, ydd, _ = _poly(delta_y, T, tau)
    yd = np.where(second, -yd, yd)
    if t_arr.ndim == 0:
        return float(y), float(yd), float(ydd)
    return y, yd, ydd


def solve_delta_y(sdot0, omega, kappa_m):
    """Negative root of 2 k dy^2 - dy - k sdot0^2/omega^2 = 0."""
    for name, value in (("sdot0", sdot0), ("omega", omega), ("kappa_m", kappa_m)):
        if not value > 0:
            raise ValidationError(name, f"must be > 0, got {value!r}")
    u = kappa_m * sdot0 / omega
    # -(sqrt(1 + 8u^2) - 1)/(4 k), rewritten to keep precision for small u
    return -2.0 * u * u / (kappa_m * (math.sqrt(1.0 + 8.0 * u * u) + 1.0))


@dataclass(frozen=True)
class TransverseTrajectory:
    T: float  # s
    delta_y: float  # m

    def __call__(self, t):
        return polynomial_trajectory(self.delta_y, self.T, t)


@dataclass(frozen=True)
class BendDesign:
    """A designed bend. ``tables`` holds t, s, sdot, v_kappa, kappa (SI) over the full bend."""

    kind: str
    profile: CurvatureProfile
    params: PhysicalParams | None
    angle: float
    trajectory: TransverseTrajectory | None = None
    T: float | None = None
    kappa_m: float | None = None
    radius: float | None = None
    tables: dict = field(default_factory=dict, repr=False)

    @property
    def s_f(self):
        return self.profile.s_f

    @property
    def delta_y(self):
        return None if self.trajectory is None else self.trajectory.delta_y

    def metadata(self):
        p = self.params
        return {
            "kind": self.kind,
            "T_s": self.T,
            "delta_y_m": self.delta_y,
            "kappa_m_per_m": self.kappa_m if self.kappa_m is not None else self.profile.kappa_max,
            "s_f_m": self.s_f,
            "angle_rad": self.angle,
            "sdot0_m_s": None if p is None else p.sdot0,
            "omega_rad_s": None if p is None else p.omega,
            "radius_m": self.radius,
        }

    def write_metadata(self, path):
        """JSON, or TOML when the suffix is .toml (unset fields are dropped there)."""
        path = Path(path)
        meta = self.metadata()
        if path.suffix == ".toml":
            path.write_text(tomli_w.dumps({k: v for k, v in meta.items() if v is not None}))
        else:
            path.write_text(json.dumps(meta, indent=2) + "\n")


def _check_angle(angle):
    if not 0 < angle <= math.pi:
        raise ValidationError("angle", f"must lie in (0, pi], got {angle!r}")


def _natural(params):
    return params.sdot0 / (params.sigma * params.omega)


# ---------------------------------------------------------------- 2D design


def _sta_half(dy, T, v0, n=N_HALF):
    """Half-bend tables in natural units. Raises InfeasibleDesign."""
    t = np.linspace(0.0, T, n)
    y, yd, ydd, yddd = _poly(dy, T, t / T)
    vk2 = v0 * v0 - yd * yd - y * y
    if np.min(vk2) <= 0:
        raise InfeasibleDesign(
            f"transverse energy exceeds the kinetic energy (T={T:.6g}/omega): incident velocity too small"
        )
    vk = np.sqrt(vk2)
    F = ydd + y
    D = vk2 - F * y
    if np.min(D) <= 0:
        raise InfeasibleDesign(f"longitudinal velocity would reverse (T={T:.6g}/omega)")
    sd = D / vk
    kappa = -F / D
    dF = yddd + yd
    dD = -3.0 * yd * F - dF * y
    kdot = -(dF * D - F * dD) / D**2
    sdd = (dD * vk2 + D * yd * F) / (vk2 * vk)
    return {"t": t, "y": y, "sdot": sd, "sddot": sdd, "v_kappa": vk, "kappa": kappa, "dkappa_ds": kdot / sd}


def _sta_angle(dy, T, v0):
    tab = _sta_half(dy, T, v0)
    return simpson(tab["kappa"] * tab["sdot"], x=tab["t"])


def _bracket_root(g, T0, lo=T_RANGE[0], hi=T_RANGE[1], factor=1.5):
    """Bracket g(T) = 0 by geometric growth from T0, then brentq.

    g raises NumericalError where the design is infeasible; infeasible T
    are treated as lying below the feasible branch (g increasing in T).
    """

    def safe(T):
        try:
            return g(T)
        except NumericalError:
            return None

    T0 = min(max(T0, lo), hi)
    g0 = safe(T0)
    a = b = None
    if g0 is None or g0 < 0:
        Tp = T0
        prev = T0 if g0 is not None else None
        while True:
            Tn = Tp * factor
            if Tn > hi:
                raise NoBracket(f"no sign change of the angle residual for T up to {hi}/omega")
            gn = safe(Tn)
            if gn is not None and gn >= 0:
                if prev is None:
                    # only infeasible points below: search the feasibility edge for g < 0
                    a = _feasible_negative(safe, Tp, Tn)
                else:
                    a = prev
                b = Tn
                break
            if gn is not None:
                prev = Tn
            Tp = Tn
    else:
        Tp = T0
        while True:
            Tn = Tp / factor
            if Tn < lo:
                raise NoBracket(f"no sign change of the angle residual for T down to {lo}/omega")
            gn = safe(Tn)
            if gn is None:
                a = _feasible_negative(safe, Tn, Tp)
                b = Tp
                break
            if gn < 0:
                a, b = Tn, Tp
                break
            Tp = Tn
    return brentq(lambda T: g(T), a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def _feasible_negative(safe, t_bad, t_good):
    """Bisect between an infeasible and a feasible T for a feasible point with g < 0."""
    for _ in range(60):
        mid = 0.5 * (t_bad + t_good)
        gm = safe(mid)
        if gm is None:
            t_bad = mid
        elif gm < 0:
            return mid
        else:
            t_good = mid
    raise NoBracket("angle residual stays positive down to the feasibility limit")


def _mirror_tables(half, T):
    """Full-bend tables from the first half (kappa symmetric in s)."""
    t = half["t"]
    s = half["s"]
    full = {
        "t": np.concatenate([t, 2 * T - t[-2::-1]]),
        "s": np.concatenate([s, 2 * s[-1] - s[-2::-1]]),
    }
    for key in ("sdot", "v_kappa", "kappa"):
        full[key] = np.concatenate([half[key], half[key][-2::-1]])
    # kappa has a corner at the midpoint: the jerk of y flips sign there
    dk = half["dkappa_ds"]
    full["slope_right"] = np.concatenate([dk[:-1], -dk[::-1]])
    full["slope_left"] = np.concatenate([dk, -dk[-2::-1]])
    return full


def _finish(kind, params, angle, dy, T, half, kappa_m=None):
    # s(t) from the Hermite interpolant of sdot with its exact derivative
    half["s"] = CubicHermiteSpline(half["t"], half["sdot"], half["sddot"]).antiderivative()(half["t"])
    full = _mirror_tables(half, T)
    L, tau = params.sigma, 1.0 / params.omega
    profile = CurvatureProfile(
        full["s"] * L, full["kappa"] / L, full["slope_right"] / L**2, full["slope_left"] / L**2
    )
    tables = {
        "t": full["t"] * tau,
        "s": full["s"] * L,
        "sdot": full["sdot"] * L / tau,
        "v_kappa": full["v_kappa"] * L / tau,
        "kappa": full["kappa"] / L,
    }
    return BendDesign(
        kind=kind,
        profile=profile,
        params=params,
        angle=angle,
        trajectory=TransverseTrajectory(T=T * tau, delta_y=dy * L),
        T=T * tau,
        kappa_m=kappa_m,
        tables=tables,
    )


def design_sta_bend(params: PhysicalParams, kappa_m, angle=math.pi / 2) -> BendDesign:
    """Exact inverse engineering of the transverse motion.

    kappa(t) and sdot(t) follow pointwise from the imposed trajectory and
    energy conservation; T is fixed by requiring the half-bend to turn by
    angle/2.
    """
    _check_angle(angle)
    if not kappa_m > 0:
        raise ValidationError("kappa_m", f"must be > 0, got {kappa_m!r}")
    v0 = _natural(params)
    km = kappa_m * params.sigma
    dy = solve_delta_y(params.sdot0, params.omega, kappa_m) / params.sigma
    target = angle / 2
    T = _bracket_root(lambda T: _sta_angle(dy, T, v0) - target, target / (km * v0))
    half = _sta_half(dy, T, v0)
    resid = simpson(half["kappa"] * half["sdot"], x=half["t"]) - target
    if abs(resid) > ANGLE_TOL:
        raise NumericalError(f"half-bend angle residual {resid:.3e} rad above tolerance")
    return _finish("sta2d", params, angle, dy, T, half, kappa_m=kappa_m)


# ---------------------------------------------------------------- 1D design


def _adiabatic_half(dy, T, v0, n=N_HALF):
    t = np.linspace(0.0, T, n)
    y, yd, ydd, yddd = _poly(dy, T, t / T)
    F = ydd + y
    floor = 0.05 * max(np.max(np.abs(F)) / (v0 * v0), 1e-12)
    kappa = np.empty_like(t)
    bad = _kernels.continuation_roots(F, y, v0 * v0, floor, kappa)
    if bad >= 0:
        kp = kappa[bad - 1]
        w = 0.2 * abs(kp) + floor
        raise BranchLoss(t[bad], (kp - w, kp + w))
    h = 1.0 - kappa * y
    if np.min(h) <= 0:
        raise InfeasibleDesign(f"metric factor vanishes along the 1D design (T={T:.6g}/omega)")
    a = v0 * v0 + 0.25 * kappa**2
    sd = np.sqrt(a)
    # implicit derivative of f(kappa, t) = 0
    df_dk = (v0 * v0 + 0.75 * kappa**2) * h - y * a * kappa
    df_dt = yddd + yd - a * kappa * kappa * yd
    kdot = -df_dt / df_dk
    sdd = 0.25 * kappa * kdot / sd
    return {
        "t": t, "y": y, "sdot": sd, "sddot": sdd, "v_kappa": sd * h, "kappa": kappa, "dkappa_ds": kdot / sd,
    }


def design_adiabatic_1d_bend(params: PhysicalParams, delta_y, angle=math.pi / 2) -> BendDesign:
    """Baseline design that treats the longitudinal motion in the 1D effective potential.

    kappa(t) solves yddot + omega^2 y + sdot_cl^2 kappa (1 - kappa y) = 0
    with sdot_cl^2 = sdot0^2 + hbar^2 kappa^2 / (4 m^2).
    """
    _check_angle(angle)
    if not delta_y < 0:
        raise ValidationError("delta_y", f"must be negative, got {delta_y!r}")
    v0 = _natural(params)
    dy = delta_y / params.sigma
    if dy * dy >= v0 * v0:
        raise InfeasibleDesign("transverse displacement too large for the incident velocity")
    target = angle / 2

    def g(T):
        tab = _adiabatic_half(dy, T, v0)
        return simpson(tab["kappa"] * tab["sdot"], x=tab["t"]) - target

    # kappa ~ -dy/v0^2 near the middle when the trajectory is slow
    T0 = target * v0 / abs(dy)
    T = _bracket_root(g, T0)
    half = _adiabatic_half(dy, T, v0)
    return _finish("adiabatic1d", params, angle, dy, T, half)


# ---------------------------------------------------------------- circles


def circular_bend(radius, angle=math.pi / 2, params: PhysicalParams | None = None) -> BendDesign:
    """Arc of constant curvature 1/R; curvature jumps at both ends."""
    _check_angle(angle)
    if not radius > 0:
        raise ValidationError("radius", f"must be > 0, got {radius!r}")
    s_f = radius * angle
    profile = CurvatureProfile([0.0, s_f], [1.0 / radius, 1.0 / radius], [0.0, 0.0])
    return BendDesign(kind="circular", profile=profile, params=params, angle=angle, radius=radius)


# ---------------------------------------------------------------- helpers


def sta_equivalent_radius(design: BendDesign, ds=None):
    ds = design.s_f / 4000 if ds is None else ds
    return equivalent_radius(reconstruct_path(design.profile, ds))


def kappa_m_for_duration(params: PhysicalParams, half_time, angle=math.pi / 2, bounds=None):
    """kappa_max of the sta2d design whose half-bend duration T is ``half_time`` seconds."""
    if not half_time > 0:
        raise ValidationError("half_time", "must be > 0")

    def resid(km):
        return design_sta_bend(params, km, angle).T - half_time

    lo, hi = bounds if bounds is not None else _km_bounds(params)
    return _solve_monotone(resid, lo, hi, "duration")


def kappa_m_for_radius(params: PhysicalParams, radius, angle=math.pi / 2, bounds=None):
    """kappa_max of the sta2d design whose equivalent radius is ``radius``."""
    if not radius > 0:
        raise ValidationError("radius", "must be > 0")

    def resid(km):
        return sta_equivalent_radius(design_sta_bend(params, km, angle)) - radius

    lo, hi = bounds if bounds is not None else _km_bounds(params)
    return _solve_monotone(resid, lo, hi, "equivalent radius")


def _km_bounds(params):
    # sigma*kappa from 1e-3 (T near the upper limit) to 2 (far beyond any smooth bend)
    return 1e-3 / params.sigma, 2.0 / params.sigma


def _solve_monotone(resid, lo, hi, what):
    grid = np.geomspace(lo, hi, 25)
    vals = []
    for km in grid:
        try:
            vals.append(resid(km))
        except NumericalError:
            vals.append(np.nan)
    vals = np.array(vals)
    for i in range(len(grid) - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] <= 0:
            return brentq(resid, grid[i], grid[i + 1], xtol=1e-14 * grid[i], rtol=1e-13)
    raise NoBracket(f"no kappa_max in [{lo:.3g}, {hi:.3g}] /m matches the requested {what}")


def design_from_scenario(scenario: Scenario) -> BendDesign:
    p = scenario.params
    if scenario.design_kind == "sta2d":
        return design_sta_bend(p, scenario.kappa_max, scenario.angle)
    if scenario.design_kind == "adiabatic1d":
        dy = scenario.delta_y
        if dy is None:
            dy = solve_delta_y(p.sdot0, p.omega, scenario.kappa_max)
        return design_adiabatic_1d_bend(p, dy, scenario.angle)
    return circular_bend(scenario.radius, scenario.angle, params=p)
