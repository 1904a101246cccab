"""Curvature profiles, planar paths and the adiabaticity diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator, PPoly

from .errors import ValidationError


class CurvatureProfile:
    """Tabulated curvature kappa(s) on [0, s_f], identically zero outside.

    The interpolant is a cubic Hermite spline through the samples. Node
    slopes are taken from ``slope`` when the caller knows them exactly (the
    designer does), otherwise from the monotone PCHIP rule, which keeps
    dkappa/ds free of spurious sign changes near flat ends. ``slope_left``
    optionally gives a different slope on the left of each node, for
    profiles with corners.

    Units are whatever the caller uses consistently (SI at the package
    boundary, sigma inside the solvers; see :meth:`scaled`).
    """

    def __init__(self, s, kappa, slope=None, slope_left=None):
        s = np.array(s, dtype=float)
        kappa = np.array(kappa, dtype=float)
        if s.ndim != 1 or s.shape != kappa.shape or s.size < 2:
            raise ValidationError("profile", "need matching 1D arrays with at least two samples")
        if not np.all(np.isfinite(s)) or not np.all(np.isfinite(kappa)):
            raise ValidationError("profile", "samples must be finite")
        if s[0] != 0.0:
            raise ValidationError("profile", f"first sample must sit at s=0, got {s[0]!r}")
        if not np.all(np.diff(s) > 0):
            raise ValidationError("profile", "s must be strictly increasing")
        if slope is None:
            slope = PchipInterpolator(s, kappa)(s, 1) if s.size > 2 else np.zeros_like(s)
        slope = np.array(slope, dtype=float)
        slope_left = slope if slope_left is None else np.array(slope_left, dtype=float)
        if slope.shape != s.shape or slope_left.shape != s.shape:
            raise ValidationError("profile", "slope arrays must match s")
        for arr in (s, kappa, slope, slope_left):
            arr.flags.writeable = False
        self.s = s
        self.kappa = kappa
        self.slope = slope
        self.slope_left = slope_left
        self._spline = _hermite_ppoly(s, kappa, slope[:-1], slope_left[1:])
        self._antider = self._spline.antiderivative()

    @property
    def s_f(self):
        return float(self.s[-1])

    @property
    def kappa_max(self):
        return float(np.max(np.abs(self.kappa)))

    def __len__(self):
        return self.s.size

    def __repr__(self):
        return f"CurvatureProfile(n={self.s.size}, s_f={self.s_f:.6g}, kappa_max={self.kappa_max:.6g})"

    def __call__(self, s, nu=0):
        """kappa (nu=0) or its nu-th derivative; zero outside [0, s_f]."""
        s = np.asarray(s, dtype=float)
        inside = (s >= 0.0) & (s <= self.s_f)
        out = np.where(inside, self._spline(np.clip(s, 0.0, self.s_f), nu), 0.0)
        if nu == 0:
            # the last interval evaluated at its right end rounds; keep the node value
            out = np.where(s == self.s_f, self.kappa[-1], out)
        return out if out.ndim else float(out)

    def derivative(self, s):
        return self(s, 1)

    def second_derivative(self, s):
        return self(s, 2)

    def theta(self, s):
        """Tangent angle: integral of kappa from 0 to s (exact for the spline)."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.s_f)
        out = self._antider(s)
        return out if out.ndim else float(out)

    def turn_angle(self):
        return float(self._antider(self.s_f))

    def scaled(self, length):
        """Same profile expressed with ``length`` as the unit of distance."""
        return CurvatureProfile(
            self.s / length, self.kappa * length, self.slope * length**2, self.slope_left * length**2
        )

    def corners(self):
        """Interior nodes where the left and right slopes differ."""
        idx = np.nonzero(self.slope[1:-1] != self.slope_left[1:-1])[0] + 1
        return self.s[idx]

    def kernel_arrays(self):
        """Arrays for the classical kernel: spline breakpoints and coefficients
        (highest power first), region breakpoints and per-region interval ranges."""
        x = np.ascontiguousarray(self._spline.x, dtype=np.float64)
        c = np.ascontiguousarray(self._spline.c, dtype=np.float64)
        bp = np.concatenate([[0.0], self.corners(), [self.s_f]])
        node = np.searchsorted(x, bp)
        ilo = np.full(bp.size + 1, -1, dtype=np.int64)
        ihi = np.full(bp.size + 1, -1, dtype=np.int64)
        ilo[1:-1] = node[:-1]
        ihi[1:-1] = node[1:] - 1
        return x, c, bp, ilo, ihi

    def mirrored(self):
        """kappa(s_f - s)."""
        return CurvatureProfile(
            self.s_f - self.s[::-1], self.kappa[::-1], -self.slope_left[::-1], -self.slope[::-1]
        )

    def to_csv(self, path):
        write_profile_csv(self, path)


def _hermite_ppoly(x, y, m0, m1):
    """Cubic on each interval matching values and the one-sided end slopes m0, m1."""
    h = np.diff(x)
    delta = np.diff(y) / h
    c = np.empty((4, h.size))
    c[0] = (m0 + m1 - 2 * delta) / h**2
    c[1] = (3 * delta - 2 * m0 - m1) / h
    c[2] = m0
    c[3] = y[:-1]
    return PPoly(c, x, extrapolate=True)


PROFILE_HEADER = "s_m,kappa_per_m"
SLOPE_COLUMNS = "dkappa_ds_right_per_m2,dkappa_ds_left_per_m2"


def write_profile_csv(profile: CurvatureProfile, path) -> None:
    """CSV with columns s_m, kappa_per_m and the one-sided node slopes.

    The slope columns keep designed profiles exact (including the corner of
    kappa at the midpoint of a 2D design) across a save/load cycle.
    """
    np.savetxt(
        path,
        np.column_stack([profile.s, profile.kappa, profile.slope, profile.slope_left]),
        delimiter=",",
        header=f"{PROFILE_HEADER},{SLOPE_COLUMNS}",
        comments="",
        fmt="%.17g",
    )


def read_profile_csv(path) -> CurvatureProfile:
    """Read ``s_m,kappa_per_m`` (slopes by PCHIP) or the four-column form with node slopes."""
    path = Path(path)
    if not path.exists():
        raise ValidationError("profile", f"{path} does not exist")
    with open(path) as fh:
        header = fh.readline().strip().replace(" ", "")
    if header not in (PROFILE_HEADER, f"{PROFILE_HEADER},{SLOPE_COLUMNS}"):
        raise ValidationError("profile", f"unexpected header {header!r}, want {PROFILE_HEADER!r}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ValidationError("profile", f"cannot parse {path}: {exc}") from exc
    if data.shape[1] != header.count(",") + 1:
        raise ValidationError("profile", "column count does not match the header")
    if data.shape[1] == 4:
        return CurvatureProfile(data[:, 0], data[:, 1], data[:, 2], data[:, 3])
    return CurvatureProfile(data[:, 0], data[:, 1])


def metric_factor(profile: CurvatureProfile, s, y):
    """h(s, y) = 1 - kappa(s) y. Negative values are returned as is."""
    return 1.0 - profile(s) * np.asarray(y, dtype=float)


@dataclass(frozen=True)
class PlanarPath:
    s: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    theta: np.ndarray

    def arc_length(self):
        return float(np.sum(np.hypot(np.diff(self.X), np.diff(self.Y))))

    def to_csv(self, path):
        np.savetxt(
            path,
            np.column_stack([self.s, self.X, self.Y, self.theta]),
            delimiter=",",
            header="s_m,X_m,Y_m,theta_rad",
            comments="",
            fmt="%.17g",
        )


def reconstruct_path(profile: CurvatureProfile, ds: float) -> PlanarPath:
    """Centre line of the bend, entering at the origin along +X.

    theta(s) is the exact integral of the spline; X and Y are accumulated
    with Simpson's rule on each step (fourth order). The step actually used
    is s_f / ceil(s_f / ds).
    """
    s_f = profile.s_f
    if not ds > 0 or ds > s_f / 100:
        raise ValidationError("ds", f"step must lie in (0, s_f/100], got {ds!r} for s_f={s_f!r}")
    n = int(math.ceil(s_f / ds - 1e-9))
    s = np.linspace(0.0, s_f, n + 1)
    theta = profile.theta(s)
    theta_mid = profile.theta(0.5 * (s[1:] + s[:-1]))
    h = np.diff(s)
    dX = h / 6 * (np.cos(theta[:-1]) + 4 * np.cos(theta_mid) + np.cos(theta[1:]))
    dY = h / 6 * (np.sin(theta[:-1]) + 4 * np.sin(theta_mid) + np.sin(theta[1:]))
    X = np.concatenate([[0.0], np.cumsum(dX)])
    Y = np.concatenate([[0.0], np.cumsum(dY)])
    return PlanarPath(s=s, X=X, Y=Y, theta=theta)


def _check_right_angle(path: PlanarPath, tol=1e-6):
    if abs(path.theta[0]) > tol or abs(path.theta[-1] - path.theta[0] - math.pi / 2) > tol:
        raise ValidationError(
            "path",
            f"not a 90 degree connector (entry {path.theta[0]:.3g} rad, exit {path.theta[-1]:.6g} rad)",
        )


def corner_point(path: PlanarPath):
    """Intersection of the extended entry axis (+X) and exit axis (+Y)."""
    return path.X[-1], path.Y[0]


def corner_clearance(path: PlanarPath) -> float:
    """Smallest distance between the path and the corner point."""
    _check_right_angle(path)
    cx, cy = corner_point(path)
    return float(np.min(np.hypot(path.X - cx, path.Y - cy)))


def equivalent_radius(path: PlanarPath, rtol=1e-9) -> float:
    """Radius of the largest quarter circle enclosed by a 90 degree bend.

    Candidates are quarter circles tangent to both guide axes, with their
    tangency points within the bend (R at most the shorter leg from the
    corner point), lying on the inner side of the path: no path point may
    come closer than R to the circle centre. For a circular bend of radius
    R this returns R.
    """
    _check_right_angle(path)
    cx, cy = corner_point(path)
    r_max = min(cx - path.X[0], path.Y[-1] - cy)
    if r_max <= 0:
        return 0.0

    def enclosed(r):
        ox, oy = cx - r, cy + r
        return np.min(np.hypot(path.X - ox, path.Y - oy)) >= r * (1 - rtol)

    if enclosed(r_max):
        return float(r_max)
    # Largest passing radius below r_max: coarse scan, then bisection.
    grid = np.linspace(r_max, 0.0, 201)
    passing = next((r for r in grid[1:] if enclosed(r)), 0.0)
    lo, hi = passing, passing + (grid[0] - grid[1])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if enclosed(mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


@dataclass(frozen=True)
class AdiabaticityReport:
    """Dimensionless adiabaticity ratios sampled at the spline nodes and interval midpoints.

    ratio_a = sigma |kappa|, ratio_b = sigma |kappa'| / |kappa|,
    ratio_c = sigma |kappa''| / kappa^2. b and c are NaN where |kappa| is
    negligible. The ``max_*`` fields are maxima over |kappa| >= kappa_max/2.
    """

    s: np.ndarray
    ratio_a: np.ndarray
    ratio_b: np.ndarray
    ratio_c: np.ndarray
    max_a: float
    max_b: float
    max_c: float

    def to_csv(self, path):
        np.savetxt(
            path,
            np.column_stack([self.s, self.ratio_a, self.ratio_b, self.ratio_c]),
            delimiter=",",
            header="s_m,sigma_kappa,sigma_dkappa_over_kappa,sigma_d2kappa_over_kappa2",
            comments="",
            fmt="%.10g",
        )

    def summary(self):
        return {"max_a": self.max_a, "max_b": self.max_b, "max_c": self.max_c}


def adiabaticity_report(profile: CurvatureProfile, sigma: float) -> AdiabaticityReport:
    mid = 0.5 * (profile.s[1:] + profile.s[:-1])
    s = np.empty(2 * profile.s.size - 1)
    s[0::2] = profile.s
    s[1::2] = mid
    k = np.abs(profile(s))
    dk = np.abs(profile(s, 1))
    d2k = np.abs(profile(s, 2))
    kmax = profile.kappa_max
    ratio_a = sigma * k
    valid = k > 1e-6 * kmax
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_b = np.where(valid, sigma * dk / k, np.nan)
        ratio_c = np.where(valid, sigma * d2k / k**2, np.nan)
    strong = k >= 0.5 * kmax
    return AdiabaticityReport(
        s=s,
        ratio_a=ratio_a,
        ratio_b=ratio_b,
        ratio_c=ratio_c,
        max_a=float(np.max(ratio_a)),
        max_b=float(np.max(ratio_b[strong])) if strong.any() else 0.0,
        max_c=float(np.max(ratio_c[strong])) if strong.any() else 0.0,
    )
