"""Classical point-particle dynamics in the curved guide.

The Newton equations in curvilinear coordinates are integrated with a
fixed-step RK4 kernel (``_kernels.integrate_kernel``) in natural units.
Curvature breakpoints at the bend entrance and exit are hit exactly, so
a step discontinuity in kappa (circular bends) is crossed cleanly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._accel import thread_count
from .errors import IntegrationTimeout, MetricSingularity, NumericalError, ValidationError
from .geometry import CurvatureProfile


@dataclass(frozen=True)
class ClassicalState:
    s: float
    sdot: float
    y: float = 0.0
    ydot: float = 0.0
    t: float = 0.0


@dataclass(frozen=True)
class ClassicalTrajectory:
    """Time series in SI. ``energy`` is ydot^2 + omega^2 y^2 + v_kappa^2 (i.e. 2E/m)."""

    t: np.ndarray
    s: np.ndarray
    sdot: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    energy: np.ndarray
    exit_index: int | None
    reflected: bool = False

    @property
    def exit(self):
        if self.exit_index is None:
            return None
        i = self.exit_index
        return ClassicalState(s=self.s[i], sdot=self.sdot[i], y=self.y[i], ydot=self.ydot[i], t=self.t[i])

    @property
    def final(self):
        return ClassicalState(s=self.s[-1], sdot=self.sdot[-1], y=self.y[-1], ydot=self.ydot[-1], t=self.t[-1])

    def energy_drift(self):
        """max |E(t) - E(0)| / E(0)."""
        return float(np.max(np.abs(self.energy - self.energy[0])) / self.energy[0])

    def to_csv(self, path):
        drift = (self.energy - self.energy[0]) / self.energy[0]
        np.savetxt(
            path,
            np.column_stack([self.t, self.s, self.sdot, self.y, self.ydot, drift]),
            delimiter=",",
            header="t_s,s_m,sdot_m_s,y_m,ydot_m_s,energy_rel_drift",
            comments="",
            fmt="%.17g",
        )


def default_dt(omega):
    return 2 * math.pi / (1000 * omega)


def _integrate_natural(arrays, state, dt, s_stop, t_max):
    """Natural-unit integration; returns (rows, exit_row, reflected)."""
    t, s, sd, y, yd = state
    chunks = []
    exit_row = None
    offset = 0
    expected = (s_stop - s) / max(sd, 1e-3) / dt
    rows = int(min(max(1.5 * expected + 64, 256), 2_000_000))
    while True:
        out = np.empty((rows, 6))
        region = int(np.searchsorted(arrays[2], s, side="right"))
        n, status, ex = _kernels.integrate_kernel(*arrays, region, t, s, sd, y, yd, dt, s_stop, t_max, out)
        block = out[:n] if not chunks else out[1:n]
        if ex >= 0 and exit_row is None:
            exit_row = offset + ex - (0 if not chunks else 1)
        chunks.append(block)
        offset += block.shape[0]
        t, s, sd, y, yd = out[n - 1, :5]
        if status == _kernels.BUFFER_FULL:
            continue
        break
    data = np.concatenate(chunks)
    if status == _kernels.METRIC:
        raise MetricSingularity(f"h = 1 - kappa y reached 0 at t={t:.6g}/omega, s={s:.6g} sigma")
    if status == _kernels.TIMEOUT:
        raise IntegrationTimeout(f"safety cap t={t_max:.6g}/omega hit before s_stop (s={s:.6g} sigma)")
    return data, exit_row, status == _kernels.REFLECTED


def integrate(
    profile: CurvatureProfile,
    omega,
    initial: ClassicalState,
    dt=None,
    s_stop=None,
    t_max=None,
    sigma=None,
) -> ClassicalTrajectory:
    """RK4 integration of the curvilinear Newton equations (SI in and out).

    Stops at s >= s_stop (default: the bend exit s_f), on reflection
    (sdot <= 0, reported through ``reflected``) or at the safety cap
    ``t_max`` (default: 100 times the straight-line transit time).
    ``sigma`` only sets the internal length unit; any positive value works.
    """
    if not omega > 0:
        raise ValidationError("omega", "must be > 0")
    if not initial.sdot > 0:
        raise ValidationError("sdot", f"initial sdot must be > 0, got {initial.sdot!r}")
    dt = default_dt(omega) if dt is None else dt
    if not 0 < dt <= 2 * math.pi / (100 * omega) * (1 + 1e-12):
        raise ValidationError("dt", "must lie in (0, 2pi/(100 omega)]")
    s_stop = profile.s_f if s_stop is None else s_stop
    if s_stop <= initial.s:
        raise ValidationError("s_stop", "must lie beyond the initial position")
    if 1.0 - profile(initial.s) * initial.y <= 0:
        raise MetricSingularity("initial state has h <= 0")
    L = sigma if sigma is not None else profile.s_f
    tau = 1.0 / omega
    v = L / tau
    if t_max is None:
        t_max = initial.t + 100 * (s_stop - initial.s) / initial.sdot + 100 * tau
    arrays = profile.scaled(L).kernel_arrays()
    state = (initial.t / tau, initial.s / L, initial.sdot / v, initial.y / L, initial.ydot / v)
    data, exit_row, reflected = _integrate_natural(arrays, state, dt / tau, s_stop / L, t_max / tau)
    return ClassicalTrajectory(
        t=data[:, 0] * tau,
        s=data[:, 1] * L,
        sdot=data[:, 2] * v,
        y=data[:, 3] * L,
        ydot=data[:, 4] * v,
        energy=data[:, 5] * v * v,
        exit_index=exit_row,
        reflected=reflected,
    )


def exit_amplitude(trajectory: ClassicalTrajectory, omega):
    """Amplitude of the free transverse oscillation after the bend."""
    ex = trajectory.exit
    if ex is None:
        raise NumericalError("trajectory has no exit record (particle never left the bend)")
    return math.hypot(ex.y, ex.ydot / omega)


def excess_quanta_classical(a, sigma):
    """Transverse energy in units of hbar*omega for amplitude a: (a/sigma)^2 / 2."""
    if a < 0 or not sigma > 0:
        raise ValidationError("a", "need a >= 0 and sigma > 0")
    return 0.5 * (a / sigma) ** 2


@dataclass(frozen=True)
class SweepResult:
    v: np.ndarray  # m/s
    a: np.ndarray  # m
    sigma: float
    epsilon: float
    sdot0: float
    alpha_bar: float

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("v_m_s,a_m,a_over_sigma\n")
            for v, a in zip(self.v, self.a):
                fh.write(f"{v:.17g},{a:.17g},{a / self.sigma:.17g}\n")
            fh.write(f"# alpha_bar={self.alpha_bar:.17g}\n")


def robustness_sweep(profile: CurvatureProfile, omega, sdot0, epsilon=0.05, n_samples=101, sigma=None,
                     threads=None, dt=None) -> SweepResult:
    """Velocity-averaged exit amplitude over [(1-eps) sdot0, (1+eps) sdot0], in units of sigma.

    Samples are integrated independently on a thread pool (the kernel
    releases the GIL) and reduced in index order, so the result does not
    depend on scheduling.
    """
    if not 0 < epsilon < 0.5:
        raise ValidationError("epsilon", f"must lie in (0, 0.5), got {epsilon!r}")
    if n_samples < 11 or n_samples % 2 == 0:
        raise ValidationError("samples", f"need an odd count >= 11, got {n_samples!r}")
    if sigma is None or not sigma > 0:
        raise ValidationError("sigma", "must be > 0")
    v = sdot0 * np.linspace(1 - epsilon, 1 + epsilon, n_samples)

    def one(i):
        try:
            traj = integrate(profile, omega, ClassicalState(s=0.0, sdot=v[i]), dt=dt, sigma=sigma)
            return exit_amplitude(traj, omega)
        except NumericalError as exc:
            raise type(exc)(f"sample {i} (v={v[i]:.6g} m/s): {exc}") from exc

    workers = threads or thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            a = np.array(list(pool.map(one, range(n_samples))))
    else:
        a = np.array([one(i) for i in range(n_samples)])
    alpha = float(np.trapezoid(a, v) / (2 * epsilon * sdot0 * sigma))
    return SweepResult(v=v, a=a, sigma=sigma, epsilon=epsilon, sdot0=sdot0, alpha_bar=alpha)


@dataclass(frozen=True)
class RadiusScan:
    radius: np.ndarray  # m
    kappa_m: np.ndarray  # 1/m, of the matched sta2d bends
    alpha_c: np.ndarray
    alpha_sta: np.ndarray

    @property
    def ratio(self):
        return self.alpha_c / self.alpha_sta

    def local_minima(self):
        """Interior indices where alpha_c is below both neighbours."""
        a = self.alpha_c
        return [i for i in range(1, len(a) - 1) if a[i] < a[i - 1] and a[i] < a[i + 1]]

    def to_csv(self, path):
        np.savetxt(
            path,
            np.column_stack([self.radius, self.kappa_m, self.alpha_c, self.alpha_sta, self.ratio]),
            delimiter=",",
            header="radius_m,kappa_m_per_m,alpha_c,alpha_sta,ratio",
            comments="",
            fmt="%.10g",
        )


def radius_scan(params, radii, epsilon=0.05, n_samples=101, angle=math.pi / 2, threads=None) -> RadiusScan:
    """Circular bends against sta2d bends of the same equivalent radius."""
    from .designer import circular_bend, design_sta_bend, kappa_m_for_radius

    radii = np.asarray(radii, dtype=float)
    kms, ac, asta = [], [], []
    for R in radii:
        km = kappa_m_for_radius(params, R, angle)
        sta = design_sta_bend(params, km, angle)
        circ = circular_bend(R, angle)
        kw = dict(epsilon=epsilon, n_samples=n_samples, sigma=params.sigma, threads=threads)
        ac.append(robustness_sweep(circ.profile, params.omega, params.sdot0, **kw).alpha_bar)
        asta.append(robustness_sweep(sta.profile, params.omega, params.sdot0, **kw).alpha_bar)
        kms.append(km)
    return RadiusScan(radius=radii, kappa_m=np.array(kms), alpha_c=np.array(ac), alpha_sta=np.array(asta))
