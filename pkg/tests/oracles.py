"""Independent reference computations shared by the unit and acceptance tests.

Each function returns the measured quantity; the tests decide on tolerances.
"""
import math

import numpy as np

from curvguide import classical, designer, quantum
from curvguide.geometry import CurvatureProfile
from curvguide.scenario import Scenario, fig2_params

FIG2_KAPPA = 0.22e6


def fig2_scenario_nat():
    p = fig2_params()
    return p, Scenario(params=p, kappa_max=FIG2_KAPPA)


def straight_nat(length=1.0):
    return CurvatureProfile([0.0, length], [0.0, 0.0], [0.0, 0.0])


# ---------------------------------------------------------------- classical

def energy_drift_sequence(profile, params, dts):
    """Max relative energy drift through ``profile`` for each dt."""
    out = []
    for dt in dts:
        tr = classical.integrate(profile, params.omega, classical.ClassicalState(0.0, params.sdot0),
                                 dt=dt, sigma=params.sigma)
        out.append(tr.energy_drift())
    return np.array(out)


def driven_oscillator_amplitude(radius, angle, sdot0, omega):
    """Linear response of y'' + w^2 y = -sdot0^2/R for a duration angle*R/sdot0.

    For a constant push switched on and off, the free amplitude afterwards
    is (F/w^2) |2 sin(w tau / 2)|.
    """
    tau = angle * radius / sdot0
    return sdot0**2 / radius / omega**2 * abs(2 * math.sin(omega * tau / 2))


def design_inverse_error(design):
    """max |y(t) - y_sta(t)| over the bend, relative to |dy|."""
    p = design.params
    tr = classical.integrate(design.profile, p.omega, classical.ClassicalState(0.0, p.sdot0),
                             dt=classical.default_dt(p.omega) / 4, sigma=p.sigma)
    t = tr.t[: tr.exit_index + 1]
    t = t[t <= 2 * design.T]
    y_sta, _, _ = design.trajectory(t)
    return float(np.max(np.abs(tr.y[: t.size] - y_sta)) / abs(design.delta_y))


# ---------------------------------------------------------------- quantum

def dense_hamiltonian(grid, k0=0.0):
    """Envelope Hamiltonian assembled entry by entry from the continuum form.

    Built independently of ``quantum.Operators``: loops over interior points,
    link metric factors recomputed from the grid's h at half points.
    """
    ns, ny = grid.shape
    ds, dy = grid.ds, grid.dy
    n = ns * ny
    H = np.zeros((n, n), dtype=complex)

    def idx(i, j):
        return i * ny + j

    for i in range(1, ns - 1):
        for j in range(1, ny - 1):
            h = grid.h[i, j]
            r = idx(i, j)
            # longitudinal: -1/(2h) [(d_s + i k0)(1/h)(d_s + i k0)]
            for nb, sgn in ((i + 1, 1.0), (i - 1, -1.0)):
                w = 1.0 / grid.h_s[min(i, nb), j]
                H[r, r] += w / (2 * h * ds * ds)
                if 0 < nb < ns - 1:
                    H[r, idx(nb, j)] += -w / (2 * h) * (1.0 / ds**2 + sgn * 1j * k0 / ds)
            # transverse kinetic plus trap plus the carrier's centrifugal term
            for nb in (j + 1, j - 1):
                hl = grid.h_y[i, min(j, nb)]
                H[r, r] += hl / (2 * h * dy * dy)
                if 0 < nb < ny - 1:
                    H[r, idx(i, nb)] += -hl / (2 * h * dy * dy)
            H[r, r] += 0.5 * grid.y[j] ** 2 + 0.5 * k0 * k0 * (1.0 / h**2 - 1.0)
    return H


def free_spreading_error(width=3.0, dt_fraction=1 / 800, n_s=1024):
    """Relative error of Var(s) against the free Gaussian after 2T of the fig2 bend."""
    p, sc = fig2_scenario_nat()
    u = p.units
    t_total = 2 * designer.design_sta_bend(p, FIG2_KAPPA).T / u.time
    g = quantum.grid_from_profile(straight_nat(), (-60.0, 100.0), n_s, 32, 8.0, u)
    f = quantum.init_wavepacket(g, sc, s0=-40.0, sigma_s=width, k0=p.sdot0 / u.velocity)
    dt = 2 * math.pi * dt_fraction
    quantum.evolve(f, dt, int(round(t_total / dt)))
    rho = (np.abs(f.phi) ** 2 * g.h).sum(axis=1)
    rho /= rho.sum()
    m = np.sum(rho * g.s)
    var = np.sum(rho * (g.s - m) ** 2)
    # |psi|^2 ~ exp(-(s-s0)^2/w^2): Var = w^2/2 (1 + (t/w^2)^2)
    exact = 0.5 * width**2 * (1 + (f.t / width**2) ** 2)
    return float(var / exact - 1.0)


def split_vs_unsplit_deficit(dt_fraction=1 / 1000, periods=1.0):
    """1 - |<ADI, CN>| on a 128 x 32 grid through the fig2 bend."""
    p, sc = fig2_scenario_nat()
    nat = designer.design_sta_bend(p, FIG2_KAPPA).profile.scaled(p.sigma)
    g = quantum.grid_from_profile(nat, (-20.0, nat.s_f + 20.0), 128, 32, 8.0, p.units)
    a = quantum.init_wavepacket(g, sc, s0=-8.0, sigma_s=3.0)
    b = a.copy()
    dt = 2 * math.pi * dt_fraction
    n = int(round(periods / dt_fraction))
    quantum.evolve(a, dt, n)
    quantum.evolve_unsplit(b, dt, n)
    return 1.0 - abs(a.inner(b))


GENTLE_KAPPA_SIGMA = 0.01
GENTLE_ANGLE = math.pi / 8


def ehrenfest_run(n_s=1600, dt_fraction=1 / 400, s0=-4.0, width=1.0):
    """Narrow packet through a gentle bend; returns (design, t, <s>, <y>) in natural units."""
    p, sc = fig2_scenario_nat()
    d = designer.design_sta_bend(p, GENTLE_KAPPA_SIGMA / p.sigma, GENTLE_ANGLE)
    nat = d.profile.scaled(p.sigma)
    g = quantum.grid_from_profile(nat, (-40.0, 1.1 * nat.s_f + 45.0), n_s, 40, 5.0, p.units)
    f = quantum.init_wavepacket(g, sc, s0=s0, sigma_s=width)
    dt = 2 * math.pi * dt_fraction
    prop = quantum.Propagator(f.ops)
    every = max(1, int(round(0.1 / dt_fraction)))
    t, s, y = [], [], []
    k = 0
    while True:
        prop.step(f.phi, dt)
        f.t += dt
        k += 1
        if k % every:
            continue
        m = quantum.measure(f)
        t.append(m.t)
        s.append(m.s_mean)
        y.append(m.y_mean)
        if m.s_mean > 1.1 * nat.s_f:
            break
    return d, np.array(t), np.array(s), np.array(y)


def ehrenfest_errors(run=None, nodes=8, s0=-4.0, width=1.0):
    """Quantum <y>(<s>) against a single classical trajectory and against the
    classical ensemble with the packet's Wigner distribution.

    Returns (single, ensemble) as max deviations over the bend in units of |dy|.
    The ensemble average uses Gauss-Hermite nodes in (s, sdot) and (y, ydot);
    the initial Wigner function is Gaussian with variances width^2/2,
    1/(2 width^2) longitudinally and 1/2, 1/2 transversally.
    """
    d, t, s, y = ehrenfest_run(s0=s0, width=width) if run is None else run
    p = d.params
    u = p.units
    nat_sf = d.s_f / p.sigma
    dy = abs(d.delta_y / p.sigma)
    win = (s > 0) & (s < 1.1 * nat_sf)

    tr = classical.integrate(d.profile, p.omega, classical.ClassicalState(s0 * p.sigma, p.sdot0),
                             s_stop=1.2 * d.s_f, sigma=p.sigma)
    single = np.max(np.abs(y - np.interp(s, tr.s / p.sigma, tr.y / p.sigma))[win]) / dy

    k0 = p.sdot0 / u.velocity
    r = math.sqrt(0.5)
    xl, wl = np.polynomial.hermite_e.hermegauss(nodes)
    xt, wt = np.polynomial.hermite_e.hermegauss(3)
    wl, wt = wl / wl.sum(), wt / wt.sum()
    y_ens = np.zeros_like(t)
    s_stop = (s[-1] + 100.0) * p.sigma
    for a, wa in zip(xl, wl):
        for b, wb in zip(xl, wl):
            for c, wc in zip(xt, wt):
                for e, we in zip(xt, wt):
                    init = classical.ClassicalState((s0 + r * width * a) * p.sigma, (k0 + r / width * b) * u.velocity,
                                                    r * c * p.sigma, r * e * u.velocity)
                    tr = classical.integrate(d.profile, p.omega, init, s_stop=s_stop, sigma=p.sigma)
                    y_ens += wa * wb * wc * we * np.interp(t, tr.t / u.time, tr.y / p.sigma)
    ensemble = np.max(np.abs(y - y_ens)[win]) / dy
    return float(single), float(ensemble)
