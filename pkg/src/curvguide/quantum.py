"""2D Schrödinger evolution in the curvilinear frame of the guide.

Units inside are natural (sigma, 1/omega, hbar*omega), so the Hamiltonian
reads

    H = -1/2 [ (1/h) d_y h d_y + (1/h) d_s (1/h) d_s ] + y^2/2,   h = 1 - kappa(s) y,

which is self-adjoint for the weighted product <f, g>_h = sum f* g h ds dy.

The field is stored as a slowly varying envelope, psi = exp(i k0 s) phi,
with k0 the carrier wavenumber of the incident packet. Acting on phi the
longitudinal part is -1/(2h) (d_s + i k0)(1/h)(d_s + i k0), expanded as

    d_s (1/h) d_s + i k0 [d_s (1/h) + (1/h) d_s] - k0^2 / h

and discretised with the flux-form second difference, a skew-symmetric
centred first difference and the exact k0^2 term. The carrier then costs
nothing in accuracy: the error is O(q^3 k0 ds^2) in the envelope
wavenumber q, not O(k0^2 ds^2) as for a stencil on psi itself. The
constant k0^2/2 is removed so the Cayley factors only see the slow
envelope dynamics.

Time stepping is a symmetric split of Cayley factors,

    C_T(dt/2) C_L(dt) C_T(dt/2),    C_A(tau) = (1 + i tau A/2)^-1 (1 - i tau A/2),

with T the transverse part (tridiagonal along y) and L the longitudinal
part (tridiagonal along s). Each factor is exactly unitary for the
h-weighted product. Grid edges carry homogeneous Dirichlet values.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import splu

from ._kernels import CayleySolver, apply_tridiagonal
from .errors import IntegrationTimeout, NotInStraightRegion, TridiagonalBreakdown, ValidationError
from .geometry import CurvatureProfile
from .scenario import Scenario, UnitSystem

H_FLOOR = 0.1
KY_LIMIT = 0.9
BEND_POPULATION_TOL = 1e-2  # packet population inside the bend still counted as "outside"
LEAKAGE_WARN = 1e-8
SNAPSHOT_VERSION = 1


@dataclass
class Grid2D:
    """Uniform (s, y) grid in natural units with the metric tables.

    h[i, j] = 1 - kappa(s_i) y_j; h_s[i, j] sits at (i+1/2, j) and h_y[i, j]
    at (i, j+1/2).
    """

    s: np.ndarray
    y: np.ndarray
    kappa: np.ndarray
    h: np.ndarray
    h_s: np.ndarray
    h_y: np.ndarray
    s_f: float  # bend length
    units: UnitSystem

    @property
    def ds(self):
        return self.s[1] - self.s[0]

    @property
    def dy(self):
        return self.y[1] - self.y[0]

    @property
    def shape(self):
        return self.h.shape

    @property
    def y_max(self):
        return self.y[-1]


def grid_from_profile(profile_nat: CurvatureProfile, s_range, n_s, n_y, y_max, units) -> Grid2D:
    """Grid on [s_min, s_max] x [-y_max, y_max] for a profile already in natural units."""
    if n_s < 8 or n_y < 8:
        raise ValidationError("grid", "need at least 8 points per axis")
    s_min, s_max = s_range
    if not s_max > s_min:
        raise ValidationError("grid", "s_max must exceed s_min")
    kmax = float(np.max(np.abs(profile_nat(np.linspace(0, profile_nat.s_f, 4001)))))
    kmax = max(kmax, profile_nat.kappa_max)
    if kmax * y_max > KY_LIMIT:
        raise ValidationError(
            "quantum.y_halfwidth_sigma",
            f"kappa_max*y_max = {kmax * y_max:.3f} > {KY_LIMIT}: reduce y_max or kappa_max",
        )
    s = np.linspace(s_min, s_max, n_s)
    y = np.linspace(-y_max, y_max, n_y)
    kap = profile_nat(s)
    kap_s = profile_nat(0.5 * (s[1:] + s[:-1]))
    h = 1.0 - kap[:, None] * y[None, :]
    h_s = 1.0 - kap_s[:, None] * y[None, :]
    h_y = 1.0 - kap[:, None] * (0.5 * (y[1:] + y[:-1]))[None, :]
    if min(h.min(), h_s.min(), h_y.min()) < H_FLOOR:
        raise ValidationError("quantum.y_halfwidth_sigma", f"metric factor drops below {H_FLOOR}")
    return Grid2D(s=s, y=y, kappa=kap, h=h, h_s=h_s, h_y=h_y, s_f=profile_nat.s_f, units=units)


def packet_sigma_s(scenario: Scenario):
    """Longitudinal amplitude width of the initial packet, natural units."""
    return scenario.quantum.sigma_s_over_sigma_y


def default_s_range(scenario: Scenario, s_f_nat):
    q = scenario.quantum
    sig_s = packet_sigma_s(scenario)
    L = scenario.params.sigma
    left = 5 * sig_s if q.s_margin_left is None else q.s_margin_left / L
    right = 5 * sig_s if q.s_margin_right is None else q.s_margin_right / L
    return q.start_position_sf * s_f_nat - left, q.stop_position_sf * s_f_nat + right


def build_grid(profile: CurvatureProfile, scenario: Scenario, s_range=None) -> Grid2D:
    """Grid for ``profile`` (SI) with the scenario's resolution.

    ``s_range`` (SI) overrides the default span, which runs from 5 packet
    widths before the start position to 5 widths beyond the stop position.
    """
    units = scenario.params.units
    nat = profile.scaled(units.length)
    q = scenario.quantum
    rng = default_s_range(scenario, nat.s_f) if s_range is None else (s_range[0] / units.length, s_range[1] / units.length)
    return grid_from_profile(nat, rng, q.grid_ns, q.grid_ny, q.y_halfwidth_sigma, units)


class Operators:
    """Tridiagonal coefficient tables of T (along y) and L (along s) for a grid and carrier k0."""

    def __init__(self, grid: Grid2D, k0: float):
        self.grid = grid
        self.k0 = k0
        ns, ny = grid.shape
        ds, dy = grid.ds, grid.dy
        h = grid.h
        inner = np.zeros((ns, ny), dtype=bool)
        inner[1:-1, 1:-1] = True

        # longitudinal: h L = -1/2 [d_s w d_s + i k0 (d_s w + w d_s)], w = 1/h on links
        w = 1.0 / grid.h_s
        wp = np.zeros((ns, ny))
        wm = np.zeros((ns, ny))
        wp[:-1] = w
        wm[1:] = w
        self.e_shift = 0.5 * k0 * k0
        ldi = (wp + wm) / (2 * h * ds * ds)
        lup = -wp * (1.0 / ds**2 + 1j * k0 / ds) / (2 * h)
        llo = -wm * (1.0 / ds**2 - 1j * k0 / ds) / (2 * h)
        lup[-2] = 0.0  # no coupling into the edge rows
        llo[1] = 0.0
        self.L = tuple(np.where(inner, c, 0.0).astype(np.complex128) for c in (llo, ldi, lup))

        # transverse
        hp = np.zeros((ns, ny))
        hm = np.zeros((ns, ny))
        hp[:, :-1] = grid.h_y
        hm[:, 1:] = grid.h_y
        # the carrier's k0^2/(2 h^2) - k0^2/2 is the centrifugal potential; it sits with the
        # transverse oscillator so the split does not separate force from restoring force
        tdi = (hp + hm) / (2 * h * dy * dy) + 0.5 * grid.y[None, :] ** 2 + self.e_shift * (1.0 / h**2 - 1.0)
        tup = -hp / (2 * h * dy * dy)
        tlo = -hm / (2 * h * dy * dy)
        tup[:, -2] = 0.0
        tlo[:, 1] = 0.0
        self.T = tuple(np.where(inner, c, 0.0).astype(np.complex128) for c in (tlo, tdi, tup))
        self.inner = inner

        # ground state of the straight-guide transverse operator on the interior points
        n = ny - 2
        yi = grid.y[1:-1]
        evals, evecs = eigh_tridiagonal(
            1.0 / dy**2 + 0.5 * yi**2, np.full(n - 1, -0.5 / dy**2), select="i", select_range=(0, 0)
        )
        chi = np.zeros(ny)
        chi[1:-1] = evecs[:, 0]
        chi /= math.sqrt(np.sum(chi**2) * dy)
        if chi[ny // 2] < 0:
            chi = -chi
        self.chi0 = chi
        self.E0 = float(evals[0])

    def apply_L(self, phi):
        return apply_tridiagonal(phi, *self.L, axis=0)

    def apply_T(self, phi):
        return apply_tridiagonal(phi, *self.T, axis=1)

    def apply_envelope(self, phi):
        """exp(-i k0 s) H exp(i k0 s) phi (edges return 0)."""
        return self.apply_L(phi) + self.e_shift * np.where(self.inner, phi, 0.0) + self.apply_T(phi)

    def sparse_matrix(self, shifted=True):
        """Sparse matrix of L + T acting on phi.ravel() (row-major).

        With ``shifted=False`` the carrier energy k0^2/2 is added back, giving
        the envelope form of H itself.
        """
        ns, ny = self.grid.shape
        idx = np.arange(ns * ny).reshape(ns, ny)
        rows, cols, vals = [], [], []
        llo, ldi, lup = self.L
        tlo, tdi, tup = self.T
        diag = ldi + tdi + (0.0 if shifted else self.e_shift) * self.inner
        rows.append(idx.ravel()); cols.append(idx.ravel()); vals.append(diag.ravel())
        rows.append(idx[1:].ravel()); cols.append(idx[:-1].ravel()); vals.append(llo[1:].ravel())
        rows.append(idx[:-1].ravel()); cols.append(idx[1:].ravel()); vals.append(lup[:-1].ravel())
        rows.append(idx[:, 1:].ravel()); cols.append(idx[:, :-1].ravel()); vals.append(tlo[:, 1:].ravel())
        rows.append(idx[:, :-1].ravel()); cols.append(idx[:, 1:].ravel()); vals.append(tup[:, :-1].ravel())
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ns * ny, ns * ny)
        )


@dataclass
class WaveField:
    """Envelope phi with psi = exp(i k0 s) phi; t in units of 1/omega."""

    grid: Grid2D
    phi: np.ndarray
    k0: float
    t: float = 0.0
    ops: Operators | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.ops is None:
            self.ops = Operators(self.grid, self.k0)

    @property
    def psi(self):
        return np.exp(1j * self.k0 * self.grid.s)[:, None] * self.phi

    def norm(self):
        g = self.grid
        return float(np.sum(np.abs(self.phi) ** 2 * g.h) * g.ds * g.dy)

    def inner(self, other):
        """<self, other>_h (envelopes share the carrier)."""
        g = self.grid
        return complex(np.sum(np.conj(self.phi) * other.phi * g.h) * g.ds * g.dy)

    def copy(self):
        return WaveField(self.grid, self.phi.copy(), self.k0, self.t, self.ops)


def init_wavepacket(grid: Grid2D, scenario: Scenario, s0=None, sigma_s=None, k0=None) -> WaveField:
    """Gaussian packet exp(-(s-s0)^2/(2 sigma_s^2)) chi0(y) exp(i k0 s), h-normalised.

    Defaults (natural units): s0 = start_position_sf * s_f, sigma_s from the
    scenario ratio, k0 = m sdot0 / hbar. chi0 is the discrete transverse
    ground state, so the packet starts with exactly zero excess energy.
    """
    q = scenario.quantum
    u = grid.units
    s0 = q.start_position_sf * grid.s_f if s0 is None else s0
    sigma_s = packet_sigma_s(scenario) if sigma_s is None else sigma_s
    k0 = scenario.params.sdot0 / u.velocity if k0 is None else k0
    if s0 - 4 * sigma_s < grid.s[0] or s0 + 4 * sigma_s > grid.s[-1]:
        raise ValidationError("quantum.start_position_sf", "packet support (4 sigma_s) leaves the grid")
    ops = Operators(grid, k0)
    phi = np.exp(-((grid.s - s0) ** 2) / (2 * sigma_s**2))[:, None] * ops.chi0[None, :]
    phi = phi.astype(np.complex128)
    phi[0] = phi[-1] = 0.0
    field_ = WaveField(grid, phi, k0, 0.0, ops)
    field_.phi /= math.sqrt(field_.norm())
    if grid.s_f > 0:
        inside = _population(field_, grid.s >= 0)
        if inside > BEND_POPULATION_TOL:
            raise ValidationError(
                "quantum.start_position_sf",
                f"initial packet overlaps the bend (population {inside:.2e} at s >= 0)",
            )
    return field_


def _population(field_: WaveField, mask_s):
    g = field_.grid
    rho = np.abs(field_.phi[mask_s]) ** 2 * g.h[mask_s]
    return float(np.sum(rho) * g.ds * g.dy)


def apply_hamiltonian(field_: WaveField) -> np.ndarray:
    """H psi for the field's psi (natural units, Dirichlet edges return 0)."""
    carrier = np.exp(1j * field_.k0 * field_.grid.s)[:, None]
    return carrier * field_.ops.apply_envelope(field_.phi)


class Propagator:
    """Split Cayley stepper bound to one field's operators."""

    def __init__(self, ops: Operators, use_numba=None):
        self.ops = ops
        self.cT = CayleySolver(*ops.T, axis=1, use_numba=use_numba)
        self.cL = CayleySolver(*ops.L, axis=0, use_numba=use_numba)

    def step(self, phi, dt):
        for solver, tau in ((self.cT, 0.5 * dt), (self.cL, dt), (self.cT, 0.5 * dt)):
            bad = solver(phi, tau)
            if bad >= 0:
                raise TridiagonalBreakdown(f"zero pivot at flat index {bad} (axis {solver.axis})")


def evolve(field_: WaveField, dt, n_steps, use_numba=None) -> WaveField:
    """Advance ``n_steps`` steps of length dt (natural units) in place; returns the field."""
    if not 0 < dt <= 2 * math.pi / 100 * (1 + 1e-12):
        raise ValidationError("dt", "must lie in (0, 2pi/100] (natural units)")
    prop = Propagator(field_.ops, use_numba)
    for _ in range(int(n_steps)):
        prop.step(field_.phi, dt)
        field_.t += dt
    return field_


def evolve_unsplit(field_: WaveField, dt, n_steps) -> WaveField:
    """Reference Crank-Nicolson step with the full 2D operator (sparse LU, small grids only).

    Uses the same energy-shifted operator as ``evolve``, so the two differ
    only by the splitting.
    """
    H = field_.ops.sparse_matrix(shifted=True)
    n = H.shape[0]
    I = sp.identity(n, format="csc", dtype=np.complex128)
    lu = splu((I + 0.5j * dt * H).tocsc())
    rhs_op = (I - 0.5j * dt * H).tocsr()
    v = field_.phi.ravel().copy()
    for _ in range(int(n_steps)):
        v = lu.solve(rhs_op @ v)
    field_.phi = v.reshape(field_.grid.shape)
    field_.t += dt * n_steps
    return field_


@dataclass(frozen=True)
class Measurement:
    t: float
    norm: float
    s_mean: float
    y_mean: float
    sdot_mean: float
    Et: float
    nbar: float
    fidelity: float  # NaN while more than BEND_POPULATION_TOL of the packet is inside the bend
    leakage: float


def _fidelity_raw(field_: WaveField):
    g = field_.grid
    amp = field_.phi @ field_.ops.chi0 * g.dy
    return float(np.sum(np.abs(amp) ** 2) * g.ds)


def s_mean(field_: WaveField):
    g = field_.grid
    rho = np.abs(field_.phi) ** 2 * g.h
    return float(np.sum(rho.sum(axis=1) * g.s) / rho.sum())


def measure(field_: WaveField) -> Measurement:
    """Observables in natural units; moments are normalised by the current h-norm."""
    g = field_.grid
    phi = field_.phi
    w = g.ds * g.dy
    dens = np.abs(phi) ** 2
    rho = dens * g.h
    norm = float(rho.sum() * w)
    sm = float(np.sum(rho.sum(axis=1) * g.s) * w / norm)
    ym = float(np.sum(rho.sum(axis=0) * g.y) * w / norm)
    dphi = np.gradient(phi, g.ds, axis=0)
    sd = float(np.sum(np.imag(np.conj(phi) * dphi) + field_.k0 * dens) * w / norm)
    gy = np.diff(phi, axis=1) / g.dy
    Et = float((0.5 * np.sum(np.abs(gy) ** 2 * g.h_y) + 0.5 * np.sum(rho * g.y[None, :] ** 2)) * w / norm)
    nbar = Et - field_.ops.E0
    edge = np.zeros(g.shape, dtype=bool)
    edge[:3] = edge[-3:] = True
    edge[:, :3] = edge[:, -3:] = True
    leak = float(rho[edge].sum() * w)
    in_bend = _population(field_, (g.s >= 0) & (g.s <= g.s_f)) / norm if g.s_f > 0 else 0.0
    fid = _fidelity_raw(field_) / norm if in_bend <= BEND_POPULATION_TOL else float("nan")
    return Measurement(field_.t, norm, sm, ym, sd, Et, nbar, fid, leak)


def fidelity(field_: WaveField):
    """Ground-mode population; only defined once the packet has left the bend."""
    m = measure(field_)
    if math.isnan(m.fidelity):
        raise NotInStraightRegion("packet still overlaps the bend; fidelity not yet valid")
    return m.fidelity


@dataclass
class QuantumObservables:
    """Recorded measurements (natural units) plus the unit system for SI output."""

    records: list
    units: UnitSystem
    s_f: float  # natural units

    def array(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path):
        u = self.units
        with open(path, "w") as fh:
            fh.write("t_s,s_mean_m,s_over_sf,y_mean_m,sdot_mean_m_s,Et_J,nbar,fidelity,norm,leakage\n")
            for r in self.records:
                fh.write(
                    ",".join(
                        f"{v:.12g}"
                        for v in (
                            r.t * u.time, r.s_mean * u.length, r.s_mean / self.s_f, r.y_mean * u.length,
                            r.sdot_mean * u.velocity, r.Et * u.energy, r.nbar, r.fidelity, r.norm, r.leakage,
                        )
                    )
                    + "\n"
                )


@dataclass
class ProtocolResult:
    observables: QuantumObservables
    field: WaveField
    metrics: dict

    def write(self, out_dir, prefix="quantum"):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / f"{prefix}_observables.csv", out_dir / f"{prefix}_snapshot.txt",
                 out_dir / f"{prefix}_metrics.json"]
        self.observables.to_csv(paths[0])
        write_snapshot(self.field, paths[1])
        paths[2].write_text(json.dumps(self.metrics, indent=2) + "\n")
        return paths


def write_snapshot(field_: WaveField, path):
    """Text dump of |psi|^2 h in um^-2, row-major with s as the slow index.

    Layout (version 1): a magic line, a line with n_s n_y s_min_m s_max_m
    y_max_m, then n_s lines of n_y values each.
    """
    g = field_.grid
    L = g.units.length
    dens = np.abs(field_.phi) ** 2 * g.h / (L * 1e6) ** 2
    ns, ny = g.shape
    with open(path, "w") as fh:
        fh.write(f"# curvguide-snapshot v{SNAPSHOT_VERSION} |psi|^2*h [um^-2], rows: s, columns: y\n")
        fh.write(f"{ns} {ny} {g.s[0] * L:.17g} {g.s[-1] * L:.17g} {g.y[-1] * L:.17g}\n")
        np.savetxt(fh, dens, fmt="%.9e")


def read_snapshot(path):
    """Returns (header dict, density array in um^-2)."""
    with open(path) as fh:
        magic = fh.readline()
        if not magic.startswith("# curvguide-snapshot v"):
            raise ValidationError("snapshot", f"{path} is not a snapshot file")
        version = int(magic.split()[2][1:])
        if version != SNAPSHOT_VERSION:
            raise ValidationError("snapshot", f"unsupported snapshot version {version}")
        parts = fh.readline().split()
        head = {"n_s": int(parts[0]), "n_y": int(parts[1]), "s_min_m": float(parts[2]),
                "s_max_m": float(parts[3]), "y_max_m": float(parts[4])}
        data = np.loadtxt(fh, ndmin=2)
    return head, data


def run_protocol(profile: CurvatureProfile, scenario: Scenario, s_range=None, use_numba=None,
                 max_steps=None) -> ProtocolResult:
    """Send the cigar-shaped packet through the bend and record observables.

    Evolves until <s> reaches stop_position_sf * s_f, measuring every
    ``record_every`` steps and at the last step.
    """
    q = scenario.quantum
    grid = build_grid(profile, scenario, s_range)
    psi = init_wavepacket(grid, scenario)
    dt = 2 * math.pi * q.dt_fraction
    prop = Propagator(psi.ops, use_numba)
    s_stop = q.stop_position_sf * grid.s_f
    if max_steps is None:
        # 20x the free-flight time as a safety cap
        max_steps = int(20 * (s_stop - q.start_position_sf * grid.s_f) / psi.k0 / dt) + 1000
    records = [measure(psi)]
    max_drift = abs(records[0].norm - 1.0)
    steps = 0
    while True:
        prop.step(psi.phi, dt)
        psi.t += dt
        steps += 1
        done = s_mean(psi) >= s_stop
        if done or steps % q.record_every == 0:
            m = measure(psi)
            records.append(m)
            max_drift = max(max_drift, abs(m.norm - 1.0))
        if done:
            break
        if steps >= max_steps:
            raise IntegrationTimeout(f"packet did not reach s = {q.stop_position_sf} s_f in {max_steps} steps")
    obs = QuantumObservables(records, grid.units, grid.s_f)
    final = records[-1]
    leak = max(r.leakage for r in records)
    if leak > LEAKAGE_WARN:
        warnings.warn(f"boundary leakage {leak:.2e} exceeds {LEAKAGE_WARN:g}", RuntimeWarning, stacklevel=2)
    u = grid.units
    metrics = {
        "nbar": final.nbar,
        "fidelity": final.fidelity,
        "sdot_final_over_sdot0": final.sdot_mean / psi.k0,
        "s_final_over_sf": final.s_mean / grid.s_f,
        "norm_drift_max": max_drift,
        "leakage_max": leak,
        "leakage_warning": leak > LEAKAGE_WARN,
        "steps": steps,
        "dt_s": dt * u.time,
        "grid_ns": grid.shape[0],
        "grid_ny": grid.shape[1],
        "s_min_m": grid.s[0] * u.length,
        "s_max_m": grid.s[-1] * u.length,
        "y_max_m": grid.y[-1] * u.length,
        "s_f_m": grid.s_f * u.length,
    }
    return ProtocolResult(obs, psi, metrics)
