"""Physical constants, natural units and scenario files.

Everything numeric inside the package runs in the natural units of the
transverse trap: length ``sigma = sqrt(hbar/(m*omega))``, time ``1/omega`` and
energy ``hbar*omega``. SI only appears at the I/O boundary.

Scenario files are TOML::

    mass_kg = 1.44316060e-25      # optional, 87Rb by default
    omega_hz = 1705.0             # omega / 2pi
    sdot0_mm_s = 20.0

    [design]
    kind = "sta2d"                # sta2d | adiabatic1d | circular
    kappa_max_per_um = 0.22
    radius_um = 10.0
    angle_deg = 90.0
    delta_y_um = -0.605           # optional, adiabatic1d only

    [quantum]
    grid_ns = 1024
    grid_ny = 128
    y_halfwidth_sigma = 8.0
    dt_fraction = 0.005           # time step as a fraction of 2pi/omega
    s_margin_left_um = 26.1       # optional
    s_margin_right_um = 26.1      # optional
    sigma_s_over_sigma_y = 10.0
    start_position_sf = -0.5
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ValidationError

HBAR = 1.054571817e-34
RB87_MASS = 1.44316060e-25

DESIGN_KINDS = ("sta2d", "adiabatic1d", "circular")


@dataclass(frozen=True)
class PhysicalParams:
    """Atom mass, hbar, trap frequency omega (rad/s) and incident velocity (m/s)."""

    omega: float
    sdot0: float
    mass: float = RB87_MASS
    hbar: float = HBAR

    def __post_init__(self):
        for name in ("omega", "sdot0", "mass", "hbar"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(name, f"must be finite and strictly positive, got {value!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError("sigma", "ground-state length is not finite")

    @classmethod
    def from_lab(cls, omega_hz, sdot0_mm_s, mass_kg=RB87_MASS):
        """Build from the lab-style numbers used in scenario files."""
        if not omega_hz > 0:
            raise ValidationError("omega", f"omega_hz must be > 0, got {omega_hz!r}")
        if not sdot0_mm_s > 0:
            raise ValidationError("sdot0", f"sdot0_mm_s must be > 0, got {sdot0_mm_s!r}")
        return cls(omega=2 * math.pi * omega_hz, sdot0=sdot0_mm_s * 1e-3, mass=mass_kg)

    @property
    def sigma(self):
        return math.sqrt(self.hbar / (self.mass * self.omega))

    @property
    def units(self):
        return natural_units(self)


@dataclass(frozen=True)
class UnitSystem:
    """Conversion factors: ``internal = si / unit`` and ``si = internal * unit``."""

    length: float
    time: float
    energy: float

    @property
    def velocity(self):
        return self.length / self.time

    @property
    def curvature(self):
        return 1.0 / self.length

    def to_internal(self, value, unit):
        return value / getattr(self, unit)

    def to_si(self, value, unit):
        return value * getattr(self, unit)


def natural_units(params: PhysicalParams) -> UnitSystem:
    """Length sigma, time 1/omega, energy hbar*omega."""
    return UnitSystem(
        length=params.sigma,
        time=1.0 / params.omega,
        energy=params.hbar * params.omega,
    )


@dataclass(frozen=True)
class QuantumSettings:
    grid_ns: int = 1024
    grid_ny: int = 128
    y_halfwidth_sigma: float = 8.0
    dt_fraction: float = 1.0 / 200.0
    s_margin_left: float | None = None  # m; None -> 5 sigma_s
    s_margin_right: float | None = None  # m; None -> 5 sigma_s
    sigma_s_over_sigma_y: float = 10.0
    start_position_sf: float = -0.5
    stop_position_sf: float = 1.5
    record_every: int = 10

    def __post_init__(self):
        if self.grid_ns < 8:
            raise ValidationError("quantum.grid_ns", "need at least 8 points")
        if self.grid_ny < 8:
            raise ValidationError("quantum.grid_ny", "need at least 8 points")
        if not self.y_halfwidth_sigma > 0:
            raise ValidationError("quantum.y_halfwidth_sigma", "must be > 0")
        if not 0 < self.dt_fraction <= 0.01:
            raise ValidationError("quantum.dt_fraction", "must lie in (0, 0.01] (dt <= 2pi/(100 omega))")
        for key in ("s_margin_left", "s_margin_right"):
            value = getattr(self, key)
            if value is not None and not value > 0:
                raise ValidationError(f"quantum.{key}_um", "must be > 0")
        if not self.sigma_s_over_sigma_y > 0:
            raise ValidationError("quantum.sigma_s_over_sigma_y", "must be > 0")
        if not self.start_position_sf < 0:
            raise ValidationError("quantum.start_position_sf", "packet must start before the bend")
        if not self.stop_position_sf > 1:
            raise ValidationError("quantum.stop_position_sf", "packet must stop after the bend")
        if self.record_every < 1:
            raise ValidationError("quantum.record_every", "must be >= 1")


@dataclass(frozen=True)
class Scenario:
    params: PhysicalParams
    design_kind: str = "sta2d"
    kappa_max: float | None = None  # 1/m, sta2d
    radius: float | None = None  # m, circular
    angle: float = math.pi / 2
    delta_y: float | None = None  # m, adiabatic1d (defaults to the sta2d value for kappa_max)
    quantum: QuantumSettings = field(default_factory=QuantumSettings)

    def __post_init__(self):
        if self.design_kind not in DESIGN_KINDS:
            raise ValidationError("design.kind", f"must be one of {DESIGN_KINDS}, got {self.design_kind!r}")
        if not 0 < self.angle <= math.pi:
            raise ValidationError("design.angle_deg", "must lie in (0, 180]")
        if self.design_kind == "sta2d" and not (self.kappa_max is not None and self.kappa_max > 0):
            raise ValidationError("design.kappa_max_per_um", "sta2d needs kappa_max > 0")
        if self.design_kind == "circular" and not (self.radius is not None and self.radius > 0):
            raise ValidationError("design.radius_um", "circular needs radius > 0")
        if self.design_kind == "adiabatic1d":
            if self.delta_y is None and not (self.kappa_max is not None and self.kappa_max > 0):
                raise ValidationError("design.delta_y_um", "adiabatic1d needs delta_y or kappa_max")
            if self.delta_y is not None and not self.delta_y < 0:
                raise ValidationError("design.delta_y_um", "must be negative")

    def digest(self):
        """Stable short hash of the scenario contents."""
        return hashlib.sha256(dumps_scenario(self).encode()).hexdigest()[:16]


# File <-> SI conversion. ``si = file_value * scale``.
_SCALES = {
    "omega_hz": 2 * math.pi,
    "sdot0_mm_s": 1e-3,
    "kappa_max_per_um": 1e6,
    "radius_um": 1e-6,
    "delta_y_um": 1e-6,
    "angle_deg": math.pi / 180,
    "s_margin_left_um": 1e-6,
    "s_margin_right_um": 1e-6,
}


def _to_file(si_value, key):
    """File value whose product with the scale reproduces ``si_value`` exactly, when one exists."""
    scale = _SCALES[key]
    guess = si_value / scale
    candidate = guess
    for _ in range(8):
        if candidate * scale == si_value:
            return float(candidate)
        candidate = np.nextafter(candidate, np.inf if candidate * scale < si_value else -np.inf)
    return float(guess)


def _from_file(value, key):
    return float(value) * _SCALES[key]


def _require_number(table, key, prefix=""):
    if key not in table:
        raise ValidationError(prefix + key, "missing required key")
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(prefix + key, f"expected a number, got {value!r}")
    return float(value)


def scenario_from_dict(data: dict) -> Scenario:
    known_top = {"mass_kg", "omega_hz", "sdot0_mm_s", "design", "quantum"}
    unknown = set(data) - known_top
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown key")
    omega_hz = _require_number(data, "omega_hz")
    if not omega_hz > 0:
        raise ValidationError("omega", f"omega_hz must be > 0, got {omega_hz!r}")
    sdot0 = _require_number(data, "sdot0_mm_s")
    if not sdot0 > 0:
        raise ValidationError("sdot0", f"sdot0_mm_s must be > 0, got {sdot0!r}")
    mass = _require_number(data, "mass_kg") if "mass_kg" in data else RB87_MASS
    params = PhysicalParams(
        omega=_from_file(omega_hz, "omega_hz"),
        sdot0=_from_file(sdot0, "sdot0_mm_s"),
        mass=mass,
    )

    design = data.get("design", {})
    if not isinstance(design, dict):
        raise ValidationError("design", "must be a table")
    kind = design.get("kind", "sta2d")
    kw = {"design_kind": kind}
    for key, attr in (
        ("kappa_max_per_um", "kappa_max"),
        ("radius_um", "radius"),
        ("delta_y_um", "delta_y"),
        ("angle_deg", "angle"),
    ):
        if key in design:
            kw[attr] = _from_file(_require_number(design, key, "design."), key)
    unknown = set(design) - {"kind", "kappa_max_per_um", "radius_um", "delta_y_um", "angle_deg"}
    if unknown:
        raise ValidationError("design." + sorted(unknown)[0], "unknown key")

    qdata = data.get("quantum", {})
    qkw = {}
    int_keys = ("grid_ns", "grid_ny", "record_every")
    float_keys = (
        "y_halfwidth_sigma", "dt_fraction", "sigma_s_over_sigma_y",
        "start_position_sf", "stop_position_sf",
    )
    for key, value in qdata.items():
        if key in int_keys:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError("quantum." + key, f"expected an integer, got {value!r}")
            qkw[key] = value
        elif key in float_keys:
            qkw[key] = _require_number(qdata, key, "quantum.")
        elif key in ("s_margin_left_um", "s_margin_right_um"):
            qkw[key[:-3]] = _from_file(_require_number(qdata, key, "quantum."), key)
        else:
            raise ValidationError("quantum." + key, "unknown key")
    return Scenario(params=params, quantum=QuantumSettings(**qkw), **kw)


def scenario_to_dict(scenario: Scenario) -> dict:
    p = scenario.params
    data = {
        "mass_kg": p.mass,
        "omega_hz": _to_file(p.omega, "omega_hz"),
        "sdot0_mm_s": _to_file(p.sdot0, "sdot0_mm_s"),
    }
    design = {"kind": scenario.design_kind, "angle_deg": _to_file(scenario.angle, "angle_deg")}
    if scenario.kappa_max is not None:
        design["kappa_max_per_um"] = _to_file(scenario.kappa_max, "kappa_max_per_um")
    if scenario.radius is not None:
        design["radius_um"] = _to_file(scenario.radius, "radius_um")
    if scenario.delta_y is not None:
        design["delta_y_um"] = _to_file(scenario.delta_y, "delta_y_um")
    data["design"] = design
    q = {}
    for f in dataclasses.fields(QuantumSettings):
        value = getattr(scenario.quantum, f.name)
        if value is None:
            continue
        if f.name.startswith("s_margin"):
            q[f.name + "_um"] = _to_file(value, f.name + "_um")
        else:
            q[f.name] = value
    data["quantum"] = q
    return data


def dumps_scenario(scenario: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(scenario))


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(scenario))


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises ``ValidationError`` naming the offending key, both for parse
    failures (key ``"file"``) and for constraint violations.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError("file", f"{path} does not exist")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError("file", f"cannot parse {path}: {exc}") from exc
    return scenario_from_dict(data)


# Parameter sets used throughout the figures.
FIG2_OMEGA_HZ = 1705.0
FIG2_SDOT0_MM_S = 20.0
FIG2_KAPPA_MAX_PER_UM = 0.22


def fig2_params() -> PhysicalParams:
    return PhysicalParams.from_lab(FIG2_OMEGA_HZ, FIG2_SDOT0_MM_S)


def fig2_scenario() -> Scenario:
    return Scenario(params=fig2_params(), design_kind="sta2d", kappa_max=FIG2_KAPPA_MAX_PER_UM * 1e6)
