import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvguide.errors import ValidationError
from curvguide.scenario import (
    HBAR, RB87_MASS, PhysicalParams, QuantumSettings, Scenario, dumps_scenario, fig2_params,
    load_scenario, natural_units, save_scenario, scenario_from_dict,
)


def test_fig2_natural_units():
    p = fig2_params()
    u = natural_units(p)
    assert u.length == pytest.approx(0.261173e-6, rel=1e-5)
    assert u.time == pytest.approx(1 / (2 * math.pi * 1705.0), rel=1e-14)
    assert u.energy == pytest.approx(HBAR * p.omega, rel=1e-14)
    assert p.sdot0 / u.velocity == pytest.approx(7.15, abs=0.01)
    assert p.mass == RB87_MASS


def test_units_round_trip():
    u = fig2_params().units
    for unit in ("length", "time", "velocity", "energy", "curvature"):
        assert u.to_si(u.to_internal(3.7, unit), unit) == pytest.approx(3.7, rel=1e-15)


@pytest.mark.parametrize("kw", [dict(omega=0.0, sdot0=0.02), dict(omega=1e4, sdot0=-1.0),
                                dict(omega=1e4, sdot0=0.02, mass=0.0)])
def test_params_reject_nonpositive(kw):
    with pytest.raises(ValidationError):
        PhysicalParams(**kw)


def test_scenario_validation():
    p = fig2_params()
    with pytest.raises(ValidationError, match="kappa_max"):
        Scenario(params=p, design_kind="sta2d")
    with pytest.raises(ValidationError, match="radius"):
        Scenario(params=p, design_kind="circular")
    with pytest.raises(ValidationError, match="angle"):
        Scenario(params=p, kappa_max=1e5, angle=4.0)
    with pytest.raises(ValidationError, match="design.kind"):
        Scenario(params=p, design_kind="spiral")
    with pytest.raises(ValidationError, match="dt_fraction"):
        QuantumSettings(dt_fraction=0.02)


def test_unknown_and_missing_keys():
    with pytest.raises(ValidationError, match="omega_hz"):
        scenario_from_dict({"sdot0_mm_s": 20.0})
    with pytest.raises(ValidationError, match="colour"):
        scenario_from_dict({"omega_hz": 1705.0, "sdot0_mm_s": 20.0, "colour": 1})
    with pytest.raises(ValidationError, match="quantum.grid_ns"):
        scenario_from_dict({"omega_hz": 1705.0, "sdot0_mm_s": 20.0,
                            "design": {"kappa_max_per_um": 0.2}, "quantum": {"grid_ns": 10.5}})


def test_load_reports_parse_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("omega_hz = = 3\n")
    with pytest.raises(ValidationError) as err:
        load_scenario(bad)
    assert err.value.key == "file"
    with pytest.raises(ValidationError):
        load_scenario(tmp_path / "missing.toml")


finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(
    omega_hz=st.floats(10.0, 1e5, **finite),
    sdot0=st.floats(0.1, 200.0, **finite),
    kappa=st.floats(1e-3, 5.0, **finite),
    angle=st.floats(1.0, 180.0, **finite),
    ns=st.integers(8, 4096),
    dtf=st.floats(1e-4, 0.01, **finite),
    margin=st.one_of(st.none(), st.floats(0.5, 500.0, **finite)),
)
def test_scenario_file_round_trip(tmp_path_factory, omega_hz, sdot0, kappa, angle, ns, dtf, margin):
    p = PhysicalParams.from_lab(omega_hz, sdot0)
    q = QuantumSettings(grid_ns=ns, dt_fraction=dtf, s_margin_left=None if margin is None else margin * 1e-6)
    sc = Scenario(params=p, kappa_max=kappa * 1e6, angle=math.radians(angle), quantum=q)
    path = tmp_path_factory.mktemp("rt") / "s.toml"
    save_scenario(sc, path)
    back = load_scenario(path)
    assert back == sc
    assert dumps_scenario(back) == dumps_scenario(sc)
    assert back.digest() == sc.digest()
