import math

import numpy as np
import pytest

from curvguide import designer
from curvguide.errors import ValidationError
from curvguide.geometry import (
    CurvatureProfile, adiabaticity_report, corner_clearance, equivalent_radius, metric_factor,
    read_profile_csv, reconstruct_path, write_profile_csv,
)


def test_nodes_reproduced_exactly():
    s = np.linspace(0, 1, 23) ** 1.3
    k = np.sin(3 * s) ** 2
    prof = CurvatureProfile(s, k)
    assert np.max(np.abs(prof(s) - k)) == 0.0


def test_slopes_match_central_differences():
    errs = []
    for n in (41, 81, 161):
        s = np.linspace(0, 2, n)
        k = np.sin(s) + 0.3 * s**2
        prof = CurvatureProfile(s, k)
        d = (k[2:] - k[:-2]) / (s[2:] - s[:-2])
        errs.append(np.max(np.abs(prof.derivative(s[1:-1]) - d)))
    # O(ds^2): each halving gains ~4
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_rejects_bad_tables():
    with pytest.raises(ValidationError):
        CurvatureProfile([0.0, 1.0, 1.0], [0, 1, 0])
    with pytest.raises(ValidationError):
        CurvatureProfile([0.0, 1.0], [0, np.nan])
    with pytest.raises(ValidationError):
        CurvatureProfile([0.5, 1.0], [0, 0])


def test_zero_outside_and_metric(fig2_design):
    prof = fig2_design.profile
    assert prof(-1e-6) == 0.0 and prof(prof.s_f + 1e-6) == 0.0
    s = prof.s_f / 2
    assert metric_factor(prof, s, 1e-6) == pytest.approx(1 - prof(s) * 1e-6, rel=1e-15)


def test_angle_additivity(fig2_design):
    prof = fig2_design.profile
    s = np.linspace(0, prof.s_f, 200001)
    trap = np.trapezoid(prof(s), s)
    assert abs(prof.turn_angle() - trap) < 1e-8
    assert abs(prof.turn_angle() - math.pi / 2) < 1e-8


def test_path_length_consistency(fig2_design):
    prof = fig2_design.profile
    path = reconstruct_path(prof, prof.s_f / 1e4)
    assert abs(path.arc_length() / prof.s_f - 1) < 1e-6
    assert abs(path.theta[-1] - path.theta[0] - math.pi / 2) < 1e-8


@pytest.mark.parametrize("R", [1e-6, 10e-6, 37.5e-6])
def test_equivalent_radius_identity_on_circles(R):
    prof = designer.circular_bend(R).profile
    path = reconstruct_path(prof, prof.s_f / 1e4)
    assert abs(path.X[-1] - R) < 1e-9 * R and abs(path.Y[-1] - R) < 1e-9 * R
    assert equivalent_radius(path) == pytest.approx(R, rel=1e-9)


def test_equivalent_radius_fig2(fig2_design):
    path = reconstruct_path(fig2_design.profile, fig2_design.s_f / 4000)
    r_eq = equivalent_radius(path)
    assert r_eq == pytest.approx(10e-6, rel=0.05)
    # the nearest approach to the corner point is a different, smaller number
    assert corner_clearance(path) < 0.5 * r_eq


def test_equivalent_radius_needs_right_angle():
    prof = designer.circular_bend(5e-6, angle=math.pi / 3).profile
    with pytest.raises(ValidationError):
        equivalent_radius(reconstruct_path(prof, prof.s_f / 1000))


def test_reconstruct_rejects_coarse_step(fig2_design):
    with pytest.raises(ValidationError):
        reconstruct_path(fig2_design.profile, fig2_design.s_f / 10)


def test_profile_csv_round_trip(tmp_path, fig2_design):
    path = tmp_path / "p.csv"
    write_profile_csv(fig2_design.profile, path)
    back = read_profile_csv(path)
    s = np.linspace(0, fig2_design.s_f, 3001)
    assert np.array_equal(back(s), fig2_design.profile(s))
    assert np.array_equal(back.corners(), fig2_design.profile.corners())


def test_two_column_csv(tmp_path):
    path = tmp_path / "p.csv"
    s = np.linspace(0, 1e-5, 11)
    np.savetxt(path, np.column_stack([s, 1e5 * np.sin(np.pi * s / 1e-5)]), delimiter=",",
               header="s_m,kappa_per_m", comments="")
    prof = read_profile_csv(path)
    assert prof.s_f == pytest.approx(1e-5)
    path.write_text("a,b\n0,0\n1,1\n")
    with pytest.raises(ValidationError):
        read_profile_csv(path)


def test_mirror_symmetry(fig2_design):
    prof = fig2_design.profile
    s = np.linspace(0, prof.s_f, 1001)
    assert np.max(np.abs(prof(s) - prof(prof.s_f - s))) < 1e-8 * prof.kappa_max
    m = prof.mirrored()
    assert np.max(np.abs(m(s) - prof(prof.s_f - s))) < 1e-8 * prof.kappa_max


def test_adiabaticity_fig2(fig2_design, params):
    rep = adiabaticity_report(fig2_design.profile, params.sigma)
    # sigma * kappa_m = 0.261 um * 0.22 / um
    assert rep.max_a == pytest.approx(0.2611732 * 0.22, rel=1e-4)
    assert np.isnan(rep.ratio_b).sum() == 0 or np.all(rep.ratio_a[np.isnan(rep.ratio_b)] < 1e-6 * rep.max_a)
