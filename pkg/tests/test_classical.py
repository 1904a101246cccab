import math

import numpy as np
import pytest

import oracles
from curvguide import classical, designer
from curvguide.classical import ClassicalState
from curvguide.errors import IntegrationTimeout, MetricSingularity, ValidationError


def test_null_test_fig2(fig2_design, params):
    tr = classical.integrate(fig2_design.profile, params.omega, ClassicalState(0.0, params.sdot0), sigma=params.sigma)
    assert classical.exit_amplitude(tr, params.omega) <= 1e-4 * params.sigma
    assert tr.energy_drift() <= 1e-8
    assert tr.s[tr.exit_index] == pytest.approx(fig2_design.s_f, rel=1e-14)


@pytest.mark.parametrize("which", ["sta", "circular"])
def test_fourth_order_energy_convergence(which, fig2_design, circular10, params):
    prof = fig2_design.profile if which == "sta" else circular10.profile
    dt0 = classical.default_dt(params.omega)
    drift = oracles.energy_drift_sequence(prof, params, [10 * dt0, 5 * dt0, 2.5 * dt0])
    order = np.log2(drift[:-1] / drift[1:])
    assert np.all(order > 3.6), order


@pytest.mark.parametrize("n", [13, 26, 66])
def test_linear_response_circle(n, params):
    # radii where omega*tau/2 = (n + 1/2) pi: the amplitude sits on a maximum of
    # |sin|, so it does not depend on the small transit-time shift of the full dynamics
    R = (n + 0.5) * 4 * params.sdot0 / params.omega
    c = designer.circular_bend(R)
    tr = classical.integrate(c.profile, params.omega, ClassicalState(0.0, params.sdot0), sigma=params.sigma)
    a = classical.exit_amplitude(tr, params.omega)
    ref = oracles.driven_oscillator_amplitude(R, math.pi / 2, params.sdot0, params.omega)
    assert a == pytest.approx(ref, rel=0.01)


def test_design_inverse(fig2_design, fig4_pair):
    assert oracles.design_inverse_error(fig2_design) <= 1e-6
    assert oracles.design_inverse_error(fig4_pair[0]) <= 1e-6


def test_exit_state_symmetry(fig2_design, params):
    # the design is mirror symmetric: y and ydot at exit vanish, sdot returns to sdot0
    tr = classical.integrate(fig2_design.profile, params.omega, ClassicalState(0.0, params.sdot0), sigma=params.sigma)
    ex = tr.exit
    assert ex.sdot == pytest.approx(params.sdot0, rel=1e-9)
    assert ex.t == pytest.approx(2 * fig2_design.T, rel=1e-9)


def test_straight_motion_is_free(params):
    prof = designer.circular_bend(1e-3).profile
    st = ClassicalState(s=-5e-6, sdot=params.sdot0, y=0.3 * params.sigma)
    tr = classical.integrate(prof, params.omega, st, s_stop=-1e-6, sigma=params.sigma)
    t = tr.t
    assert np.allclose(tr.y, 0.3 * params.sigma * np.cos(params.omega * t), rtol=0, atol=1e-9 * params.sigma)
    assert np.allclose(tr.sdot, params.sdot0, rtol=1e-14)


def test_integrate_errors(circular10, params):
    om = params.omega
    with pytest.raises(ValidationError):
        classical.integrate(circular10.profile, om, ClassicalState(0.0, -1.0))
    with pytest.raises(ValidationError):
        classical.integrate(circular10.profile, om, ClassicalState(0.0, params.sdot0), dt=1.0)
    with pytest.raises(MetricSingularity):
        classical.integrate(circular10.profile, om, ClassicalState(1e-6, params.sdot0, y=20e-6))
    with pytest.raises(IntegrationTimeout):
        classical.integrate(circular10.profile, om, ClassicalState(0.0, params.sdot0), t_max=1e-4)


def test_excess_quanta():
    assert classical.excess_quanta_classical(2.0, 1.0) == 2.0
    with pytest.raises(ValidationError):
        classical.excess_quanta_classical(-1.0, 1.0)


def test_sweep_validation(circular10, params):
    with pytest.raises(ValidationError):
        classical.robustness_sweep(circular10.profile, params.omega, params.sdot0, n_samples=10, sigma=params.sigma)
    with pytest.raises(ValidationError):
        classical.robustness_sweep(circular10.profile, params.omega, params.sdot0, epsilon=0.7, sigma=params.sigma)


def test_sweep_independent_of_threads(fig2_design, params):
    kw = dict(epsilon=0.05, n_samples=21, sigma=params.sigma)
    a = classical.robustness_sweep(fig2_design.profile, params.omega, params.sdot0, threads=1, **kw)
    b = classical.robustness_sweep(fig2_design.profile, params.omega, params.sdot0, threads=4, **kw)
    assert np.array_equal(a.a, b.a) and a.alpha_bar == b.alpha_bar
    assert a.a[10] <= 1e-4 * params.sigma


def test_sweep_csv(tmp_path, circular10, params):
    res = classical.robustness_sweep(circular10.profile, params.omega, params.sdot0, n_samples=11, sigma=params.sigma)
    path = tmp_path / "sweep.csv"
    res.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "v_m_s,a_m,a_over_sigma"
    assert lines[-1].startswith("# alpha_bar=")
    assert float(lines[-1].split("=")[1]) == res.alpha_bar


def test_trajectory_csv(tmp_path, fig2_design, params):
    tr = classical.integrate(fig2_design.profile, params.omega, ClassicalState(0.0, params.sdot0), sigma=params.sigma)
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (tr.t.size, 6)
    assert path.read_text().splitlines()[0] == "t_s,s_m,sdot_m_s,y_m,ydot_m_s,energy_rel_drift"
