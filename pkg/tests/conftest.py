import time
import warnings

import pytest

import oracles
from curvguide import designer, quantum, reproduce
from curvguide.scenario import fig2_params


@pytest.fixture(scope="session")
def params():
    return fig2_params()


@pytest.fixture(scope="session")
def fig2_design():
    return reproduce.fig2_design()


@pytest.fixture(scope="session")
def fig4_pair():
    return reproduce.fig4_designs()


@pytest.fixture(scope="session")
def fig4_timed(fig4_pair):
    """Full-resolution quantum protocol for the matched 2D and 1D designs, with wall times."""
    d2, d1 = fig4_pair
    sc = reproduce.fig4_scenario(d2.kappa_m)
    out, wall = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for d in (d2, d1):
            t0 = time.perf_counter()
            out.append(quantum.run_protocol(d.profile, sc))
            wall.append(time.perf_counter() - t0)
    return tuple(out), tuple(wall)


@pytest.fixture(scope="session")
def fig4_runs(fig4_timed):
    return fig4_timed[0]


@pytest.fixture(scope="session")
def ehrenfest():
    """(single-trajectory, ensemble) relative <y> errors in the gentle bend."""
    return oracles.ehrenfest_errors()


@pytest.fixture(scope="session")
def circular10():
    return designer.circular_bend(10e-6)
