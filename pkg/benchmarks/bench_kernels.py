"""Time the hot kernels with numba on and off.

Each path runs in its own interpreter because the switch
(CURVGUIDE_NO_NUMBA) is read at import time.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from curvguide import _accel, classical, quantum, reproduce
from curvguide.scenario import fig2_params

repeat = int(sys.argv[1])
p = fig2_params()
d = reproduce.fig2_design()
sc = reproduce.fig4_scenario(d.kappa_m)


def best(fn):
    fn()  # warm-up (jit compile or cache load)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def rk4():
    classical.integrate(d.profile, p.omega, classical.ClassicalState(0.0, p.sdot0), sigma=p.sigma)


f = quantum.init_wavepacket(quantum.build_grid(d.profile, sc), sc)
prop = quantum.Propagator(f.ops)
dt = 2 * np.pi * sc.quantum.dt_fraction


def cayley():
    for _ in range(20):
        prop.step(f.phi, dt)


def sweep():
    classical.robustness_sweep(d.profile, p.omega, p.sdot0, n_samples=101, sigma=p.sigma, threads=1)


out = {"numba": _accel.USE_NUMBA, "classical_integrate_s": best(rk4),
       "split_step_1024x128_s": best(cayley) / 20, "sweep_101_s": best(sweep)}
print(json.dumps(out))
"""


def run(no_numba, repeat):
    env = dict(os.environ)
    env.pop("CURVGUIDE_NO_NUMBA", None)
    if no_numba:
        env["CURVGUIDE_NO_NUMBA"] = "1"
    r = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True)
    if r.returncode:
        sys.exit(r.stderr)
    return json.loads(r.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    if not fast["numba"]:
        print("numba unavailable: both columns use the numpy path")
    print(f"{'kernel':<26}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for key in ("classical_integrate_s", "split_step_1024x128_s", "sweep_101_s"):
        a, b = fast[key], slow[key]
        print(f"{key[:-2]:<26}{a:>12.4g}{b:>12.4g}{b / a:>10.1f}")


if __name__ == "__main__":
    main()
