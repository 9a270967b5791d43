"""Timing of the numba kernels against their pure-numpy fallbacks.

Run ``python3 benchmarks/bench_kernels.py``. The first numba call of each
kernel is made before timing so compilation is excluded. A full
characterization is also timed in a subprocess per path, with
``LOCHAR_DISABLE_NUMBA`` toggled, since the flag is read at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from lochar.kernels import (
    coherence_envelope_numba,
    coherence_envelope_numpy,
    pair_product_stats_numba,
    pair_product_stats_numpy,
)

PIPELINE_SNIPPET = """
import time, warnings
warnings.simplefilter("ignore")
from lochar.experiments import run_trial
from lochar.simulator import make_plan
plan = make_plan(4, seed=0, spectrum="measured", noise=False)
run_trial(plan)
t = time.perf_counter()
run_trial(plan)
print(time.perf_counter() - t)
"""


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_envelope(k, points, repeat):
    omega = np.linspace(-7.0, 7.0, k)
    w = np.exp(-omega**2)
    t = np.linspace(-4.0, 4.0, points)
    assert np.allclose(coherence_envelope_numba(omega, w, t), coherence_envelope_numpy(omega, w, t),
                       rtol=1e-9, atol=1e-12)
    return (best_of(lambda: coherence_envelope_numpy(omega, w, t), repeat, 20),
            best_of(lambda: coherence_envelope_numba(omega, w, t), repeat, 20))


def bench_pairs(n, repeat):
    rng = np.random.default_rng(0)
    x, y = rng.random(n), rng.random(n)
    pair_product_stats_numba(x, y)
    return (best_of(lambda: pair_product_stats_numpy(x, y), repeat, 20),
            best_of(lambda: pair_product_stats_numba(x, y), repeat, 20))


def bench_pipeline(disable):
    env = dict(os.environ)
    if disable:
        env["LOCHAR_DISABLE_NUMBA"] = "1"
    else:
        env.pop("LOCHAR_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", PIPELINE_SNIPPET], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.split()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--skip-pipeline", action="store_true")
    args = parser.parse_args(argv)

    print(f"{'kernel':<34}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    rows = []
    for k, points in ((121, 61), (161, 401), (401, 2001)):
        rows.append((f"coherence_envelope k={k} t={points}", *bench_envelope(k, points, args.repeat)))
    for n in (24, 100):
        rows.append((f"pair_product_stats n={n}", *bench_pairs(n, args.repeat)))
    if not args.skip_pipeline:
        rows.append(("characterize m=4 (whole run)", bench_pipeline(True), bench_pipeline(False)))
    for name, t_np, t_nb in rows:
        print(f"{name:<34}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
