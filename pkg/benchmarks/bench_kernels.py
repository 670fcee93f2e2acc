"""Time the numba kernels against their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--full-run]

``--full-run`` also times the default AR(2) experiment end to end under each
backend (in subprocesses, since the backend is fixed at import time).
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from acmcp import _kernels


def _cases(rng):
    w = rng.exponential(1.0, 501)
    y = np.cumsum(rng.normal(size=500))
    s = rng.uniform(-1, 1, (200, 2000))
    eps = rng.normal(0, 0.3, 100_000)
    x1, x2 = rng.random(100_000), rng.random(100_000)
    return {
        "quantile_scan (501 atoms)": ("quantile_scan", (w, 0.9)),
        "ses_fit (500 points)": ("ses_fit", (y,)),
        "p_only_errs (200 x 2000)": ("p_only_errs", (s, 0.1, 0.1, 2)),
        "integrator_only_errs (200 x 2000)": ("integrator_only_errs", (s, 0.1, 2, 0.158, 1.0)),
        "nonlinear_recursion (100k)": ("nonlinear_recursion", (eps, x1, x2, np.zeros(2))),
    }


def bench_kernels(repeat: int) -> None:
    rng = np.random.default_rng(0)
    print(f"{'kernel':38s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for label, (name, args) in _cases(rng).items():
        np_fn = getattr(_kernels, f"{name}_np")
        t_np = min(timeit.repeat(lambda: np_fn(*args), number=1, repeat=repeat))
        if _kernels.HAVE_NUMBA:
            nb_fn = getattr(_kernels, f"{name}_nb")
            nb_fn(*args)  # compile outside the timing
            t_nb = min(timeit.repeat(lambda: nb_fn(*args), number=1, repeat=repeat))
            print(f"{label:38s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{label:38s} {1e3 * t_np:11.3f} {'n/a':>11s}")


_RUN = (
    "import time; from acmcp import RunPlan, run; from acmcp.simgen import simulate_ar2;"
    "s = simulate_ar2(5000, seed=1); t = time.perf_counter(); run(RunPlan(s));"
    "print(time.perf_counter() - t)"
)


def bench_full_run() -> None:
    for label, flag in (("numpy", "1"), ("numba", "0")):
        env = dict(os.environ, ACMCP_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _RUN], env=env, capture_output=True, text=True, check=True)
        print(f"default AR(2) run, {label} backend: {float(out.stdout):.1f} s")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--full-run", action="store_true")
    args = p.parse_args()
    print(f"active backend: {_kernels.BACKEND}")
    bench_kernels(args.repeat)
    if args.full_run:
        bench_full_run()


if __name__ == "__main__":
    main()
