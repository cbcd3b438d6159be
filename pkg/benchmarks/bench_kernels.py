#!/usr/bin/env python3
"""Benchmark the compiled simulation kernels against the pure-Python twin.

Two workloads from the bundled case study:

* open loop: one slow two-lag entry stepped over its full settling horizon,
* closed loop: all six PI loops co-simulated over a 50-hour horizon at 1 s.

Reports wall time per backend, the speedup, and the worst output deviation
between the two implementations.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import time

import numpy as np

import looptune.kernels as kernels
from looptune import _pyloop, casestudy
from looptune.cloop import simulate_closed_loop
from looptune.lti import step_response_numeric


def _have_compiled():
    try:
        from looptune import _fastloop  # noqa: F401
        return True
    except ImportError:
        return False


class use_backend:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        self.saved = kernels._impl
        if self.name == "py":
            kernels._impl = _pyloop
        else:
            from looptune import _fastloop
            kernels._impl = _fastloop

    def __exit__(self, *exc):
        kernels._impl = self.saved


def time_call(fn, repeat):
    best = math.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_open_loop(repeat):
    model = casestudy.MODELS[("X_cao", "F_f_ca")]
    dt = min(model.poles) / 10.0
    horizon = 10.0 * (sum(model.poles) + model.delay)
    steps = int(horizon / dt) + 1

    import warnings

    def run():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return step_response_numeric(model, horizon, dt).channels["y"]

    rows = {}
    for name in ("c", "py"):
        with use_backend(name):
            rows[name] = time_call(run, repeat)
    return "open-loop step", steps, rows


def bench_closed_loop(repeat):
    plant = casestudy.plant()
    schedule = casestudy.default_setpoint_schedule()
    cfg_kwargs = dict(dt=1.0, horizon=180000.0)
    steps = int(cfg_kwargs["horizon"] / cfg_kwargs["dt"]) + 1

    import warnings

    def run():
        cfg = casestudy.loop_config("imc", **cfg_kwargs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            trace = simulate_closed_loop(plant, cfg,
                                         setpoint_schedule=schedule)
        return np.column_stack([trace.channels[c]
                                for c in casestudy.CV_NAMES])

    rows = {}
    for name in ("c", "py"):
        with use_backend(name):
            rows[name] = time_call(run, repeat)
    return "closed loop (6 PI loops, 50 h)", steps, rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3,
                        help="timing repetitions, best of N (default 3)")
    args = parser.parse_args()

    if not _have_compiled():
        raise SystemExit("compiled backend not built; run "
                         "`pip install -e . --no-build-isolation` first")

    print(f"{'workload':34s} {'steps':>9s} {'compiled':>10s} "
          f"{'python':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for bench in (bench_open_loop, bench_closed_loop):
        name, steps, rows = bench(args.repeat)
        t_c, out_c = rows["c"]
        t_py, out_py = rows["py"]
        diff = float(np.max(np.abs(np.asarray(out_c) - np.asarray(out_py))))
        print(f"{name:34s} {steps:9d} {t_c * 1e3:8.1f} ms {t_py * 1e3:8.1f} ms "
              f"{t_py / t_c:7.1f}x {diff:11.2e}")


if __name__ == "__main__":
    main()
