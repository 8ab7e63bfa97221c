#!/usr/bin/env python3
"""Benchmark the compiled plant kernel against the pure-Python fallback.

Usage: python3 benchmarks/bench_plant.py [--steps 2000000]
"""

import argparse
import time

import numpy as np

from wraphaptics import _plant_core_py
from wraphaptics.pneumatics import COMPILED_PLANT_CORE, ChannelSpec


def run(kernel, commands, spec, dt):
    out = np.empty_like(commands)
    start = time.perf_counter()
    kernel(1.0, commands, spec.tau_up, spec.tau_down, spec.max_pressure, dt, out)
    return time.perf_counter() - start, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=2_000_000)
    args = parser.parse_args()

    spec = ChannelSpec.ring()
    dt = 0.001
    rng = np.random.default_rng(0)
    commands = rng.uniform(0.5, 4.5, size=args.steps)

    py_time, py_out = run(_plant_core_py.step_sequence, commands, spec, dt)
    print(f"pure python : {args.steps / py_time / 1e6:8.2f} Msteps/s "
          f"({py_time:.3f} s)")

    if not COMPILED_PLANT_CORE:
        print("compiled    : not built (pip install -e . with a C toolchain)")
        return

    from wraphaptics import _plant_core

    c_time, c_out = run(_plant_core.step_sequence, commands, spec, dt)
    print(f"compiled    : {args.steps / c_time / 1e6:8.2f} Msteps/s "
          f"({c_time:.3f} s)")
    print(f"speedup     : {py_time / c_time:8.1f}x")
    identical = np.array_equal(py_out, c_out)
    print(f"bit-identical outputs: {identical}")
    if not identical:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
