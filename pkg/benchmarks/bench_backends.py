#!/usr/bin/env python3
"""Compare the numba-jitted kernels against the pure-numpy fallback.

Each backend runs in a fresh subprocess (the backend is chosen at import
time from CANONSYS_BACKEND); the workload is the end-to-end assembly of the
built-in problem over a z grid plus a single fundamental-solution run.

Usage: python benchmarks/bench_backends.py [n_z]
"""

import json
import os
import subprocess
import sys

_WORK = r"""
import json, os, time
import numpy as np
import canonsys as cs

n_z = int(os.environ["BENCH_NZ"])
rng = np.random.default_rng(0)
zs = rng.uniform(-3, 3, n_z) + 1j * rng.uniform(0.1, 3, n_z)

ih = cs.example_problem()
cs.monodromy_matrix(ih, 1.0 + 1.0j)        # warm-up / jit compile
t0 = time.perf_counter()
for z in zs:
    cs.monodromy_matrix(ih, complex(z))
t_mono = time.perf_counter() - t0

h = ih.h_minus
t0 = time.perf_counter()
for z in zs:
    cs.fundamental(h, complex(z), side="minus", rtol=1e-12, atol=1e-12)
t_fund = time.perf_counter() - t0

print(json.dumps({"backend": cs.BACKEND,
                  "monodromy_per_z_ms": 1e3 * t_mono / n_z,
                  "fundamental_per_z_ms": 1e3 * t_fund / n_z}))
"""


def run(backend: str, n_z: int) -> dict:
    env = dict(os.environ, CANONSYS_BACKEND=backend, BENCH_NZ=str(n_z))
    out = subprocess.run([sys.executable, "-c", _WORK], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    n_z = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    rows = [run(b, n_z) for b in ("numba", "numpy")]
    print(f"{'backend':8s}  {'monodromy/z':>12s}  {'fundamental/z':>14s}")
    for r in rows:
        print(f"{r['backend']:8s}  {r['monodromy_per_z_ms']:9.2f} ms"
              f"  {r['fundamental_per_z_ms']:11.2f} ms")
    speed = rows[1]["monodromy_per_z_ms"] / rows[0]["monodromy_per_z_ms"]
    print(f"numba speedup on the assembly: {speed:.1f}x")


if __name__ == "__main__":
    main()
