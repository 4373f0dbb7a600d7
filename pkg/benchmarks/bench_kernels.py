"""Time the guidance-velocity kernel on both backends.

    python benchmarks/bench_kernels.py [--points 10000] [--repeat 20]

Also times a full bundled Bohmian run with each backend in a subprocess,
since ``ONTOSIM_DISABLE_NUMBA`` is read at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ontosim import kernels
from ontosim.bohmian import GuidanceField, sample_initial_positions
from ontosim.scenarios import build, load_bundled

_RUN_SNIPPET = """
import time, tempfile
from ontosim.runner import run_scenario
from ontosim.scenarios import load_bundled
spec = load_bundled("double_slit_bohm")
t0 = time.perf_counter()
with tempfile.TemporaryDirectory() as d:
    run_scenario(spec, d)
print(time.perf_counter() - t0)
"""


def bench_kernel(name, n_points, repeat):
    psi, _, masses = build(load_bundled(name))
    q = sample_initial_positions(psi, n_points, 0)
    rows = []
    for backend in ("numpy", "numba"):
        if backend == "numba" and kernels.guidance_numba is None:
            continue
        field = GuidanceField(psi, masses, backend=backend)
        field.velocities(q)  # compile / warm up
        t = min(timeit.repeat(lambda: field.velocities(q), number=1, repeat=repeat))
        rows.append((backend, t))
    v_np = GuidanceField(psi, masses, backend="numpy").velocities(q)[0]
    if kernels.guidance_numba is not None:
        v_nb = GuidanceField(psi, masses, backend="numba").velocities(q)[0]
        print(f"{name}: max |v_numba - v_numpy| = {np.abs(v_nb - v_np).max():.3g}")
    for backend, t in rows:
        print(f"{name:22s} {backend:6s} {n_points:7d} points  {t * 1e3:9.3f} ms  {n_points / t:12.0f} points/s")


def bench_run():
    for flag in ("0", "1"):
        env = dict(os.environ, ONTOSIM_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _RUN_SNIPPET], env=env, capture_output=True, text=True, check=True)
        label = "numpy" if flag == "1" else "numba"
        print(f"double_slit_bohm full run ({label}): {float(out.stdout):.2f} s")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=10000)
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--skip-run", action="store_true", help="kernel timings only")
    args = p.parse_args()
    for name in ("double_slit_bohm", "entangled_pair_bohm"):
        bench_kernel(name, args.points, args.repeat)
    if not args.skip_run:
        bench_run()


if __name__ == "__main__":
    main()
