"""Time the numba and pure-numpy backends on the two hot kernels.

Each backend runs in its own interpreter so the environment flag is read at
import, exactly as in normal use::

    python3 benchmarks/bench_backends.py [--repeat 5]

Reported: best wall time per kernel, plus an end-to-end simulation of the
modes ``|kappa| <= 16`` and a kernel export at ``kmax = 64``.
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, time
import numpy as np
import diffusls
from diffusls import _kernels, kernels, simulator
from diffusls.implementation import build_implementation
from diffusls.plant import PlantParams
from diffusls.synthesis import synthesize

repeat = {repeat}
rng = np.random.default_rng(0)

def best(fn):
    fn()  # warm-up, includes JIT compilation
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)

A = rng.normal(size=(3, 3)) - 4 * np.eye(3)
B = rng.normal(size=(3, 2))
x0 = rng.normal(size=3)
u = rng.normal(size=(20000, 3, 2))
coeffs = rng.normal(size=(200, 65))
theta = np.linspace(-np.pi, np.pi, 1024, endpoint=False)

plant = PlantParams(1.0, 1.0)
impls = [build_implementation(r) for r in synthesize(plant, 16)]
fams = kernels.block_families(plant)
t = np.linspace(0, 5, 200)

res = {{
    "backend": diffusls.BACKEND,
    "rk4_20000_steps": best(lambda: _kernels.rk4_lti(A, B, x0, u, 1e-3)),
    "cosine_200x65x1024": best(lambda: _kernels.cosine_synthesis(coeffs, theta)),
    "simulate_kmax16": best(lambda: [simulator.simulate_implementation(i, 1.0, t_final=20.0) for i in impls]),
    "dynamic_kernel_kmax64": best(lambda: kernels.dynamic_kernel(fams["loop_block"], t, 64, 1024)),
}}
print(json.dumps(res))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ, DIFFUSLS_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", CHILD.format(repeat=repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print raw JSON instead of a table")
    args = ap.parse_args()
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    if args.json:
        print(json.dumps({"numba": fast, "numpy": slow}, indent=2))
        return
    if fast["backend"] != "numba":
        print("numba is not installed; both runs used the numpy backend")
    print(f"{'kernel':28s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>9s}")
    for key in fast:
        if key == "backend":
            continue
        a, b = fast[key] * 1e3, slow[key] * 1e3
        print(f"{key:28s} {a:12.3f} {b:12.3f} {b / a:9.2f}x")


if __name__ == "__main__":
    main()
