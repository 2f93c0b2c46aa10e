#!/usr/bin/env python3
"""Compare the jitted kernels against the pure-python/numpy fallback.

Each workload runs in a fresh subprocess with TRAPWALK_NUMBA forced to 1
or 0, since the backend is chosen at import time.  Timings exclude
import and jit warmup: every workload runs once untimed, then timed.

Usage: python3 bench.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOADS = {
    # every workload drives a hot kernel; module-level numpy code is shared
    # between backends and would benchmark nothing
    "mcmc-50k-moves-n512": """
from trapwalk import ModelParams, McmcSampler
def work():
    smp = McmcSampler(ModelParams(2, 0.5, (0.2, 0.0), 512), seed=1, thin=1)
    smp.run(50_000)
    return smp.log_weight()
""",
    "survival-plainmc-4k-n512": """
from trapwalk import ModelParams, annealed_survival_estimate
def work():
    est, err = annealed_survival_estimate(
        ModelParams(2, 0.5, (0.0, 0.0), 512), method="plainMC",
        samples=4096, seed=2)
    return est
""",
    "pinned-enum-n9": """
from trapwalk import ModelParams, exact_endpoint_distribution
def work():
    dist = exact_endpoint_distribution(ModelParams(2, 0.5, (0.0, 0.0), 9),
                                       variant="pinned", x=(3, 0))
    return dist.partition
""",
    "crossing-tilted-4k": """
from trapwalk import ModelParams, crossing_probability
def work():
    est = crossing_probability(ModelParams(2, 0.5, (0.0, 0.0), 16), (3, 0),
                               method="tiltedIS", samples=4096, seed=3)
    return est.value
""",
    "heat-kernel-r8-n2000": """
from trapwalk import Ball, killed_heat_kernel
def work():
    return killed_heat_kernel(Ball((0, 0), 8.0), (0, 0), (0, 0), 2000)
""",
}

DRIVER = """
import json, sys, time
{setup}
work()  # warmup (jit compilation on the numba backend)
reps = {reps}
t0 = time.perf_counter()
for _ in range(reps):
    res = work()
dt = (time.perf_counter() - t0) / reps
import trapwalk
print(json.dumps({{"backend": trapwalk.backend_name(), "seconds": dt, "result": res}}))
"""


def run_one(name: str, setup: str, numba: bool, reps: int) -> dict:
    env = dict(os.environ, TRAPWALK_NUMBA="1" if numba else "0")
    code = DRIVER.format(setup=setup, reps=reps)
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env,
        cwd=os.path.dirname(os.path.abspath(__file__)) or ".",
    )
    if out.returncode != 0:
        raise RuntimeError(f"{name} failed under numba={numba}:\n{out.stderr}")
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=1, help="timed repetitions per workload")
    args = ap.parse_args()

    rows = []
    for name, setup in WORKLOADS.items():
        jit = run_one(name, setup, True, args.repeat)
        py = run_one(name, setup, False, args.repeat)
        agree = jit["result"] == py["result"]
        rows.append((name, jit["seconds"], py["seconds"],
                     py["seconds"] / jit["seconds"], agree))
        print(f"ran {name}: jit {jit['seconds']:.3f}s  fallback {py['seconds']:.3f}s",
              file=sys.stderr)

    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'numba':>9}  {'fallback':>9}  {'speedup':>8}  results")
    for name, tj, tp, sp, agree in rows:
        tag = "identical" if agree else "DIFFER"
        print(f"{name:<{width}}  {tj:>8.3f}s  {tp:>8.3f}s  {sp:>7.1f}x  {tag}")
    if any(not r[4] for r in rows):
        print("backend results differ; the backends are supposed to be bit-identical",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
