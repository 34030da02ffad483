"""Compare the numba and numpy kernel backends.

Two parts: per-kernel timings taken in this process (both implementations are
importable side by side), then an end-to-end workload run once per backend in
a subprocess with the backend selected through PICRASP_BACKEND.

    python3 benchmarks/bench_kernels.py [--repeat 2000]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from picrasp import _accel, _kernels

WORKLOAD = """
import time
from picrasp import BACKEND
from picrasp.design import design_budget
from picrasp.inference import fit_mle
from picrasp.plans import RiskSpec
from picrasp.scheme import CostParams, PicScheme
from picrasp.simulate import simulate_dataset
from picrasp.model import ModelParams

spec = RiskSpec.from_discrimination(0.05, 0.1, 0.5, (1.291, 1.339), 1.5, 1.644, 1.0)
design_budget(spec, CostParams(0.1, 5, 0.025, 10, 95), M_max=5)  # compile / warm caches
t = time.perf_counter()
design_budget(spec, CostParams(0.1, 5, 0.025, 10, 95))
budget = time.perf_counter() - t
theta = ModelParams((0.303, 0.497), 1.436, 0.616)
s = PicScheme.equispaced(5, 0.115, 0.2)
t = time.perf_counter()
for k in range(200):
    fit_mle(simulate_dataset(theta, s, 73, seed=0, replicate=k), restarts=1, polish=False)
fits = time.perf_counter() - t
print(f"{BACKEND},{budget:.3f},{fits:.3f}")
"""


def kernel_inputs(M=8):
    rng = np.random.default_rng(0)
    L = np.cumsum(rng.uniform(0.05, 0.3, M))
    eta = np.array([1.291, 1.339])
    d = rng.integers(0, 10, (M, 2)).astype(float)
    nrisk = d.sum(axis=1) + 5.0
    return L, eta, 1.644, 0.5, d, nrisk


def per_kernel(repeat):
    L, eta, g, nu, d, nrisk = kernel_inputs()
    _, _, q, _, qij, dq, dqij, *_ = _kernels._interval_terms_np(L, eta, g, nu, True)
    cases = {
        "interval_terms": (lambda f: f(L, eta, g, nu, True), "_interval_terms"),
        "loglik_grad": (lambda f: f(L, d, nrisk, eta, g, nu, True), "_loglik_grad"),
        "information": (lambda f: f(nrisk, q, qij, dq, dqij), "_information"),
    }
    print(f"{'kernel':<16}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, (call, stem) in cases.items():
        fnb, fnp = getattr(_kernels, stem + "_nb"), getattr(_kernels, stem + "_np")
        call(fnb)  # compile
        tnb = min(timeit.repeat(lambda: call(fnb), number=repeat, repeat=3)) / repeat * 1e6
        tnp = min(timeit.repeat(lambda: call(fnp), number=repeat, repeat=3)) / repeat * 1e6
        print(f"{name:<16}{tnb:>12.2f}{tnp:>12.2f}{tnp / tnb:>10.1f}")


def end_to_end():
    print(f"\n{'backend':<10}{'budget design s':>18}{'200 fits s':>14}")
    for backend in ("numba", "numpy"):
        env = dict(os.environ, PICRASP_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", WORKLOAD], env=env, capture_output=True, text=True, check=True)
        name, budget, fits = out.stdout.strip().split(",")
        print(f"{name:<10}{budget:>18}{fits:>14}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        print("numba unavailable: both columns time the numpy path")
    per_kernel(args.repeat)
    if not args.skip_end_to_end:
        end_to_end()


if __name__ == "__main__":
    main()
