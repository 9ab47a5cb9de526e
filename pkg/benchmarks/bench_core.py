"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_core.py [--atoms 2000] [--repeat 50]

Times each hot kernel on a filled expansion, then one full training run per
backend, and checks both backends agree.
"""

import argparse
import importlib
import os
import subprocess
import sys
import timeit

import numpy as np

from msoksq import _pykernels
from msoksq.expansion import Expansion


def filled_expansion(K: int, M: int = 10, Q: int = 8, X: int = 20, seed: int = 0) -> Expansion:
    rng = np.random.default_rng(seed)
    exp = Expansion(M, Q, X)
    for t in range(1, K + 1):
        rows = rng.dirichlet(np.ones(Q), size=M)
        exp.decay(1.0 - 0.01 / np.sqrt(t))
        exp.append(t, 1, rng.integers(0, X, size=M), rows, rng.random(M) * 2, rng.normal())
    return exp


def bench_kernels(K: int, repeat: int) -> None:
    try:
        ck = importlib.import_module("msoksq._ckernels")
    except ImportError:
        print("compiled extension not built; only the fallback is available")
        return
    exp = filled_expansion(K)
    x = np.zeros(exp.M, dtype=np.int64)
    q = np.ones(exp.M, dtype=np.int64)
    cases = {
        "matched_mass": lambda b: exp.matched_mass(x, backend=b),
        "matched_mass_scan": lambda b: exp.matched_mass_scan(x, backend=b),
        "quantized_mass": lambda b: exp.quantized_mass(q, backend=b),
        "grouped_norm": lambda b: exp.norm_squared(backend=b),
    }
    print(f"{'kernel':<20}{'cython us':>12}{'numpy us':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases.items():
        tc = min(timeit.repeat(lambda: fn(ck), number=repeat, repeat=3)) / repeat
        tp = min(timeit.repeat(lambda: fn(_pykernels), number=repeat, repeat=3)) / repeat
        diff = float(np.max(np.abs(np.asarray(fn(ck)) - np.asarray(fn(_pykernels)))))
        print(f"{name:<20}{tc * 1e6:>12.1f}{tp * 1e6:>12.1f}{tp / tc:>10.1f}{diff:>12.2e}")


RUN = """
import time
from msoksq import BACKEND, TrainerConfig, StreamConfig, build_alphabets, make_stream, run
cfg = TrainerConfig(M=10, N={N}, bits=3, tau=1.0, variant="full", M_prime=5)
sc = StreamConfig(M=10, N={N}, seed=0)
al = build_alphabets(sc)
t = time.perf_counter()
r = run(cfg, make_stream(sc, al), al)
print(BACKEND, time.perf_counter() - t, repr(float(r.acr[-1])))
"""


def bench_run(N: int) -> None:
    # the backend is chosen at import, so each run gets its own interpreter
    out = {}
    for pure in ("0", "1"):
        env = dict(os.environ, MSOKSQ_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", RUN.format(N=N)], env=env, capture_output=True, text=True, check=True)
        name, secs, acr = res.stdout.split()
        out[name] = (float(secs), acr)
    for name, (secs, acr) in out.items():
        print(f"full run N={N:<6} {name:<8} {secs:8.3f} s   ACR(N)={acr}")
    if len({acr for _, acr in out.values()}) > 1:
        print("WARNING: backends disagree")


def main(argv=None) -> None:
    p = argparse.ArgumentParser()
    p.add_argument("--atoms", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=50)
    p.add_argument("--steps", type=int, default=600)
    args = p.parse_args(argv)
    bench_kernels(args.atoms, args.repeat)
    bench_run(args.steps)


if __name__ == "__main__":
    main()
