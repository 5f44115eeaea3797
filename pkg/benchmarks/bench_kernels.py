"""Time every hot kernel under both backends.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--n 20000] [--dim 64] [--loop 2000]

Both kernel tables are importable in one process, so the comparison does not
depend on ``VTHB_NUMBA``.  Numba timings exclude the first (compiling) call.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vthb import kernels, pricing


def cases(n: int, dim: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dim))
    C = rng.standard_normal((16, dim))
    q = rng.standard_normal(dim)
    labels = rng.integers(0, 16, size=n)
    order = np.argsort(labels, kind="stable").astype(np.int64)
    ptr = np.zeros(17, dtype=np.int64)
    np.cumsum(np.bincount(labels, minlength=16), out=ptr[1:])
    probes = np.arange(4, dtype=np.int64)
    cfg = pricing.TaylorConfig()
    prices = np.linspace(1.0, 4.0, 64)
    theta = rng.standard_normal(cfg.kappa) * 0.1
    lam_inv = np.linalg.inv(np.eye(cfg.kappa) + np.diag(rng.uniform(0, 5, cfg.kappa)))
    phi = rng.standard_normal(cfg.kappa)
    return {
        "nearest_centroids": (X, C),
        "sq_dists": (X, q),
        "centroid_sums": (X, labels.astype(np.int64), 16),
        "scan_lists": (q, X, ptr, order, probes, 256),
        "lab_objective": (prices, 1.0, 0.0, cfg.n, theta, lam_inv, 14.0, 0.5, 1e-4),
        "sherman_morrison": (lam_inv.copy(), phi),
    }


def bench(fn, args, repeat: int) -> float:
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


LOOP_SNIPPET = """
import time
from vthb.harness.config import RunConfig, SyntheticData
from vthb.harness.loop import prepare, run
cfg = RunConfig(synthetic=SyntheticData(n=10000, dim=32), max_vectors=10000, horizon={T})
prepare(cfg)
run(cfg.with_(horizon=50))
t0 = time.perf_counter()
run(cfg)
print(time.perf_counter() - t0)
"""


def bench_loop(T: int) -> dict:
    """Seconds for a ``T``-round run under each backend, each in a fresh interpreter."""
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, VTHB_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", LOOP_SNIPPET.format(T=T)], env=env,
                             capture_output=True, text=True, check=True)
        out["numba" if flag == "1" else "numpy"] = float(res.stdout.strip().splitlines()[-1])
    return out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--loop", type=int, default=0, help="also time a full run of this many rounds")
    args = ap.parse_args(argv)

    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<20}{'numpy (us)':>14}{'numba (us)':>14}{'speedup':>10}")
    for name, a in cases(args.n, args.dim).items():
        t_np = bench(kernels.NUMPY_KERNELS[name], a, args.repeat)
        t_nb = bench(kernels.NUMBA_KERNELS[name], a, args.repeat)
        print(f"{name:<20}{t_np * 1e6:>14.1f}{t_nb * 1e6:>14.1f}{t_np / t_nb:>10.2f}")
    if args.loop:
        t = bench_loop(args.loop)
        print(f"{'full run, T=' + str(args.loop):<20}{t['numpy'] * 1e3:>12.0f}ms{t['numba'] * 1e3:>12.0f}ms"
              f"{t['numpy'] / t['numba']:>10.2f}")


if __name__ == "__main__":
    main()
