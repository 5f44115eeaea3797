"""Built-in oracle checks, runnable without pytest (``vthb selftest``)."""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .. import kernels, pricing, vindex
from ..core import ClusterKey, History, InteractionRecord
from .config import RunConfig, SyntheticData
from .data import load_fvecs, write_fvecs
from .loop import run
from .report import log_to_csv, summarize


def _fvecs_roundtrip():
    X = np.random.default_rng(0).standard_normal((1000, 12)).astype(np.float32)
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "x.fvecs"
        write_fvecs(path, X)
        Y = load_fvecs(path)
    return Y.tobytes() == X.tobytes(), "1000 vectors bit-identical"


def _ridge():
    rng = np.random.default_rng(1)
    cfg = pricing.TaylorConfig()
    m = pricing.LabModel(cfg.kappa)
    Phi = []
    ys = []
    for _ in range(30):
        phi = pricing.feature_vector(0.0, rng.uniform(0, 1), 0.0, cfg)
        y = rng.normal()
        m.add(phi, y)
        Phi.append(phi)
        ys.append(y)
    Phi = np.array(Phi)
    A = np.eye(cfg.kappa) + Phi.T @ Phi
    theta = np.linalg.solve(A, Phi.T @ np.array(ys))
    err_t = float(np.abs(m.theta - theta).max())
    err_i = float(np.abs(m.lam_inv - np.linalg.inv(A)).max())
    return max(err_t, err_i) <= 1e-8, f"theta err {err_t:.2e}, inverse err {err_i:.2e}"


def _ivf():
    X = np.random.default_rng(2).standard_normal((2000, 8))
    idx = vindex.build(X, 8, seed=0)
    Q = np.random.default_rng(3).standard_normal((200, 8))
    got = vindex.assign_many(idx, Q)
    want = np.argmin(((Q[:, None, :] - idx.centroids[None]) ** 2).sum(-1), axis=1)
    bad_assign = int((got != want).sum())
    bad_knn = 0
    for q in Q[:50]:
        res = vindex.search(idx, q, 10, len(idx), idx.nlist)
        bad_knn += int(not np.array_equal(res.ids, vindex.exact_knn(X, q, 10).ids))
    return bad_assign == 0 and bad_knn == 0, f"{bad_assign} assignment and {bad_knn} kNN mismatches"


def _history():
    rng = np.random.default_rng(4)
    h = History()
    for t in range(1, 501):
        key = ClusterKey(int(rng.integers(3)), 1, 3)
        h.append(InteractionRecord.from_outcome(t, key, int(rng.integers(2)), int(rng.integers(2)),
                                                float(rng.uniform(1, 2)), float(rng.uniform()), 0.1))
    bad = 0
    for key in h.clusters():
        for e in range(2):
            for j in range(2):
                want = [r for r in h if r.cluster == key and r.e == e and r.j == j]
                bad += int(h.for_interval(key, e, j) != want)
    return bad == 0, f"{bad} index mismatches"


def _determinism():
    cfg = RunConfig(synthetic=SyntheticData(n=3000, dim=16), max_vectors=3000, horizon=1000, seed=11)
    a, b = log_to_csv(run(cfg)), log_to_csv(run(cfg))
    return a == b, f"{len(a)} CSV bytes compared"


def _report():
    cfg = RunConfig(synthetic=SyntheticData(n=3000, dim=16), max_vectors=3000, horizon=500, seed=5)
    rl = run(cfg)
    s = summarize(rl)
    avg_ok = abs(s.average_reward - sum(float(x) for x in rl.r) / len(rl)) <= 1e-12
    parts = sum(c.cumulative_regret for c in s.per_cluster.values())
    split = np.abs(rl.config_regret + rl.price_regret - rl.regret).max()
    ok = avg_ok and abs(parts - s.cumulative_regret) <= 1e-8 and split <= 1e-12
    return ok, f"per-cluster sum diff {abs(parts - s.cumulative_regret):.1e}, split diff {split:.1e}"


def _backends():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((500, 7))
    C = rng.standard_normal((9, 7))
    a = kernels.NUMPY_KERNELS["nearest_centroids"](X, C)
    b = kernels.NUMBA_KERNELS["nearest_centroids"](X, C)
    ok = np.array_equal(a[0], b[0]) and np.allclose(a[1], b[1], rtol=1e-12, atol=1e-12)
    return ok, f"backend in use: {kernels.BACKEND}"


CHECKS = {
    "fvecs round-trip": _fvecs_roundtrip,
    "ridge and rank-one inverse": _ridge,
    "IVF assignment and full-budget search": _ivf,
    "history indices": _history,
    "replay determinism": _determinism,
    "report recomputation": _report,
    "kernel backends agree": _backends,
}


def run_all() -> list[tuple[str, bool, str]]:
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - reported as a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
