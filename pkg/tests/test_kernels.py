"""Both kernel backends compute the same thing."""

import numpy as np
import pytest

from vthb import kernels, pricing

NP = kernels.NUMPY_KERNELS
NB = kernels.NUMBA_KERNELS


@pytest.fixture
def data(rng):
    X = rng.standard_normal((700, 9))
    C = rng.standard_normal((11, 9))
    return X, C


def test_nearest_centroids_agree(data):
    X, C = data
    la, da = NP["nearest_centroids"](X, C)
    lb, db = NB["nearest_centroids"](X, C)
    np.testing.assert_array_equal(la, lb)
    np.testing.assert_array_equal(da, db)


def test_nearest_centroids_chunking(data):
    X, C = data
    np.testing.assert_array_equal(NP["nearest_centroids"](X, C, chunk=64)[0], NP["nearest_centroids"](X, C)[0])


def test_sq_dists_agree(data, rng):
    X, _ = data
    q = rng.standard_normal(9)
    np.testing.assert_array_equal(NP["sq_dists"](X, q), NB["sq_dists"](X, q))
    np.testing.assert_allclose(NP["sq_dists"](X, q), ((X - q) ** 2).sum(1), rtol=1e-12)


def test_centroid_sums_agree(data, rng):
    X, _ = data
    labels = rng.integers(0, 5, size=X.shape[0]).astype(np.int64)
    sa, ca = NP["centroid_sums"](X, labels, 6)
    sb, cb = NB["centroid_sums"](X, labels, 6)
    np.testing.assert_array_equal(ca, cb)
    np.testing.assert_allclose(sa, sb, rtol=1e-12, atol=1e-12)
    assert ca[5] == 0


def test_scan_lists_agree(data, rng):
    X, _ = data
    labels = rng.integers(0, 6, size=X.shape[0])
    order = np.argsort(labels, kind="stable").astype(np.int64)
    ptr = np.zeros(7, dtype=np.int64)
    np.cumsum(np.bincount(labels, minlength=6), out=ptr[1:])
    q = rng.standard_normal(9)
    probes = np.array([4, 1, 2], dtype=np.int64)
    for depth in (1, 7, 50, 10_000):
        ia, da = NP["scan_lists"](q, X, ptr, order, probes, depth)
        ib, db = NB["scan_lists"](q, X, ptr, order, probes, depth)
        np.testing.assert_array_equal(ia, ib)
        np.testing.assert_array_equal(da, db)
        want = np.concatenate([order[ptr[c]:ptr[c + 1]][:depth] for c in probes])
        np.testing.assert_array_equal(ia, want)


def test_lab_objective_agree(rng):
    cfg = pricing.TaylorConfig()
    prices = np.linspace(2.0, 3.5, 64)
    theta = rng.standard_normal(cfg.kappa) * 0.2
    A = rng.standard_normal((cfg.kappa, cfg.kappa))
    lam_inv = np.linalg.inv(np.eye(cfg.kappa) + A @ A.T)
    a = NP["lab_objective"](prices, 2.0, 0.3, cfg.n, theta, lam_inv, 3.0, 0.2, 0.01)
    b = NB["lab_objective"](prices, 2.0, 0.3, cfg.n, theta, lam_inv, 3.0, 0.2, 0.01)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_lab_objective_matches_definition(rng):
    cfg = pricing.TaylorConfig()
    prices = np.linspace(2.0, 3.5, 16)
    theta = rng.standard_normal(cfg.kappa) * 0.2
    lam_inv = np.eye(cfg.kappa) * 0.5
    rho, bias, scale = 2.0, 0.1, 0.3
    got = NP["lab_objective"](prices, 2.0, 0.0, cfg.n, theta, lam_inv, rho, bias, scale)
    for p, g in zip(prices, got):
        phi = pricing.feature_vector(0.0, p, 2.0, cfg)
        want = p * min(1.0, phi @ theta + scale * (rho * np.sqrt(phi @ lam_inv @ phi) + bias))
        assert g == pytest.approx(want, rel=1e-12)


def test_sherman_morrison_agree(rng):
    k = 6
    A = np.eye(k)
    inv_a = np.eye(k)
    inv_b = np.eye(k)
    for _ in range(30):
        phi = rng.standard_normal(k)
        A += np.outer(phi, phi)
        NP["sherman_morrison"](inv_a, phi)
        NB["sherman_morrison"](inv_b, phi)
    np.testing.assert_allclose(inv_a, inv_b, atol=1e-12)
    np.testing.assert_allclose(inv_a, np.linalg.inv(A), atol=1e-8)


def test_backend_flag_exposed():
    assert kernels.BACKEND in ("numba", "numpy")
