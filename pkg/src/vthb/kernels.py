"""Hot numeric kernels.

Every kernel exists twice: an explicit-loop version compiled with numba and a
vectorised numpy version.  The public names at the bottom of the module point
at one or the other depending on :data:`vthb._accel.USE_NUMBA`.  Distance
sums run sequentially over coordinates in both versions so the two paths
agree bit-for-bit on distances and therefore on every argmin.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# squared Euclidean distances / nearest centroid
# --------------------------------------------------------------------------


def _nearest_centroids_loop(X, C):
    n, m = X.shape
    nc = C.shape[0]
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    for i in range(n):
        bi = -1
        bd = np.inf
        for c in range(nc):
            acc = 0.0
            for d in range(m):
                diff = X[i, d] - C[c, d]
                acc += diff * diff
            if acc < bd:
                bd = acc
                bi = c
        labels[i] = bi
        best[i] = bd
    return labels, best


def _nearest_centroids_np(X, C, chunk=4096):
    n, m = X.shape
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    for lo in range(0, n, chunk):
        xs = X[lo:lo + chunk]
        acc = np.zeros((xs.shape[0], C.shape[0]))
        for d in range(m):
            diff = xs[:, d, None] - C[None, :, d]
            acc += diff * diff
        lab = np.argmin(acc, axis=1)
        labels[lo:lo + chunk] = lab
        best[lo:lo + chunk] = acc[np.arange(xs.shape[0]), lab]
    return labels, best


def _sq_dists_loop(X, q):
    n, m = X.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for d in range(m):
            diff = X[i, d] - q[d]
            acc += diff * diff
        out[i] = acc
    return out


def _sq_dists_np(X, q):
    acc = np.zeros(X.shape[0])
    for d in range(X.shape[1]):
        diff = X[:, d] - q[d]
        acc += diff * diff
    return acc


def _centroid_sums_loop(X, labels, nlist):
    n, m = X.shape
    sums = np.zeros((nlist, m), dtype=np.float64)
    counts = np.zeros(nlist, dtype=np.int64)
    for i in range(n):
        c = labels[i]
        counts[c] += 1
        for d in range(m):
            sums[c, d] += X[i, d]
    return sums, counts


def _centroid_sums_np(X, labels, nlist):
    sums = np.zeros((nlist, X.shape[1]))
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=nlist).astype(np.int64)
    return sums, counts


# --------------------------------------------------------------------------
# bounded-depth scan over IVF posting lists
# --------------------------------------------------------------------------


def _scan_lists_loop(q, data, list_ptr, list_ids, probes, depth):
    total = 0
    for pi in range(probes.shape[0]):
        c = probes[pi]
        length = list_ptr[c + 1] - list_ptr[c]
        total += min(depth, length)
    ids = np.empty(total, dtype=np.int64)
    dists = np.empty(total, dtype=np.float64)
    m = data.shape[1]
    pos = 0
    for pi in range(probes.shape[0]):
        c = probes[pi]
        start = list_ptr[c]
        stop = min(list_ptr[c + 1], start + depth)
        for s in range(start, stop):
            vid = list_ids[s]
            acc = 0.0
            for d in range(m):
                diff = data[vid, d] - q[d]
                acc += diff * diff
            ids[pos] = vid
            dists[pos] = acc
            pos += 1
    return ids, dists


def _scan_lists_np(q, data, list_ptr, list_ids, probes, depth):
    parts = [list_ids[list_ptr[c]:min(list_ptr[c + 1], list_ptr[c] + depth)] for c in probes]
    ids = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    return ids.astype(np.int64, copy=False), _sq_dists_np(data[ids], q)


# --------------------------------------------------------------------------
# LAB optimistic objective over a price grid
# --------------------------------------------------------------------------


def _lab_objective_loop(prices, anchor, eta, n, theta, lam_inv, rho, bias, scale):
    g = prices.shape[0]
    kappa = theta.shape[0]
    out = np.empty(g, dtype=np.float64)
    phi = np.empty(kappa, dtype=np.float64)
    for i in range(g):
        delta = prices[i] - anchor
        pos = 0
        for deg in range(n):
            for ie in range(deg, -1, -1):
                phi[pos] = eta ** ie * delta ** (deg - ie)
                pos += 1
        mean = 0.0
        quad = 0.0
        for a in range(kappa):
            mean += theta[a] * phi[a]
            row = 0.0
            for b in range(kappa):
                row += lam_inv[a, b] * phi[b]
            quad += phi[a] * row
        if quad < 0.0:
            quad = 0.0
        est = mean + scale * (rho * np.sqrt(quad) + bias)
        if est > 1.0:
            est = 1.0
        out[i] = prices[i] * est
    return out


def _lab_objective_np(prices, anchor, eta, n, theta, lam_inv, rho, bias, scale):
    ie, ip = _exponents(n)
    delta = prices - anchor
    phi = (eta ** ie)[None, :] * delta[:, None] ** ip[None, :]
    mean = phi @ theta
    quad = np.maximum(np.einsum("ij,jk,ik->i", phi, lam_inv, phi), 0.0)
    est = np.minimum(1.0, mean + scale * (rho * np.sqrt(quad) + bias))
    return prices * est


def _exponents(n):
    ie = [i for deg in range(n) for i in range(deg, -1, -1)]
    ip = [deg - i for deg in range(n) for i in range(deg, -1, -1)]
    return np.array(ie, dtype=np.float64), np.array(ip, dtype=np.float64)


# --------------------------------------------------------------------------
# Sherman-Morrison rank-one inverse update
# --------------------------------------------------------------------------


def _sherman_morrison_loop(lam_inv, phi):
    k = phi.shape[0]
    u = np.zeros(k, dtype=np.float64)
    for a in range(k):
        acc = 0.0
        for b in range(k):
            acc += lam_inv[a, b] * phi[b]
        u[a] = acc
    denom = 1.0
    for a in range(k):
        denom += phi[a] * u[a]
    for a in range(k):
        for b in range(k):
            lam_inv[a, b] -= u[a] * u[b] / denom


def _sherman_morrison_np(lam_inv, phi):
    u = lam_inv @ phi
    lam_inv -= np.outer(u, u) / (1.0 + phi @ u)


nearest_centroids_nb = njit(_nearest_centroids_loop)
sq_dists_nb = njit(_sq_dists_loop)
centroid_sums_nb = njit(_centroid_sums_loop)
scan_lists_nb = njit(_scan_lists_loop)
lab_objective_nb = njit(_lab_objective_loop)
sherman_morrison_nb = njit(_sherman_morrison_loop)

NUMPY_KERNELS = {
    "nearest_centroids": _nearest_centroids_np,
    "sq_dists": _sq_dists_np,
    "centroid_sums": _centroid_sums_np,
    "scan_lists": _scan_lists_np,
    "lab_objective": _lab_objective_np,
    "sherman_morrison": _sherman_morrison_np,
}
NUMBA_KERNELS = {
    "nearest_centroids": nearest_centroids_nb,
    "sq_dists": sq_dists_nb,
    "centroid_sums": centroid_sums_nb,
    "scan_lists": scan_lists_nb,
    "lab_objective": lab_objective_nb,
    "sherman_morrison": sherman_morrison_nb,
}
_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

nearest_centroids = _ACTIVE["nearest_centroids"]
sq_dists = _ACTIVE["sq_dists"]
centroid_sums = _ACTIVE["centroid_sums"]
scan_lists = _ACTIVE["scan_lists"]
lab_objective = _ACTIVE["lab_objective"]
sherman_morrison = _ACTIVE["sherman_morrison"]
BACKEND = "numba" if USE_NUMBA else "numpy"
