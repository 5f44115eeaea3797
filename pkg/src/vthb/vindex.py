"""Minimal inverted-file (IVF) index.

The expansion factor ``e`` is realised as a per-list scan depth: a search
probes the ``nprobe`` posting lists nearest to the query and evaluates at
most ``e`` candidates from each, in stored order.  Posting lists are stored
in ascending distance to their centroid, so small ``e`` scans cluster cores
first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

DEFAULT_GRID = (8, 16, 32, 64, 128, 256)


@dataclass(frozen=True)
class ConfigurationGrid:
    """Ordered, strictly increasing set of expansion factors."""

    values: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if not vals:
            raise ValueError("configuration grid is empty")
        if any(v <= 0 for v in vals):
            raise ValueError("expansion factors must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"configuration grid must be strictly increasing: {vals}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def median_index(self) -> int:
        return (len(self.values) - 1) // 2

    def check_dataset(self, size: int) -> None:
        if self.values[-1] > size:
            raise ValueError(f"largest expansion factor {self.values[-1]} exceeds dataset size {size}")


@dataclass
class IvfIndex:
    centroids: np.ndarray
    data: np.ndarray
    list_ptr: np.ndarray
    list_ids: np.ndarray
    labels: np.ndarray
    iterations: int = 0

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.data.shape[0]

    def posting_list(self, c: int) -> np.ndarray:
        return self.list_ids[self.list_ptr[c]:self.list_ptr[c + 1]]

    def list_lengths(self) -> np.ndarray:
        return np.diff(self.list_ptr)

    def save(self, path) -> None:
        np.savez(path, centroids=self.centroids, data=self.data, list_ptr=self.list_ptr,
                 list_ids=self.list_ids, labels=self.labels, iterations=self.iterations)

    @classmethod
    def load(cls, path) -> "IvfIndex":
        with np.load(path) as z:
            return cls(z["centroids"], z["data"], z["list_ptr"], z["list_ids"], z["labels"],
                       int(z["iterations"]))


@dataclass
class RetrievalResult:
    ids: np.ndarray
    distances: np.ndarray
    scanned: int
    shortfall: bool = False


def _as_matrix(dataset) -> np.ndarray:
    X = np.ascontiguousarray(dataset, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"dataset must be a 2-d array, got shape {X.shape}")
    return X


def build(dataset, nlist: int, seed: int = 0, max_iter: int = 50, tol: float = 1e-6) -> IvfIndex:
    """Train ``nlist`` centroids with Lloyd's k-means and fill posting lists.

    Initial centroids are ``nlist`` distinct rows drawn with ``seed``.  The
    loop stops when the Frobenius norm of the centroid shift falls below
    ``tol`` times the centroid norm, or after ``max_iter`` iterations.  A
    final assignment against the returned centroids guarantees that every
    vector sits in the list of its nearest centroid.
    """
    X = _as_matrix(dataset)
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot build an index over an empty dataset")
    if not 1 <= nlist <= n:
        raise ValueError(f"nlist={nlist} must lie in [1, {n}]")

    rng = np.random.default_rng(seed)
    C = X[np.sort(rng.choice(n, size=nlist, replace=False))].copy()
    it = 0
    for it in range(1, max_iter + 1):
        labels, _ = kernels.nearest_centroids(X, C)
        sums, counts = kernels.centroid_sums(X, labels, nlist)
        C_new = C.copy()
        nonempty = counts > 0
        C_new[nonempty] = sums[nonempty] / counts[nonempty, None]
        shift = np.linalg.norm(C_new - C)
        scale = max(np.linalg.norm(C_new), np.finfo(float).tiny)
        C = C_new
        if shift <= tol * scale:
            break

    labels, sqd = kernels.nearest_centroids(X, C)
    # lists ordered by (centroid, distance to centroid, id)
    order = np.lexsort((np.arange(n), sqd, labels))
    counts = np.bincount(labels, minlength=nlist)
    list_ptr = np.zeros(nlist + 1, dtype=np.int64)
    np.cumsum(counts, out=list_ptr[1:])
    return IvfIndex(C, X, list_ptr, order.astype(np.int64), labels, it)


def _check_dim(index: IvfIndex, v) -> np.ndarray:
    q = np.ascontiguousarray(v, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"vector of shape {q.shape} does not match index dimension {index.dim}")
    return q


def assign(index: IvfIndex, v) -> int:
    """Nearest centroid id; ties go to the lowest id."""
    q = _check_dim(index, v)
    return int(np.argmin(kernels.sq_dists(index.centroids, q)))


def assign_many(index: IvfIndex, X) -> np.ndarray:
    labels, _ = kernels.nearest_centroids(_as_matrix(X), index.centroids)
    return labels


def _top_k(ids, sqd, k):
    """Best ``k`` by (distance, id); a partition pre-filter keeps the sort small."""
    if ids.shape[0] > 2 * k:
        cut = np.partition(sqd, k - 1)[k - 1]
        keep = sqd <= cut
        ids, sqd = ids[keep], sqd[keep]
    order = np.lexsort((ids, sqd))[:k]
    return ids[order], np.sqrt(sqd[order])


def search(index: IvfIndex, v, k: int, e: int, nprobe: int) -> RetrievalResult:
    """Bounded-depth IVF search returning the best ``k`` scanned candidates."""
    if k < 1:
        raise ValueError("k must be positive")
    if e < 1:
        raise ValueError("expansion factor must be positive")
    if not 1 <= nprobe <= index.nlist:
        raise ValueError(f"nprobe={nprobe} must lie in [1, {index.nlist}]")
    q = _check_dim(index, v)
    cd = kernels.sq_dists(index.centroids, q)
    probes = np.lexsort((np.arange(index.nlist), cd))[:nprobe].astype(np.int64)
    ids, sqd = kernels.scan_lists(q, index.data, index.list_ptr, index.list_ids, probes, int(e))
    top_ids, top_d = _top_k(ids, sqd, k)
    return RetrievalResult(top_ids, top_d, int(ids.shape[0]), shortfall=top_ids.shape[0] < k)


def exact_knn(dataset, v, k: int) -> RetrievalResult:
    """Exhaustive k nearest neighbours with (distance, id) ordering."""
    X = _as_matrix(dataset)
    q = np.ascontiguousarray(v, dtype=np.float64)
    sqd = kernels.sq_dists(X, q)
    ids, d = _top_k(np.arange(X.shape[0], dtype=np.int64), sqd, k)
    return RetrievalResult(ids, d, X.shape[0], shortfall=ids.shape[0] < k)


def check_ann_contract(result: RetrievalResult, v, c: float, dataset) -> bool:
    """True iff the i-th returned distance is within ``c`` times the exact i-th nearest distance.

    For ``k = 1`` this is the plain ``d(x', v) <= c * min_x d(x, v)`` test; ranking
    by position keeps an exact k-NN answer valid for every ``c >= 1``.
    """
    X = _as_matrix(dataset)
    q = np.ascontiguousarray(v, dtype=np.float64)
    got = np.sort(np.asarray(result.distances, dtype=np.float64))
    if got.size == 0:
        raise ValueError("empty retrieval result")
    exact = np.sqrt(np.sort(kernels.sq_dists(X, q))[: got.size])
    return bool(np.all(got <= c * exact))


def recall_at_k(result: RetrievalResult, exact: RetrievalResult) -> float:
    k = exact.ids.shape[0]
    return len(np.intersect1d(result.ids, exact.ids)) / k if k else 1.0


def measured_recall(index: IvfIndex, queries, grid: ConfigurationGrid, k: int, nprobe: int) -> np.ndarray:
    """Mean recall@k of bounded search against exact kNN for each grid value."""
    Q = _as_matrix(queries)
    out = np.zeros(len(grid))
    for q in Q:
        exact = exact_knn(index.data, q, k)
        for i, e in enumerate(grid):
            out[i] += recall_at_k(search(index, q, k, e, nprobe), exact)
    return out / max(len(Q), 1)
