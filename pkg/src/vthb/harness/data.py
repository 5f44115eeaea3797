"""Dataset ingestion (fvecs), synthetic corpora and query generation."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..core import Query


class FvecsError(ValueError):
    pass


def _walk_records(buf: np.ndarray, d0: int, limit: int | None) -> int:
    """Count well-formed records sequentially, raising on the first bad one."""
    pos, count = 0, 0
    while pos < buf.size and (limit is None or count < limit):
        d = int(buf[pos])
        if d <= 0:
            raise FvecsError(f"record {count}: nonpositive dimension {d}")
        if d != d0:
            raise FvecsError(f"record {count}: dimension {d} differs from record 0 dimension {d0}")
        if pos + 1 + d > buf.size:
            raise FvecsError(f"record {count}: truncated ({buf.size - pos - 1} of {d} values present)")
        pos += d + 1
        count += 1
    return count


def load_fvecs(path, limit: int | None = None) -> np.ndarray:
    """Read an ``.fvecs`` file into an ``(n, d)`` float32 array.

    Each record is a little-endian int32 dimension followed by that many
    little-endian float32 values.  ``limit`` keeps only the first records.
    """
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return np.zeros((0, 0), dtype=np.float32)
    usable = raw.size - raw.size % 4
    buf = raw[:usable].view("<i4")
    d0 = int(buf[0])
    if d0 <= 0:
        raise FvecsError(f"record 0: nonpositive dimension {d0}")
    n = _walk_records(buf, d0, limit)
    if raw.size % 4 and (limit is None or n * (d0 + 1) * 4 >= usable):
        raise FvecsError(f"record {n}: truncated (trailing {raw.size % 4} bytes)")
    rows = buf[: n * (d0 + 1)].reshape(n, d0 + 1)
    return rows[:, 1:].view("<f4").astype(np.float32)


def write_fvecs(path, X) -> None:
    X = np.ascontiguousarray(X, dtype="<f4")
    n, d = X.shape
    out = np.empty((n, d + 1), dtype="<f4")
    out[:, 0] = np.array([d], dtype="<i4").view("<f4")[0]
    out[:, 1:] = X
    out.tofile(path)


def synthetic_corpus(n: int, dim: int, modes: int = 32, spread: float = 0.35, seed: int = 0) -> np.ndarray:
    """Gaussian mixture with ``modes`` unit-scale centres, float32 like real descriptors."""
    rng = np.random.default_rng(seed)
    centres = rng.standard_normal((modes, dim))
    which = rng.integers(0, modes, size=n)
    X = centres[which] + spread * rng.standard_normal((n, dim))
    return X.astype(np.float32)


def load_dataset(cfg) -> np.ndarray:
    if cfg.dataset == "synthetic":
        s = cfg.synthetic
        n = s.n if cfg.max_vectors is None else min(s.n, cfg.max_vectors)
        return synthetic_corpus(n, s.dim, s.modes, s.spread, s.seed)
    if not os.path.exists(cfg.dataset):
        raise FileNotFoundError(cfg.dataset)
    return load_fvecs(cfg.dataset, limit=cfg.max_vectors)


def split(X: np.ndarray, holdout: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Shuffle once and reserve the trailing ``holdout`` fraction (at least one row) as queries."""
    n = X.shape[0]
    n_q = max(1, int(round(n * holdout)))
    if n_q >= n:
        raise ValueError(f"dataset of {n} vectors too small for a {holdout:.0%} holdout")
    perm = np.random.default_rng(seed).permutation(n)
    return X[perm[: n - n_q]], X[perm[n - n_q:]]


@dataclass
class QueryStream:
    """Pre-drawn query parameters; ``vec_ids`` index the holdout set."""

    holdout: np.ndarray
    vec_ids: np.ndarray
    c: np.ndarray
    k: np.ndarray

    def __len__(self):
        return self.vec_ids.shape[0]

    def __getitem__(self, t: int) -> Query:
        return Query(self.holdout[self.vec_ids[t]], float(self.c[t]), int(self.k[t]))

    def __iter__(self):
        return (self[t] for t in range(len(self)))


def generate_queries(holdout: np.ndarray, T: int, c_range, k_range, rng: np.random.Generator) -> QueryStream:
    """Draw ``T`` queries: vectors with replacement from the holdout, ``c`` uniform on ``(lo, hi]``, ``k`` uniform on ``[lo, hi]``."""
    if holdout.shape[0] == 0:
        raise ValueError("empty holdout set")
    vec_ids = rng.integers(0, holdout.shape[0], size=T)
    c_lo, c_hi = c_range
    c = c_hi - rng.random(T) * (c_hi - c_lo)
    k = rng.integers(int(k_range[0]), int(k_range[1]) + 1, size=T)
    return QueryStream(holdout, vec_ids, c, k)
