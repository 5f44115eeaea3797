"""Stage I: per-cluster UCB over the configuration grid."""

from __future__ import annotations

import math

import numpy as np


class ConfigStats:
    """Per-cluster pull counts and reward sums for each configuration."""

    def __init__(self, n_configs: int):
        if n_configs < 1:
            raise ValueError("configuration grid is empty")
        self.n_configs = n_configs
        self._counts: dict = {}
        self._sums: dict = {}

    def _cell(self, cluster):
        if cluster not in self._counts:
            self._counts[cluster] = np.zeros(self.n_configs, dtype=np.int64)
            self._sums[cluster] = np.zeros(self.n_configs)
        return self._counts[cluster], self._sums[cluster]

    def counts(self, cluster) -> np.ndarray:
        return self._cell(cluster)[0].copy()

    def sums(self, cluster) -> np.ndarray:
        return self._cell(cluster)[1].copy()

    def means(self, cluster) -> np.ndarray:
        n, s = self._cell(cluster)
        out = np.zeros(self.n_configs)
        np.divide(s, n, out=out, where=n > 0)
        return out

    def rounds(self, cluster) -> int:
        return int(self._cell(cluster)[0].sum())

    def clusters(self):
        return list(self._counts)


def ucb_scores(counts, means, t: int) -> np.ndarray:
    """Optimistic estimates: untried arms get +inf, others mean + sqrt(2 ln t / n)."""
    counts = np.asarray(counts)
    out = np.full(counts.shape, np.inf)
    tried = counts > 0
    out[tried] = np.asarray(means)[tried] + np.sqrt(2.0 * math.log(t) / counts[tried])
    return out


def select_config(cluster, t: int, grid, stats: ConfigStats) -> int:
    """Index of the configuration with the largest optimistic estimate.

    ``t`` is the global round index.  ``np.argmax`` returns the first
    maximiser, which gives the lowest-index tie-break, including among
    untried arms.
    """
    if len(grid) == 0:
        raise ValueError("configuration grid is empty")
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    n, s = stats._cell(cluster)
    means = np.zeros(stats.n_configs)
    np.divide(s, n, out=means, where=n > 0)
    return int(np.argmax(ucb_scores(n, means, t)))


def update(cluster, e: int, r: float, stats: ConfigStats) -> None:
    if not 0 <= e < stats.n_configs:
        raise IndexError(f"unknown configuration id {e}")
    n, s = stats._cell(cluster)
    n[e] += 1
    s[e] += r
