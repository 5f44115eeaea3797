"""Domain types, query clustering and the append-only interaction history."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DEFAULT_C_MAX = 16.0


class SequencingError(ValueError):
    """Raised when a record is appended out of round order."""


@dataclass(frozen=True)
class Query:
    """A buyer request: vector ``v``, approximation factor ``c`` and size ``k``."""

    v: np.ndarray
    c: float
    k: int

    def __post_init__(self):
        if not self.c > 1.0:
            raise ValueError(f"approximation factor must exceed 1, got {self.c}")
        if self.k < 1:
            raise ValueError(f"retrieval size must be positive, got {self.k}")

    def validate(self, dim: int, dataset_size: int) -> None:
        if np.shape(self.v) != (dim,):
            raise ValueError(f"query vector has shape {np.shape(self.v)}, index dimension is {dim}")
        if self.k > dataset_size:
            raise ValueError(f"k={self.k} exceeds dataset size {dataset_size}")


def c_bucket_count(c_max: float = DEFAULT_C_MAX) -> int:
    return math.ceil(math.log2(c_max)) + 1


def c_bucket(c: float, c_max: float = DEFAULT_C_MAX) -> int:
    """Logarithmic bucket of the approximation factor; tighter ``c`` maps higher."""
    if not 1.0 < c <= c_max:
        raise ValueError(f"c={c} outside (1, {c_max}]")
    return c_bucket_count(c_max) - math.floor(math.log2(c))


def k_bucket(k: int) -> int:
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    return int(k).bit_length() - 1


class ClusterKey(NamedTuple):
    centroid_id: int
    c_bucket: int
    k_bucket: int

    def __str__(self):
        return f"{self.centroid_id}/{self.c_bucket}/{self.k_bucket}"

    @classmethod
    def parse(cls, text: str) -> "ClusterKey":
        a, b, c = text.split("/")
        return cls(int(a), int(b), int(c))


def cluster_of(centroid_id: int, query: Query, c_max: float = DEFAULT_C_MAX) -> ClusterKey:
    return ClusterKey(int(centroid_id), c_bucket(query.c, c_max), k_bucket(query.k))


@dataclass(frozen=True, slots=True)
class InteractionRecord:
    t: int
    cluster: ClusterKey
    e: int
    j: int
    p: float
    s: float
    cost: float
    r: float
    y: float

    @classmethod
    def from_outcome(cls, t, cluster, e, j, p, s, cost) -> "InteractionRecord":
        """Build a record, deriving reward and normalised utility from ``(p, s, cost)``."""
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"response signal {s} outside [0, 1]")
        if not p > 0.0:
            raise ValueError(f"price must be positive, got {p}")
        r = s * (p - cost)
        return cls(t, cluster, int(e), int(j), float(p), float(s), float(cost), float(r), float(r / p))


class History:
    """Append-only record store with per-key indices.

    Indices map ``cluster``, ``(cluster, e)`` and ``(cluster, e, j)`` to the
    positions of matching records, so filtered views cost nothing to find.
    """

    def __init__(self):
        self.records: list[InteractionRecord] = []
        self._by_cluster: dict = defaultdict(list)
        self._by_config: dict = defaultdict(list)
        self._by_interval: dict = defaultdict(list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, record: InteractionRecord) -> None:
        if record.t != len(self.records) + 1:
            raise SequencingError(
                f"record for round {record.t} cannot follow round {len(self.records)}"
            )
        pos = len(self.records)
        self.records.append(record)
        self._by_cluster[record.cluster].append(pos)
        self._by_config[(record.cluster, record.e)].append(pos)
        self._by_interval[(record.cluster, record.e, record.j)].append(pos)

    def for_cluster(self, cluster) -> list[InteractionRecord]:
        return [self.records[i] for i in self._by_cluster.get(cluster, ())]

    def for_config(self, cluster, e) -> list[InteractionRecord]:
        return [self.records[i] for i in self._by_config.get((cluster, e), ())]

    def for_interval(self, cluster, e, j) -> list[InteractionRecord]:
        return [self.records[i] for i in self._by_interval.get((cluster, e, j), ())]

    def rewards_for(self, cluster, e) -> list[float]:
        return [self.records[i].r for i in self._by_config.get((cluster, e), ())]

    def pairs_for(self, cluster, e, j) -> list[tuple[float, float]]:
        """``(p, y)`` pairs of one ``(cluster, e, j)`` cell, the LAB training set."""
        return [(self.records[i].p, self.records[i].y) for i in self._by_interval.get((cluster, e, j), ())]

    def clusters(self) -> list:
        return list(self._by_cluster)

    def cluster_counts(self) -> dict:
        return {k: len(v) for k, v in self._by_cluster.items()}

    def traffic_weights(self) -> dict:
        """Share of rounds per cluster, usable for traffic-weighted regret."""
        n = len(self.records)
        return {k: len(v) / n for k, v in self._by_cluster.items()} if n else {}
