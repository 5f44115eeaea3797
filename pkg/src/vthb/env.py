"""Synthetic vector-data market with a brute-force regret oracle.

For a cluster ``s`` the expected buyer response is
``f(e, p) = quality(e) * demand(p)`` and the expected execution cost is
``g(e) = c0 + c1 * ln(1 + e)``.  The expected seller reward of posting
price ``p`` under expansion factor ``e`` is ``u = f * (p - g)``.

Demand is bimodal: a weighted sum of two smooth bumps, each the product of a
rising and a falling logistic.  Per-cluster parameters are drawn
deterministically from the market seed and the cluster key.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import ClusterKey


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class ClusterMarket:
    """Ground-truth response and cost functions for one cluster."""

    e0: float = 50.0
    c0: float = 0.2
    c1: float = 0.4
    weight: float = 0.5
    mu1: float = 3.0
    half1: float = 1.5
    mu2: float = 8.0
    half2: float = 1.5
    tau: float = 0.5
    amplitude: float = 1.0
    choke: float | None = None
    sigma_s: float = 0.05
    sigma_c: float = 0.02
    quality_table: tuple | None = None

    def quality(self, e):
        e = np.asarray(e, dtype=np.float64)
        if self.quality_table is not None:
            xs = np.log([q[0] for q in self.quality_table])
            ys = np.array([q[1] for q in self.quality_table])
            return np.interp(np.log(e), xs, ys)
        return 1.0 - np.exp(-e / self.e0)

    def _bump(self, p, mu, half):
        return _logistic((p - (mu - half)) / self.tau) * _logistic(((mu + half) - p) / self.tau)

    def demand(self, p):
        p = np.asarray(p, dtype=np.float64)
        d = self.amplitude * (self.weight * self._bump(p, self.mu1, self.half1)
                              + (1.0 - self.weight) * self._bump(p, self.mu2, self.half2))
        if self.choke is not None:
            # cubic taper: zero at and beyond the choke price, C2 with Lipschitz second derivative
            d = d * np.clip(1.0 - p / self.choke, 0.0, None) ** 3
        return d

    def response(self, e, p):
        return self.quality(e) * self.demand(p)

    def cost(self, e):
        return self.c0 + self.c1 * np.log1p(np.asarray(e, dtype=np.float64))

    def chi(self, e, p):
        """Expected normalised utility ``E[y | e, p] = f(e, p) (1 - g(e) / p)``."""
        return self.response(e, p) * (1.0 - self.cost(e) / np.asarray(p, dtype=np.float64))

    def expected_reward(self, e, p):
        return self.response(e, p) * (np.asarray(p, dtype=np.float64) - self.cost(e))

    # scalar twins of the above for the per-round path
    def response_at(self, e: float, p: float) -> float:
        if self.quality_table is not None:
            q = float(self.quality(e))
        else:
            q = 1.0 - math.exp(-e / self.e0)
        d = self.amplitude * (self.weight * self._bump_at(p, self.mu1, self.half1)
                              + (1.0 - self.weight) * self._bump_at(p, self.mu2, self.half2))
        if self.choke is not None:
            d *= max(1.0 - p / self.choke, 0.0) ** 3
        return q * d

    def _bump_at(self, p, mu, half):
        a = (p - (mu - half)) / self.tau
        b = ((mu + half) - p) / self.tau
        return 0.25 * (1.0 + math.tanh(0.5 * a)) * (1.0 + math.tanh(0.5 * b))

    def cost_at(self, e: float) -> float:
        return self.c0 + self.c1 * math.log1p(e)

    def reward_at(self, e: float, p: float) -> float:
        return self.response_at(e, p) * (p - self.cost_at(e))


@dataclass(frozen=True)
class MarketSpec:
    """Run-level market description; every cluster's parameters derive from it.

    ``jitter`` is the relative spread of per-cluster draws around the base
    values.  A tighter approximation factor (higher c-bucket) scales ``e0``
    up by ``c_quality_step`` per bucket, so precise queries need deeper scans;
    a larger retrieval size scales the cost slope by ``1 + k_cost_step`` per
    k-bucket.
    """

    seed: int = 7
    base: ClusterMarket = field(default_factory=ClusterMarket)
    jitter: float = 0.15
    c_quality_step: float = 0.15
    k_cost_step: float = 0.05
    quality_mode: str = "exp"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["base"] = {k: v for k, v in d["base"].items() if k != "quality_table"}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MarketSpec":
        d = dict(d)
        base = ClusterMarket(**d.pop("base", {}))
        return cls(base=base, **d)


class MarketModel:
    """Lazily materialised per-cluster markets for a :class:`MarketSpec`."""

    def __init__(self, spec: MarketSpec | None = None, quality_tables: dict | None = None):
        self.spec = spec or MarketSpec()
        self.quality_tables = quality_tables or {}
        self._clusters: dict = {}

    def cluster(self, key) -> ClusterMarket:
        cm = self._clusters.get(key)
        if cm is None:
            cm = self._clusters[key] = self._draw(key)
        return cm

    def set_cluster(self, key, market: ClusterMarket) -> None:
        self._clusters[key] = market

    def _draw(self, key) -> ClusterMarket:
        spec = self.spec
        b = spec.base
        key = ClusterKey(*key)
        rng = np.random.default_rng([spec.seed, key.centroid_id, key.c_bucket, key.k_bucket])
        j = spec.jitter

        def wiggle(x):
            return x * (1.0 + j * rng.uniform(-1.0, 1.0))

        table = None
        if spec.quality_mode == "calibrated":
            table = self.quality_tables.get(key.centroid_id)
        return replace(
            b,
            e0=wiggle(b.e0) * (1.0 + spec.c_quality_step) ** (key.c_bucket - 1),
            c0=wiggle(b.c0),
            c1=wiggle(b.c1) * (1.0 + spec.k_cost_step * key.k_bucket),
            weight=min(max(wiggle(b.weight), 0.0), 1.0),
            mu1=wiggle(b.mu1),
            mu2=wiggle(b.mu2),
            quality_table=table,
        )


# --------------------------------------------------------------------------
# draws, expected reward, oracle
# --------------------------------------------------------------------------


def respond(model: MarketModel, cluster, e: float, p: float, rng: np.random.Generator):
    """One ``(s, cost)`` draw; both normals are always consumed to keep streams aligned."""
    cm = model.cluster(cluster)
    z_s, z_c = rng.standard_normal(2)
    f = cm.response_at(e, p)
    g = cm.cost_at(e)
    s = min(max(f + cm.sigma_s * z_s, 0.0), 1.0)
    cost = max(0.0, g + cm.sigma_c * g * z_c)
    return s, cost


def expected_reward(model: MarketModel, cluster, e: float, p: float) -> float:
    return model.cluster(cluster).reward_at(float(e), float(p))


@dataclass
class OracleSolution:
    e_star: int
    p_star: float
    u_star: float
    best_price: np.ndarray
    best_u: np.ndarray
    slack: float


@functools.lru_cache(maxsize=4096)
def _solve(cm: ClusterMarket, grid_values: tuple, p_lo: float, p_hi: float, size: int) -> OracleSolution:
    prices = np.linspace(p_lo, p_hi, size)
    e = np.asarray(grid_values, dtype=np.float64)
    u = cm.expected_reward(e[:, None], prices[None, :])
    best = np.argmax(u, axis=1)
    best_u = u[np.arange(len(e)), best]
    es = int(np.argmax(best_u))
    slope = np.abs(np.diff(u, axis=1)).max()
    return OracleSolution(es, float(prices[best[es]]), float(best_u[es]), prices[best], best_u, float(slope))


def solve_oracle(model: MarketModel, cluster, grid, p_lo: float, p_hi: float,
                 price_grid_size: int = 10_000) -> OracleSolution:
    """Brute-force maximiser of expected reward over configurations x a uniform price grid.

    ``slack`` is the largest reward change between adjacent grid prices, an
    upper bound on how far the grid optimum can sit below the true one.
    """
    if price_grid_size < 100:
        raise ValueError("oracle price grid needs at least 100 points")
    return _solve(model.cluster(cluster), tuple(int(v) for v in grid), float(p_lo), float(p_hi),
                  int(price_grid_size))


def regret_of(model: MarketModel, cluster, oracle: OracleSolution, e: float, p: float) -> float:
    """Raw instantaneous regret ``u* - u(e, p)``; may dip below zero by at most the grid slack."""
    return oracle.u_star - expected_reward(model, cluster, e, p)


@functools.lru_cache(maxsize=4096)
def _smoothness(cm: ClusterMarket, e_lo: float, e_hi: float, p_lo: float, p_hi: float, n: int,
                ne: int, npr: int) -> float:
    if e_hi <= e_lo:
        ne = 3
    es = np.linspace(e_lo, e_hi, ne)
    ps = np.linspace(p_lo, p_hi, npr)
    chi = cm.chi(es[:, None], ps[None, :])
    de, dp = es[1] - es[0], ps[1] - ps[0]
    bound = float(np.abs(chi).max())
    # derivatives of total order 1..n; order n bounds the Lipschitz constant of order n-1
    layer = [chi]
    for _order in range(1, n + 1):
        nxt = []
        for i, arr in enumerate(layer):
            ge = np.gradient(arr, de, axis=0) if de > 0 else np.zeros_like(arr)
            gp = np.gradient(arr, dp, axis=1)
            if i == 0:
                nxt.append(ge)
            nxt.append(gp)
        layer = nxt
        # one-sided differences at the edges contaminate `order` points inward
        ce = slice(_order, ne - _order) if ne > 2 * _order else slice(None)
        cp = slice(_order, npr - _order)
        bound = max(bound, max(float(np.abs(a[ce, cp]).max()) for a in layer))
    return bound


def smoothness_bound(model: MarketModel, cluster, grid, p_lo: float, p_hi: float, n: int,
                     resolution: tuple = (64, 0.005)) -> float:
    """Finite-difference estimate of the largest partial derivative of ``chi`` up to order ``n``.

    ``resolution`` is ``(configuration points, price step)``.
    """
    values = tuple(grid)
    npr = max(200, int(math.ceil((p_hi - p_lo) / resolution[1])) + 1)
    return _smoothness(model.cluster(cluster), float(values[0]), float(values[-1]), float(p_lo),
                       float(p_hi), int(n), int(resolution[0]), npr)


def check_smoothness(beta: float, estimate: float, tolerance: float = 0.1) -> bool:
    """True when ``beta`` dominates the estimated derivative bound within ``tolerance``."""
    return beta >= (1.0 - tolerance) * estimate
