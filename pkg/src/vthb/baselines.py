"""Comparison policies and the stage adapters shared with the hierarchical learner.

A policy is a pair of stages.  A configuration stage picks an index into the
configuration grid; a price stage picks an interval index and a price.
Baselines replace one stage and keep the hierarchical learner's other stage,
so each baseline isolates either configuration or pricing.

LinP and ConP are this package's interpretations of "linear" and "convex"
pricing: LinP is an optimistic ridge fit of ``y`` on ``(1, p - p_lo)``;
ConP fits ``r`` on ``(1, p, p^2)`` and posts the fitted vertex with
epsilon-greedy exploration.
"""

from __future__ import annotations

import numpy as np

from . import ccb
from .pricing import CpbLearner, LabModel, PriceDomain, TaylorConfig, feature_vector, lab_objective

BASELINE_KINDS = ("STCF", "RDCF", "STP", "RDP", "LinP", "ConP")


# --------------------------------------------------------------------------
# configuration stages
# --------------------------------------------------------------------------


class CcbStage:
    def __init__(self, grid):
        self.grid = grid
        self.stats = ccb.ConfigStats(len(grid))

    def select(self, cluster, t, rng) -> int:
        return ccb.select_config(cluster, t, self.grid, self.stats)

    def learn(self, cluster, e, r) -> None:
        ccb.update(cluster, e, r, self.stats)


class StaticConfig:
    """STCF: one fixed configuration for every round (default: grid median)."""

    def __init__(self, grid, index: int | None = None):
        self.index = grid.median_index() if index is None else int(index)
        if not 0 <= self.index < len(grid):
            raise ValueError(f"configuration index {self.index} outside grid")

    def select(self, cluster, t, rng) -> int:
        return self.index

    def learn(self, cluster, e, r) -> None:
        pass


class RandomConfig:
    """RDCF: uniform draw over the grid each round."""

    def __init__(self, grid):
        self.n = len(grid)

    def select(self, cluster, t, rng) -> int:
        return int(rng.integers(self.n))

    def learn(self, cluster, e, r) -> None:
        pass


def stcf_rdcf_select(kind: str, grid, rng, index: int | None = None) -> int:
    stage = StaticConfig(grid, index) if kind == "STCF" else RandomConfig(grid)
    return stage.select(None, 1, rng)


# --------------------------------------------------------------------------
# price stages
# --------------------------------------------------------------------------


class CpbStage:
    def __init__(self, domain: PriceDomain, cfg: TaylorConfig, horizon: int, grid_size: int = 64):
        self.learner = CpbLearner(domain, cfg, horizon, grid_size)

    def select(self, cluster, e, rng):
        return self.learner.select(cluster, e)

    def learn(self, cluster, e, j, p, y, r) -> None:
        self.learner.observe(cluster, e, j, p, y, r)


class StaticPrice:
    """STP: a constant price (default: domain midpoint)."""

    def __init__(self, domain: PriceDomain, p: float | None = None):
        self.domain = domain
        self.p = 0.5 * (domain.p_lo + domain.p_hi) if p is None else float(p)
        self.j = domain.locate(self.p)

    def select(self, cluster, e, rng):
        return self.j, self.p

    def learn(self, cluster, e, j, p, y, r) -> None:
        pass


class RandomPrice:
    """RDP: uniform price on ``[p_lo, p_hi]``."""

    def __init__(self, domain: PriceDomain):
        self.domain = domain

    def select(self, cluster, e, rng):
        d = self.domain
        p = float(rng.uniform(d.p_lo, d.p_hi)) if d.p_hi > d.p_lo else d.p_lo
        return d.locate(p), p

    def learn(self, cluster, e, j, p, y, r) -> None:
        pass


def stp_rdp_price(kind: str, domain: PriceDomain, rng, p: float | None = None) -> float:
    stage = StaticPrice(domain, p) if kind == "STP" else RandomPrice(domain)
    return stage.select(None, 0, rng)[1]


class LinearPricing:
    """LinP: optimistic ridge regression of ``y`` on ``(1, p - p_lo)`` per ``(cluster, e)``.

    Reuses the LAB machinery with Taylor order 2 over one global interval.
    The configuration-offset monomial is identically zero, so the effective
    features are the intercept and the price offset.  The model is global
    rather than a local expansion, so the approximation-bias term is zero and
    the optimism is plain ridge confidence.
    """

    def __init__(self, domain: PriceDomain, cfg: TaylorConfig, grid_size: int = 64,
                 confidence_scale: float | None = None):
        self.domain = domain
        scale = cfg.confidence_scale if confidence_scale is None else confidence_scale
        self.cfg = TaylorConfig(n=2, beta=cfg.beta, delta=cfg.delta, eta=cfg.eta, confidence_scale=scale)
        self.bias = 0.0
        self.prices = np.linspace(domain.p_lo, domain.p_hi, grid_size)
        self.models: dict = {}

    def model(self, cluster, e) -> LabModel:
        m = self.models.get((cluster, e))
        if m is None:
            m = self.models[(cluster, e)] = LabModel(self.cfg.kappa)
        return m

    def slope(self, cluster, e) -> float:
        """Fitted coefficient on ``p - p_lo``."""
        return float(self.model(cluster, e).theta[2])

    def price(self, cluster, e) -> float:
        obj = lab_objective(self.model(cluster, e), self.prices, self.domain.p_lo, self.cfg, self.bias)
        return float(self.prices[int(np.argmax(obj))])

    def select(self, cluster, e, rng):
        p = self.price(cluster, e)
        return self.domain.locate(p), p

    def update(self, cluster, e, p, y) -> None:
        self.model(cluster, e).add(feature_vector(0.0, p, self.domain.p_lo, self.cfg), y)

    def learn(self, cluster, e, j, p, y, r) -> None:
        self.update(cluster, e, p, y)


def quadratic_argmax(theta, p_lo: float, p_hi: float) -> float:
    """Maximiser on ``[p_lo, p_hi]`` of ``theta0 + theta1 p + theta2 p^2``.

    Concave fits return the vertex clipped into range; otherwise the endpoint
    with the higher fitted value, the lower one on ties.
    """
    a0, a1, a2 = (float(x) for x in theta)
    if a2 < 0.0:
        return float(min(max(-a1 / (2.0 * a2), p_lo), p_hi))
    lo = a0 + a1 * p_lo + a2 * p_lo * p_lo
    hi = a0 + a1 * p_hi + a2 * p_hi * p_hi
    return float(p_hi if hi > lo else p_lo)


class ConvexPricing:
    """ConP: ridge fit of reward on ``(1, p, p^2)`` per ``(cluster, e)`` with epsilon-greedy exploration.

    The ridge prior is weak so the fit is close to least squares; a unit
    prior visibly biases the vertex on unscaled quadratic features.
    """

    def __init__(self, domain: PriceDomain, epsilon: float = 0.05, ridge: float = 1e-4):
        if ridge <= 0.0:
            raise ValueError("ridge must be positive")
        self.domain = domain
        self.epsilon = epsilon
        self.ridge = ridge
        self.A: dict = {}
        self.b: dict = {}

    def _cell(self, cluster, e):
        key = (cluster, e)
        if key not in self.A:
            self.A[key] = self.ridge * np.eye(3)
            self.b[key] = np.zeros(3)
        return self.A[key], self.b[key]

    def theta(self, cluster, e) -> np.ndarray:
        A, b = self._cell(cluster, e)
        return np.linalg.solve(A, b)

    def greedy_price(self, cluster, e) -> float:
        return quadratic_argmax(self.theta(cluster, e), self.domain.p_lo, self.domain.p_hi)

    def select(self, cluster, e, rng):
        d = self.domain
        explore = rng.random() < self.epsilon
        p = float(rng.uniform(d.p_lo, d.p_hi)) if explore else self.greedy_price(cluster, e)
        return d.locate(p), p

    def update(self, cluster, e, p, r) -> None:
        A, b = self._cell(cluster, e)
        x = np.array([1.0, p, p * p])
        A += np.outer(x, x)
        b += x * r

    def learn(self, cluster, e, j, p, y, r) -> None:
        self.update(cluster, e, p, r)


def make_stages(config_stage: str, price_stage: str, grid, domain, taylor, horizon, *, lab_grid=64,
                stcf_index=None, stp_price=None, conp_epsilon=0.05, linp_confidence_scale=None):
    configs = {
        "ccb": lambda: CcbStage(grid),
        "stcf": lambda: StaticConfig(grid, stcf_index),
        "rdcf": lambda: RandomConfig(grid),
    }
    prices = {
        "cpb": lambda: CpbStage(domain, taylor, horizon, lab_grid),
        "stp": lambda: StaticPrice(domain, stp_price),
        "rdp": lambda: RandomPrice(domain),
        "linp": lambda: LinearPricing(domain, taylor, lab_grid, linp_confidence_scale),
        "conp": lambda: ConvexPricing(domain, conp_epsilon),
    }
    return configs[config_stage](), prices[price_stage]()
