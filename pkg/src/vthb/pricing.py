"""Stage II: interval UCB (CPB) with local Taylor ridge pricing (LAB).

The price range is split into ``N`` equal intervals.  An interval is chosen by
UCB on its mean reward, then a price inside it is chosen by maximising an
optimistic, clipped estimate of ``p * chi(p)`` where ``chi`` (the expected
normalised utility ``y = r / p``) is modelled by a ridge regression on
polynomial features of the offset from the interval's left endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

WIDTH_RULES = ("lemma", "listing")


@dataclass(frozen=True)
class TaylorConfig:
    """Taylor order and confidence constants shared by CPB and LAB.

    ``width_rule`` selects how the interval confidence width decays with the
    interval's sample count: ``"lemma"`` uses ``1/sqrt(count)``,
    ``"listing"`` uses ``1/count``.  ``width_scale`` multiplies the interval
    width and ``confidence_scale`` multiplies LAB's optimism term
    ``rho * sqrt(phi' Lambda^-1 phi) + bias``; both default to 1, which is the
    theoretical constant.
    """

    n: int = 3
    beta: float = 1.0
    delta: float = 0.01
    eta: float = 0.0
    width_rule: str = "lemma"
    width_scale: float = 1.0
    confidence_scale: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"Taylor order must be >= 2, got {self.n}")
        if self.beta < 0:
            raise ValueError("smoothness constant must be nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("failure probability must lie in (0, 1)")
        if self.width_rule not in WIDTH_RULES:
            raise ValueError(f"width_rule must be one of {WIDTH_RULES}")
        if self.width_scale < 0 or self.confidence_scale < 0:
            raise ValueError("scales must be nonnegative")

    @property
    def kappa(self) -> int:
        return self.n * (self.n + 1) // 2


def intervals_for_horizon(T: int, n: int) -> int:
    """Smallest integer ``N`` with ``N ** (2n + 1) >= T``, i.e. ceil(T^(1/(2n+1)))."""
    if T <= 1:
        return 1
    q = 2 * n + 1
    N = max(1, int(round(T ** (1.0 / q))))
    while N ** q < T:
        N += 1
    while N > 1 and (N - 1) ** q >= T:
        N -= 1
    return N


@dataclass(frozen=True)
class PriceDomain:
    p_lo: float
    p_hi: float
    N: int = 1
    endpoints: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.p_lo > 0:
            raise ValueError(f"lower price must be positive, got {self.p_lo}")
        if not self.p_hi >= self.p_lo:
            raise ValueError(f"upper price {self.p_hi} below lower price {self.p_lo}")
        if self.N < 1:
            raise ValueError("need at least one interval")
        j = np.arange(self.N + 1)
        a = self.p_lo + j * (self.p_hi - self.p_lo) / self.N
        a[-1] = self.p_hi
        object.__setattr__(self, "endpoints", a)

    @classmethod
    def auto(cls, p_lo: float, p_hi: float, T: int, n: int) -> "PriceDomain":
        return cls(p_lo, p_hi, intervals_for_horizon(T, n))

    def interval(self, j: int) -> tuple[float, float]:
        if not 0 <= j < self.N:
            raise IndexError(f"interval {j} outside [0, {self.N})")
        return float(self.endpoints[j]), float(self.endpoints[j + 1])

    def locate(self, p: float) -> int:
        """Interval containing ``p``; shared endpoints belong to the left interval's successor."""
        if not self.p_lo <= p <= self.p_hi:
            raise ValueError(f"price {p} outside [{self.p_lo}, {self.p_hi}]")
        j = int(np.searchsorted(self.endpoints, p, side="right")) - 1
        return min(max(j, 0), self.N - 1)

    def contains(self, j: int, p: float) -> bool:
        lo, hi = self.interval(j)
        return lo <= p <= hi


def monomial_exponents(n: int) -> list[tuple[int, int]]:
    """``(i_e, i_p)`` pairs with ``i_e + i_p < n``, by total degree, then descending ``i_e``.

    For ``n = 2`` this is ``1, eta, delta``.
    """
    return [(ie, deg - ie) for deg in range(n) for ie in range(deg, -1, -1)]


def feature_vector(eta: float, p: float, anchor: float, cfg: TaylorConfig) -> np.ndarray:
    delta = p - anchor
    return np.array([eta ** ie * delta ** ip for ie, ip in monomial_exponents(cfg.n)])


def taylor_bias(cfg: TaylorConfig, domain: PriceDomain) -> float:
    """Upper bound on the local Taylor approximation error."""
    n = cfg.n
    return cfg.beta * n / math.factorial(n - 1) * (cfg.eta + (domain.p_lo + domain.p_hi) / domain.N) ** n


# --------------------------------------------------------------------------
# CPB: interval selection
# --------------------------------------------------------------------------


class IntervalStats:
    """Counts and reward sums per ``(cluster, e)`` over the ``N`` intervals."""

    def __init__(self, N: int):
        self.N = N
        self._counts: dict = {}
        self._sums: dict = {}

    def _cell(self, cluster, e):
        key = (cluster, e)
        if key not in self._counts:
            self._counts[key] = np.zeros(self.N, dtype=np.int64)
            self._sums[key] = np.zeros(self.N)
        return self._counts[key], self._sums[key]

    def counts(self, cluster, e) -> np.ndarray:
        return self._cell(cluster, e)[0].copy()

    def means(self, cluster, e) -> np.ndarray:
        n, s = self._cell(cluster, e)
        out = np.zeros(self.N)
        np.divide(s, n, out=out, where=n > 0)
        return out

    def add(self, cluster, e, j, r) -> None:
        n, s = self._cell(cluster, e)
        n[j] += 1
        s[j] += r


def width_prefactor(domain: PriceDomain, cfg: TaylorConfig, T: int) -> float:
    k = cfg.kappa
    return 4.0 * domain.p_hi * math.sqrt(2.0) * k * math.log(k * T + 1.0)


def interval_widths(counts, domain: PriceDomain, cfg: TaylorConfig, T: int) -> np.ndarray:
    """Confidence width of each tried interval (``inf`` where the count is zero)."""
    counts = np.asarray(counts, dtype=np.float64)
    out = np.full(counts.shape, np.inf)
    tried = counts > 0
    denom = np.sqrt(counts[tried]) if cfg.width_rule == "lemma" else counts[tried]
    bias = taylor_bias(cfg, domain)
    out[tried] = cfg.width_scale * width_prefactor(domain, cfg, T) * (
        bias + (cfg.beta + math.sqrt(2.0)) / denom
    )
    return out


def select_interval(cluster, e, domain: PriceDomain, stats: IntervalStats, cfg: TaylorConfig, T: int) -> int:
    n, s = stats._cell(cluster, e)
    means = np.zeros(stats.N)
    np.divide(s, n, out=means, where=n > 0)
    return int(np.argmax(means + interval_widths(n, domain, cfg, T)))


# --------------------------------------------------------------------------
# LAB: local ridge model and optimistic price
# --------------------------------------------------------------------------


class LabModel:
    """Ridge statistics for one ``(cluster, e, j)`` cell.

    ``lam = I + sum(phi phi')``, ``b = sum(phi y)``; ``lam_inv`` is maintained
    by Sherman-Morrison updates and ``theta = lam_inv @ b``.
    """

    __slots__ = ("kappa", "lam", "lam_inv", "b", "theta", "count")

    def __init__(self, kappa: int):
        self.kappa = kappa
        self.lam = np.eye(kappa)
        self.lam_inv = np.eye(kappa)
        self.b = np.zeros(kappa)
        self.theta = np.zeros(kappa)
        self.count = 0

    def add(self, phi: np.ndarray, y: float) -> None:
        self.lam += np.outer(phi, phi)
        self.b += phi * y
        kernels.sherman_morrison(self.lam_inv, phi)
        self.count += 1
        fit(self)


def fit(model: LabModel) -> np.ndarray:
    model.theta = model.lam_inv @ model.b
    return model.theta


def confidence_radius(cfg: TaylorConfig, count: int, bias: float) -> float:
    """LAB's ``rho``; with no samples the log argument is floored at ``4 kappa / delta``."""
    k = cfg.kappa
    return (cfg.beta * math.sqrt(k) + bias * math.sqrt(count)
            + math.sqrt(2.0 * k * math.log(4.0 * k * max(count, 1) / cfg.delta)) + 2.0)


def candidate_prices(domain: PriceDomain, j: int, grid_size: int) -> np.ndarray:
    if grid_size < 2:
        raise ValueError("price grid needs at least two candidates")
    lo, hi = domain.interval(j)
    return np.linspace(lo, hi, grid_size)


def lab_objective(model: LabModel, prices: np.ndarray, anchor: float, cfg: TaylorConfig, bias: float,
                  rho: float | None = None) -> np.ndarray:
    if rho is None:
        rho = confidence_radius(cfg, model.count, bias)
    return kernels.lab_objective(prices, float(anchor), 0.0, cfg.n, model.theta, model.lam_inv,
                                 float(rho), float(bias), float(cfg.confidence_scale))


def price(model: LabModel, domain: PriceDomain, j: int, cfg: TaylorConfig, grid_size: int = 64,
          bias: float | None = None) -> float:
    """Grid argmax of ``p * min(1, theta'phi + rho sqrt(phi' lam_inv phi) + bias)`` over interval ``j``.

    Features use a zero configuration offset: every sample in the cell shares
    the chosen configuration.  Ties go to the lowest price.
    """
    if bias is None:
        bias = taylor_bias(cfg, domain)
    prices = candidate_prices(domain, j, grid_size)
    obj = lab_objective(model, prices, domain.endpoints[j], cfg, bias)
    return float(prices[int(np.argmax(obj))])


def observe(model: LabModel, stats: IntervalStats, cluster, e, j, p, y, r, domain: PriceDomain,
            cfg: TaylorConfig) -> None:
    lo, hi = domain.interval(j)
    if not lo <= p <= hi:
        raise ValueError(f"price {p} outside interval {j} = [{lo}, {hi}]")
    stats.add(cluster, e, j, r)
    model.add(feature_vector(0.0, p, lo, cfg), y)


class CpbLearner:
    """Interval UCB plus one LAB model per ``(cluster, e, j)``."""

    def __init__(self, domain: PriceDomain, cfg: TaylorConfig, horizon: int, grid_size: int = 64):
        self.domain = domain
        self.cfg = cfg
        self.horizon = max(int(horizon), 1)
        self.grid_size = grid_size
        self.stats = IntervalStats(domain.N)
        self.models: dict = {}
        self.bias = taylor_bias(cfg, domain)
        self._candidates: dict = {}

    def model(self, cluster, e, j) -> LabModel:
        key = (cluster, e, j)
        m = self.models.get(key)
        if m is None:
            m = self.models[key] = LabModel(self.cfg.kappa)
        return m

    def select(self, cluster, e) -> tuple[int, float]:
        j = select_interval(cluster, e, self.domain, self.stats, self.cfg, self.horizon)
        prices = self._candidates.get(j)
        if prices is None:
            prices = self._candidates[j] = candidate_prices(self.domain, j, self.grid_size)
        obj = lab_objective(self.model(cluster, e, j), prices, self.domain.endpoints[j], self.cfg, self.bias)
        return j, float(prices[int(np.argmax(obj))])

    def observe(self, cluster, e, j, p, y, r) -> None:
        observe(self.model(cluster, e, j), self.stats, cluster, e, j, p, y, r, self.domain, self.cfg)
