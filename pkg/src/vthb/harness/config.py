"""Run configuration: one JSON document per experiment."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..core import DEFAULT_C_MAX, c_bucket_count
from ..env import MarketSpec
from ..pricing import WIDTH_RULES, PriceDomain, TaylorConfig, intervals_for_horizon
from ..vindex import DEFAULT_GRID, ConfigurationGrid

POLICIES = ("vthb", "stcf", "rdcf", "stp", "rdp", "linp", "conp")
CONFIG_STAGES = ("ccb", "stcf", "rdcf")
PRICE_STAGES = ("cpb", "stp", "rdp", "linp", "conp")


class ConfigError(ValueError):
    """Invalid run configuration; the CLI maps it to exit code 1."""


@dataclass(frozen=True)
class SyntheticData:
    """Gaussian-mixture corpus standing in for a real embedding dataset."""

    n: int = 50_000
    dim: int = 64
    modes: int = 32
    spread: float = 0.35
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    # data and index
    dataset: str = "synthetic"
    synthetic: SyntheticData = field(default_factory=SyntheticData)
    max_vectors: int | None = 50_000
    holdout: float = 0.1
    nlist: int = 16
    nprobe: int = 4
    index_seed: int = 0
    grid: tuple = DEFAULT_GRID
    # queries
    c_max: float = DEFAULT_C_MAX
    c_range: tuple = (1.0, 4.0)
    k_range: tuple = (8, 15)
    # pricing
    p_lo: float = 1.0
    p_hi: float = 10.0
    n_intervals: int | None = None
    taylor_n: int = 3
    beta: float = 1.0
    delta: float = 0.01
    eta: float = 0.0
    width_rule: str = "lemma"
    width_scale: float = 2e-4
    confidence_scale: float = 1e-3
    lab_grid: int = 64
    # run
    horizon: int = 10_000
    policy: str = "vthb"
    config_stage: str | None = None
    price_stage: str | None = None
    stcf_index: int | None = None
    stp_price: float | None = None
    conp_epsilon: float = 0.05
    linp_confidence_scale: float = 0.1
    market: MarketSpec = field(default_factory=MarketSpec)
    oracle_grid: int = 10_000
    check_smoothness: bool = True
    seed: int = 0
    output: str | None = None

    # ------------------------------------------------------------------
    @property
    def configuration_grid(self) -> ConfigurationGrid:
        return ConfigurationGrid(tuple(self.grid))

    @property
    def taylor(self) -> TaylorConfig:
        return TaylorConfig(n=self.taylor_n, beta=self.beta, delta=self.delta, eta=self.eta,
                            width_rule=self.width_rule, width_scale=self.width_scale,
                            confidence_scale=self.confidence_scale)

    @property
    def price_domain(self) -> PriceDomain:
        N = self.n_intervals or intervals_for_horizon(self.horizon, self.taylor_n)
        return PriceDomain(self.p_lo, self.p_hi, N)

    def stages(self) -> tuple[str, str]:
        """``(config stage, price stage)`` implied by ``policy`` and any explicit overrides."""
        pairing = {
            "vthb": ("ccb", "cpb"),
            "stcf": ("stcf", "cpb"),
            "rdcf": ("rdcf", "cpb"),
            "stp": ("ccb", "stp"),
            "rdp": ("ccb", "rdp"),
            "linp": ("ccb", "linp"),
            "conp": ("ccb", "conp"),
        }[self.policy]
        return self.config_stage or pairing[0], self.price_stage or pairing[1]

    def validate(self) -> "RunConfig":
        try:
            self.configuration_grid
            self.taylor
            self.price_domain
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.config_stage is not None and self.config_stage not in CONFIG_STAGES:
            raise ConfigError(f"unknown configuration stage {self.config_stage!r}")
        if self.price_stage is not None and self.price_stage not in PRICE_STAGES:
            raise ConfigError(f"unknown price stage {self.price_stage!r}")
        if self.width_rule not in WIDTH_RULES:
            raise ConfigError(f"width_rule must be one of {WIDTH_RULES}")
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if not 0.0 < self.holdout < 1.0:
            raise ConfigError("holdout fraction must lie in (0, 1)")
        if self.nlist < 1 or not 1 <= self.nprobe <= self.nlist:
            raise ConfigError(f"need 1 <= nprobe <= nlist, got nprobe={self.nprobe}, nlist={self.nlist}")
        c_lo, c_hi = self.c_range
        if not 1.0 <= c_lo <= c_hi <= self.c_max or c_hi <= 1.0:
            raise ConfigError(f"c_range {self.c_range} must satisfy 1 <= lo <= hi <= c_max={self.c_max}, hi > 1")
        k_lo, k_hi = self.k_range
        if not 1 <= k_lo <= k_hi:
            raise ConfigError(f"k_range {self.k_range} must satisfy 1 <= lo <= hi")
        if self.lab_grid < 2:
            raise ConfigError("lab_grid must be at least 2")
        if self.oracle_grid < 100:
            raise ConfigError("oracle_grid must be at least 100")
        if self.linp_confidence_scale <= 0.0:
            raise ConfigError("linp_confidence_scale must be positive")
        if not 0.0 <= self.conp_epsilon <= 1.0:
            raise ConfigError("conp_epsilon must lie in [0, 1]")
        if self.stcf_index is not None and not 0 <= self.stcf_index < len(self.grid):
            raise ConfigError(f"stcf_index {self.stcf_index} outside the grid")
        if self.stp_price is not None and not self.p_lo <= self.stp_price <= self.p_hi:
            raise ConfigError(f"stp_price {self.stp_price} outside [{self.p_lo}, {self.p_hi}]")
        if self.market.quality_mode not in ("exp", "calibrated"):
            raise ConfigError("market.quality_mode must be 'exp' or 'calibrated'")
        return self

    @property
    def n_c_buckets(self) -> int:
        return c_bucket_count(self.c_max)

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["market"] = self.market.to_dict()
        d["grid"] = list(self.grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        d = dict(d)
        try:
            if "synthetic" in d:
                d["synthetic"] = SyntheticData(**d["synthetic"])
            if "market" in d:
                d["market"] = MarketSpec.from_dict(d["market"])
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        for key in ("grid", "c_range", "k_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        return cls.from_dict(data)

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)
