"""The round loop: query -> configuration -> interval and price -> retrieval -> feedback."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import env, vindex
from ..baselines import make_stages
from ..core import History, InteractionRecord, c_bucket, k_bucket, ClusterKey
from .config import ConfigError, RunConfig
from .data import QueryStream, generate_queries, load_dataset, split

SCHEMA = "vthb.roundlog/1"
COLUMNS = ("t", "cluster", "e", "e_value", "j", "p", "s", "cost", "r", "y", "regret", "cum_regret",
           "config_regret", "price_regret", "scanned")


class RunAborted(RuntimeError):
    """A module error inside the loop; carries the failing round."""

    def __init__(self, t: int, cause: Exception):
        super().__init__(f"round {t}: {type(cause).__name__}: {cause}")
        self.t = t
        self.cause = cause


@dataclass
class Workspace:
    """Dataset split, trained index and the holdout's centroid assignments."""

    index: vindex.IvfIndex
    holdout: np.ndarray
    holdout_centroids: np.ndarray
    quality_tables: dict = field(default_factory=dict)


_WORKSPACES: dict = {}


def _workspace_key(cfg: RunConfig):
    return (cfg.dataset, cfg.synthetic, cfg.max_vectors, cfg.holdout, cfg.nlist, cfg.index_seed)


def prepare(cfg: RunConfig, index: vindex.IvfIndex | None = None) -> Workspace:
    """Load data, split 90/10, build (or reuse) the index; cached per process."""
    key = _workspace_key(cfg)
    ws = _WORKSPACES.get(key)
    if ws is not None and index is None:
        return ws
    try:
        X = load_dataset(cfg)
        base, holdout = split(X, cfg.holdout, cfg.index_seed)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"dataset {cfg.dataset!r}: {exc}") from exc
    if index is None:
        if cfg.nlist > base.shape[0]:
            raise ConfigError(f"nlist={cfg.nlist} exceeds indexed vectors {base.shape[0]}")
        index = vindex.build(base, cfg.nlist, cfg.index_seed)
    try:
        cfg.configuration_grid.check_dataset(len(index))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    hold = np.ascontiguousarray(holdout, dtype=np.float64)
    ws = Workspace(index, hold, vindex.assign_many(index, hold))
    _WORKSPACES[key] = ws
    return ws


def calibrate_quality(ws: Workspace, cfg: RunConfig, per_centroid: int = 20) -> dict:
    """Measured recall per configuration for each centroid, used by calibrated markets."""
    k = max(1, int(round(0.5 * (cfg.k_range[0] + cfg.k_range[1]))))
    grid = cfg.configuration_grid
    tables = {}
    for c in range(ws.index.nlist):
        members = np.flatnonzero(ws.holdout_centroids == c)[:per_centroid]
        if members.size == 0:
            continue
        rec = vindex.measured_recall(ws.index, ws.holdout[members], grid, k, cfg.nprobe)
        rec = np.maximum.accumulate(np.maximum(rec, 1e-3))
        tables[c] = tuple((int(e), float(q)) for e, q in zip(grid, rec))
    return tables


@dataclass
class RoundLog:
    t: np.ndarray
    clusters: list
    e: np.ndarray
    e_value: np.ndarray
    j: np.ndarray
    p: np.ndarray
    s: np.ndarray
    cost: np.ndarray
    r: np.ndarray
    y: np.ndarray
    regret: np.ndarray
    cum_regret: np.ndarray
    config_regret: np.ndarray
    price_regret: np.ndarray
    scanned: np.ndarray
    duration: np.ndarray
    policy: str = "vthb"
    oracle: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.shape[0]

    def rows(self):
        for i in range(len(self)):
            yield (int(self.t[i]), str(self.clusters[i]), int(self.e[i]), int(self.e_value[i]), int(self.j[i]),
                   float(self.p[i]), float(self.s[i]), float(self.cost[i]), float(self.r[i]), float(self.y[i]),
                   float(self.regret[i]), float(self.cum_regret[i]), float(self.config_regret[i]),
                   float(self.price_regret[i]), int(self.scanned[i]))

    @classmethod
    def empty(cls, policy="vthb") -> "RoundLog":
        z = np.zeros(0)
        zi = np.zeros(0, dtype=np.int64)
        return cls(zi, [], zi, zi, zi, z, z, z, z, z, z, z, z, z, zi, z, policy)


def run(cfg: RunConfig, ws: Workspace | None = None, market: env.MarketModel | None = None,
        queries: QueryStream | None = None) -> RoundLog:
    """Execute ``cfg.horizon`` rounds of the configured policy and log every round."""
    cfg.validate()
    T = cfg.horizon
    if T == 0:
        return RoundLog.empty(cfg.policy)
    ws = ws or prepare(cfg)
    grid = cfg.configuration_grid
    domain = cfg.price_domain
    taylor = cfg.taylor
    if market is None:
        tables = {}
        if cfg.market.quality_mode == "calibrated":
            tables = ws.quality_tables or calibrate_quality(ws, cfg)
            ws.quality_tables = tables
        market = env.MarketModel(cfg.market, tables)

    q_rng, m_rng, p_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3))
    if queries is None:
        queries = generate_queries(ws.holdout, T, cfg.c_range, cfg.k_range, q_rng)
    cstage_name, pstage_name = cfg.stages()
    cstage, pstage = make_stages(cstage_name, pstage_name, grid, domain, taylor, T, lab_grid=cfg.lab_grid,
                                 stcf_index=cfg.stcf_index, stp_price=cfg.stp_price,
                                 conp_epsilon=cfg.conp_epsilon, linp_confidence_scale=cfg.linp_confidence_scale)

    history = History()
    oracles: dict = {}
    cols = {name: np.zeros(T) for name in ("p", "s", "cost", "r", "y", "regret", "cfg_reg", "prc_reg", "dur")}
    ints = {name: np.zeros(T, dtype=np.int64) for name in ("e", "ev", "j", "scanned")}
    clusters = []
    c_max = cfg.c_max
    grid_values = grid.values
    index = ws.index

    for i in range(T):
        t = i + 1
        t0 = time.perf_counter()
        try:
            vid = queries.vec_ids[i]
            c, k = float(queries.c[i]), int(queries.k[i])
            cluster = ClusterKey(int(ws.holdout_centroids[vid]), c_bucket(c, c_max), k_bucket(k))
            oracle = oracles.get(cluster)
            if oracle is None:
                oracle = oracles[cluster] = _setup_cluster(cfg, market, cluster, grid, domain)
            e = cstage.select(cluster, t, p_rng)
            j, p = pstage.select(cluster, e, p_rng)
            ev = grid_values[e]
            res = vindex.search(index, ws.holdout[vid], k, ev, cfg.nprobe)
            s, cost = env.respond(market, cluster, ev, p, m_rng)
            rec = InteractionRecord.from_outcome(t, cluster, e, j, p, s, cost)
            history.append(rec)
            cstage.learn(cluster, e, rec.r)
            pstage.learn(cluster, e, j, p, rec.y, rec.r)
        except ConfigError:
            raise
        except Exception as exc:  # noqa: BLE001 - surfaced with the round index
            raise RunAborted(t, exc) from exc
        u = market.cluster(cluster).reward_at(float(ev), p)
        best_e = float(oracle.best_u[e])
        cols["regret"][i] = oracle.u_star - u
        cols["cfg_reg"][i] = oracle.u_star - best_e
        cols["prc_reg"][i] = best_e - u
        cols["p"][i], cols["s"][i], cols["cost"][i], cols["r"][i], cols["y"][i] = p, s, cost, rec.r, rec.y
        ints["e"][i], ints["ev"][i], ints["j"][i], ints["scanned"][i] = e, ev, j, res.scanned
        clusters.append(cluster)
        cols["dur"][i] = time.perf_counter() - t0

    return RoundLog(
        t=np.arange(1, T + 1), clusters=clusters, e=ints["e"], e_value=ints["ev"], j=ints["j"],
        p=cols["p"], s=cols["s"], cost=cols["cost"], r=cols["r"], y=cols["y"], regret=cols["regret"],
        cum_regret=np.cumsum(cols["regret"]), config_regret=cols["cfg_reg"], price_regret=cols["prc_reg"],
        scanned=ints["scanned"], duration=cols["dur"], policy=cfg.policy, oracle=oracles,
    )


def _setup_cluster(cfg: RunConfig, market, cluster, grid, domain):
    if cfg.check_smoothness and cfg.market.quality_mode == "exp":
        est = env.smoothness_bound(market, cluster, grid, domain.p_lo, domain.p_hi, cfg.taylor_n)
        if not env.check_smoothness(cfg.beta, est):
            raise ConfigError(
                f"beta={cfg.beta} does not dominate the market's derivative bound {est:.3f} in cluster {cluster}"
            )
    return env.solve_oracle(market, cluster, grid, domain.p_lo, domain.p_hi, cfg.oracle_grid)
