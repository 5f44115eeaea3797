"""Round-log CSV I/O and run summaries.

The round-log CSV starts with a ``# schema: ...`` tag line, then a header row
and one row per round.  Floats are written with ``repr`` so a re-read is
exact and the file is a pure function of ``(config, seed)``.  Wall-clock
durations are not deterministic, so they go to a sidecar ``*.timing.csv``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..core import ClusterKey
from .loop import COLUMNS, SCHEMA, RoundLog

SUMMARY_SCHEMA = "vthb.summary/1"


class SchemaError(ValueError):
    pass


# --------------------------------------------------------------------------
# round-log CSV
# --------------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def log_to_csv(log: RoundLog) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in log.rows():
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def timing_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".timing.csv")


def write_log(log: RoundLog, path, timing: bool = True) -> Path:
    """Write the round log (and, by default, its timing sidecar); returns the log path."""
    path = Path(path)
    path.write_text(log_to_csv(log), encoding="utf-8")
    if timing:
        with open(timing_path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "duration_s"))
            for t, d in zip(log.t, log.duration):
                w.writerow((int(t), repr(float(d))))
    return path


def read_log(path, policy: str = "unknown") -> RoundLog:
    """Parse a round-log CSV; durations come from the sidecar when present, else zeros."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        tag = fh.readline().strip()
        if tag != f"# schema: {SCHEMA}":
            raise SchemaError(f"{path}: expected schema tag {SCHEMA!r}, found {tag!r}")
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != COLUMNS:
            raise SchemaError(f"{path}: header {header} does not match {COLUMNS}")
        rows = list(reader)
    cols = list(zip(*rows)) if rows else [()] * len(COLUMNS)
    data = dict(zip(COLUMNS, cols))
    ints = ("t", "e", "e_value", "j", "scanned")
    arr = {k: np.array(v, dtype=np.int64 if k in ints else np.float64) for k, v in data.items() if k != "cluster"}
    n = arr["t"].shape[0]
    duration = np.zeros(n)
    side = timing_path(path)
    if side.exists():
        with open(side, encoding="utf-8") as fh:
            r = csv.reader(fh)
            next(r, None)
            d = np.array([float(row[1]) for row in r])
        if d.shape[0] == n:
            duration = d
    return RoundLog(t=arr["t"], clusters=[ClusterKey.parse(c) for c in data["cluster"]], e=arr["e"],
                    e_value=arr["e_value"], j=arr["j"], p=arr["p"], s=arr["s"], cost=arr["cost"], r=arr["r"],
                    y=arr["y"], regret=arr["regret"], cum_regret=arr["cum_regret"],
                    config_regret=arr["config_regret"], price_regret=arr["price_regret"],
                    scanned=arr["scanned"], duration=duration, policy=policy)


# --------------------------------------------------------------------------
# summaries
# --------------------------------------------------------------------------


@dataclass
class ClusterSummary:
    rounds: int
    cumulative_regret: float
    average_reward: float
    reward_variance: float


@dataclass
class Summary:
    policy: str
    rounds: int
    total_reward: float
    average_reward: float
    cumulative_regret: float
    clamped_regret: float
    config_regret: float
    price_regret: float
    window: int
    windowed_regret: list
    timing: dict
    intra_cluster_variance: float
    per_cluster: dict = field(default_factory=dict)
    weighted_regret: float | None = None

    def scalars(self) -> dict:
        d = asdict(self)
        for key in ("windowed_regret", "timing", "per_cluster"):
            d.pop(key)
        d.update({f"time_{k}": v for k, v in self.timing.items()})
        return d


def _timing(duration: np.ndarray) -> dict:
    T = duration.shape[0]
    d = np.asarray(duration, dtype=np.float64)
    out = {"mean_s": float(d.mean()), "median_s": float(np.median(d)), "p90_s": float(np.quantile(d, 0.9)),
           "total_s": float(d.sum())}
    if T >= 10:
        second = d[T // 10: T // 5]
        last = d[(9 * T) // 10:]
        out["median_second_decile_s"] = float(np.median(second))
        out["median_last_decile_s"] = float(np.median(last))
    return out


def summarize(log: RoundLog, window: int | None = None, weights: dict | None = None) -> Summary:
    """Aggregate and per-cluster statistics of one run.

    ``window`` sets the length of the windowed mean-regret series (default
    ``T / 10``, at least 1).  ``weights`` maps clusters to traffic weights;
    when given, ``weighted_regret`` is the weight-averaged per-cluster
    cumulative regret.
    """
    T = len(log)
    if T == 0:
        raise ValueError("cannot summarise an empty log")
    window = max(1, T // 10) if window is None else int(window)
    if window < 1:
        raise ValueError("window must be positive")

    groups: dict = {}
    for i, c in enumerate(log.clusters):
        groups.setdefault(c, []).append(i)
    per_cluster = {}
    var_acc = 0.0
    for c in sorted(groups):
        idx = np.asarray(groups[c])
        r = log.r[idx]
        var = float(r.var())
        var_acc += var * idx.size
        per_cluster[str(c)] = ClusterSummary(int(idx.size), float(log.regret[idx].sum()), float(r.mean()), var)

    n_win = math.ceil(T / window)
    series = [float(log.regret[w * window:(w + 1) * window].mean()) for w in range(n_win)]

    weighted = None
    if weights:
        tot = sum(weights.get(c, 0.0) for c in groups)
        if tot > 0:
            weighted = sum(weights.get(c, 0.0) * per_cluster[str(c)].cumulative_regret for c in groups) / tot

    return Summary(
        policy=log.policy, rounds=T, total_reward=float(log.r.sum()), average_reward=float(log.r.mean()),
        cumulative_regret=float(log.regret.sum()), clamped_regret=float(np.maximum(log.regret, 0.0).sum()),
        config_regret=float(log.config_regret.sum()), price_regret=float(log.price_regret.sum()),
        window=window, windowed_regret=series, timing=_timing(log.duration),
        intra_cluster_variance=var_acc / T, per_cluster=per_cluster, weighted_regret=weighted,
    )


def format_summary(s: Summary) -> str:
    lines = [
        f"policy               {s.policy}",
        f"rounds               {s.rounds}",
        f"average reward       {s.average_reward:.6f}",
        f"total reward         {s.total_reward:.4f}",
        f"cumulative regret    {s.cumulative_regret:.4f}  (clamped {s.clamped_regret:.4f})",
        f"  configuration      {s.config_regret:.4f}",
        f"  pricing            {s.price_regret:.4f}",
        f"intra-cluster var    {s.intra_cluster_variance:.6f}",
        f"clusters             {len(s.per_cluster)}",
        f"median round time    {s.timing['median_s'] * 1e6:.1f} us",
    ]
    if s.weighted_regret is not None:
        lines.append(f"weighted regret      {s.weighted_regret:.4f}")
    lines.append(f"windowed regret (w={s.window}): " + " ".join(f"{x:.4f}" for x in s.windowed_regret))
    lines.append("")
    lines.append(f"{'cluster':<12}{'rounds':>8}{'cum_regret':>14}{'avg_reward':>12}{'reward_var':>12}")
    for key, c in s.per_cluster.items():
        lines.append(f"{key:<12}{c.rounds:>8}{c.cumulative_regret:>14.4f}{c.average_reward:>12.5f}"
                     f"{c.reward_variance:>12.5f}")
    return "\n".join(lines) + "\n"


def write_summary(s: Summary, stem) -> tuple[Path, Path]:
    """Write ``<stem>.summary.txt`` and ``<stem>.clusters.csv``."""
    stem = Path(stem)
    txt = stem.with_name(stem.name + ".summary.txt")
    txt.write_text(format_summary(s), encoding="utf-8")
    csv_path = stem.with_name(stem.name + ".clusters.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema: {SUMMARY_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("cluster", "rounds", "cumulative_regret", "average_reward", "reward_variance"))
        for key, c in s.per_cluster.items():
            w.writerow((key, c.rounds, repr(c.cumulative_regret), repr(c.average_reward), repr(c.reward_variance)))
    return txt, csv_path


def write_summaries(rows: list[dict], path) -> Path:
    """One CSV row per summary dict (used by sweeps)."""
    path = Path(path)
    keys = list(rows[0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema: {SUMMARY_SCHEMA}\n")
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return path
