"""Parameter sweeps: one run per (axis value, seed) cell."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import ConfigError, RunConfig
from .loop import run
from .report import Summary, summarize

AXES = ("p_hi", "k_range", "nlist", "policy", "seed")


@dataclass
class SweepCell:
    axis: str
    value: object
    seed: int
    summary: Summary

    def row(self) -> dict:
        v = self.value
        if isinstance(v, tuple):
            v = "-".join(str(x) for x in v)
        return {"axis": self.axis, "value": v, "seed": self.seed, **self.summary.scalars()}


def cell_config(template: RunConfig, axis: str, value, seed: int) -> RunConfig:
    if axis not in AXES:
        raise ConfigError(f"cannot sweep over {axis!r}; choose from {AXES}")
    if axis == "seed":
        return template.with_(seed=int(value))
    if axis == "k_range":
        value = tuple(int(x) for x in value)
    elif axis == "nlist":
        value = int(value)
        return template.with_(nlist=value, nprobe=min(template.nprobe, value), seed=seed)
    elif axis == "p_hi":
        value = float(value)
    return template.with_(**{axis: value, "seed": seed})


def _run_cell(args) -> SweepCell:
    cfg, axis, value = args
    return SweepCell(axis, value, cfg.seed, summarize(run(cfg)))


def sweep(template: RunConfig, axis: str, values, seeds=None, workers: int = 1) -> list[SweepCell]:
    """Run ``values x seeds``; with ``axis='seed'`` the values are the seeds.

    Cells share nothing but the cached workspace, so ``workers > 1`` fans
    them out over processes; results come back in cell order either way.
    """
    values = list(values)
    if axis == "seed":
        jobs = [(cell_config(template, axis, v, int(v)), axis, v) for v in values]
    else:
        seeds = [template.seed] if seeds is None else list(seeds)
        jobs = [(cell_config(template, axis, v, s), axis, v) for v in values for s in seeds]
    for cfg, _, _ in jobs:
        cfg.validate()
    if workers <= 1:
        return [_run_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, jobs))


def mean_by_value(cells: list[SweepCell], metric: str = "average_reward") -> dict:
    """Seed-mean of ``metric`` for each swept value, in first-seen order."""
    acc: dict = {}
    for c in cells:
        key = c.value if not isinstance(c.value, list) else tuple(c.value)
        acc.setdefault(key, []).append(getattr(c.summary, metric))
    return {k: sum(v) / len(v) for k, v in acc.items()}
