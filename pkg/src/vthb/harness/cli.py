"""Command-line entry point.

Subcommands: ``build-index``, ``run``, ``sweep``, ``report``, ``selftest``.
Every top-level :class:`RunConfig` field has a matching ``--flag``; nested
fields (``synthetic.*``, ``market.*``) are set with ``--set key.sub=value``.
Exit codes: 0 success, 1 configuration error, 2 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .config import ConfigError, RunConfig

log = logging.getLogger("vthb")

# fields whose default is None need an explicit parser type
_NONE_TYPES = {"max_vectors": int, "n_intervals": int, "config_stage": str, "price_stage": str,
               "stcf_index": int, "stp_price": float, "output": str}
_TUPLES = {"grid": int, "c_range": float, "k_range": int}
_NESTED = ("synthetic", "market")


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _tuple_of(kind):
    def parse(text: str):
        try:
            return tuple(kind(x) for x in text.split(",") if x.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration to start from")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any field, dotted for nested ones (value parsed as JSON if possible)")
    g = p.add_argument_group("run configuration fields")
    defaults = RunConfig()
    for f in fields(RunConfig):
        if f.name in _NESTED:
            continue
        flag = "--" + f.name.replace("_", "-")
        default = getattr(defaults, f.name)
        if f.name in _TUPLES:
            kind = _tuple_of(_TUPLES[f.name])
        elif f.name in _NONE_TYPES:
            kind = _NONE_TYPES[f.name]
        elif isinstance(default, bool):
            kind = _bool
        else:
            kind = type(default)
        g.add_argument(flag, dest=f"cfg_{f.name}", type=kind, default=None,
                       help=f"(default: {default!r})")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def config_from_args(args) -> RunConfig:
    base = RunConfig.load(args.config).to_dict() if args.config else RunConfig().to_dict()
    for f in fields(RunConfig):
        v = getattr(args, f"cfg_{f.name}", None)
        if v is not None:
            base[f.name] = list(v) if isinstance(v, tuple) else v
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, text = item.split("=", 1)
        node = base
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown nested key {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown configuration key {key!r}")
        node[parts[-1]] = _parse_value(text)
    try:
        return RunConfig.from_dict(base).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_build_index(args) -> int:
    from .loop import prepare
    cfg = config_from_args(args)
    ws = prepare(cfg)
    out = Path(args.out)
    ws.index.save(out)
    print(f"index: {len(ws.index)} vectors, nlist={ws.index.nlist}, {ws.index.iterations} k-means iterations -> {out}")
    return 0


def _outdir(args, cfg) -> Path:
    out = Path(args.out or cfg.output or "runs/latest")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    from .loop import run
    from .report import format_summary, summarize, write_log, write_summary
    cfg = config_from_args(args)
    out = _outdir(args, cfg)
    cfg.save(out / "config.json")
    rl = run(cfg)
    if len(rl) == 0:
        print("horizon is zero; nothing to run")
        return 0
    stem = out / f"{cfg.policy}-seed{cfg.seed}"
    write_log(rl, stem.with_suffix(".csv"))
    s = summarize(rl)
    write_summary(s, stem)
    print(format_summary(s), end="")
    return 0


def cmd_sweep(args) -> int:
    from .report import write_summaries
    from .sweep import mean_by_value, sweep
    cfg = config_from_args(args)
    out = _outdir(args, cfg)
    cfg.save(out / "config.json")
    if args.axis == "k_range":
        values = [tuple(int(x) for x in v.split("-")) for v in args.values.split(",")]
    elif args.axis == "policy":
        values = args.values.split(",")
    else:
        values = [_parse_value(v) for v in args.values.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    cells = sweep(cfg, args.axis, values, seeds, workers=args.workers)
    path = write_summaries([c.row() for c in cells], out / f"sweep-{args.axis}.csv")
    for value, mean in mean_by_value(cells).items():
        print(f"{args.axis}={value}: mean average reward {mean:.5f}")
    print(f"summaries -> {path}")
    return 0


def cmd_report(args) -> int:
    from .report import format_summary, read_log, summarize, write_summary
    rl = read_log(args.log, policy=args.policy)
    s = summarize(rl, window=args.window)
    if args.out:
        write_summary(s, Path(args.out))
    print(format_summary(s), end="")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_all
    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return 0 if all(ok for _, ok, _ in results) else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vthb", description="Hierarchical bandit pricing for vector retrieval")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="train the IVF index and save it as .npz")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output .npz path")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("run", help="run one policy and write the round log and summary")
    _add_config_flags(p)
    p.add_argument("--out", help="output directory (default: config output or runs/latest)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one parameter over values and seeds")
    _add_config_flags(p)
    p.add_argument("--axis", required=True, help="p_hi, k_range, nlist, policy or seed")
    p.add_argument("--values", required=True, help="comma-separated; k ranges as lo-hi")
    p.add_argument("--seeds", help="comma-separated seeds (default: the config seed)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarise an existing round-log CSV")
    p.add_argument("log", help="round-log CSV")
    p.add_argument("--window", type=int)
    p.add_argument("--policy", default="unknown")
    p.add_argument("--out", help="stem for .summary.txt and .clusters.csv")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    from .loop import RunAborted
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except RunAborted as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
