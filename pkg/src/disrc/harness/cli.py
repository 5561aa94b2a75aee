"""Command-line entry point: ``disrc {train,compare,sweep,plot}``."""
from __future__ import annotations

import argparse
import logging
import sys
import time

from ..exceptions import DisrcError
from ..gridworld import render_ascii
from .config import RunConfig, parse_assignments
from .plot import PlotError, plot
from .runner import compare, default_workers, sweep, train

log = logging.getLogger("disrc")


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _add_run_options(p: argparse.ArgumentParser, multi_config: bool = False):
    if multi_config:
        p.add_argument("--config", action="append", default=[], metavar="PATH",
                       help="config file; give twice to compare two configs, once to compare "
                            "it against the same config with the other agent")
    else:
        p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int, help="total episodes")
    if not multi_config:
        p.add_argument("--agent", choices=["dqn", "disrc"])
    p.add_argument("--env", choices=["doorkey8", "lavacrossing9"])
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")


def _load_config(path, args) -> RunConfig:
    cfg = RunConfig.load(path) if path else RunConfig()
    overrides = parse_assignments(args.set, "--set") if args.set else {}
    for attr, key in (("seed", "seed"), ("episodes", "total_episodes"), ("agent", "agent"),
                      ("env", "env"), ("out", "out_dir")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return cfg.with_overrides(**overrides)


def _cmd_train(args) -> int:
    cfg = _load_config(args.config, args)
    callback = None
    if args.render:
        def callback(record, env):
            print(f"episode {record.episode}: reward {record.raw_reward:.3f} in {record.steps} steps")
            print(render_ascii(env.state))

    t0 = time.perf_counter()
    summary = train(cfg, callback=callback)
    for key, value in summary.to_dict().items():
        print(f"{key} = {value}")
    log.info("finished in %.1fs, artifacts in %s", time.perf_counter() - t0, cfg.out_dir)
    return 0


def _cmd_compare(args) -> int:
    if len(args.config) > 2:
        raise DisrcError("compare takes at most two --config files")
    cfg_a = _load_config(args.config[0] if args.config else None, args)
    if len(args.config) == 2:
        cfg_b = _load_config(args.config[1], args)
    else:
        cfg_b = cfg_a.with_overrides(agent="disrc" if cfg_a.agent == "dqn" else "dqn")
    seeds = _int_list(args.seeds) if args.seeds else [cfg_a.seed]
    table = compare(cfg_a, cfg_b, seeds, out_dir=cfg_a.out_dir, workers=args.workers)
    print(table.to_text(), end="")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config, args)
    if cfg.agent != "disrc":
        cfg = cfg.with_overrides(agent="disrc")
    seeds = _int_list(args.seeds) if args.seeds else [cfg.seed]
    rows = sweep(cfg, _float_list(args.beta0), _float_list(args.lambda_), seeds,
                 out_dir=cfg.out_dir, workers=args.workers)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} runs ({failed} failed); report in {cfg.out_dir}/sweep.csv")
    return 0


def _cmd_plot(args) -> int:
    out = plot(args.csv, args.out, smoothing_window=args.window, title=args.title)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="disrc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one agent and write its artifacts")
    _add_run_options(p)
    p.add_argument("--render", action="store_true",
                   help="print an ASCII dump of the grid at the end of every episode")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("compare", help="run two configs over several seeds")
    _add_run_options(p, multi_config=True)
    p.add_argument("--seeds", help="comma-separated seeds (default: the config seed)")
    p.add_argument("--workers", type=int, default=default_workers())
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep", help="grid over beta0 x lambda for the DISRC agent")
    _add_run_options(p)
    p.add_argument("--beta0", required=True, help="comma-separated beta0 values")
    p.add_argument("--lambda", dest="lambda_", required=True, help="comma-separated lambda values")
    p.add_argument("--seeds", help="comma-separated seeds (default: the config seed)")
    p.add_argument("--workers", type=int, default=default_workers())
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("plot", help="render learning curves to SVG")
    p.add_argument("csv", nargs="+", help="episodes.csv files")
    p.add_argument("--out", required=True, help="output .svg path")
    p.add_argument("--window", type=int, default=20, help="moving-average window")
    p.add_argument("--title", default="Learning curves")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except PlotError as exc:
        print(f"disrc: {exc}", file=sys.stderr)
        return 2
    except DisrcError as exc:
        print(f"disrc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
