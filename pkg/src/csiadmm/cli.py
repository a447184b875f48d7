"""Command line front end: ``csiadmm run|sweep|validate``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .errors import CsiAdmmError


def _load(args):
    cfg = experiments.parse_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_run(args):
    cfg = _load(args)
    for path in experiments.run_experiment(cfg, args.output):
        print(path)
    return 0


def cmd_sweep(args):
    cfg = _load(args)
    vary = [experiments.parse_vary(v) for v in args.vary]
    for name, paths in experiments.sweep(cfg, vary, args.output).items():
        print(f"{name}: {paths[-1]}")
    return 0


def cmd_validate(args):
    cfg = _load(args)
    setup = experiments.build_setup(cfg)
    print(f"config ok: {cfg.algorithm}, N={cfg.n_agents}, K={cfg.K}, S={cfg.S}, "
          f"batch={cfg.batch}")
    print(f"graph: {setup.graph.n_edges} edges; cycle ({setup.cycle.kind}): "
          f"{' -> '.join(map(str, setup.cycle.order))}")
    print(f"mu estimate: {setup.hp.mu_estimate:.6g}")
    problems = setup.violations()
    if not problems:
        print("step-size constraints: all satisfied")
        return 0
    for p in problems:
        print(f"violation: {p}")
    return 1


def build_parser():
    parser = argparse.ArgumentParser(prog="csiadmm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("config", help="key=value config file or run manifest (.json)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.set_defaults(func=func)
        return p

    p = add("run", cmd_run, "run one configuration")
    p.add_argument("--output", help="output directory (default: the config's output key)")
    p = add("sweep", cmd_sweep, "run a grid of configurations")
    p.add_argument("--vary", action="append", required=True, metavar="KEY=V1,V2,...")
    p.add_argument("--output", help="base output directory")
    add("validate", cmd_validate, "check a config and report step-size constraints")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CsiAdmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
