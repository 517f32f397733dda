"""Command line interface: ``nashdyn run | list-games | list-methods | check``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .exceptions import ConfigError

# flag name -> ExperimentConfig field, for flags that can also come from --config
_RUN_FLAGS = {
    "game": str, "method": str, "steps": int, "trials": int, "seed": int, "eta": float,
    "gamma": float, "out": str, "batch_size": int, "ensemble_size": int, "brf_hidden": int,
    "eval_every": int, "schedule": str, "metrics": str, "gan_eta": float, "ewd_samples": int,
}


def build_parser() -> argparse.ArgumentParser:
    from .games import GAME_IDS
    from .methods import METHOD_IDS

    parser = argparse.ArgumentParser(prog="nashdyn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write a CSV")
    run.add_argument("--config", help="file with key=value lines; flags take precedence")
    for name, typ in _RUN_FLAGS.items():
        kw = {"type": typ, "default": None}
        if name == "game":
            kw["choices"] = GAME_IDS
        elif name == "method":
            kw["choices"] = METHOD_IDS
        run.add_argument("--" + name.replace("_", "-"), **kw)

    sub.add_parser("list-games", help="print registered game ids")
    sub.add_parser("list-methods", help="print registered method ids")
    check = sub.add_parser("check", help="run the numerical property suite")
    check.add_argument("--profiles", type=int, default=3, help="random profiles per game")
    return parser


def _cmd_run(args, parser) -> int:
    from .games import GAME_IDS
    from .harness import ExperimentConfig, aggregate, emit_csv, read_config_file, run_experiment
    from .methods import METHOD_IDS

    values = {}
    if args.config:
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            parser.error(f"cannot read config file: {exc}")
        except ConfigError as exc:
            parser.error(str(exc))
    values.update({k: getattr(args, k) for k in _RUN_FLAGS if getattr(args, k) is not None})
    for key, known in (("game", GAME_IDS), ("method", METHOD_IDS)):
        if key not in values:
            parser.error(f"--{key} is required (on the command line or in --config)")
        if values[key] not in known:
            parser.error(f"unknown {key} {values[key]!r}; choose from {', '.join(known)}")
    try:
        config = ExperimentConfig.from_mapping(values)
        # the CSV is written below, together with the aggregates
        records = run_experiment(replace(config, out=None))
    except ConfigError as exc:
        parser.error(str(exc))
    aggs = aggregate(records)
    if config.out:
        emit_csv(records + aggs, config.out, config.game, config.method)
    last = max(a.step for a in aggs)
    for a in sorted(aggs, key=lambda a: a.metric):
        if a.step == last:
            print(f"{config.game} {config.method} step {last}: {a.metric} = {a.mean:.6g} "
                  f"+/- {a.stderr:.3g} (n={a.n}, diverged={a.diverged})")
    if config.out:
        print(f"wrote {config.out}")
    return 0


def _cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks(args.profiles)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-games":
        from .games import GAME_IDS

        print("\n".join(GAME_IDS))
        return 0
    if args.command == "list-methods":
        from .methods import METHOD_IDS

        print("\n".join(METHOD_IDS))
        return 0
    if args.command == "check":
        return _cmd_check(args)
    return _cmd_run(args, parser)


if __name__ == "__main__":
    sys.exit(main())
