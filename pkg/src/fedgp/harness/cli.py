"""Batch command-line entry point.

Commands:
    gen-data   write the configured task's synthetic data as CSV
    train      run the configured task with one method, saving models/history
    predict    forecast with saved models, writing a predictions CSV
    eval       score saved models, writing eval metrics
    compare    run several methods side by side, emitting a comparison table
    oracle     quadratic-consensus self-test with a closed-form optimum

Shared flags: --config PATH (JSON), --seed N, --out DIR,
--method {cadmm,pxadmm,fedavg,fedprox}, --secure-agg {on,off}, --timings.
Flags override the corresponding config fields. Exit codes: 0 success,
2 configuration error, 4 numerical failure, 3 data-ingestion error.
Set FEDGP_LOG={error,info,debug} to control logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from ..errors import (
    ArgumentError,
    ConfigError,
    FederationError,
    IngestionError,
    NumericalError,
)
from . import experiments

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INGESTION = 3
EXIT_NUMERICAL = 4

log = logging.getLogger("fedgp")

_COMMANDS = ("gen-data", "train", "predict", "eval", "compare", "oracle")


def _setup_logging():
    level_name = os.environ.get("FEDGP_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level_name not in levels:
        raise ConfigError(f"FEDGP_LOG must be one of {sorted(levels)}, "
                          f"got {level_name!r}")
    logging.basicConfig(stream=sys.stderr, level=levels[level_name],
                        format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(levels[level_name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedgp",
        description="Federated GP training, forecasting, and self-tests.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, blurb in (
            ("gen-data", "write synthetic trajectories or a traffic series"),
            ("train", "train the configured task with one method"),
            ("predict", "predict with saved models"),
            ("eval", "score saved models"),
            ("compare", "run methods side by side"),
            ("oracle", "quadratic-consensus self-test")):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", metavar="PATH",
                       help="experiment config JSON")
        p.add_argument("--seed", type=int, metavar="N",
                       help="override the config seed")
        p.add_argument("--out", metavar="DIR",
                       help="override the config output directory")
        p.add_argument("--method", choices=experiments.METHODS,
                       help="override the config method")
        p.add_argument("--secure-agg", choices=("on", "off"),
                       help="route server sums through secure aggregation")
        p.add_argument("--timings", action="store_true",
                       help="record real wall-clock values in emitted files "
                            "(off by default so outputs are byte-deterministic)")
    return parser


def _load_config(args) -> experiments.ExperimentConfig:
    if args.config is not None:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file does not exist: {args.config}")
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {args.config} is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
    elif args.command == "oracle":
        d = {"task": "quadratic_oracle"}
    else:
        raise ConfigError(f"{args.command} requires --config PATH")
    if args.command == "oracle":
        d.setdefault("task", "quadratic_oracle")
        d.setdefault("seed", 0)
    if args.seed is not None:
        d["seed"] = args.seed
    if args.out is not None:
        d["out_dir"] = args.out
    if args.method is not None:
        d["method"] = args.method
        d.pop("methods", None)
    if args.secure_agg is not None:
        d["secure_agg"] = args.secure_agg == "on"
    if args.timings:
        d["timings"] = True
    cfg = experiments.config_from_dict(d)
    if args.command == "train" and len(cfg.methods) > 1:
        # train runs exactly one method: the first configured one
        d.pop("method", None)
        d["methods"] = [cfg.methods[0]]
        cfg = experiments.config_from_dict(d)
    return cfg


def _require_out(cfg, command):
    if not cfg.out_dir:
        raise ConfigError(f"{command} needs --out DIR or out_dir in the config")


def _run(args) -> int:
    cfg = _load_config(args)
    log.info("command=%s task=%s seed=%d methods=%s", args.command, cfg.task,
             cfg.seed, ",".join(cfg.methods))
    log.debug("config hash %s", cfg.config_hash())
    if args.command == "gen-data":
        _require_out(cfg, "gen-data")
        result = experiments.run_gen_data(cfg)
    elif args.command in ("train", "compare"):
        _require_out(cfg, args.command)
        result = experiments._TRAIN_FNS[cfg.task](cfg)
    elif args.command == "predict":
        if cfg.task not in experiments._PREDICT_FNS:
            raise ConfigError(f"predict does not apply to task {cfg.task!r}")
        _require_out(cfg, "predict")
        result = experiments._PREDICT_FNS[cfg.task](cfg)
    elif args.command == "eval":
        if cfg.task not in experiments._EVAL_FNS:
            raise ConfigError(f"eval does not apply to task {cfg.task!r}")
        result = experiments._EVAL_FNS[cfg.task](cfg)
    else:
        if cfg.task != "quadratic_oracle":
            raise ConfigError("oracle requires task 'quadratic_oracle'")
        result = experiments.run_quadratic_oracle(cfg)
        json.dump(result, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        if not result["pass"]:
            log.error("quadratic-consensus self-test FAILED")
            return EXIT_NUMERICAL
        return EXIT_OK
    json.dump(result, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return _run(args)
    except IngestionError as e:
        log.error("%s", e)
        print(f"ingestion error: {e}", file=sys.stderr)
        return EXIT_INGESTION
    except (ConfigError, ArgumentError) as e:
        log.error("%s", e)
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FederationError as e:
        log.error("%s", e)
        detail = ""
        if e.client_id is not None:
            detail = f" (client {e.client_id})"
        print(f"numerical failure: {e}{detail}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as e:
        log.error("%s", e)
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
