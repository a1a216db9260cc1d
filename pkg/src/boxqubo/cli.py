"""Command-line entry point: ``boxqubo run|suite|encode|optimum|report``."""

from __future__ import annotations

import argparse
import logging
import sys

from boxqubo.config import ConfigError, load_config
from boxqubo.harness import (
    _method_config,
    build_instance,
    encode_instance,
    instance_optimum,
    run_optimization,
    run_suite,
    write_run,
    write_suite,
)
from boxqubo.oracles import load_instance, make_oracle
from boxqubo.whitebox import format_size_table

log = logging.getLogger("boxqubo")


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(item, "--set expects key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config(args, extra=None):
    overrides = _overrides(args.set)
    overrides.update(extra or {})
    return load_config(args.config, overrides)


def _instance(args):
    if args.instance:
        return load_instance(args.instance)
    cfg = _config(args)
    return build_instance(cfg, args.seed if args.seed is not None else cfg.instance_seeds[0])


def cmd_run(args) -> int:
    cfg = _config(args)
    cfg = _method_config(cfg, cfg.method)
    status = 0
    print("seed,base,optimum,best_energy,final_normalized,oracle_calls,output")
    for seed in cfg.instance_seeds:
        instance = build_instance(cfg, seed)
        result = run_optimization(cfg, make_oracle(instance), instance, seed=seed)
        outdir = write_run(result, cfg, args.out)
        last = result.log.records[-1]
        norm = "nan" if last.normalized is None else repr(last.normalized)
        print(f"{seed},{result.log.base!r},{result.log.optimum!r},{result.best_y!r},{norm},{last.oracle_calls},{outdir}")
        if result.failed:
            print(f"error: seed {seed}: {result.log.error}", file=sys.stderr)
            status = 1
    return status


def cmd_suite(args) -> int:
    extra = {"methods": args.methods} if args.methods else None
    cfg = _config(args, extra)
    suite = run_suite(cfg)
    outdir = write_suite(suite, cfg, args.out)
    print("method,final_mean_normalized,instances")
    for m in suite.methods:
        curve = suite.curves[m]
        final = repr(curve[-1]) if curve else "nan"
        print(f"{m},{final},{len(suite.included_seeds)}")
    for seed, reason in suite.excluded.items():
        print(f"note: instance seed {seed} excluded ({reason})", file=sys.stderr)
    print(f"written to {outdir}", file=sys.stderr)
    return 0


def cmd_encode(args) -> int:
    encoded = encode_instance(_instance(args))
    qpath, jpath = encoded.export(args.out)
    print(f"{encoded.domain},n={encoded.n},{qpath},{jpath}")
    return 0


def cmd_optimum(args) -> int:
    instance = _instance(args)
    oracle = make_oracle(instance)
    from boxqubo.oracles import brute_force_optimum

    x, value = brute_force_optimum(oracle)
    print(f"value,{value!r}")
    print("vector," + "".join(str(int(b)) for b in x))
    return 0


def cmd_report(args) -> int:
    sys.stdout.write(format_size_table(delimiter=args.delimiter))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boxqubo", description="Black-box optimization with QUBO surrogates.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("config", nargs="?", help="flat 'key = value' or .json config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")

    p = sub.add_parser("run", help="run one method over the configured instance seeds")
    add_config(p)
    p.add_argument("--out", help="output root (default: $BOXQUBO_OUTPUT_ROOT or ./runs)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="compare several methods on shared instances")
    add_config(p)
    p.add_argument("--methods", help="comma-separated method labels, e.g. box_qubo,regression_baseline")
    p.add_argument("--out", help="output root (default: $BOXQUBO_OUTPUT_ROOT or ./runs)")
    p.set_defaults(func=cmd_suite)

    for name, func, helptext in (
        ("encode", cmd_encode, "write the white-box QUBO of an instance"),
        ("optimum", cmd_optimum, "brute-force the optimum of an instance"),
    ):
        p = sub.add_parser(name, help=helptext)
        add_config(p)
        p.add_argument("--instance", help="DIMACS .cnf or edge-list file instead of a generated instance")
        p.add_argument("--seed", type=int, help="instance seed for generated instances")
        if name == "encode":
            p.add_argument("--out", required=True, help="output prefix; writes PREFIX.qubo and PREFIX.json")
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="print black-box vs white-box QUBO sizes")
    p.add_argument("--delimiter", default=",")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
