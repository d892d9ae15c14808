"""Command-line interface for the experiment harness.

Verbs: ``run``, ``sweep``, ``dump-latent``, ``bench list``, ``bench export``,
``validate``. Exit codes: 0 on success, 2 for configuration problems, 1 for
runtime failures; failures also print one machine-parsable JSON record to
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__, benchmarks, experiment
from .benchmarks import DEFAULT_N_INIT


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as err:
        raise experiment.ConfigError(
            f"--seeds expects comma-separated integers, got {text!r}", key="seeds"
        ) from err


def _parse_values(text: str) -> list:
    values = []
    for part in text.split(","):
        part = part.strip()
        if part == "":
            continue
        try:
            values.append(json.loads(part))
        except json.JSONDecodeError:
            values.append(part)
    return values


def _add_common(parser: argparse.ArgumentParser, *, config_required=True) -> None:
    parser.add_argument("--config", required=config_required, help="JSON config path")
    parser.add_argument("--seeds", help="comma-separated seed list, e.g. 0,1,2")
    parser.add_argument("--out", help="output root directory")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="set one config key (repeatable); values parse as JSON",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentbo",
        description="Pool-based Bayesian optimization with a collision-free latent space.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one multi-seed experiment")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="run one experiment per penalty value")
    _add_common(p_sweep)
    p_sweep.add_argument(
        "--param", required=True, choices=list(experiment.SWEEP_PARAMETERS)
    )
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated values, e.g. 0,10,1000"
    )

    p_dump = sub.add_parser("dump-latent", help="dump pool latents from a checkpoint")
    _add_common(p_dump)
    p_dump.add_argument("--checkpoint", required=True, help="checkpoint JSON path")

    p_bench = sub.add_parser("bench", help="benchmark utilities")
    bench_sub = p_bench.add_subparsers(dest="bench_verb", required=True)
    bench_sub.add_parser("list", help="list benchmark names with defaults")
    p_export = bench_sub.add_parser("export", help="export a labeled pool as CSV")
    p_export.add_argument("--name", required=True)
    p_export.add_argument("--size", type=int, default=2000)
    p_export.add_argument("--seed", type=int, default=0)
    p_export.add_argument("--dim", type=int, default=None)
    p_export.add_argument("--out", required=True, help="CSV file path")

    p_val = sub.add_parser("validate", help="check a config and print it resolved")
    _add_common(p_val)

    return parser


def _cmd_run(args) -> int:
    result = experiment.run_experiment(
        args.config,
        seeds=_parse_seeds(args.seeds) if args.seeds else None,
        out=args.out,
        overrides=args.override,
    )
    print(f"wrote {result.out_dir}")
    for seed in sorted(result.trace_paths):
        print(f"  {result.trace_paths[seed].name}")
    print(f"  {result.aggregate_path.name}")
    print(f"  {result.manifest_path.name}")
    if result.failures:
        for seed, msg in sorted(result.failures.items()):
            print(f"warning: seed {seed} failed: {msg}", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    result = experiment.sweep(
        args.config,
        args.param,
        _parse_values(args.values),
        seeds=_parse_seeds(args.seeds) if args.seeds else None,
        out=args.out,
        overrides=args.override,
    )
    print(f"wrote {result.out_dir}")
    for value, sub_run in zip(result.values, result.runs):
        print(f"  {args.param}={value}: {sub_run.out_dir.name}/aggregate.csv")
    return 0


def _cmd_dump(args) -> int:
    path = experiment.dump_latent(
        args.config, args.checkpoint, out_path=args.out, overrides=args.override
    )
    print(f"wrote {path}")
    return 0


def _cmd_bench(args) -> int:
    if args.bench_verb == "list":
        for name in benchmarks.benchmark_names():
            print(
                f"{name}\tdefault_dim={benchmarks.default_dim(name)}"
                f"\tdefault_n_init={DEFAULT_N_INIT[name]}"
            )
        return 0
    bench = benchmarks.make_pool(args.name, args.size, seed=args.seed, dim=args.dim)
    bench.export_csv(args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_validate(args) -> int:
    cfg = experiment.load_config(args.config, args.override)
    if args.seeds:
        cfg["seeds"] = _parse_seeds(args.seeds)
        experiment._check_key("seeds", cfg["seeds"])
    if args.out:
        cfg["out"] = args.out
    print(json.dumps(experiment._jsonable(cfg), indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "dump-latent": _cmd_dump,
    "bench": _cmd_bench,
    "validate": _cmd_validate,
}


def _error_record(err: Exception) -> str:
    record = {"error": type(err).__name__, "message": str(err)}
    if isinstance(err, experiment.ConfigError):
        record["key"] = err.key
        record["line"] = err.line
    return json.dumps(record)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except experiment.ConfigError as err:
        print(_error_record(err), file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(_error_record(err), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
