"""Command-line benchmark runner.

Subcommands:

* ``bench run``       train/evaluate model variants over seeded splits
* ``bench stats``     dataset statistics (sizes, classes, homophily)
* ``bench selftest``  dataset-free oracle, gradient and determinism checks
* ``bench convert``   convert public dataset mirrors to the canonical layout

Flags may also come from a flat ``key = value`` config file via
``--config``; explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .batching import DatasetContext
from .bench import (
    BenchError,
    ExperimentPlan,
    emit_report,
    read_config_file,
    run_benchmark,
)
from .data import DataError, dataset_report, load_dataset

__all__ = ["main"]

_KNOWN_DATASETS = (
    "cora", "citeseer", "pubmed", "chameleon", "actor",
    "cornell", "texas", "wisconsin",
)

# --config file keys -> (argparse dest, converter)
_CONFIG_KEYS = {
    "dataset": ("dataset", str),
    "data_dir": ("data_dir", str),
    "model": ("model", str),
    "de": ("de", str),
    "k": ("k", int),
    "hops": ("hops", int),
    "seeds": ("seeds", int),
    "profile": ("profile", str),
    "out": ("out", str),
    "jobs": ("jobs", int),
    "budget": ("budget", int),
    "cache": ("cache", lambda v: v.lower() not in ("0", "false", "no")),
    "lr": ("lr", float),
    "hidden": ("hidden", int),
    "layers": ("layers", int),
    "dropout": ("dropout", float),
    "weight_decay": ("weight_decay", float),
    "epochs": ("epochs", int),
    "patience": ("patience", int),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Node-classification benchmarks with structural features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark")
    run.add_argument("--config", help="flat key = value config file; flags override")
    run.add_argument("--dataset", help="dataset name under the data directory")
    run.add_argument("--data-dir", dest="data_dir", default="data")
    run.add_argument(
        "--model",
        default="M1",
        help="preset M1..M8, or a comma-separated list (e.g. M1,M2,M5)",
    )
    run.add_argument("--de", choices=["spd", "rw"], default="spd")
    run.add_argument("--k", type=int, default=3)
    run.add_argument("--hops", type=int, default=None)
    run.add_argument("--seeds", type=int, default=10)
    run.add_argument("--profile", choices=["default", "search"], default="default")
    run.add_argument("--budget", type=int, default=20, help="search trials")
    run.add_argument("--out", default="results")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--cache", dest="cache", action="store_true", default=True)
    run.add_argument(
        "--no-cache",
        dest="cache",
        action="store_false",
        help="recompute subgraphs/features per run instead of sharing them",
    )
    run.add_argument("--lr", type=float, default=None)
    run.add_argument("--hidden", type=int, default=None)
    run.add_argument("--layers", type=int, default=None)
    run.add_argument("--dropout", type=float, default=None)
    run.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    run.add_argument("--epochs", type=int, default=None)
    run.add_argument("--patience", type=int, default=None)
    run.add_argument("--quiet", action="store_true")

    stats = sub.add_parser("stats", help="dataset statistics")
    stats.add_argument("--dataset", default="all")
    stats.add_argument("--data-dir", dest="data_dir", default="data")

    selftest = sub.add_parser("selftest", help="oracle/gradient/determinism suites")
    selftest.add_argument("--quick", action="store_true", help="smaller random sweeps")

    convert = sub.add_parser("convert", help="convert public mirrors to canonical files")
    convert.add_argument("--content", help=".content file (citation networks)")
    convert.add_argument("--cites", help=".cites file (citation networks)")
    convert.add_argument("--json", dest="json_path", help="JSON mirror file")
    convert.add_argument("--name", default="dataset")
    convert.add_argument("--out", required=True)
    return parser


def _apply_config_file(argv: list[str], parser: argparse.ArgumentParser) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    defaults = {}
    for key, raw in read_config_file(path).items():
        if key not in _CONFIG_KEYS:
            raise BenchError(f"{path}: unknown config key {key!r}")
        dest, convert = _CONFIG_KEYS[key]
        defaults[dest] = convert(raw)
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        action.choices["run"].set_defaults(**defaults)


def _overrides(args) -> tuple:
    pairs = []
    for key, attr in (
        ("learning_rate", "lr"),
        ("hidden_dim", "hidden"),
        ("num_layers", "layers"),
        ("dropout", "dropout"),
        ("weight_decay", "weight_decay"),
        ("max_epochs", "epochs"),
        ("patience", "patience"),
    ):
        value = getattr(args, attr)
        if value is not None:
            pairs.append((key, value))
    return tuple(pairs)


def _cmd_run(args) -> int:
    if not args.dataset:
        print("error: --dataset is required for 'bench run'", file=sys.stderr)
        return 2
    dataset = load_dataset(args.dataset, args.data_dir)
    models = [m.strip().upper() for m in args.model.split(",") if m.strip()]
    context = DatasetContext(dataset.graph) if args.cache else None
    results = []
    out_dir = Path(args.out)
    for model in models:
        de = args.de if model in ("M1", "M2", "M3") else None
        plan = ExperimentPlan(
            dataset=args.dataset,
            model=model,
            de=de,
            k=args.k,
            hops=args.hops,
            num_seeds=args.seeds,
            profile=args.profile,
            search_budget=args.budget,
            overrides=_overrides(args),
        )
        result = run_benchmark(
            plan,
            dataset,
            context=context,
            share_cache=args.cache,
            n_jobs=args.jobs,
            out_dir=out_dir,
        )
        results.append(result)
        if not args.quiet:
            print(
                f"{result.model:>8s} on {result.dataset}: "
                f"{100 * result.mean:.2f} +/- {100 * result.stdev:.2f} "
                f"({result.accuracies.size} seeds)"
            )
    csv_path, txt_path = emit_report(results, out_dir)
    _write_run_logs(results, out_dir)
    if not args.quiet:
        print(f"wrote {csv_path} and {txt_path}")
    return 0


def _write_run_logs(results, out_dir: Path) -> None:
    if not results:
        return
    num_seeds = max(len(r.logs) for r in results)
    for seed in range(num_seeds):
        with open(out_dir / f"run-{seed}.log", "w", encoding="utf-8", newline="\n") as fh:
            for r in results:
                if seed < len(r.logs):
                    fh.write(r.logs[seed])
                    fh.write("\n")


def _cmd_stats(args) -> int:
    base = Path(args.data_dir)
    if args.dataset == "all":
        names = [n for n in _KNOWN_DATASETS if (base / n).is_dir()]
        names += sorted(
            p.name
            for p in base.iterdir()
            if p.is_dir() and p.name not in _KNOWN_DATASETS
        ) if base.is_dir() else []
    else:
        names = [args.dataset]
    if not names:
        print(f"no datasets found under {base}", file=sys.stderr)
        return 1
    header = f"{'dataset':<12s}{'nodes':>8s}{'edges':>9s}{'features':>10s}{'classes':>9s}{'homophily':>11s}"
    print(header)
    for name in names:
        try:
            report = dataset_report(load_dataset(name, base))
        except DataError as exc:
            print(f"{name:<12s}  error: {exc}", file=sys.stderr)
            continue
        print(
            f"{report['name']:<12s}{report['num_nodes']:>8d}{report['num_edges']:>9d}"
            f"{report['num_features']:>10d}{report['num_classes']:>9d}"
            f"{report['homophily_ratio']:>11.3f}"
        )
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_all

    checks = run_all(quick=args.quick)
    failed = 0
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"[{status}] {check.name}: {check.detail}")
        failed += 0 if check.passed else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


def _cmd_convert(args) -> int:
    from .data import convert_content_cites, convert_json_mirror

    if args.json_path:
        dataset = convert_json_mirror(args.json_path, args.out, name=args.name)
    elif args.content and args.cites:
        dataset = convert_content_cites(args.content, args.cites, args.out, name=args.name)
    else:
        print("error: pass either --json, or both --content and --cites", file=sys.stderr)
        return 2
    report = dataset_report(dataset)
    print(
        f"wrote {args.out}: {report['num_nodes']} nodes, {report['num_edges']} edges, "
        f"{report['num_features']} features, {report['num_classes']} classes"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        _apply_config_file(argv, parser)
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "stats":
            return _cmd_stats(args)
        if args.command == "selftest":
            return _cmd_selftest(args)
        if args.command == "convert":
            return _cmd_convert(args)
        parser.error(f"unknown command {args.command!r}")
    except (BenchError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
