"""Command-line interface: graph checks, ordering search, simulation,
imputation, and full bias-table experiments.

Subcommands: ``check``, ``order``, ``simulate``, ``impute``, ``experiment``.
``check`` exits 0 (identifiable), 1 (not identifiable) or 2 (parse error).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import impute as imp
from . import simulate as sim
from .identify import (
    find_decomposable_ordering,
    full_law_identifiable,
    target_law_factorization,
    verify_ordering,
)
from .mdgraph import GraphParseError, MissingDataGraph, parse_graph
from .stats import bias_table, default_statistics, pool, summarize

METHOD_ORDER = ("mi", "miri", "cca", "aca", "plugin", "decomp")
METHOD_LABELS = {
    "mi": "MI",
    "miri": "MIRI",
    "cca": "CCA",
    "aca": "ACA",
    "plugin": "plugin",
    "decomp": "decompMI",
}
# spawn keys for per-method RNG streams; >= 100 to avoid colliding with the
# children spawned inside simulate_dataset
_METHOD_STREAM = {"mi": 101, "miri": 102, "decomp": 103, "plugin": 104}


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    example: int | None = None
    graph: str | None = None
    sem: str | None = None
    responses: str | None = None
    n: int = 200_000
    seed: int = 20240811
    methods: tuple[str, ...] = METHOD_ORDER
    m: int = 5
    iters: int = 5
    draws: int | None = None
    ordering: tuple[str, ...] | None = None
    prune: bool = False
    out: str = "experiment"
    jobs: int = 1

    def __post_init__(self) -> None:
        unknown = [m for m in self.methods if m not in METHOD_ORDER]
        if unknown:
            raise ExperimentError(f"unknown methods {unknown}")
        if self.example is None and not (self.graph and self.sem and self.responses):
            raise ExperimentError(
                "need either an example id or graph+sem+responses files"
            )
        for path in (self.graph, self.sem, self.responses):
            if path and not Path(path).exists():
                raise ExperimentError(f"file not found: {path}")
        if "decomp" not in self.methods and "plugin" not in self.methods:
            return

    @classmethod
    def from_file(cls, path: str, **overrides) -> "ExperimentConfig":
        doc = yaml.safe_load(Path(path).read_text()) or {}
        if "methods" in doc:
            doc["methods"] = tuple(doc["methods"])
        if "ordering" in doc and doc["ordering"] is not None:
            doc["ordering"] = tuple(doc["ordering"])
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**doc)


def _load_spec(config: ExperimentConfig) -> sim.ExampleSpec:
    if config.example is not None:
        return sim.load_example_spec(config.example)
    graph = parse_graph(Path(config.graph).read_text())
    sem = sim.SemSpec.from_mapping(yaml.safe_load(Path(config.sem).read_text()))
    resp = sim.ResponseSpec.from_mapping(
        yaml.safe_load(Path(config.responses).read_text())
    )
    sem.validate_against(graph)
    resp.validate_against(graph)
    return sim.ExampleSpec("custom", graph, sem, resp)


def _stream(seed: int, key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(key,))


def _certificate(config: ExperimentConfig, g: MissingDataGraph):
    """Resolve the ordering for decomp/plugin, or raise with a diagnosis."""
    if config.ordering is not None:
        cert = verify_ordering(g, config.ordering)
        if not cert.valid:
            raise ExperimentError(
                f"ordering {'<'.join(config.ordering)} is not admissible; "
                "failing independence checks: "
                + "; ".join(str(c) for c in cert.failing())
            )
        return cert
    cert = find_decomposable_ordering(g)
    if cert is None:
        decision = full_law_identifiable(g)
        detail = (
            "full law identifiable"
            if decision.identifiable
            else "full law not identifiable: "
            + "; ".join(str(w) for w in decision.witnesses)
        )
        raise ExperimentError(
            f"no admissible ordering for decomposable imputation ({detail})"
        )
    return cert


def _run_method(method, config, g, dataset, statistics):
    if method == "mi":
        completed = imp.impute_chained(
            dataset, m=config.m, iters=config.iters,
            seed=_stream(config.seed, _METHOD_STREAM[method]),
        )
        return pool([summarize(c.columns, statistics) for c in completed])
    if method == "miri":
        completed = imp.impute_miri(
            dataset, m=config.m, iters=config.iters,
            seed=_stream(config.seed, _METHOD_STREAM[method]),
        )
        return pool([summarize(c.columns, statistics) for c in completed])
    if method == "decomp":
        cert = _certificate(config, g)
        terms = target_law_factorization(g, cert, prune=config.prune)
        completed = imp.impute_decomposable(
            dataset, cert, terms, m=config.m,
            seed=_stream(config.seed, _METHOD_STREAM[method]),
        )
        return pool([summarize(c.columns, statistics) for c in completed])
    if method == "plugin":
        cert = _certificate(config, g)
        terms = target_law_factorization(g, cert, prune=config.prune)
        draws = config.draws if config.draws is not None else dataset.n
        synthetic = imp.plug_in_target_law(
            dataset, terms, draws, seed=_stream(config.seed, _METHOD_STREAM[method])
        )
        return summarize(synthetic, statistics)
    if method == "cca":
        return summarize(imp.complete_cases(dataset), statistics)
    if method == "aca":
        subsets = imp.available_cases(dataset, statistics)
        return {
            stat: summarize(cols, [stat])[stat] for stat, cols in subsets.items()
        }
    raise ExperimentError(f"unknown method {method!r}")


def run_experiment(config: ExperimentConfig):
    """Simulate, run the requested estimators, and build the bias table."""
    spec = _load_spec(config)
    dataset, _ = sim.simulate_dataset(spec, config.n, config.seed)
    statistics = default_statistics(spec.graph.substantive)
    truth = sim.truth_statistics(spec.sem, spec.graph)
    requested = [m for m in METHOD_ORDER if m in config.methods]

    def run(method):
        return method, _run_method(method, config, spec.graph, dataset, statistics)

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool_:
            results = dict(pool_.map(run, requested))
    else:
        results = dict(run(method) for method in requested)
    labelled = {METHOD_LABELS[m]: results[m] for m in requested}
    return bias_table(truth, labelled, methods=[METHOD_LABELS[m] for m in requested])


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- subcommands ---------------------------------------------------------------


def _cmd_check(args) -> int:
    try:
        g = parse_graph(Path(args.graph).read_text())
    except (OSError, GraphParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    decision = full_law_identifiable(g)
    if decision.identifiable:
        print("full law: identifiable")
        return 0
    print("full law: NOT identifiable")
    for witness in decision.witnesses:
        print(f"  {witness}")
    return 1


def _cmd_order(args) -> int:
    try:
        g = parse_graph(Path(args.graph).read_text())
    except (OSError, GraphParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    cert = find_decomposable_ordering(g, max_vars=args.max_vars)
    if cert is None:
        print("no admissible ordering for decomposable imputation")
        return 1
    print("ordering: " + " < ".join(cert.ordering))
    for check in cert.checks:
        print(f"  holds: {check}")
    print("target-law factorization:")
    for term in target_law_factorization(g, cert, prune=args.prune):
        print(f"  {term}")
    return 0


def _cmd_simulate(args) -> int:
    config = ExperimentConfig(
        example=args.example, graph=args.graph, sem=args.sem,
        responses=args.responses, n=args.n, seed=args.seed,
    )
    spec = _load_spec(config)
    dataset, values = sim.simulate_dataset(spec, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(
        out.with_suffix(".csv"), dataset.to_frame().to_csv(index=False, na_rep="")
    )
    import pandas as pd

    _atomic_write(
        Path(f"{out}_truth.csv"), pd.DataFrame(values).to_csv(index=False)
    )
    meta = {"n": args.n, "seed": args.seed, "spec_hash": spec.spec_hash,
            "spec": spec.name}
    _atomic_write(Path(f"{out}_meta.json"), json.dumps(meta, indent=2) + "\n")
    print(f"wrote {out.with_suffix('.csv')} ({dataset.n} rows)")
    return 0


def _cmd_impute(args) -> int:
    config = ExperimentConfig(
        example=args.example, graph=args.graph, sem=args.sem,
        responses=args.responses, n=args.n, seed=args.seed,
        methods=(args.method,) if args.method != "aca" else ("mi",),
        m=args.m, iters=args.iters, draws=args.draws,
        ordering=tuple(args.ordering.split(",")) if args.ordering else None,
        prune=args.prune,
    )
    if args.method == "aca":
        print(
            "error: available-case analysis yields per-statistic row subsets, "
            "not a completed dataset; use the experiment command",
            file=sys.stderr,
        )
        return 1
    spec = _load_spec(config)
    if args.data:
        dataset = sim.read_dataset_csv(args.data, spec.graph)
    else:
        dataset, _ = sim.simulate_dataset(spec, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    import pandas as pd

    def write(frame_dict, path):
        _atomic_write(path, pd.DataFrame(frame_dict).to_csv(index=False))

    method_seed = _stream(args.seed, _METHOD_STREAM.get(args.method, 105))
    if args.method in ("mi", "miri"):
        fn = imp.impute_chained if args.method == "mi" else imp.impute_miri
        completed = fn(dataset, m=args.m, iters=args.iters, seed=method_seed)
        for c in completed:
            write(c.columns, Path(f"{out}_m{c.index}.csv"))
        print(f"wrote {len(completed)} completed datasets to {out}_m*.csv")
    elif args.method == "decomp":
        cert = _certificate(config, spec.graph)
        terms = target_law_factorization(spec.graph, cert, prune=args.prune)
        completed = imp.impute_decomposable(
            dataset, cert, terms, m=args.m, seed=method_seed
        )
        for c in completed:
            write(c.columns, Path(f"{out}_m{c.index}.csv"))
        print(f"wrote {len(completed)} completed datasets to {out}_m*.csv")
    elif args.method == "plugin":
        cert = _certificate(config, spec.graph)
        terms = target_law_factorization(spec.graph, cert, prune=args.prune)
        draws = args.draws if args.draws is not None else dataset.n
        synthetic = imp.plug_in_target_law(dataset, terms, draws, seed=method_seed)
        write(synthetic, Path(f"{out}_plugin.csv"))
        print(f"wrote {draws} synthetic rows to {out}_plugin.csv")
    elif args.method == "cca":
        write(imp.complete_cases(dataset), Path(f"{out}_cca.csv"))
        print(f"wrote complete cases to {out}_cca.csv")
    return 0


def _cmd_experiment(args) -> int:
    overrides = dict(
        example=args.example, n=args.n, seed=args.seed,
        methods=tuple(args.methods.split(",")) if args.methods else None,
        m=args.m, iters=args.iters, draws=args.draws,
        ordering=tuple(args.ordering.split(",")) if args.ordering else None,
        prune=args.prune or None, out=args.out, jobs=args.jobs,
        graph=args.graph, sem=args.sem, responses=args.responses,
    )
    try:
        if args.config:
            config = ExperimentConfig.from_file(args.config, **overrides)
        else:
            config = ExperimentConfig(
                **{k: v for k, v in overrides.items() if v is not None}
            )
        table = run_experiment(config)
    except (ExperimentError, GraphParseError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    out = Path(config.out)
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(out.with_suffix(".csv"), table.to_csv_text())
    _atomic_write(out.with_suffix(".md"), table.to_markdown_text())
    print(table.to_markdown_text(), end="")
    print(f"wrote {out.with_suffix('.csv')} and {out.with_suffix('.md')}")
    return 0


def _add_spec_args(parser, with_data=False):
    parser.add_argument("--example", type=int, help="built-in example id (1-4)")
    parser.add_argument("--graph", help="graph description file")
    parser.add_argument("--sem", help="structural-model YAML file")
    parser.add_argument("--responses", help="response-model YAML file")
    if with_data:
        parser.add_argument("--data", help="observed-data CSV (skips simulation)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dagimpute",
        description="Identifiability checks and imputation experiments for "
        "graphical missing-data models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="decide full-law identifiability")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("order", help="search for a decomposable-imputation ordering")
    p.add_argument("--graph", required=True)
    p.add_argument("--prune", action="store_true",
                   help="prune factorization conditioning sets by d-separation")
    p.add_argument("--max-vars", type=int, default=None,
                   help="hard cap on the number of ordered variables")
    p.set_defaults(func=_cmd_order)

    p = sub.add_parser("simulate", help="simulate an observed dataset")
    _add_spec_args(p)
    p.add_argument("--n", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=20240811)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("impute", help="run one imputation method")
    _add_spec_args(p, with_data=True)
    p.add_argument("--method", required=True, choices=METHOD_ORDER)
    p.add_argument("--n", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=20240811)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--ordering", help="comma-separated ordering for decomp/plugin")
    p.add_argument("--prune", action="store_true")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=_cmd_impute)

    p = sub.add_parser("experiment", help="reproduce a bias table")
    p.add_argument("--config", help="experiment YAML config file")
    _add_spec_args(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--methods", help="comma-separated subset of "
                   + ",".join(METHOD_ORDER))
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--ordering", help="comma-separated ordering for decomp/plugin")
    p.add_argument("--prune", action="store_true")
    p.add_argument("--jobs", type=int, default=None,
                   help="run independent methods concurrently")
    p.add_argument("--out", default=None, help="output prefix")
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ExperimentError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
