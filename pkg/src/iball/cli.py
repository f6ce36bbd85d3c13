"""Command-line entry point wiring the pipeline stages.

Every subcommand takes ``--config`` (TOML) plus optional ``--set
section.key=value`` overrides and reads/writes fixed-name artifacts in the
configured workdir: ``examples.csv``, ``partition.tsv``, ``domains.json``,
``model.bin``, ``report.csv``/``report.json``, ``heatmap.csv``,
``predictions.csv``, and a ``config.json`` echo of the resolved settings.

Exit codes: 0 success, 1 validation error, 2 numeric error, 3 I/O error.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation, ingest, model_io, models
from .config import load_config, write_config_echo
from .domains import (
    DomainGraph,
    DomainPartition,
    build_knn_graph,
    domain_adjacency,
    partition_balanced,
    read_partition,
    write_partition,
)
from .errors import NumericError, ValidationError
from .kernel import KernelParams

COMMANDS = ("ingest", "partition", "fit", "update", "predict", "bench", "heatmap")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="iball", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the TOML config")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a config value",
        )
        if name == "update":
            p.add_argument("--batch", required=True, help="examples file with new samples")
        if name == "predict":
            p.add_argument("--input", required=True, help="examples file to predict")
    return parser


def _hp(cfg):
    return models.Hyperparams(
        cfg.theta, cfg.lam, cfg.rank, KernelParams(sigma=cfg.sigma)
    )


def _normalizer(cfg):
    return ingest.Normalizer(cfg.normalization, scale=cfg.normalization_scale)


def _ingest_examples(cfg):
    with open(cfg.corpus, "r", encoding="utf-8") as fh:
        parsed = ingest.parse_corpus(fh)
    records, _ = ingest.build_series(parsed.entries, cfg.kind)
    return ingest.make_examples(
        records,
        eligibility=(cfg.year_min, cfg.year_max),
        normalizer=_normalizer(cfg),
        corpus_end_year=cfg.corpus_end,
    )


def _workdir(cfg):
    wd = Path(cfg.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _features_of(examples):
    return np.array([e.features for e in examples]).reshape(len(examples), 3)


def _load_domains(wd):
    with open(wd / "domains.json", "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    centroids = np.asarray(doc["centroids"], dtype=float)
    adjacency = DomainGraph(np.asarray(doc["adjacency"], dtype=float))
    return centroids, adjacency


def _schedule(cfg, examples, assignments):
    return ingest.split_stream(
        examples,
        assignments,
        cfg.n_domains,
        cfg.initial_fraction,
        cfg.step_fraction,
        cfg.test_fraction,
    )


def _partition_stage(cfg, wd):
    examples, _ = ingest.read_examples(wd / "examples.csv")
    graph = build_knn_graph(_features_of(examples), cfg.knn_k)
    partition = partition_balanced(graph, cfg.n_domains, cfg.seed)
    write_partition(wd / "partition.tsv", partition, [e.id for e in examples])
    ingest.write_examples(wd / "examples.csv", examples, partition.assignments)
    adjacency = domain_adjacency(partition.centroids, cfg.sigma)
    with open(wd / "domains.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "centroids": partition.centroids.tolist(),
                "sizes": partition.sizes.tolist(),
                "adjacency": adjacency.adjacency.tolist(),
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    return partition, adjacency


def _train_pool(schedule):
    """Initial set plus every batch, merged per domain."""
    xs = [f.copy() for f in schedule.initial_features]
    ys = [t.copy() for t in schedule.initial_targets]
    for batch in schedule.batches:
        for dom in range(schedule.n_domains):
            if batch.features[dom].shape[0]:
                xs[dom] = np.vstack([xs[dom], batch.features[dom]])
                ys[dom] = np.concatenate([ys[dom], batch.targets[dom]])
    return xs, ys


def _fit_stage(cfg, wd):
    examples, assignments = ingest.read_examples(wd / "examples.csv")
    if (assignments < 0).any():
        raise ValidationError("examples are not partitioned; run the partition stage")
    _, adjacency = _load_domains(wd)
    schedule = _schedule(cfg, examples, assignments)
    xs, ys = _train_pool(schedule)
    hp = _hp(cfg)
    method = cfg.method
    if method == "iball-fast":
        system = models.assemble_kernel_system(xs, ys, adjacency, hp)
        model = models.fit_fast_initial(system, hp)
    elif method == "iball-kernel":
        model = models.fit_closed_form(models.assemble_kernel_system(xs, ys, adjacency, hp))
    elif method == "iball-linear":
        model = models.fit_closed_form(models.assemble_linear_system(xs, ys, adjacency, hp))
    else:
        model = models.fit_baseline(method, xs, ys, hp, normalizer=_normalizer(cfg))
    model_io.save_model(wd / "model.bin", model, hp, method=method)
    return model


def _grouped_batch(examples, assignments, n_domains):
    feats, targs = [], []
    arr_f = _features_of(examples)
    arr_y = np.array([e.label for e in examples])
    assignments = np.asarray(assignments, dtype=int)
    for dom in range(n_domains):
        idx = np.where(assignments == dom)[0]
        feats.append(arr_f[idx])
        targs.append(arr_y[idx])
    return models.StreamBatch(tuple(feats), tuple(targs))


def _cmd_ingest(cfg, wd, args):
    examples = _ingest_examples(cfg)
    ingest.write_examples(wd / "examples.csv", examples)
    print(f"wrote {len(examples)} examples to {wd / 'examples.csv'}")


def _cmd_partition(cfg, wd, args):
    partition, _ = _partition_stage(cfg, wd)
    print(f"partitioned into {partition.n_domains} domains: sizes {partition.sizes.tolist()}")


def _cmd_fit(cfg, wd, args):
    _fit_stage(cfg, wd)
    print(f"fitted {cfg.method}; snapshot at {wd / 'model.bin'}")


def _cmd_update(cfg, wd, args):
    model, hp, method = model_io.load_model(wd / "model.bin")
    if method != "iball-fast":
        raise ValidationError("incremental update requires a fast-model snapshot")
    centroids, adjacency = _load_domains(wd)
    new_examples, new_assign = ingest.read_examples(args.batch)
    new_assign = np.asarray(new_assign, dtype=int)
    if (new_assign < 0).any():
        new_assign = models.route_domains(_features_of(new_examples), centroids)
    batch = _grouped_batch(new_examples, new_assign, len(model.features))
    model = models.update_fast(model, batch, adjacency, hp)
    model_io.save_model(wd / "model.bin", model, hp, method=method)
    print(f"updated fast model with {batch.total} samples")


def _cmd_predict(cfg, wd, args):
    model, hp, method = model_io.load_model(wd / "model.bin")
    centroids, _ = _load_domains(wd)
    examples, _ = ingest.read_examples(args.input)
    feats = _features_of(examples)
    doms = models.route_domains(feats, centroids)
    preds = models.predict_many(model, feats, doms)
    out = wd / "predictions.csv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("id,prediction\n")
        for ex, p in zip(examples, preds):
            fh.write(f"{ex.id},{float(p)!r}\n")
    print(f"wrote {len(examples)} predictions to {out}")


def _cmd_bench(cfg, wd, args):
    examples = _ingest_examples(cfg)
    ingest.write_examples(wd / "examples.csv", examples)
    partition, adjacency = _partition_stage(cfg, wd)
    schedule = _schedule(cfg, examples, partition.assignments)
    report = evaluation.run_streaming_benchmark(
        schedule,
        cfg.methods,
        _hp(cfg),
        partition,
        adjacency,
        normalizer=_normalizer(cfg),
        config=cfg.to_dict(),
    )
    evaluation.write_report(wd / "report.csv", wd / "report.json", report)
    print(f"benchmark over {len(report.steps)} steps written to {wd / 'report.csv'}")


def _cmd_heatmap(cfg, wd, args):
    model, hp, _ = model_io.load_model(wd / "model.bin")
    examples, assignments = ingest.read_examples(wd / "examples.csv")
    centroids, _ = _load_domains(wd)
    schedule = _schedule(cfg, examples, assignments)
    doms = models.route_domains(schedule.test_features, centroids)
    preds = models.predict_many(model, schedule.test_features, doms)
    matrix = evaluation.heatmap_bins(preds, schedule.test_targets)
    evaluation.write_heatmap(wd / "heatmap.csv", matrix)
    print(f"heatmap written to {wd / 'heatmap.csv'}")


_HANDLERS = {
    "ingest": _cmd_ingest,
    "partition": _cmd_partition,
    "fit": _cmd_fit,
    "update": _cmd_update,
    "predict": _cmd_predict,
    "bench": _cmd_bench,
    "heatmap": _cmd_heatmap,
}


def dispatch(argv):
    """Run one pipeline stage; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = load_config(args.config, args.overrides)
        wd = _workdir(cfg)
        write_config_echo(wd / "config.json", cfg)
        _HANDLERS[args.command](cfg, wd, args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


def main():
    argv = sys.argv[1:]
    threads = os.environ.get("IBALL_THREADS")
    if threads:
        try:
            from threadpoolctl import threadpool_limits
        except ImportError:
            threadpool_limits = None
        if threadpool_limits is not None:
            with threadpool_limits(limits=int(threads)):
                sys.exit(dispatch(argv))
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
