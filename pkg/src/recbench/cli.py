"""Command-line entry point.

Subcommands: convert, filter, split, train, evaluate, tune, stats,
generate. Exit codes: 0 ok, 2 config error, 3 data error, 4 runtime
error; failures print a one-line JSON error record to stderr.
RECBENCH_LOG sets the log level.
"""

import argparse
import copy
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import tomlkit

from . import __version__
from .atomic import (
    Frame,
    SourceKind,
    infer_kind,
    parse_atomic_file,
    write_atomic_file,
)
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, RecbenchError
from .filtering import k_core_filter, kg_core_filter_frame
from .metrics import build_eval_sets, evaluate_topk
from .model import MfModel, TrainConfig, train_bpr
from .pipeline import split as split_frame
from .run import dataset_stats, load_dataset, remap_dataset, run_pipeline
from .sampling import SamplerSpec
from .synthetic import generate_synthetic
from .tuning import (
    SearchSpace,
    parse_space_file,
    run_tuning,
    write_trial_log,
)

log = logging.getLogger("recbench")

# search-space names the tuner may override, mapped into config sections
_TUNABLE = {
    "learning_rate": ("train", "learning_rate"),
    "l2_reg": ("train", "l2_reg"),
    "epochs": ("train", "epochs"),
    "embedding_size": ("train", "embedding_size"),
    "batch_size": ("loader", "batch_size"),
    "strategy": ("train_neg_sample_args", "strategy"),
    "alpha": ("train_neg_sample_args", "alpha"),
    "candidates": ("train_neg_sample_args", "candidates"),
    "per_positive": ("train_neg_sample_args", "per_positive"),
}


def _dataset_files(dataset_dir: Path, name: str) -> list[Path]:
    suffixes = (".inter", ".user", ".item", ".kg", ".link")
    files = [p for p in sorted(dataset_dir.glob(f"{name}.*"))
             if p.suffix in suffixes]
    if not files:
        raise DataError(f"no atomic files named {name}.* in {dataset_dir}")
    return files


def cmd_convert(args) -> None:
    out_dir = Path(args.output)
    files = _dataset_files(Path(args.dataset), args.name)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in files:
        frame = parse_atomic_file(path)
        write_atomic_file(frame, out_dir / path.name)
        log.info("converted %s (%d rows)", path.name, frame.row_count)
    print(f"converted {len(files)} file(s) to {out_dir}")


def cmd_filter(args) -> None:
    dataset_dir = Path(args.dataset)
    out_dir = Path(args.output)
    files = _dataset_files(dataset_dir, args.name)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in files:
        kind = infer_kind(path)
        frame = parse_atomic_file(path, kind)
        if kind is SourceKind.INTER:
            before = frame.row_count
            frame = k_core_filter(frame, args.k_user, args.k_item)
            print(f"{path.name}: {before} -> {frame.row_count} rows")
        elif kind is SourceKind.KG and args.kg_k is not None:
            before = frame.row_count
            frame = kg_core_filter_frame(frame, args.kg_k)
            if args.inverse_relations:
                frame = _augment_kg_tokens(frame)
            print(f"{path.name}: {before} -> {frame.row_count} rows")
        write_atomic_file(frame, out_dir / path.name)


def _augment_kg_tokens(kg: Frame) -> Frame:
    # token-level mirror of add_inverse_relations: append (t, inv_r, h)
    heads = list(kg.columns["head_id"])
    rels = list(kg.columns["relation_id"])
    tails = list(kg.columns["tail_id"])
    cols = {
        "head_id": np.array(heads + tails, object),
        "relation_id": np.array(rels + [f"inv_{r}" for r in rels], object),
        "tail_id": np.array(tails + heads, object),
    }
    return Frame(kg.source_kind, dict(kg.types), cols, 2 * kg.row_count)


def cmd_split(args) -> None:
    config = load_config(args.config, seed=args.seed, output=args.output,
                         workers=args.workers)
    inter = parse_atomic_file(
        Path(config.dataset_dir) / f"{config.dataset_name}.inter")
    if config.filter is not None:
        inter = k_core_filter(inter, config.filter.k_user,
                              config.filter.k_item)
    result = split_frame(inter, config.split, config.seed)
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    for part, rows in (("train", result.train), ("valid", result.valid),
                       ("test", result.test)):
        dest = out / f"{config.dataset_name}.{part}.inter"
        write_atomic_file(inter.take(rows), dest)
        print(f"{part}: {rows.shape[0]} rows -> {dest}")


def cmd_train(args) -> None:
    config = load_config(args.config, seed=args.seed, output=args.output,
                         workers=args.workers)
    result = run_pipeline(config)
    sys.stdout.write(result.report.to_text())
    print(f"outputs written to {config.output_dir}")


def cmd_evaluate(args) -> None:
    config = load_config(args.config, seed=args.seed, output=args.output,
                         workers=args.workers)
    model = MfModel.load(args.checkpoint)
    frames = load_dataset(config.dataset_dir, config.dataset_name)
    if config.filter is not None:
        frames[SourceKind.INTER] = k_core_filter(
            frames[SourceKind.INTER], config.filter.k_user,
            config.filter.k_item)
    remapped, maps = remap_dataset(frames)
    inter = remapped[SourceKind.INTER]
    n_users = maps["user_id"].size - 1
    n_items = maps["item_id"].size - 1
    if model.user_factors.shape[0] != n_users + 1 \
            or model.item_factors.shape[0] != n_items + 1:
        raise DataError(
            "checkpoint dimensions do not match the dataset "
            f"({model.user_factors.shape[0] - 1} users vs {n_users}, "
            f"{model.item_factors.shape[0] - 1} items vs {n_items})"
        )
    users_col = np.asarray(inter.columns["user_id"], np.int64)
    items_col = np.asarray(inter.columns["item_id"], np.int64)
    result = split_frame(inter, config.split, config.seed)
    relevant, masked = build_eval_sets(users_col, items_col, result,
                                       args.target)
    report = evaluate_topk(model.score_users, n_items,
                           range(1, n_users + 1), relevant, masked,
                           config.topk, config.eval_workers)
    sys.stdout.write(report.to_text())


def cmd_tune(args) -> None:
    config = load_config(args.config, seed=args.seed, output=args.output,
                         workers=args.workers)
    if config.tuner is None:
        raise ConfigError("config has no [tuner] section")
    space = parse_space_file(args.space)
    _check_tunable(space)
    metric = config.tuner.objective
    metric_k = int(metric.partition("@")[2])

    # the data pipeline is hyper-parameter independent: run it once
    frames = load_dataset(config.dataset_dir, config.dataset_name)
    if config.filter is not None:
        frames[SourceKind.INTER] = k_core_filter(
            frames[SourceKind.INTER], config.filter.k_user,
            config.filter.k_item)
    remapped, maps = remap_dataset(frames)
    inter = remapped[SourceKind.INTER]
    n_users = maps["user_id"].size - 1
    n_items = maps["item_id"].size - 1
    users_col = np.asarray(inter.columns["user_id"], np.int64)
    items_col = np.asarray(inter.columns["item_id"], np.int64)
    result = split_frame(inter, config.split, config.seed)
    if result.valid.shape[0] == 0:
        raise DataError("tuning needs a nonempty validation split")
    relevant, masked = build_eval_sets(users_col, items_col, result,
                                       "valid")
    train_users = users_col[result.train]
    train_items = items_col[result.train]

    def trial_fn(params: dict) -> float:
        train_cfg, _ = _apply_params(config, params)
        model, _ = train_bpr(train_users, train_items, n_users, n_items,
                             train_cfg)
        report = evaluate_topk(model.score_users, n_items,
                               range(1, n_users + 1), relevant, masked,
                               (metric_k,), workers=1)
        return report.values[metric]

    best, history = run_tuning(config.tuner, space, trial_fn)
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_trial_log(history, out / "trials.tsv")
    _write_best_config(config, best.params, out / "best_config.toml")
    done = sum(1 for r in history if r.objective is not None)
    print(f"trials: {len(history)} ({done} done), best trial "
          f"{best.trial_id}: {metric}={best.objective:.6f}")
    print(f"params: {json.dumps(best.params, sort_keys=True)}")
    print(f"log: {out / 'trials.tsv'}; replay: {out / 'best_config.toml'}")


def _check_tunable(space: SearchSpace) -> None:
    unknown = [p.name for p in space.params if p.name not in _TUNABLE]
    if unknown:
        raise ConfigError(
            f"search space names not tunable: {', '.join(unknown)}; "
            f"known: {', '.join(sorted(_TUNABLE))}"
        )


def _apply_params(config: RunConfig, params: dict
                  ) -> tuple[TrainConfig, SamplerSpec]:
    neg = {
        "strategy": config.sampler.strategy,
        "alpha": config.sampler.alpha,
        "candidates": config.sampler.dns_candidates,
        "per_positive": config.sampler.per_positive,
    }
    train = {
        "learning_rate": config.learning_rate,
        "l2_reg": config.l2_reg,
        "epochs": config.epochs,
        "embedding_size": config.d,
        "batch_size": config.loader_batch_size,
    }
    for name, value in params.items():
        section, key = _TUNABLE[name]
        if section == "train_neg_sample_args":
            neg[key] = value
        else:
            train[key] = value
    sampler = SamplerSpec(strategy=neg["strategy"],
                          alpha=float(neg["alpha"]),
                          dns_candidates=int(neg["candidates"]),
                          per_positive=int(neg["per_positive"]))
    train_cfg = TrainConfig(
        learning_rate=float(train["learning_rate"]),
        l2_reg=float(train["l2_reg"]),
        epochs=int(train["epochs"]),
        d=int(train["embedding_size"]),
        seed=config.seed,
        sampler=sampler,
        batch_size=int(train["batch_size"]),
    )
    return train_cfg, sampler


def _write_best_config(config: RunConfig, params: dict, path) -> None:
    resolved = copy.deepcopy(config.resolved)
    for name, value in params.items():
        section, key = _TUNABLE[name]
        resolved[section][key] = value
    resolved.pop("tuner", None)
    path.write_text(tomlkit.dumps(resolved), encoding="utf-8")


def cmd_stats(args) -> None:
    stats = dataset_stats(args.dataset, args.name)
    print(f"users\t{stats['users']}")
    print(f"items\t{stats['items']}")
    print(f"interactions\t{stats['interactions']}")
    print(f"sparsity\t{stats['sparsity']:.6f}")


def cmd_generate(args) -> None:
    path = generate_synthetic(
        args.output, name=args.name, users=args.users, items=args.items,
        blocks=args.blocks, noise=args.noise, seed=args.seed,
        min_interactions=args.min_interactions,
        max_interactions=args.max_interactions)
    print(f"wrote {path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recbench",
        description="Desk-scale recommender benchmarking engine.")
    parser.add_argument("--version", action="version",
                        version=f"recbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="TOML run config")
        p.add_argument("--seed", type=int, default=None,
                       help="override reproducibility.seed")
        p.add_argument("--workers", type=int, default=None,
                       help="cap for all worker pools")
        p.add_argument("--output", default=None,
                       help="override output.dir")

    p = sub.add_parser("convert",
                       help="validate and canonically rewrite atomic files")
    p.add_argument("--dataset", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("filter", help="k-core filter a dataset in place")
    p.add_argument("--dataset", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--k-user", type=int, required=True, dest="k_user")
    p.add_argument("--k-item", type=int, required=True, dest="k_item")
    p.add_argument("--kg-k", type=int, default=None, dest="kg_k")
    p.add_argument("--inverse-relations", action="store_true",
                   dest="inverse_relations")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("split", help="write train/valid/test inter files")
    common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train",
                       help="full run: filter, split, train, evaluate")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target", choices=("valid", "test"), default="test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="hyper-parameter search")
    common(p)
    p.add_argument("--space", required=True,
                   help="search-space file, one parameter per line")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("stats", help="dataset summary")
    p.add_argument("--dataset", required=True)
    p.add_argument("--name", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("generate", help="planted-block synthetic dataset")
    p.add_argument("--output", required=True)
    p.add_argument("--name", default="synth")
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--items", type=int, default=100)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-interactions", type=int, default=20,
                   dest="min_interactions")
    p.add_argument("--max-interactions", type=int, default=40,
                   dest="max_interactions")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("RECBENCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        _emit_error(exc)
        return 2
    except DataError as exc:
        _emit_error(exc)
        return 3
    except RecbenchError as exc:
        _emit_error(exc)
        return 4
    return 0


def _emit_error(exc: RecbenchError) -> None:
    record = {"error": type(exc).__name__, "message": str(exc),
              "stage": exc.stage}
    sys.stderr.write(json.dumps(record) + "\n")


if __name__ == "__main__":
    sys.exit(main())
