"""End-to-end run composition: load -> filter -> remap -> split ->
fit features -> train -> evaluate, with a manifest sufficient for
exact replay.

All randomness flows from the config seed through named derivations,
so reruns with the same (config, seed) produce byte-identical metric
reports and manifests up to wall-clock fields.
"""

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .atomic import (
    Frame,
    IdMap,
    SourceKind,
    infer_kind,
    parse_atomic_file,
    remap_tokens,
)
from .config import RunConfig
from .errors import DataError, RecbenchError
from .features import Method, encode_column, fit_discretizer, spec_to_text
from .filtering import (
    TripleSet,
    add_inverse_relations,
    k_core_filter,
    kg_core_filter_frame,
)
from .kernels import BACKEND
from .metrics import MetricReport, build_eval_sets, evaluate_topk
from .model import (
    MfModel,
    TrainConfig,
    popularity_baseline,
    train_bpr,
)
from .pipeline import SplitResult, split as split_frame
from .seeds import derive_seed

# shared id spaces: kg head/tail join the .link entity column
KG_ALIASES = {"head_id": "entity_id", "tail_id": "entity_id"}

_REMAP_ORDER = (SourceKind.INTER, SourceKind.USER, SourceKind.ITEM,
                SourceKind.LINK, SourceKind.KG)


def load_dataset(dataset_dir, name: str) -> dict[SourceKind, Frame]:
    """Parse every atomic file named <name>.<kind> in the directory."""
    dataset_dir = Path(dataset_dir)
    frames: dict[SourceKind, Frame] = {}
    for path in sorted(dataset_dir.glob(f"{name}.*")):
        if path.suffix == ".inter" or path.suffix in (
                ".user", ".item", ".kg", ".link"):
            kind = infer_kind(path)
            frames[kind] = parse_atomic_file(path, kind)
    if SourceKind.INTER not in frames:
        raise DataError(
            f"no {name}.inter file found under {dataset_dir}"
        )
    return frames


def remap_dataset(frames: dict[SourceKind, Frame]
                  ) -> tuple[dict[SourceKind, Frame], dict[str, IdMap]]:
    """Remap token columns with maps shared across files; the .inter
    frame goes first so its ids define the user/item vocabularies."""
    maps: dict[str, IdMap] = {}
    out: dict[SourceKind, Frame] = {}
    for kind in _REMAP_ORDER:
        if kind not in frames:
            continue
        alias = KG_ALIASES if kind is SourceKind.KG else None
        out[kind] = remap_tokens(frames[kind], maps, alias)
    return out, maps


@dataclass
class RunResult:
    manifest: dict
    report: MetricReport
    baseline_report: MetricReport
    model: MfModel
    split: SplitResult
    losses: list[float]


def _stage(manifest: dict, name: str, started: float) -> None:
    manifest["wall_clock"][name] = round(time.perf_counter() - started, 6)


def run_pipeline(config: RunConfig, write_outputs: bool = True) -> RunResult:
    """Execute the full benchmarking run described by the config."""
    manifest: dict = {
        "version": __version__,
        "backend": BACKEND,
        "config": config.resolved,
        "seeds": {"root": config.seed},
        "row_counts": {},
        "wall_clock": {},
        "feature_spec": [],
    }
    counts = manifest["row_counts"]

    t0 = time.perf_counter()
    stage = "load"
    try:
        frames = load_dataset(config.dataset_dir, config.dataset_name)
        counts["raw_interactions"] = frames[SourceKind.INTER].row_count
        _stage(manifest, "load", t0)

        stage = "filter"
        t0 = time.perf_counter()
        inter = frames[SourceKind.INTER]
        if config.filter is not None:
            inter = k_core_filter(inter, config.filter.k_user,
                                  config.filter.k_item)
            if config.filter.kg_k is not None \
                    and SourceKind.KG in frames:
                frames[SourceKind.KG] = kg_core_filter_frame(
                    frames[SourceKind.KG], config.filter.kg_k)
        frames[SourceKind.INTER] = inter
        counts["filtered_interactions"] = inter.row_count
        if inter.row_count == 0:
            raise DataError("no interactions survived filtering")
        _stage(manifest, "filter", t0)

        stage = "remap"
        t0 = time.perf_counter()
        remapped, maps = remap_dataset(frames)
        inter = remapped[SourceKind.INTER]
        n_users = maps["user_id"].size - 1
        n_items = maps["item_id"].size - 1
        counts["users"] = n_users
        counts["items"] = n_items
        if SourceKind.KG in remapped:
            kg = remapped[SourceKind.KG]
            counts["kg_triples"] = kg.row_count
            if config.filter is not None \
                    and config.filter.inverse_relations:
                # id space includes the pad at 0, so the id stride is
                # the full map size
                triples = TripleSet.from_frame(kg)
                aug = add_inverse_relations(triples,
                                            maps["relation_id"].size)
                counts["kg_triples_augmented"] = len(aug)
        _stage(manifest, "remap", t0)

        stage = "split"
        t0 = time.perf_counter()
        manifest["seeds"]["split"] = derive_seed(config.seed, "ratio-split")
        split_result = split_frame(inter, config.split, config.seed)
        counts["train"] = int(split_result.train.shape[0])
        counts["valid"] = int(split_result.valid.shape[0])
        counts["test"] = int(split_result.test.shape[0])
        if counts["train"] == 0:
            raise DataError("training split is empty")
        _stage(manifest, "split", t0)

        stage = "features"
        t0 = time.perf_counter()
        users_col = np.asarray(inter.columns["user_id"], np.int64)
        items_col = np.asarray(inter.columns["item_id"], np.int64)
        for fname, sub in sorted(config.numerical_features.items()):
            values = _feature_values(remapped, fname, split_result)
            spec = fit_discretizer(values, Method(sub["method"]),
                                   sub["buckets"])
            manifest["feature_spec"].append(spec_to_text(fname, spec))
            encode_column(spec, values)  # validates the fitted column
        _stage(manifest, "features", t0)

        stage = "train"
        t0 = time.perf_counter()
        train_cfg = TrainConfig(
            learning_rate=config.learning_rate,
            l2_reg=config.l2_reg,
            epochs=config.epochs,
            d=config.d,
            seed=config.seed,
            sampler=config.sampler,
            batch_size=config.loader_batch_size,
        )
        manifest["seeds"]["model"] = derive_seed(config.seed, "init")
        model, losses = train_bpr(
            users_col[split_result.train], items_col[split_result.train],
            n_users, n_items, train_cfg)
        manifest["losses"] = [round(x, 12) for x in losses]
        _stage(manifest, "train", t0)

        stage = "evaluate"
        t0 = time.perf_counter()
        relevant, masked = build_eval_sets(users_col, items_col,
                                           split_result, "test")
        users = range(1, n_users + 1)
        report = evaluate_topk(model.score_users, n_items, users,
                               relevant, masked, config.topk,
                               config.eval_workers)
        baseline = popularity_baseline(items_col[split_result.train],
                                       n_items)
        baseline_report = evaluate_topk(baseline.score_users, n_items,
                                        users, relevant, masked,
                                        config.topk, config.eval_workers)
        manifest["metrics"] = dict(sorted(report.values.items()))
        manifest["users_evaluated"] = report.users_evaluated
        manifest["users_skipped"] = report.users_skipped
        manifest["baseline_metrics"] = dict(
            sorted(baseline_report.values.items()))
        _stage(manifest, "evaluate", t0)
    except RecbenchError as exc:
        if exc.stage is None:
            exc.stage = stage
        raise

    if write_outputs:
        out = config.output_dir
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.txt").write_text(report.to_text(),
                                         encoding="utf-8")
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True) + "\n",
            encoding="utf-8")
        model.save(out / "model.rbmf")
    return RunResult(manifest, report, baseline_report, model,
                     split_result, losses)


def _feature_values(remapped: dict[SourceKind, Frame], fname: str,
                    split_result: SplitResult) -> np.ndarray:
    """Column values used to fit a feature spec. Interaction-frame
    fields are fit on the training rows only; side-frame fields have no
    split and use the whole column."""
    inter = remapped[SourceKind.INTER]
    if fname in inter.types:
        col = np.asarray(inter.columns[fname], np.float64)
        return col[split_result.train]
    for kind in (SourceKind.USER, SourceKind.ITEM):
        frame = remapped.get(kind)
        if frame is not None and fname in frame.types:
            return np.asarray(frame.columns[fname], np.float64)
    raise DataError(
        f"numerical feature {fname!r} not found in any dataset file"
    )


def dataset_stats(dataset_dir, name: str) -> dict:
    """#users, #items, #interactions and sparsity, post-remap."""
    frames = load_dataset(dataset_dir, name)
    remapped, maps = remap_dataset(frames)
    n_users = maps.get("user_id", IdMap()).size - 1
    n_items = maps.get("item_id", IdMap()).size - 1
    n_inter = remapped[SourceKind.INTER].row_count
    denom = n_users * n_items
    sparsity = 1.0 - n_inter / denom if denom else 0.0
    return {
        "users": n_users,
        "items": n_items,
        "interactions": n_inter,
        "sparsity": sparsity,
    }
