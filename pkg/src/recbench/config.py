"""TOML run configuration: parsing, total validation, defaulting.

The whole file is validated before any work happens; unknown keys are
rejected so typos fail loudly. load_config returns both typed specs
and the fully-defaulted plain dict that goes into the run manifest.
"""

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .metrics import METRIC_NAMES
from .pipeline import SplitOrder, SplitScheme, SplitSpec
from .sampling import SamplerSpec
from .transforms import PadLocation, TransformKind, TransformSpec
from .tuning import TunerSpec

_SECTIONS = ("dataset", "filter", "split", "loader", "transforms",
             "train", "train_neg_sample_args", "evaluation",
             "numerical_features", "reproducibility", "output", "tuner")


@dataclass(frozen=True)
class FilterSpec:
    k_user: int
    k_item: int
    kg_k: int | None = None
    inverse_relations: bool = False


@dataclass
class RunConfig:
    dataset_dir: Path
    dataset_name: str
    filter: FilterSpec | None
    split: SplitSpec
    loader_batch_size: int
    loader_shuffle: bool
    loader_workers: int
    transforms: list[TransformSpec]
    sampler: SamplerSpec
    learning_rate: float
    l2_reg: float
    epochs: int
    d: int
    topk: tuple[int, ...]
    eval_workers: int
    numerical_features: dict[str, dict]
    seed: int
    output_dir: Path
    tuner: TunerSpec | None
    resolved: dict = field(repr=False, default_factory=dict)


def _reject_unknown(table: dict, allowed, where: str) -> None:
    unknown = [k for k in table if k not in allowed]
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _need(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key {where}.{key}")
    return table[key]


def _typed(value, types, where: str):
    if types is float and isinstance(value, int) \
            and not isinstance(value, bool):
        value = float(value)
    ok = isinstance(value, types)
    if ok and isinstance(value, bool) and types is not bool:
        ok = False
    if not ok:
        raise ConfigError(f"{where} has wrong type: {value!r}")
    return value


def _parse_transforms(entries) -> list[TransformSpec]:
    if not isinstance(entries, list):
        raise ConfigError("transforms must be an array of tables")
    specs = []
    for pos, entry in enumerate(entries):
        where = f"transforms[{pos}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where} must be a table")
        kind_name = _typed(_need(entry, "kind", where), str,
                           f"{where}.kind")
        try:
            kind = TransformKind(kind_name)
        except ValueError:
            raise ConfigError(
                f"{where}.kind: unknown transform {kind_name!r}") from None
        if kind is TransformKind.MASK:
            _reject_unknown(entry, ("kind", "mask_ratio"), where)
            specs.append(TransformSpec(kind, mask_ratio=_typed(
                _need(entry, "mask_ratio", where), float,
                f"{where}.mask_ratio")))
        elif kind is TransformKind.PAD:
            _reject_unknown(entry, ("kind", "pad_location"), where)
            loc = _typed(_need(entry, "pad_location", where), str,
                         f"{where}.pad_location")
            try:
                specs.append(TransformSpec(kind,
                                           pad_location=PadLocation(loc)))
            except ValueError:
                raise ConfigError(
                    f"{where}.pad_location must be begin or end") from None
        elif kind is TransformKind.CROP:
            _reject_unknown(entry, ("kind", "crop_ratio"), where)
            specs.append(TransformSpec(kind, crop_ratio=_typed(
                _need(entry, "crop_ratio", where), float,
                f"{where}.crop_ratio")))
        elif kind is TransformKind.REORDER:
            _reject_unknown(entry, ("kind", "reorder_ratio"), where)
            specs.append(TransformSpec(kind, reorder_ratio=_typed(
                _need(entry, "reorder_ratio", where), float,
                f"{where}.reorder_ratio")))
        else:
            raise ConfigError(
                f"{where}: user_defined transforms cannot be configured "
                f"from a file")
    for pos, spec in enumerate(specs):
        if spec.kind is TransformKind.PAD and pos != len(specs) - 1:
            raise ConfigError("pad transform must be last in the pipeline")
    return specs


def _parse_numerical(table: dict) -> dict[str, dict]:
    out = {}
    for fname, sub in table.items():
        where = f"numerical_features.{fname}"
        if not isinstance(sub, dict):
            raise ConfigError(f"{where} must be a table")
        method = _typed(_need(sub, "method", where), str, f"{where}.method")
        if method not in ("field_embedding", "equal_distance", "logarithm"):
            raise ConfigError(f"{where}.method: unknown method {method!r}")
        if method == "equal_distance":
            _reject_unknown(sub, ("method", "buckets"), where)
            buckets = _typed(_need(sub, "buckets", where), int,
                             f"{where}.buckets")
            if buckets < 1:
                raise ConfigError(f"{where}.buckets must be >= 1")
            out[fname] = {"method": method, "buckets": buckets}
        else:
            _reject_unknown(sub, ("method",), where)
            out[fname] = {"method": method, "buckets": 0}
    return out


def _parse_objective(text: str) -> str:
    name, sep, k = text.partition("@")
    if not sep or name not in METRIC_NAMES or not k.isdigit() \
            or int(k) < 1:
        raise ConfigError(
            f"tuner objective must look like ndcg@10, got {text!r}")
    return text


def load_config(path, seed: int | None = None, output: str | None = None,
                workers: int | None = None) -> RunConfig:
    """Parse and fully validate a run config; CLI flags override the
    seed, output directory, and worker counts."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    _reject_unknown(data, _SECTIONS, "config")

    dataset = _need(data, "dataset", "config")
    _reject_unknown(dataset, ("dir", "name"), "dataset")
    dataset_dir = Path(_typed(_need(dataset, "dir", "dataset"), str,
                              "dataset.dir"))
    dataset_name = _typed(_need(dataset, "name", "dataset"), str,
                          "dataset.name")

    filter_spec = None
    if "filter" in data:
        filt = data["filter"]
        _reject_unknown(filt, ("k_user", "k_item", "kg_k",
                               "inverse_relations"), "filter")
        k_user = _typed(_need(filt, "k_user", "filter"), int,
                        "filter.k_user")
        k_item = _typed(_need(filt, "k_item", "filter"), int,
                        "filter.k_item")
        if k_user < 0 or k_item < 0:
            raise ConfigError("k-core thresholds must be >= 0")
        kg_k = None
        if "kg_k" in filt:
            kg_k = _typed(filt["kg_k"], int, "filter.kg_k")
            if kg_k < 0:
                raise ConfigError("filter.kg_k must be >= 0")
        inverse = _typed(filt.get("inverse_relations", False), bool,
                         "filter.inverse_relations")
        filter_spec = FilterSpec(k_user, k_item, kg_k, inverse)

    split_tbl = data.get("split", {})
    _reject_unknown(split_tbl, ("scheme", "ratios", "order"), "split")
    scheme_name = _typed(split_tbl.get("scheme", "ratio"), str,
                         "split.scheme")
    try:
        scheme = SplitScheme(scheme_name)
    except ValueError:
        raise ConfigError(f"split.scheme: unknown scheme {scheme_name!r}") \
            from None
    ratios = split_tbl.get("ratios", [0.8, 0.1, 0.1])
    if (not isinstance(ratios, list) or len(ratios) != 3
            or not all(isinstance(r, (int, float))
                       and not isinstance(r, bool) for r in ratios)):
        raise ConfigError("split.ratios must be three numbers")
    order_name = _typed(split_tbl.get("order", "temporal"), str,
                        "split.order")
    try:
        order = SplitOrder(order_name)
    except ValueError:
        raise ConfigError(f"split.order: unknown order {order_name!r}") \
            from None
    split_spec = SplitSpec(scheme, tuple(float(r) for r in ratios), order)

    loader = data.get("loader", {})
    _reject_unknown(loader, ("batch_size", "shuffle", "workers"), "loader")
    batch_size = _typed(loader.get("batch_size", 256), int,
                        "loader.batch_size")
    shuffle = _typed(loader.get("shuffle", True), bool, "loader.shuffle")
    loader_workers = _typed(loader.get("workers", 1), int, "loader.workers")
    if batch_size < 1 or loader_workers < 1:
        raise ConfigError("loader batch_size and workers must be >= 1")

    transforms = _parse_transforms(data.get("transforms", []))

    train = data.get("train", {})
    _reject_unknown(train, ("learning_rate", "l2_reg", "epochs",
                            "embedding_size"), "train")
    learning_rate = _typed(train.get("learning_rate", 0.05), float,
                           "train.learning_rate")
    l2_reg = _typed(train.get("l2_reg", 1e-4), float, "train.l2_reg")
    epochs = _typed(train.get("epochs", 30), int, "train.epochs")
    d = _typed(train.get("embedding_size", 16), int,
               "train.embedding_size")
    if learning_rate <= 0 or l2_reg < 0 or epochs < 1 or d < 1:
        raise ConfigError("invalid train section values")

    neg = data.get("train_neg_sample_args", {})
    _reject_unknown(neg, ("strategy", "alpha", "candidates",
                          "per_positive"), "train_neg_sample_args")
    sampler = SamplerSpec(
        strategy=_typed(neg.get("strategy", "rns"), str,
                        "train_neg_sample_args.strategy"),
        alpha=_typed(neg.get("alpha", 0.0), float,
                     "train_neg_sample_args.alpha"),
        dns_candidates=_typed(neg.get("candidates", 1), int,
                              "train_neg_sample_args.candidates"),
        per_positive=_typed(neg.get("per_positive", 1), int,
                            "train_neg_sample_args.per_positive"),
    )

    evaluation = data.get("evaluation", {})
    _reject_unknown(evaluation, ("topk", "workers"), "evaluation")
    topk = evaluation.get("topk", [10])
    if (not isinstance(topk, list) or not topk
            or not all(isinstance(k, int) and not isinstance(k, bool)
                       and k >= 1 for k in topk)):
        raise ConfigError("evaluation.topk must be a list of positive ints")
    eval_workers = _typed(evaluation.get("workers", 1), int,
                          "evaluation.workers")
    if eval_workers < 1:
        raise ConfigError("evaluation.workers must be >= 1")

    numerical = _parse_numerical(data.get("numerical_features", {}))

    repro = data.get("reproducibility", {})
    _reject_unknown(repro, ("seed",), "reproducibility")
    cfg_seed = _typed(repro.get("seed", 42), int, "reproducibility.seed")

    out_tbl = data.get("output", {})
    _reject_unknown(out_tbl, ("dir",), "output")
    out_dir = Path(_typed(out_tbl.get("dir", "runs"), str, "output.dir"))

    tuner_spec = None
    if "tuner" in data:
        tuner = data["tuner"]
        _reject_unknown(tuner, ("strategy", "max_trials", "objective",
                                "gamma", "n_candidates"), "tuner")
        strategy = _typed(_need(tuner, "strategy", "tuner"), str,
                          "tuner.strategy")
        max_trials = tuner.get("max_trials")
        if max_trials is not None:
            max_trials = _typed(max_trials, int, "tuner.max_trials")
        objective = _parse_objective(_typed(
            tuner.get("objective", "ndcg@10"), str, "tuner.objective"))
        tuner_spec = TunerSpec(
            strategy=strategy,
            max_trials=max_trials,
            seed=cfg_seed if seed is None else seed,
            workers=workers if workers is not None else 1,
            objective=objective,
            gamma=_typed(tuner.get("gamma", 0.25), float, "tuner.gamma"),
            n_candidates=_typed(tuner.get("n_candidates", 24), int,
                                "tuner.n_candidates"),
        )

    final_seed = cfg_seed if seed is None else int(seed)
    final_out = out_dir if output is None else Path(output)
    if workers is not None:
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        loader_workers = workers
        eval_workers = workers

    resolved = {
        "dataset": {"dir": str(dataset_dir), "name": dataset_name},
        "split": {"scheme": scheme.value,
                  "ratios": list(split_spec.ratios),
                  "order": order.value},
        "loader": {"batch_size": batch_size, "shuffle": shuffle,
                   "workers": loader_workers},
        "transforms": [
            {"kind": t.kind.value, "mask_ratio": t.mask_ratio,
             "pad_location": t.pad_location.value,
             "crop_ratio": t.crop_ratio,
             "reorder_ratio": t.reorder_ratio}
            for t in transforms],
        "train": {"learning_rate": learning_rate, "l2_reg": l2_reg,
                  "epochs": epochs, "embedding_size": d},
        "train_neg_sample_args": {
            "strategy": sampler.strategy, "alpha": sampler.alpha,
            "candidates": sampler.dns_candidates,
            "per_positive": sampler.per_positive},
        "evaluation": {"topk": list(topk), "workers": eval_workers},
        "numerical_features": numerical,
        "reproducibility": {"seed": final_seed},
        "output": {"dir": str(final_out)},
    }
    if filter_spec is not None:
        resolved["filter"] = {
            "k_user": filter_spec.k_user, "k_item": filter_spec.k_item,
            "inverse_relations": filter_spec.inverse_relations}
        if filter_spec.kg_k is not None:
            resolved["filter"]["kg_k"] = filter_spec.kg_k
    if tuner_spec is not None:
        resolved["tuner"] = {
            "strategy": tuner_spec.strategy,
            "max_trials": tuner_spec.max_trials,
            "objective": tuner_spec.objective,
            "gamma": tuner_spec.gamma,
            "n_candidates": tuner_spec.n_candidates}

    return RunConfig(
        dataset_dir=dataset_dir,
        dataset_name=dataset_name,
        filter=filter_spec,
        split=split_spec,
        loader_batch_size=batch_size,
        loader_shuffle=shuffle,
        loader_workers=loader_workers,
        transforms=transforms,
        sampler=sampler,
        learning_rate=learning_rate,
        l2_reg=l2_reg,
        epochs=epochs,
        d=d,
        topk=tuple(topk),
        eval_workers=eval_workers,
        numerical_features=numerical,
        seed=final_seed,
        output_dir=final_out,
        tuner=tuner_spec,
        resolved=resolved,
    )
