"""Split protocols and the two-stage dataloader.

Splits return row-index lists into the filtered interaction frame.
The loader separates index sampling (a seeded permutation cut into
batch_size blocks) from data collection (a collate function applied
per block, optionally on a thread pool, delivered in block order).
"""

import concurrent.futures
import enum
import math
from dataclasses import dataclass

import numpy as np

from .atomic import Frame
from .errors import ConfigError, DataError, MissingTimestamp
from .seeds import derive_rng


class SplitScheme(enum.Enum):
    RATIO = "ratio"
    LEAVE_ONE_OUT = "leave_one_out"


class SplitOrder(enum.Enum):
    TEMPORAL = "temporal"
    RANDOM = "random"


@dataclass(frozen=True)
class SplitSpec:
    scheme: SplitScheme
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    order: SplitOrder = SplitOrder.TEMPORAL

    def __post_init__(self):
        if self.scheme is SplitScheme.RATIO:
            if any(r <= 0 for r in self.ratios):
                raise ConfigError("split ratios must be positive")
            if abs(sum(self.ratios) - 1.0) > 1e-9:
                raise ConfigError(
                    f"split ratios must sum to 1, got {self.ratios}"
                )
        if (self.scheme is SplitScheme.LEAVE_ONE_OUT
                and self.order is not SplitOrder.TEMPORAL):
            raise ConfigError("leave-one-out requires temporal order")


@dataclass
class SplitResult:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int
    shuffle: bool
    epoch_seed: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


def _user_groups(inter: Frame) -> dict[int, list[int]]:
    if "user_id" not in inter.types:
        raise DataError("interaction frame lacks a user_id column")
    groups: dict[int, list[int]] = {}
    for row, u in enumerate(inter.columns["user_id"]):
        groups.setdefault(int(u) if not isinstance(u, str) else u,
                          []).append(row)
    return groups


def _ordered_rows(inter: Frame, rows: list[int], order: SplitOrder,
                  rng: np.random.Generator | None) -> np.ndarray:
    rows = np.asarray(rows, np.int64)
    if order is SplitOrder.TEMPORAL:
        if "timestamp" not in inter.types:
            raise MissingTimestamp(
                "temporal order requires a timestamp column"
            )
        ts = np.asarray(inter.columns["timestamp"], np.float64)[rows]
        # stable sort: equal timestamps keep file order
        return rows[np.argsort(ts, kind="stable")]
    return rows[rng.permutation(rows.shape[0])]


def ratio_split(inter: Frame, ratios, order: SplitOrder,
                seed: int) -> SplitResult:
    """Per-user ratio split.

    Each user's rows are ordered (by timestamp, or a seeded shuffle),
    then the first ceil(r_train*c) go to train, the next
    ceil(r_valid*c) (capped by what remains) to valid, and the rest to
    test. Users with fewer than 3 rows go entirely to train.
    """
    r_train, r_valid, r_test = ratios
    SplitSpec(SplitScheme.RATIO, (r_train, r_valid, r_test), order)
    rng = derive_rng(seed, "ratio-split") if order is SplitOrder.RANDOM \
        else None
    train: list[int] = []
    valid: list[int] = []
    test: list[int] = []
    for _, rows in _user_groups(inter).items():
        ordered = _ordered_rows(inter, rows, order, rng)
        c = ordered.shape[0]
        if c < 3:
            train.extend(ordered)
            continue
        n_train = math.ceil(r_train * c)
        n_valid = min(c - n_train, math.ceil(r_valid * c))
        train.extend(ordered[:n_train])
        valid.extend(ordered[n_train:n_train + n_valid])
        test.extend(ordered[n_train + n_valid:])
    return SplitResult(np.array(sorted(train), np.int64),
                       np.array(sorted(valid), np.int64),
                       np.array(sorted(test), np.int64))


def leave_one_out(inter: Frame) -> SplitResult:
    """Per user: newest row to test, second newest to valid, rest to
    train; 2 rows give train+test only; 1 row goes to train."""
    train: list[int] = []
    valid: list[int] = []
    test: list[int] = []
    for _, rows in _user_groups(inter).items():
        ordered = _ordered_rows(inter, rows, SplitOrder.TEMPORAL, None)
        c = ordered.shape[0]
        if c == 1:
            train.extend(ordered)
        elif c == 2:
            train.append(int(ordered[0]))
            test.append(int(ordered[1]))
        else:
            train.extend(ordered[:-2])
            valid.append(int(ordered[-2]))
            test.append(int(ordered[-1]))
    return SplitResult(np.array(sorted(train), np.int64),
                       np.array(sorted(valid), np.int64),
                       np.array(sorted(test), np.int64))


def split(inter: Frame, spec: SplitSpec, seed: int) -> SplitResult:
    if spec.scheme is SplitScheme.RATIO:
        return ratio_split(inter, spec.ratios, spec.order, seed)
    return leave_one_out(inter)


def _dataset_length(dataset) -> int:
    if isinstance(dataset, int):
        return dataset
    if hasattr(dataset, "row_count"):
        return dataset.row_count
    return len(dataset)


def index_blocks(dataset, plan: BatchPlan):
    """Stage 1: index blocks of batch_size from a seeded permutation
    (or range order when shuffle is off); the last block may be short."""
    n = _dataset_length(dataset)
    if n == 0:
        raise DataError("cannot iterate an empty dataset")
    if plan.shuffle:
        order = np.random.default_rng(plan.epoch_seed).permutation(n)
    else:
        order = np.arange(n, dtype=np.int64)
    for start in range(0, n, plan.batch_size):
        yield order[start:start + plan.batch_size]


def iterate_epoch(dataset, plan: BatchPlan, collate, workers: int = 1):
    """Stage 1 + stage 2: collate each index block; blocks may be
    collated on a thread pool but are always delivered in block order."""
    blocks = index_blocks(dataset, plan)
    if workers <= 1:
        for block in blocks:
            yield collate(block)
        return
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
        pending: list[concurrent.futures.Future] = []
        exhausted = False
        while True:
            while not exhausted and len(pending) < workers + 1:
                try:
                    block = next(blocks)
                except StopIteration:
                    exhausted = True
                    break
                pending.append(ex.submit(collate, block))
            if not pending:
                return
            yield pending.pop(0).result()
