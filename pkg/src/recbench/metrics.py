"""Top-K ranking metrics over a full item ranking.

Scores come from a callable mapping a block of user ids to a
(len(block), n_items + 1) matrix (column 0 is the pad and is always
masked). Ranking ties break toward the lower item id, so metrics are
deterministic.
"""

import concurrent.futures
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

METRIC_NAMES = ("recall", "mrr", "ndcg", "hit", "precision")

_CHUNK = 256  # users scored per block; fixed so workers never change sums


@dataclass
class MetricReport:
    values: dict[str, float]
    users_evaluated: int
    users_skipped: int
    ks: tuple[int, ...] = field(default_factory=tuple)

    def to_text(self) -> str:
        lines = [
            f"users_evaluated\t{self.users_evaluated}",
            f"users_skipped\t{self.users_skipped}",
        ]
        for name in METRIC_NAMES:
            for k in self.ks:
                lines.append(f"{name}@{k}\t{self.values[f'{name}@{k}']:.10f}")
        return "\n".join(lines) + "\n"


def _chunk_sums(users, relevant, masked, score_fn, n_items, ks):
    max_k = max(ks)
    sums = {f"{n}@{k}": 0.0 for n in METRIC_NAMES for k in ks}
    scores = np.asarray(score_fn(np.asarray(users, np.int64)), np.float64)
    if scores.shape != (len(users), n_items + 1):
        raise DataError(
            f"scorer returned shape {scores.shape}, expected "
            f"{(len(users), n_items + 1)}"
        )
    if not scores.flags.writeable:
        scores = scores.copy()
    scores[:, 0] = -np.inf
    for row, u in enumerate(users):
        mask = masked.get(u)
        if mask is not None and len(mask):
            scores[row, mask] = -np.inf
    # stable argsort of negated scores: ties resolve to the lower id
    top = np.argsort(-scores, axis=1, kind="stable")[:, :max_k]
    width = top.shape[1]  # < max_k when the catalog is smaller than K
    for row, u in enumerate(users):
        rel = relevant[u]
        rel_set = set(int(i) for i in rel)
        is_rel = np.fromiter((int(i) in rel_set for i in top[row]),
                             bool, count=width)
        hits_at = np.cumsum(is_rel)
        first = int(np.argmax(is_rel)) + 1 if is_rel.any() else 0
        n_rel = len(rel_set)
        for k in ks:
            kk = min(k, width)
            hits = int(hits_at[kk - 1])
            sums[f"recall@{k}"] += hits / n_rel
            sums[f"precision@{k}"] += hits / k
            sums[f"hit@{k}"] += 1.0 if hits else 0.0
            sums[f"mrr@{k}"] += 1.0 / first if first and first <= kk \
                else 0.0
            dcg = sum(1.0 / math.log2(r + 1)
                      for r in range(1, kk + 1) if is_rel[r - 1])
            idcg = sum(1.0 / math.log2(r + 1)
                       for r in range(1, min(n_rel, k) + 1))
            sums[f"ndcg@{k}"] += dcg / idcg
    return sums


def evaluate_topk(score_fn, n_items: int, users, relevant: dict,
                  masked: dict, ks, workers: int = 1) -> MetricReport:
    """Average the five top-K metrics over users.

    users: candidate user ids; those without relevant items are
    skipped and counted. relevant/masked: per-user item-id arrays;
    masked ids are removed from the ranking (minus any overlap with
    the user's own relevant set, handled by the caller).
    """
    ks = tuple(sorted(set(int(k) for k in ks)))
    if not ks or ks[0] < 1:
        raise ConfigError("need at least one positive K")
    if n_items < 1:
        raise DataError("need at least one item to rank")
    users = list(users)
    evaluated = [u for u in users if len(relevant.get(u, ())) > 0]
    skipped = len(users) - len(evaluated)
    values = {f"{n}@{k}": 0.0 for n in METRIC_NAMES for k in ks}
    if not evaluated:
        return MetricReport(values, 0, skipped, ks)

    chunks = [evaluated[i:i + _CHUNK]
              for i in range(0, len(evaluated), _CHUNK)]
    if workers <= 1 or len(chunks) == 1:
        partials = [_chunk_sums(c, relevant, masked, score_fn, n_items, ks)
                    for c in chunks]
    else:
        with concurrent.futures.ThreadPoolExecutor(workers) as ex:
            partials = list(ex.map(
                lambda c: _chunk_sums(c, relevant, masked, score_fn,
                                      n_items, ks),
                chunks))
    # merge in chunk order so float accumulation is worker-independent
    for part in partials:
        for key, v in part.items():
            values[key] += v
    n_eval = len(evaluated)
    values = {k: v / n_eval for k, v in values.items()}
    return MetricReport(values, n_eval, skipped, ks)


def build_eval_sets(users_col, items_col, split, target: str = "test"
                    ) -> tuple[dict, dict]:
    """Per-user (relevant, masked) sets for ranking a target split.

    relevant = the user's items in the target split. masked = items in
    train (+ valid when targeting test) minus the user's own relevant
    items, so duplicated pairs stay retrievable.
    """
    if target not in ("valid", "test"):
        raise ConfigError(f"unknown evaluation target {target!r}")
    users_col = np.asarray(users_col, np.int64)
    items_col = np.asarray(items_col, np.int64)
    target_rows = split.test if target == "test" else split.valid
    mask_rows = [split.train] if target == "valid" \
        else [split.train, split.valid]

    relevant: dict[int, set] = {}
    for r in target_rows:
        relevant.setdefault(int(users_col[r]), set()).add(int(items_col[r]))
    masked: dict[int, set] = {}
    for rows in mask_rows:
        for r in rows:
            masked.setdefault(int(users_col[r]), set()).add(
                int(items_col[r]))
    rel_arr = {u: np.array(sorted(s), np.int64)
               for u, s in relevant.items()}
    mask_arr = {}
    for u, s in masked.items():
        s = s - relevant.get(u, set())
        if s:
            mask_arr[u] = np.array(sorted(s), np.int64)
    return rel_arr, mask_arr
