"""Top-K metrics against an exhaustive first-principles reference."""

import math

import numpy as np
import pytest

from recbench.errors import ConfigError, DataError
from recbench.metrics import (
    METRIC_NAMES,
    MetricReport,
    build_eval_sets,
    evaluate_topk,
)
from recbench.pipeline import SplitResult


def reference_metrics(score_rows, relevant, masked, ks):
    """Independent implementation: explicit sort with (score desc, id
    asc) tie-break over item ids 1..n, then textbook formulas."""
    n_items = score_rows.shape[1] - 1
    totals = {f"{m}@{k}": 0.0 for m in METRIC_NAMES for k in ks}
    evaluated = 0
    for u, rel in relevant.items():
        rel_set = set(int(i) for i in rel)
        if not rel_set:
            continue
        evaluated += 1
        mask = set(int(i) for i in masked.get(u, []))
        keyed = []
        for item in range(1, n_items + 1):
            s = -math.inf if item in mask else float(score_rows[u, item])
            keyed.append((-s, item))
        keyed.sort()
        ranking = [item for _, item in keyed]
        for k in ks:
            top = ranking[:k]
            hits = sum(1 for i in top if i in rel_set)
            totals[f"recall@{k}"] += hits / len(rel_set)
            totals[f"precision@{k}"] += hits / k
            totals[f"hit@{k}"] += 1.0 if hits else 0.0
            rr = 0.0
            for rank, item in enumerate(top, start=1):
                if item in rel_set:
                    rr = 1.0 / rank
                    break
            totals[f"mrr@{k}"] += rr
            dcg = sum(1.0 / math.log2(rank + 1)
                      for rank, item in enumerate(top, start=1)
                      if item in rel_set)
            idcg = sum(1.0 / math.log2(rank + 1)
                       for rank in range(1, min(len(rel_set), k) + 1))
            totals[f"ndcg@{k}"] += dcg / idcg
    return {key: v / evaluated for key, v in totals.items()}, evaluated


def random_instance(rng, n_users, n_items):
    scores = rng.normal(size=(n_users + 1, n_items + 1))
    if rng.random() < 0.3:
        scores = np.round(scores)  # force score ties
    relevant = {}
    masked = {}
    for u in range(1, n_users + 1):
        k_rel = int(rng.integers(0, max(2, n_items // 3)))
        items = rng.choice(np.arange(1, n_items + 1),
                           min(k_rel, n_items), replace=False)
        if items.size:
            relevant[u] = np.sort(items)
        others = np.setdiff1d(np.arange(1, n_items + 1), items)
        m = int(rng.integers(0, max(1, others.size)))
        if m:
            masked[u] = np.sort(rng.choice(others, m, replace=False))
    return scores, relevant, masked


def test_matches_reference_on_random_instances(rng):
    for trial in range(150):
        n_users = int(rng.integers(1, 12))
        n_items = int(rng.integers(2, 50))
        scores, relevant, masked = random_instance(rng, n_users, n_items)
        if not relevant:
            continue
        ks = (5, 10)
        report = evaluate_topk(lambda us: scores[np.asarray(us)],
                               n_items, range(1, n_users + 1),
                               relevant, masked, ks)
        expect, evaluated = reference_metrics(scores, relevant, masked, ks)
        assert report.users_evaluated == evaluated
        for key, v in expect.items():
            assert report.values[key] == pytest.approx(v, abs=1e-9)


def test_single_relevant_at_rank_three():
    # items 1..10 scored descending by id; relevant = the 3rd best
    scores = np.array([[0.0] * 11,
                       [0.0] + list(range(10, 0, -1))], float)
    report = evaluate_topk(lambda us: scores[np.asarray(us)], 10, [1],
                           {1: np.array([3])}, {}, ks=(10,))
    assert report.values["ndcg@10"] == pytest.approx(0.5, abs=1e-12)
    assert report.values["mrr@10"] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert report.values["recall@10"] == 1.0
    assert report.values["hit@10"] == 1.0
    assert report.values["precision@10"] == pytest.approx(0.1)


def test_tie_breaks_to_lower_id():
    scores = np.zeros((2, 6))
    report = evaluate_topk(lambda us: scores[np.asarray(us)], 5, [1],
                           {1: np.array([1])}, {}, ks=(1,))
    assert report.values["hit@1"] == 1.0  # item 1 wins the all-tie
    report2 = evaluate_topk(lambda us: scores[np.asarray(us)], 5, [1],
                            {1: np.array([5])}, {}, ks=(1,))
    assert report2.values["hit@1"] == 0.0


def test_masked_items_are_unrankable():
    scores = np.zeros((2, 5))
    scores[1] = [0, 9.0, 5.0, 3.0, 1.0]
    report = evaluate_topk(lambda us: scores[np.asarray(us)], 4, [1],
                           {1: np.array([2])}, {1: np.array([1])},
                           ks=(1,))
    assert report.values["hit@1"] == 1.0  # top item 1 is masked away


def test_pad_column_never_ranks():
    scores = np.zeros((2, 4))
    scores[1, 0] = 100.0  # pad column has the best raw score
    report = evaluate_topk(lambda us: scores[np.asarray(us)], 3, [1],
                           {1: np.array([1])}, {}, ks=(1,))
    assert report.values["hit@1"] == 1.0


def test_users_without_relevant_are_skipped():
    scores = np.zeros((4, 4))
    report = evaluate_topk(lambda us: scores[np.asarray(us)], 3,
                           [1, 2, 3], {2: np.array([1])}, {}, ks=(2,))
    assert report.users_evaluated == 1
    assert report.users_skipped == 2
    empty = evaluate_topk(lambda us: scores[np.asarray(us)], 3,
                          [1, 3], {}, {}, ks=(2,))
    assert empty.users_evaluated == 0
    assert all(v == 0.0 for v in empty.values.values())


def test_worker_count_never_changes_sums(rng):
    n_users, n_items = 700, 30
    scores, relevant, masked = random_instance(rng, n_users, n_items)
    args = (n_items, range(1, n_users + 1), relevant, masked, (5, 10))
    base = evaluate_topk(lambda us: scores[np.asarray(us)], *args,
                         workers=1)
    for workers in (2, 4, 8):
        other = evaluate_topk(lambda us: scores[np.asarray(us)], *args,
                              workers=workers)
        assert other.values == base.values  # exact float equality


def test_rank_invariance_under_positive_affine(rng):
    n_users, n_items = 40, 25
    scores, relevant, masked = random_instance(rng, n_users, n_items)
    args = (n_items, range(1, n_users + 1), relevant, masked, (5,))
    base = evaluate_topk(lambda us: scores[np.asarray(us)], *args)
    scaled = evaluate_topk(lambda us: 7.25 * scores[np.asarray(us)] + 3.0,
                           *args)
    assert scaled.values == base.values


def test_report_text_layout():
    report = MetricReport(
        {"recall@5": 0.123456789012, "recall@10": 0.2,
         "mrr@5": 0.3, "mrr@10": 0.4, "ndcg@5": 0.5, "ndcg@10": 0.6,
         "hit@5": 0.7, "hit@10": 0.8, "precision@5": 0.9,
         "precision@10": 1.0},
        users_evaluated=3, users_skipped=1, ks=(5, 10))
    lines = report.to_text().splitlines()
    assert lines[0] == "users_evaluated\t3"
    assert lines[1] == "users_skipped\t1"
    assert lines[2] == "recall@5\t0.1234567890"
    assert lines[3] == "recall@10\t0.2000000000"
    assert lines[4].startswith("mrr@5\t")
    assert len(lines) == 12


def test_validation_errors():
    scores = np.zeros((2, 3))
    with pytest.raises(ConfigError):
        evaluate_topk(lambda us: scores, 2, [1], {1: np.array([1])}, {},
                      ks=())
    with pytest.raises(DataError):
        evaluate_topk(lambda us: np.zeros((1, 99)), 2, [1],
                      {1: np.array([1])}, {}, ks=(1,))
    with pytest.raises(DataError):
        evaluate_topk(lambda us: scores, 0, [1], {1: np.array([1])}, {},
                      ks=(1,))


def test_duplicate_ks_are_merged():
    scores = np.zeros((2, 4))
    report = evaluate_topk(lambda us: scores[np.asarray(us)], 3, [1],
                           {1: np.array([1])}, {}, ks=(3, 1, 3))
    assert report.ks == (1, 3)


def test_build_eval_sets_targets():
    users = np.array([1, 1, 1, 1, 2, 2])
    items = np.array([10, 11, 12, 10, 20, 21])
    result = SplitResult(train=np.array([0, 1, 4]),
                         valid=np.array([2, 5]),
                         test=np.array([3]))
    rel_v, mask_v = build_eval_sets(users, items, result, "valid")
    assert rel_v[1].tolist() == [12] and rel_v[2].tolist() == [21]
    assert mask_v[1].tolist() == [10, 11]  # train only
    assert mask_v[2].tolist() == [20]
    rel_t, mask_t = build_eval_sets(users, items, result, "test")
    assert rel_t == {1: pytest.approx([10])} or rel_t[1].tolist() == [10]
    # item 10 is also in train, but the user's own relevant set wins
    assert mask_t[1].tolist() == [11, 12]
    assert 2 not in rel_t
    with pytest.raises(ConfigError):
        build_eval_sets(users, items, result, "train")
