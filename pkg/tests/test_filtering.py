"""k-core filtering against a brute-force recount oracle."""

from collections import Counter

import numpy as np
import pytest

from recbench.errors import DataError, RelationIdOverflow
from recbench.filtering import (
    TripleSet,
    add_inverse_relations,
    k_core_filter,
    kg_core_filter,
    kg_core_filter_frame,
)
from recbench.atomic import FieldType, Frame, SourceKind

from conftest import make_inter, random_inter


def brute_force_core(users, items, k_user, k_item) -> list[int]:
    """Recount-and-drop until stable; the unique maximal fixpoint."""
    alive = list(range(len(users)))
    while True:
        u_deg = Counter(users[r] for r in alive)
        i_deg = Counter(items[r] for r in alive)
        keep = [r for r in alive
                if u_deg[users[r]] >= k_user and i_deg[items[r]] >= k_item]
        if len(keep) == len(alive):
            return keep
        alive = keep


def brute_force_kg_core(heads, rels, tails, k) -> list[int]:
    alive = list(range(len(heads)))
    while True:
        e_deg: Counter = Counter()
        r_deg: Counter = Counter()
        for x in alive:
            e_deg[heads[x]] += 1
            if tails[x] != heads[x]:
                e_deg[tails[x]] += 1
            r_deg[rels[x]] += 1
        keep = [x for x in alive
                if e_deg[heads[x]] >= k and e_deg[tails[x]] >= k
                and r_deg[rels[x]] >= k]
        if len(keep) == len(alive):
            return keep
        alive = keep


def test_matches_oracle_on_random_instances(rng):
    for trial in range(60):
        n = int(rng.integers(1, 200))
        inter = random_inter(rng, n, int(rng.integers(2, 20)),
                             int(rng.integers(2, 20)), with_ts=False)
        k_user = int(rng.integers(0, 5))
        k_item = int(rng.integers(0, 5))
        got = k_core_filter(inter, k_user, k_item)
        expect = brute_force_core(list(inter.columns["user_id"]),
                                  list(inter.columns["item_id"]),
                                  k_user, k_item)
        assert got.row_count == len(expect)
        assert list(got.columns["user_id"]) == [
            inter.columns["user_id"][r] for r in expect]
        assert list(got.columns["item_id"]) == [
            inter.columns["item_id"][r] for r in expect]


def test_idempotent(rng):
    inter = random_inter(rng, 300, 15, 15, with_ts=False)
    once = k_core_filter(inter, 3, 3)
    twice = k_core_filter(once, 3, 3)
    assert list(twice.columns["user_id"]) == list(once.columns["user_id"])
    assert list(twice.columns["item_id"]) == list(once.columns["item_id"])


def test_every_survivor_meets_threshold(rng):
    inter = random_inter(rng, 400, 25, 25, with_ts=False)
    out = k_core_filter(inter, 4, 2)
    u_deg = Counter(out.columns["user_id"])
    i_deg = Counter(out.columns["item_id"])
    assert all(c >= 4 for c in u_deg.values())
    assert all(c >= 2 for c in i_deg.values())


def test_k_zero_or_one_keeps_everything():
    inter = make_inter(["a", "a", "b"], ["x", "y", "x"])
    for k in (0, 1):
        out = k_core_filter(inter, k, k)
        assert out.row_count == 3


def test_preserves_row_order_and_extra_columns():
    inter = make_inter(["a", "b", "a", "b", "c"],
                       ["x", "x", "y", "y", "z"],
                       [5.0, 4.0, 3.0, 2.0, 1.0])
    out = k_core_filter(inter, 2, 2)
    assert list(out.columns["user_id"]) == ["a", "b", "a", "b"]
    assert list(out.columns["timestamp"]) == [5.0, 4.0, 3.0, 2.0]


def test_empty_and_missing_columns():
    empty = make_inter([], [])
    assert k_core_filter(empty, 2, 2).row_count == 0
    bad = Frame(SourceKind.INTER, {"user_id": FieldType.TOKEN},
                {"user_id": np.array(["a"], object)}, 1)
    with pytest.raises(DataError, match="item_id"):
        k_core_filter(bad, 1, 1)


def test_cascade_requires_iteration():
    # dropping u3's only row pushes i3 under k, which then kills u2's
    # second row and so u2 itself: a two-stage cascade
    inter = make_inter(
        ["u1", "u1", "u2", "u2", "u3"],
        ["i1", "i2", "i1", "i3", "i3"],
    )
    out = k_core_filter(inter, 2, 2)
    expect = brute_force_core(list(inter.columns["user_id"]),
                              list(inter.columns["item_id"]), 2, 2)
    assert out.row_count == len(expect)


def test_kg_core_matches_oracle(rng):
    for trial in range(40):
        n = int(rng.integers(1, 150))
        heads = rng.integers(0, 12, n)
        rels = rng.integers(0, 5, n)
        tails = rng.integers(0, 12, n)
        k = int(rng.integers(0, 4))
        got = kg_core_filter(TripleSet(heads, rels, tails), k)
        expect = brute_force_kg_core(list(heads), list(rels),
                                     list(tails), k)
        assert list(got.heads) == [heads[r] for r in expect]
        assert list(got.relations) == [rels[r] for r in expect]
        assert list(got.tails) == [tails[r] for r in expect]


def test_kg_self_loop_counts_once():
    # entity 0 only appears in a self-loop: degree 1, dies under k=2
    triples = TripleSet(
        np.array([0, 1, 2, 1, 2]),
        np.array([0, 0, 0, 0, 0]),
        np.array([0, 2, 1, 2, 1]),
    )
    out = kg_core_filter(triples, 2)
    assert list(out.heads) == [1, 2, 1, 2]


def test_kg_frame_variant_matches_triple_variant(rng):
    n = 80
    heads = [f"e{v}" for v in rng.integers(0, 10, n)]
    rels = [f"r{v}" for v in rng.integers(0, 4, n)]
    tails = [f"e{v}" for v in rng.integers(0, 10, n)]
    kg = Frame(
        SourceKind.KG,
        {"head_id": FieldType.TOKEN, "relation_id": FieldType.TOKEN,
         "tail_id": FieldType.TOKEN},
        {"head_id": np.array(heads, object),
         "relation_id": np.array(rels, object),
         "tail_id": np.array(tails, object)},
        n,
    )
    got = kg_core_filter_frame(kg, 3)
    expect = brute_force_kg_core(heads, rels, tails, 3)
    assert list(got.columns["head_id"]) == [heads[r] for r in expect]
    assert list(got.columns["tail_id"]) == [tails[r] for r in expect]


def test_kg_empty_frame():
    kg = Frame(
        SourceKind.KG,
        {"head_id": FieldType.TOKEN, "relation_id": FieldType.TOKEN,
         "tail_id": FieldType.TOKEN},
        {"head_id": np.array([], object),
         "relation_id": np.array([], object),
         "tail_id": np.array([], object)},
        0,
    )
    assert kg_core_filter_frame(kg, 2).row_count == 0


def test_inverse_relations_layout():
    triples = TripleSet(np.array([1, 2]), np.array([1, 2]),
                        np.array([3, 4]))
    out = add_inverse_relations(triples, relation_count=3)
    assert list(out.heads) == [1, 2, 3, 4]
    assert list(out.relations) == [1, 2, 4, 5]
    assert list(out.tails) == [3, 4, 1, 2]


def test_inverse_relations_overflow():
    triples = TripleSet(np.array([1]), np.array([5]), np.array([2]))
    with pytest.raises(RelationIdOverflow):
        add_inverse_relations(triples, relation_count=5)


def test_triples_length_mismatch():
    with pytest.raises(DataError):
        TripleSet(np.array([1, 2]), np.array([1]), np.array([2]))
