"""k-core filtering and inverse-relation augmentation.

Interaction filtering keeps the maximal subframe where every surviving
user has at least k_user rows and every surviving item at least k_item
rows. The knowledge-graph variant prunes entities (head-or-tail
membership per triple) and relations against a single k. Row order is
always preserved.
"""

from dataclasses import dataclass

import numpy as np

from .atomic import Frame
from .errors import DataError, RelationIdOverflow
from .kernels import k_core_mask, kg_core_mask


def _factorize(col) -> tuple[np.ndarray, int]:
    # dense codes in first-seen order; works for str and int columns
    codes = np.empty(len(col), np.int64)
    seen: dict = {}
    for i, v in enumerate(col):
        code = seen.get(v)
        if code is None:
            code = len(seen)
            seen[v] = code
        codes[i] = code
    return codes, len(seen)


def _require(frame: Frame, names: tuple[str, ...]) -> None:
    missing = [n for n in names if n not in frame.types]
    if missing:
        raise DataError(
            f"frame lacks required column(s): {', '.join(missing)}"
        )


def k_core_filter(inter: Frame, k_user: int, k_item: int) -> Frame:
    """Maximal (k_user, k_item)-core of an interaction frame."""
    _require(inter, ("user_id", "item_id"))
    if inter.row_count == 0:
        return inter.take(np.zeros(0, np.int64))
    u_codes, n_users = _factorize(inter.columns["user_id"])
    i_codes, n_items = _factorize(inter.columns["item_id"])
    mask = k_core_mask(u_codes, i_codes, n_users, n_items, k_user, k_item)
    return inter.take(np.flatnonzero(mask))


@dataclass
class TripleSet:
    """(head, relation, tail) id triples in file order."""

    heads: np.ndarray
    relations: np.ndarray
    tails: np.ndarray

    def __post_init__(self):
        if not (len(self.heads) == len(self.relations) == len(self.tails)):
            raise DataError("triple columns must have equal length")

    def __len__(self) -> int:
        return len(self.heads)

    @classmethod
    def from_frame(cls, frame: Frame) -> "TripleSet":
        _require(frame, ("head_id", "relation_id", "tail_id"))
        return cls(
            np.asarray(frame.columns["head_id"], np.int64),
            np.asarray(frame.columns["relation_id"], np.int64),
            np.asarray(frame.columns["tail_id"], np.int64),
        )


def kg_core_filter(triples: TripleSet, k: int) -> TripleSet:
    """Maximal triple subset where every surviving entity appears in at
    least k triples and every surviving relation labels at least k."""
    if len(triples) == 0:
        return triples
    n_entities = int(max(triples.heads.max(), triples.tails.max())) + 1
    n_relations = int(triples.relations.max()) + 1
    mask = kg_core_mask(triples.heads, triples.relations, triples.tails,
                        n_entities, n_relations, k)
    idx = np.flatnonzero(mask)
    return TripleSet(triples.heads[idx], triples.relations[idx],
                     triples.tails[idx])


def kg_core_filter_frame(kg: Frame, k: int) -> Frame:
    """Frame-level variant; token columns are factorized internally."""
    _require(kg, ("head_id", "relation_id", "tail_id"))
    if kg.row_count == 0:
        return kg.take(np.zeros(0, np.int64))
    ents = list(kg.columns["head_id"]) + list(kg.columns["tail_id"])
    ent_codes, n_entities = _factorize(ents)
    n = kg.row_count
    h_codes, t_codes = ent_codes[:n], ent_codes[n:]
    r_codes, n_relations = _factorize(kg.columns["relation_id"])
    mask = kg_core_mask(h_codes, r_codes, t_codes, n_entities, n_relations, k)
    return kg.take(np.flatnonzero(mask))


def add_inverse_relations(triples: TripleSet,
                          relation_count: int) -> TripleSet:
    """Append (tail, relation + relation_count, head) for every triple.

    Originals come first in their existing order, then the inverses in
    the same order. relation_count must cover every present relation id
    or augmented ids would collide with original ones.
    """
    if len(triples) and int(triples.relations.max()) >= relation_count:
        raise RelationIdOverflow(
            f"relation id {int(triples.relations.max())} >= declared "
            f"relation_count {relation_count}"
        )
    if relation_count < 0:
        raise RelationIdOverflow("relation_count must be nonnegative")
    inv_rel = triples.relations + relation_count
    return TripleSet(
        np.concatenate([triples.heads, triples.tails]),
        np.concatenate([triples.relations, inv_rel]),
        np.concatenate([triples.tails, triples.heads]),
    )
