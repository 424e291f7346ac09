"""Shared builders for the test suite."""

import numpy as np
import pytest

from recbench.atomic import FieldType, Frame, SourceKind


def make_inter(users, items, timestamps=None) -> Frame:
    """Interaction frame from parallel id lists (ints or tokens)."""
    users = list(users)
    items = list(items)
    types = {"user_id": FieldType.TOKEN, "item_id": FieldType.TOKEN}
    cols = {
        "user_id": np.array(users, object),
        "item_id": np.array(items, object),
    }
    if timestamps is not None:
        types["timestamp"] = FieldType.FLOAT
        cols["timestamp"] = np.asarray(timestamps, np.float64)
    return Frame(SourceKind.INTER, types, cols, len(users))


def random_inter(rng: np.random.Generator, n_rows: int, n_users: int,
                 n_items: int, with_ts: bool = True) -> Frame:
    users = rng.integers(0, n_users, n_rows)
    items = rng.integers(0, n_items, n_rows)
    ts = rng.random(n_rows) * 1e6 if with_ts else None
    return make_inter([f"u{u}" for u in users],
                      [f"i{i}" for i in items], ts)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
