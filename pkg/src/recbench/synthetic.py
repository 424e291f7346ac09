"""Planted block-preference dataset generator for desk-scale checks.

Users and items are assigned to blocks round-robin; each user draws
20-40 interactions, picking an item from their own block unless a
noise draw sends them anywhere. Timestamps count up per user in draw
order. Fixed seed means byte-identical files; the block map is written
alongside as ground truth.
"""

import json
from pathlib import Path

import numpy as np

from .atomic import Frame, FieldType, SourceKind, write_atomic_file
from .errors import ConfigError


def generate_synthetic(out_dir, name: str = "synth", users: int = 200,
                       items: int = 100, blocks: int = 2,
                       noise: float = 0.1, seed: int = 0,
                       min_interactions: int = 20,
                       max_interactions: int = 40) -> Path:
    """Write <name>.inter and <name>.blocks.json; returns the inter path."""
    if not (users >= blocks >= 1 and items >= blocks):
        raise ConfigError("need users, items >= blocks >= 1")
    if not 0.0 <= noise <= 1.0:
        raise ConfigError("noise must be in [0, 1]")
    if not 1 <= min_interactions <= max_interactions:
        raise ConfigError("need 1 <= min_interactions <= max_interactions")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    # items of block b are those with index ≡ b (mod blocks)
    block_items = [np.arange(b, items, blocks) for b in range(blocks)]
    user_col: list[str] = []
    item_col: list[str] = []
    ts_col: list[float] = []
    for u in range(users):
        own = block_items[u % blocks]
        count = int(rng.integers(min_interactions, max_interactions + 1))
        for j in range(count):
            if float(rng.random()) >= noise:
                item = int(own[int(rng.integers(own.shape[0]))])
            else:
                item = int(rng.integers(items))
            user_col.append(f"u{u}")
            item_col.append(f"i{item}")
            ts_col.append(float(j))

    frame = Frame(
        SourceKind.INTER,
        {"user_id": FieldType.TOKEN, "item_id": FieldType.TOKEN,
         "timestamp": FieldType.FLOAT},
        {"user_id": np.array(user_col, object),
         "item_id": np.array(item_col, object),
         "timestamp": np.array(ts_col, np.float64)},
        len(user_col),
    )
    inter_path = out_dir / f"{name}.inter"
    write_atomic_file(frame, inter_path)
    block_map = {
        "users": {f"u{u}": u % blocks for u in range(users)},
        "items": {f"i{i}": i % blocks for i in range(items)},
        "blocks": blocks,
    }
    (out_dir / f"{name}.blocks.json").write_text(
        json.dumps(block_map, indent=1, sort_keys=True) + "\n",
        encoding="utf-8")
    return inter_path
