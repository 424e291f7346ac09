"""Dataloader-stage sequence augmentations.

Mask, pad, crop, and reorder operate on bare item-id sequences and are
pure given an explicit Generator, so batches can be transformed in
parallel with per-batch derived seeds. A pipeline applies specs left
to right; padding, when present, must come last.
"""

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptySequence,
    PadNotLast,
    SequenceTooLong,
)

PAD_ID = 0


class PadLocation(enum.Enum):
    BEGIN = "begin"
    END = "end"


class TransformKind(enum.Enum):
    MASK = "mask"
    PAD = "pad"
    CROP = "crop"
    REORDER = "reorder"
    USER_DEFINED = "user_defined"


@dataclass(frozen=True)
class ItemSequence:
    items: np.ndarray
    max_len: int

    def __post_init__(self):
        items = np.asarray(self.items, np.int64)
        object.__setattr__(self, "items", items)
        if items.ndim != 1 or items.shape[0] == 0:
            raise EmptySequence("item sequence must hold at least one item")
        if items.shape[0] > self.max_len:
            raise SequenceTooLong(
                f"sequence of length {items.shape[0]} exceeds max_len "
                f"{self.max_len}"
            )
        if np.any(items == PAD_ID):
            raise DataError("sequences must not contain the pad id 0")

    def __len__(self) -> int:
        return int(self.items.shape[0])


@dataclass(frozen=True)
class TransformSpec:
    kind: TransformKind
    mask_ratio: float = 0.0
    pad_location: PadLocation = PadLocation.END
    crop_ratio: float = 0.0
    reorder_ratio: float = 0.0
    fn: Callable | None = None

    def __post_init__(self):
        if self.kind is TransformKind.MASK and not 0 < self.mask_ratio <= 1:
            raise ConfigError("mask_ratio must be in (0, 1]")
        if self.kind is TransformKind.CROP and not 0 < self.crop_ratio <= 1:
            raise ConfigError("crop_ratio must be in (0, 1]")
        if (self.kind is TransformKind.REORDER
                and not 0 < self.reorder_ratio <= 1):
            raise ConfigError("reorder_ratio must be in (0, 1]")
        if self.kind is TransformKind.USER_DEFINED and self.fn is None:
            raise ConfigError("user_defined transform needs a callable")


def mask_item_sequence(seq: ItemSequence, ratio: float,
                       rng: np.random.Generator, vocab_size: int
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Replace max(1, floor(ratio*len)) uniformly chosen positions by
    the mask id (vocab_size, one past the largest item id).

    Returns (masked items, ascending masked positions, original items
    at those positions).
    """
    if not 0 < ratio <= 1:
        raise ConfigError("mask ratio must be in (0, 1]")
    n = len(seq)
    n_mask = max(1, math.floor(ratio * n))
    positions = np.sort(rng.choice(n, size=n_mask, replace=False))
    masked = seq.items.copy()
    targets = masked[positions].copy()
    masked[positions] = vocab_size
    return masked, positions.astype(np.int64), targets


def flexible_pad(seq: ItemSequence, location: PadLocation) -> np.ndarray:
    """Pad to max_len with id 0 at the chosen side, order preserved."""
    n = len(seq)
    if n > seq.max_len:
        raise SequenceTooLong(f"{n} items exceed max_len {seq.max_len}")
    out = np.full(seq.max_len, PAD_ID, np.int64)
    if location is PadLocation.BEGIN:
        out[seq.max_len - n:] = seq.items
    else:
        out[:n] = seq.items
    return out


def crop_item_sequence(seq: ItemSequence, eta: float,
                       rng: np.random.Generator) -> ItemSequence:
    """Contiguous window of length max(1, floor(eta*len)), uniform start."""
    if not 0 < eta <= 1:
        raise ConfigError("crop ratio must be in (0, 1]")
    n = len(seq)
    length = max(1, math.floor(eta * n))
    start = int(rng.integers(0, n - length + 1))
    return ItemSequence(seq.items[start:start + length].copy(), seq.max_len)


def reorder_item_sequence(seq: ItemSequence, beta: float,
                          rng: np.random.Generator) -> ItemSequence:
    """Shuffle a contiguous segment of length max(1, floor(beta*len))
    at a uniform start; everything outside the segment is untouched."""
    if not 0 < beta <= 1:
        raise ConfigError("reorder ratio must be in (0, 1]")
    n = len(seq)
    length = max(1, math.floor(beta * n))
    start = int(rng.integers(0, n - length + 1))
    out = seq.items.copy()
    out[start:start + length] = out[start:start + length][
        rng.permutation(length)]
    return ItemSequence(out, seq.max_len)


def apply_pipeline(seq: ItemSequence, specs: list[TransformSpec],
                   rng: np.random.Generator, vocab_size: int = 0) -> dict:
    """Apply specs left to right and collect batch columns.

    Output keys: "items" (final ids), "length" (pre-pad length), plus
    "mask_positions"/"mask_targets" when a mask step ran. Mask
    positions refer to the sequence as it stood when masking was
    applied; later padding does not renumber them.
    """
    for i, spec in enumerate(specs):
        if spec.kind is TransformKind.PAD and i != len(specs) - 1:
            raise PadNotLast("pad must be the final transform")

    out: dict = {}
    items = seq.items
    max_len = seq.max_len
    length = len(seq)
    padded = None
    for spec in specs:
        current = ItemSequence(items, max_len)
        if spec.kind is TransformKind.MASK:
            items, positions, targets = mask_item_sequence(
                current, spec.mask_ratio, rng, vocab_size)
            out["mask_positions"] = positions
            out["mask_targets"] = targets
        elif spec.kind is TransformKind.CROP:
            items = crop_item_sequence(current, spec.crop_ratio, rng).items
        elif spec.kind is TransformKind.REORDER:
            items = reorder_item_sequence(
                current, spec.reorder_ratio, rng).items
        elif spec.kind is TransformKind.USER_DEFINED:
            items = spec.fn(current, rng).items
        else:
            padded = flexible_pad(current, spec.pad_location)
        length = int(items.shape[0])
    out["items"] = padded if padded is not None else items
    out["length"] = length
    return out
