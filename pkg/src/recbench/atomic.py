"""Atomic-file parsing, writing, and token remapping.

An atomic file is a UTF-8 tab-separated table whose suffix declares
what it describes (.inter, .user, .item, .kg, .link) and whose header
cells are ``name:type`` with type one of token, token_seq, float,
float_seq. Sequence cells hold space-separated elements. There is no
quoting or escaping.
"""

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import (
    DataError,
    IndexOutOfRange,
    MalformedHeader,
    NumericParseError,
    RowArityMismatch,
)

PAD_TOKEN = "[PAD]"


class SourceKind(enum.Enum):
    INTER = "inter"
    USER = "user"
    ITEM = "item"
    KG = "kg"
    LINK = "link"


class FieldType(enum.Enum):
    TOKEN = "token"
    TOKEN_SEQ = "token_seq"
    FLOAT = "float"
    FLOAT_SEQ = "float_seq"


_SUFFIX_TO_KIND = {"." + k.value: k for k in SourceKind}

# column layouts enforced for graph-side files
KG_REQUIRED = ("head_id", "relation_id", "tail_id")
LINK_REQUIRED = ("item_id", "entity_id")


@dataclass
class Frame:
    """Columnar typed table parsed from one atomic file.

    Column storage by type: token -> object ndarray of str (or int64
    after remap), token_seq -> list of lists/arrays, float -> float64
    ndarray, float_seq -> list of float64 ndarrays.
    """

    source_kind: SourceKind
    types: dict[str, FieldType]
    columns: dict[str, Any]
    row_count: int

    def field_names(self) -> list[str]:
        return list(self.types)

    def take(self, indices) -> "Frame":
        indices = np.asarray(indices, np.int64)
        _check_indices(indices, self.row_count)
        cols: dict[str, Any] = {}
        for name, ftype in self.types.items():
            col = self.columns[name]
            if ftype in (FieldType.TOKEN_SEQ, FieldType.FLOAT_SEQ):
                cols[name] = [col[i] for i in indices]
            else:
                cols[name] = col[indices]
        return Frame(self.source_kind, dict(self.types), cols,
                     int(indices.shape[0]))


def _check_indices(indices: np.ndarray, row_count: int) -> None:
    if indices.size and (indices.min() < 0 or indices.max() >= row_count):
        raise IndexOutOfRange(
            f"index out of range for frame with {row_count} rows"
        )


def infer_kind(path: Path) -> SourceKind:
    kind = _SUFFIX_TO_KIND.get(path.suffix)
    if kind is None:
        raise DataError(f"unrecognized atomic-file suffix: {path.name}")
    return kind


def _parse_header(line: str, path: Path) -> dict[str, FieldType]:
    types: dict[str, FieldType] = {}
    if line == "":
        raise MalformedHeader(f"{path.name}: empty header")
    for cell in line.split("\t"):
        name, sep, tag = cell.rpartition(":")
        if not sep or not name:
            raise MalformedHeader(
                f"{path.name}: header cell {cell!r} is not name:type"
            )
        try:
            ftype = FieldType(tag)
        except ValueError:
            raise MalformedHeader(
                f"{path.name}: unknown field type {tag!r} in {cell!r}"
            ) from None
        if name in types:
            raise MalformedHeader(f"{path.name}: duplicate field {name!r}")
        types[name] = ftype
    return types


def _check_layout(kind: SourceKind, types: dict[str, FieldType],
                  path: Path) -> None:
    if kind is SourceKind.KG:
        required: tuple[str, ...] = KG_REQUIRED
    elif kind is SourceKind.LINK:
        required = LINK_REQUIRED
    else:
        return
    names = tuple(types)
    if kind is SourceKind.LINK and set(names) != set(required):
        raise MalformedHeader(
            f"{path.name}: .link files must have exactly "
            f"{', '.join(required)} columns, got {', '.join(names)}"
        )
    for name in required:
        if types.get(name) is not FieldType.TOKEN:
            raise MalformedHeader(
                f"{path.name}: required token column {name!r} missing "
                f"or mistyped"
            )


def _parse_float(cell: str, name: str, lineno: int, path: Path) -> float:
    if cell == "":
        return float("nan")
    try:
        return float(cell)
    except ValueError:
        raise NumericParseError(
            f"{path.name}:{lineno}: field {name!r}: cannot parse "
            f"{cell!r} as float"
        ) from None


def parse_atomic_file(path, kind: SourceKind | None = None) -> Frame:
    """Parse one atomic file into a Frame. Order of rows is preserved."""
    path = Path(path)
    if kind is None:
        kind = infer_kind(path)
    # split on \n only: unicode line separators (NEL etc.) are data
    lines = path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    lines = [ln[:-1] if ln.endswith("\r") else ln for ln in lines]
    if not lines:
        raise MalformedHeader(f"{path.name}: empty file")
    types = _parse_header(lines[0], path)
    _check_layout(kind, types, path)
    names = list(types)
    n_fields = len(names)
    raw: dict[str, list] = {name: [] for name in names}
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != n_fields:
            raise RowArityMismatch(
                f"{path.name}:{lineno}: expected {n_fields} cells, "
                f"got {len(cells)}"
            )
        for name, cell in zip(names, cells):
            raw[name].append(cell)

    columns: dict[str, Any] = {}
    for name in names:
        ftype = types[name]
        cells = raw[name]
        if ftype is FieldType.TOKEN:
            columns[name] = np.array(cells, dtype=object)
        elif ftype is FieldType.TOKEN_SEQ:
            columns[name] = [cell.split(" ") if cell else [] for cell in cells]
        elif ftype is FieldType.FLOAT:
            columns[name] = np.array(
                [_parse_float(c, name, i + 2, path)
                 for i, c in enumerate(cells)],
                dtype=np.float64,
            )
        else:
            seqs = []
            for i, cell in enumerate(cells):
                if not cell:
                    seqs.append(np.zeros(0, np.float64))
                    continue
                seqs.append(np.array(
                    [_parse_float(el, name, i + 2, path)
                     for el in cell.split(" ")],
                    dtype=np.float64,
                ))
            columns[name] = seqs
    return Frame(kind, types, columns, len(lines) - 1)


def _format_float(x: float) -> str:
    x = float(x)
    if np.isnan(x):
        return ""
    return repr(x)


def write_atomic_file(frame: Frame, path) -> None:
    """Write a Frame back to disk in canonical form (round-trips)."""
    path = Path(path)
    header = "\t".join(f"{n}:{t.value}" for n, t in frame.types.items())
    out = [header]
    names = frame.field_names()
    for r in range(frame.row_count):
        cells = []
        for name in names:
            ftype = frame.types[name]
            col = frame.columns[name]
            if ftype is FieldType.TOKEN:
                cells.append(str(col[r]))
            elif ftype is FieldType.TOKEN_SEQ:
                cells.append(" ".join(str(t) for t in col[r]))
            elif ftype is FieldType.FLOAT:
                cells.append(_format_float(col[r]))
            else:
                cells.append(" ".join(_format_float(v) for v in col[r]))
        out.append("\t".join(cells))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def frames_equal(a: Frame, b: Frame) -> bool:
    """Structural equality; NaN floats compare equal."""
    if a.source_kind is not b.source_kind or a.types != b.types:
        return False
    if a.row_count != b.row_count:
        return False
    for name, ftype in a.types.items():
        ca, cb = a.columns[name], b.columns[name]
        if ftype is FieldType.TOKEN:
            if not all(x == y for x, y in zip(ca, cb)):
                return False
        elif ftype is FieldType.TOKEN_SEQ:
            if any(list(x) != list(y) for x, y in zip(ca, cb)):
                return False
        elif ftype is FieldType.FLOAT:
            if not np.array_equal(ca, cb, equal_nan=True):
                return False
        else:
            if any(not np.array_equal(x, y, equal_nan=True)
                   for x, y in zip(ca, cb)):
                return False
    return True


class IdMap:
    """First-seen token remapping; id 0 is reserved for the pad token."""

    __slots__ = ("token_to_id", "id_to_token")

    def __init__(self) -> None:
        self.token_to_id: dict[str, int] = {PAD_TOKEN: 0}
        self.id_to_token: list[str] = [PAD_TOKEN]

    def get_or_add(self, token: str) -> int:
        got = self.token_to_id.get(token)
        if got is not None:
            return got
        new_id = len(self.id_to_token)
        self.token_to_id[token] = new_id
        self.id_to_token.append(token)
        return new_id

    def lookup(self, token: str) -> int | None:
        return self.token_to_id.get(token)

    @property
    def size(self) -> int:
        """Vocabulary size including the pad entry."""
        return len(self.id_to_token)


def remap_tokens(frame: Frame, shared_maps: dict[str, IdMap],
                 alias: dict[str, str] | None = None) -> Frame:
    """Replace token columns with contiguous integer ids.

    Maps are keyed by field name (or its alias) and shared across
    files so user_id/item_id/entity_id columns align dataset-wide.
    New tokens get ids in first-seen order starting at 1.
    """
    cols: dict[str, Any] = {}
    for name, ftype in frame.types.items():
        col = frame.columns[name]
        if ftype is FieldType.TOKEN:
            key = alias.get(name, name) if alias else name
            idmap = shared_maps.setdefault(key, IdMap())
            add = idmap.get_or_add
            cols[name] = np.fromiter(
                (add(t) for t in col), np.int64, count=frame.row_count
            )
        elif ftype is FieldType.TOKEN_SEQ:
            key = alias.get(name, name) if alias else name
            idmap = shared_maps.setdefault(key, IdMap())
            add = idmap.get_or_add
            cols[name] = [
                np.array([add(t) for t in seq], np.int64) for seq in col
            ]
        else:
            cols[name] = col
    return Frame(frame.source_kind, dict(frame.types), cols, frame.row_count)


@dataclass
class Interaction:
    """Indexed batch of rows gathered from a Frame."""

    types: dict[str, FieldType]
    columns: dict[str, Any]
    length: int

    def __len__(self) -> int:
        return self.length

    def take(self, indices) -> "Interaction":
        indices = np.asarray(indices, np.int64)
        _check_indices(indices, self.length)
        cols: dict[str, Any] = {}
        for name, ftype in self.types.items():
            col = self.columns[name]
            if ftype in (FieldType.TOKEN_SEQ, FieldType.FLOAT_SEQ):
                cols[name] = [col[i] for i in indices]
            else:
                cols[name] = col[indices]
        return Interaction(dict(self.types), cols, int(indices.shape[0]))

    @classmethod
    def concat(cls, parts: "list[Interaction]") -> "Interaction":
        if not parts:
            raise DataError("cannot concatenate zero Interaction parts")
        first = parts[0]
        for p in parts[1:]:
            if p.types != first.types:
                raise DataError(
                    "concatenated Interaction parts must share one column set"
                )
        cols: dict[str, Any] = {}
        for name, ftype in first.types.items():
            if ftype in (FieldType.TOKEN_SEQ, FieldType.FLOAT_SEQ):
                merged: list = []
                for p in parts:
                    merged.extend(p.columns[name])
                cols[name] = merged
            else:
                cols[name] = np.concatenate([p.columns[name] for p in parts])
        return cls(dict(first.types), cols, sum(p.length for p in parts))


def to_interaction(frame: Frame, indices) -> Interaction:
    """Gather frame rows (post-remap) into an Interaction batch."""
    indices = np.asarray(indices, np.int64)
    _check_indices(indices, frame.row_count)
    cols: dict[str, Any] = {}
    for name, ftype in frame.types.items():
        col = frame.columns[name]
        if ftype in (FieldType.TOKEN_SEQ, FieldType.FLOAT_SEQ):
            cols[name] = [col[i] for i in indices]
        else:
            cols[name] = col[indices]
    return Interaction(dict(frame.types), cols, int(indices.shape[0]))
