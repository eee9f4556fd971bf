"""Lattice and projective-system files, CSV and JSON output.

Lattice file: ``{"rank": n, "gram": [[...]], "label": "..."}`` or
``{"basis": [[...]]}`` whose columns are the basis vectors.
System file: ``{"label": ..., "levels": [{"gram": ..., "map": ...}, ...]}``
where ``map`` sends a level onto the previous one and is omitted on level 0.
Floats are written with ``repr``, the shortest string that reads back exactly.
"""
import csv
import json
import math
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .errors import LatticeFormatError, ThetaForgeError
from .lattice import EuclideanLattice, from_basis, make_lattice
from .prolim import ProjectiveSystem, make_system

CSV_DIGITS = 17


def _position(text: str, pos: int) -> tuple:
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _locate(text: str, key: str, start: int = 0) -> tuple:
    pos = text.find(f'"{key}"', start)
    if pos < 0:
        return _position(text, start) if start else (1, 1)
    return _position(text, pos)


def _element_offsets(text: str, key: str) -> list:
    """Offsets of the elements of the top-level array stored under `key`."""
    pos = text.find(f'"{key}"')
    if pos < 0:
        return []
    pos = text.find("[", pos)
    offsets, depth, in_string, escaped = [], 0, False, False
    for i in range(pos + 1, len(text)):
        c = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_string = False
            continue
        if c.isspace() or (c == "," and depth == 0):
            continue
        if depth == 0:
            if c == "]":
                break
            offsets.append(i)
        if c == '"':
            in_string = True
        elif c in "[{":
            depth += 1
        elif c in "]}":
            depth -= 1
    return offsets


def _load(text: str, path: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise LatticeFormatError(e.msg, path, e.lineno, e.colno)


def _matrix(obj, key: str, text: str, path: str, allow_empty: bool = False, start: int = 0) -> np.ndarray:
    line, col = _locate(text, key, start)
    value = obj.get(key)
    if not isinstance(value, list) or any(not isinstance(r, list) for r in value):
        raise LatticeFormatError(f"'{key}' must be a list of rows", path, line, col)
    if not value and not allow_empty:
        raise LatticeFormatError(f"'{key}' is empty", path, line, col)
    try:
        m = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise LatticeFormatError(f"'{key}' holds non-numeric or ragged rows", path, line, col)
    if m.size and m.ndim != 2:
        raise LatticeFormatError(f"'{key}' holds ragged rows", path, line, col)
    return m if m.size else np.zeros((0, 0))


def _lattice_from_obj(obj, text: str, path: str, start: int = 0) -> EuclideanLattice:
    if not isinstance(obj, dict):
        raise LatticeFormatError("lattice must be a JSON object", path, *_position(text, start))
    label = obj.get("label")
    try:
        if "gram" in obj:
            gram = _matrix(obj, "gram", text, path, allow_empty=True, start=start)
            if "rank" in obj and obj["rank"] != gram.shape[0]:
                line, col = _locate(text, "rank", start)
                raise LatticeFormatError(f"rank {obj['rank']} does not match the Gram size {gram.shape[0]}",
                                         path, line, col)
            return make_lattice(gram, label=label)
        if "basis" in obj:
            return from_basis(_matrix(obj, "basis", text, path, start=start), label=label)
    except LatticeFormatError:
        raise
    except ThetaForgeError as e:
        key = "gram" if "gram" in obj else "basis"
        line, col = _locate(text, key, start)
        raise LatticeFormatError(str(e), path, line, col)
    raise LatticeFormatError("lattice needs a 'gram' or a 'basis' entry", path, *_position(text, start))


def parse_lattice(text: str, path: str = "<string>") -> EuclideanLattice:
    return _lattice_from_obj(_load(text, path), text, path)


def read_lattice(path: str) -> EuclideanLattice:
    with open(path) as f:
        return parse_lattice(f.read(), path)


def lattice_to_dict(lattice: EuclideanLattice) -> dict:
    out = {"rank": lattice.rank, "gram": lattice.gram.tolist()}
    if lattice.label:
        out["label"] = lattice.label
    return out


def write_lattice(lattice: EuclideanLattice, path: str):
    with open(path, "w") as f:
        f.write(dumps(lattice_to_dict(lattice)))
        f.write("\n")


def parse_system(text: str, path: str = "<string>") -> ProjectiveSystem:
    obj = _load(text, path)
    levels_raw = obj.get("levels") if isinstance(obj, dict) else None
    if not isinstance(levels_raw, list) or not levels_raw:
        raise LatticeFormatError("system needs a non-empty 'levels' list", path, *_locate(text, "levels"))
    offsets = _element_offsets(text, "levels")
    if len(offsets) != len(levels_raw):
        offsets = [0] * len(levels_raw)
    levels, maps = [], []
    for i, (entry, start) in enumerate(zip(levels_raw, offsets)):
        levels.append(_lattice_from_obj(entry, text, path, start))
        if i:
            if not isinstance(entry, dict) or "map" not in entry:
                raise LatticeFormatError(f"level {i} needs a 'map' to level {i - 1}", path, *_position(text, start))
            maps.append(entry["map"])
    try:
        return make_system(levels, maps, label=obj.get("label"))
    except (ThetaForgeError, ValueError) as e:
        failing = _failing_map(levels, maps)
        raise LatticeFormatError(str(e), path, *_locate(text, "map", offsets[failing + 1]))


def _failing_map(levels: list, maps: list) -> int:
    """Index of the first map that does not extend to a valid system."""
    for i in range(len(maps)):
        try:
            make_system(levels[:i + 2], maps[:i + 1])
        except (ThetaForgeError, ValueError):
            return i
    return len(maps) - 1


def read_system(path: str) -> ProjectiveSystem:
    with open(path) as f:
        return parse_system(f.read(), path)


def system_to_dict(system: ProjectiveSystem) -> dict:
    levels = []
    for i, level in enumerate(system.levels):
        entry = {"gram": level.gram.tolist()}
        if i:
            entry["map"] = [list(r) for r in system.maps[i - 1]]
        levels.append(entry)
    out = {"levels": levels}
    if system.label:
        out["label"] = system.label
    return out


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def dumps(obj, indent: Optional[int] = 2) -> str:
    return json.dumps(_plain(obj), indent=indent)


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{CSV_DIGITS}g}"
    return str(value)


def write_csv(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
