"""Typed FPGA grid model, netlists, legality and random benchmark instances."""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Union

import jsonschema
import numpy as np

from .qap import SubPermutation

PathOrFile = Union[str, Path, IO[str]]


class CellType(str, Enum):
    IO = "IO"
    BRAM = "BRAM"
    LUT = "LUT"


REGISTER_NAMES = {"REG", "FF", "DFF", "REGISTER", "FLIPFLOP"}


class NetlistError(ValueError):
    pass


@dataclass(frozen=True)
class FpgaArchitecture:
    width: int
    height: int
    cells: tuple  # rows of CellType, row-major

    def __post_init__(self):
        cells = tuple(tuple(CellType(c) for c in row) for row in self.cells)
        if self.width < 1 or self.height < 1:
            raise ValueError("architecture dimensions must be positive")
        if len(cells) != self.height or any(len(r) != self.width for r in cells):
            raise ValueError(f"cell grid is not {self.height} rows x {self.width} columns")
        object.__setattr__(self, "cells", cells)

    @property
    def n(self) -> int:
        return self.width * self.height

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise ValueError(f"({row}, {col}) is outside the {self.height}x{self.width} grid")
        return row * self.width + col

    def coords(self, loc: int) -> tuple[int, int]:
        return divmod(int(loc), self.width)

    def cell_type(self, loc: int) -> CellType:
        r, c = self.coords(loc)
        return self.cells[r][c]

    def type_array(self) -> np.ndarray:
        """Flat array of type names in location order."""
        return np.array([c.value for row in self.cells for c in row])

    def counts(self) -> dict[CellType, int]:
        flat = [c for row in self.cells for c in row]
        return {t: flat.count(t) for t in CellType}

    def to_json(self) -> dict:
        return {"width": self.width, "height": self.height, "cells": [[c.value for c in row] for row in self.cells]}

    @classmethod
    def from_json(cls, doc: dict) -> "FpgaArchitecture":
        _validate(doc, ARCH_SCHEMA, "architecture")
        return cls(doc["width"], doc["height"], doc["cells"])


def fictional_arch(size: int = 21, bram_step: int = 4) -> FpgaArchitecture:
    """Square grid with an IO border, BRAM on a regular interior lattice, LUT elsewhere.

    The default 21 x 21 grid has 80 IO, 16 BRAM (rows/cols 4, 8, 12, 16) and
    345 LUT cells.
    """
    if size < 3:
        raise ValueError("grid needs at least 3x3 cells")
    lattice = set(range(bram_step, size - 1, bram_step)) if bram_step > 0 else set()
    cells = []
    for r in range(size):
        row = []
        for c in range(size):
            if r in (0, size - 1) or c in (0, size - 1):
                row.append(CellType.IO)
            elif r in lattice and c in lattice:
                row.append(CellType.BRAM)
            else:
                row.append(CellType.LUT)
        cells.append(row)
    return FpgaArchitecture(size, size, cells)


def uniform_arch(width: int, height: int, cell_type: CellType = CellType.LUT) -> FpgaArchitecture:
    return FpgaArchitecture(width, height, [[cell_type] * width for _ in range(height)])


def build_distance_matrix(arch: FpgaArchitecture) -> np.ndarray:
    """Manhattan distances between all grid locations."""
    rows, cols = np.divmod(np.arange(arch.n), arch.width)
    return (np.abs(rows[:, None] - rows[None, :]) + np.abs(cols[:, None] - cols[None, :])).astype(np.float64)


@dataclass
class Netlist:
    blocks: list  # (id, CellType)
    nets: list  # lists of block ids
    pins: dict = field(default_factory=dict)  # id -> (row, col)

    def __post_init__(self):
        self.blocks = [(str(b), CellType(t)) for b, t in self.blocks]
        self.nets = [[str(x) for x in net] for net in self.nets]
        self.pins = {str(k): (int(v[0]), int(v[1])) for k, v in self.pins.items()}
        ids = [b for b, _ in self.blocks]
        seen = set()
        for b in ids:
            if b in seen:
                raise NetlistError(f"duplicate block id {b!r}")
            seen.add(b)
        for i, net in enumerate(self.nets):
            if len(set(net)) < 2:
                raise NetlistError(f"net {i} needs at least two distinct blocks")
            for b in net:
                if b not in seen:
                    raise NetlistError(f"net {i} references unknown block {b!r}")
        for b in self.pins:
            if b not in seen:
                raise NetlistError(f"pin refers to unknown block {b!r}")

    @property
    def m(self) -> int:
        return len(self.blocks)

    def ids(self) -> list[str]:
        return [b for b, _ in self.blocks]

    def index(self) -> dict[str, int]:
        return {b: i for i, (b, _) in enumerate(self.blocks)}

    def types(self) -> list[CellType]:
        return [t for _, t in self.blocks]

    def type_counts(self) -> dict[CellType, int]:
        ts = self.types()
        return {t: ts.count(t) for t in CellType}

    def to_json(self) -> dict:
        return {
            "blocks": [{"id": b, "type": t.value} for b, t in self.blocks],
            "nets": [list(net) for net in self.nets],
            "pins": {b: {"row": r, "col": c} for b, (r, c) in sorted(self.pins.items())},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Netlist":
        if isinstance(doc, dict):
            for i, blk in enumerate(doc.get("blocks", [])):
                if isinstance(blk, dict) and str(blk.get("type", "")).upper() in REGISTER_NAMES:
                    raise NetlistError(
                        f"blocks[{i}] ({blk.get('id')!r}) is a register; registers are not placed "
                        "separately, merge each register into its driving LUT before placement"
                    )
        _validate(doc, NETLIST_SCHEMA, "netlist")
        pins = {b: (p["row"], p["col"]) for b, p in doc.get("pins", {}).items()}
        return cls([(b["id"], b["type"]) for b in doc["blocks"]], doc["nets"], pins)


_TYPE_ENUM = [t.value for t in CellType]

NETLIST_SCHEMA = {
    "type": "object",
    "required": ["blocks", "nets"],
    "additionalProperties": False,
    "properties": {
        "blocks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "type"],
                "additionalProperties": False,
                "properties": {"id": {"type": "string"}, "type": {"enum": _TYPE_ENUM}},
            },
        },
        "nets": {"type": "array", "items": {"type": "array", "items": {"type": "string"}, "minItems": 2}},
        "pins": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["row", "col"],
                "additionalProperties": False,
                "properties": {"row": {"type": "integer", "minimum": 0}, "col": {"type": "integer", "minimum": 0}},
            },
        },
    },
}

ARCH_SCHEMA = {
    "type": "object",
    "required": ["width", "height", "cells"],
    "additionalProperties": False,
    "properties": {
        "width": {"type": "integer", "minimum": 1},
        "height": {"type": "integer", "minimum": 1},
        "cells": {"type": "array", "items": {"type": "array", "items": {"enum": _TYPE_ENUM}}},
    },
}

PLACEMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": {
        "type": "object",
        "required": ["row", "col"],
        "additionalProperties": False,
        "properties": {"row": {"type": "integer", "minimum": 0}, "col": {"type": "integer", "minimum": 0}},
    },
}


def _validate(doc, schema: dict, what: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise NetlistError(f"invalid {what} at {where}: {exc.message}") from None


def _read_json(src: PathOrFile):
    try:
        if hasattr(src, "read"):
            return json.load(src)
        with open(src, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise NetlistError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _write_json(doc, dst: PathOrFile) -> None:
    text = json.dumps(doc, indent=1, sort_keys=False) + "\n"
    if hasattr(dst, "write"):
        dst.write(text)
    else:
        Path(dst).write_text(text, encoding="utf-8")


def load_netlist(src: PathOrFile) -> Netlist:
    return Netlist.from_json(_read_json(src))


def save_netlist(netlist: Netlist, dst: PathOrFile) -> None:
    _write_json(netlist.to_json(), dst)


def load_architecture(src: PathOrFile) -> FpgaArchitecture:
    if isinstance(src, str) and src == "fictional":
        return fictional_arch()
    return FpgaArchitecture.from_json(_read_json(src))


def save_architecture(arch: FpgaArchitecture, dst: PathOrFile) -> None:
    _write_json(arch.to_json(), dst)


def build_flow_matrix(netlist: Netlist) -> np.ndarray:
    """Binary connectivity: 1 where two blocks share at least one net."""
    idx = netlist.index()
    F = np.zeros((netlist.m, netlist.m))
    for net in netlist.nets:
        members = sorted({idx[b] for b in net})
        for a in members:
            for b in members:
                if a != b:
                    F[a, b] = 1.0
    return F


class LegalityOracle:
    """``oracle(facility, location)`` is True when the placement is allowed.

    Backed by a boolean m x n matrix; pinned facilities are allowed only on
    their pin and nobody else may use a pinned location.
    """

    def __init__(self, allowed, pinned: dict[int, int] | None = None):
        allowed = np.array(allowed, dtype=bool)
        pinned = {int(f): int(loc) for f, loc in (pinned or {}).items()}
        for f, loc in pinned.items():
            if not allowed[f, loc]:
                raise ValueError(f"facility {f} is pinned to incompatible location {loc}")
            allowed[:, loc] = False
            allowed[f, :] = False
            allowed[f, loc] = True
        allowed.setflags(write=False)
        self.allowed = allowed
        self.pinned = pinned

    @classmethod
    def unconstrained(cls, m: int, n: int) -> "LegalityOracle":
        return cls(np.ones((m, n), dtype=bool))

    @classmethod
    def from_netlist(cls, arch: FpgaArchitecture, netlist: Netlist) -> "LegalityOracle":
        cell = arch.type_array()
        block = np.array([t.value for t in netlist.types()])
        allowed = block[:, None] == cell[None, :]
        idx = netlist.index()
        pinned = {}
        for b, (r, c) in netlist.pins.items():
            loc = arch.index(r, c)
            if arch.cell_type(loc) is not netlist.blocks[idx[b]][1]:
                raise NetlistError(f"block {b!r} is pinned to a {arch.cell_type(loc).value} cell")
            pinned[idx[b]] = loc
        return cls(allowed, pinned)

    @property
    def shape(self) -> tuple[int, int]:
        return self.allowed.shape

    def __call__(self, facility: int, location: int) -> bool:
        return bool(self.allowed[facility, location])

    def violations(self, P: SubPermutation) -> list[int]:
        """Facilities placed on a location they may not occupy."""
        ok = self.allowed[np.arange(P.m), P.assign]
        return np.flatnonzero(~ok).tolist()


def _random_tree_edges(m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform random labelled tree via a random Pruefer sequence."""
    if m == 2:
        return [(0, 1)]
    seq = rng.integers(0, m, size=m - 2)
    degree = np.ones(m, dtype=np.int64)
    for v in seq:
        degree[v] += 1
    leaves = [v for v in range(m) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(v)))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, int(v))
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return [(min(a, b), max(a, b)) for a, b in edges]


def generate_instance(
    arch: FpgaArchitecture,
    m: int,
    rng: np.random.Generator,
    mean_degree: float = 3.0,
    fix_io: bool = False,
) -> Netlist:
    """Random benchmark netlist with two IO blocks.

    The other ``m - 2`` block types follow the architecture's non-IO cell
    ratio, capped by what the grid can hold. Connectivity is a uniform random
    spanning tree plus random extra edges up to ``mean_degree``, emitted as
    2-pin nets. With ``fix_io`` the IO blocks are pinned to the middle of the
    left and right border.
    """
    counts = arch.counts()
    if m < 3:
        raise ValueError("instances need at least 3 blocks")
    if m > arch.n:
        raise ValueError(f"{m} blocks exceed the {arch.n} grid locations")
    if counts[CellType.IO] < 2:
        raise ValueError("architecture has fewer than two IO cells")
    pool = {t: counts[t] for t in (CellType.BRAM, CellType.LUT)}
    if sum(pool.values()) < m - 2:
        raise ValueError(f"{m - 2} non-IO blocks exceed the {sum(pool.values())} non-IO cells")
    types = [CellType.IO, CellType.IO]
    for _ in range(m - 2):
        kinds = [t for t in pool if pool[t] > 0]
        weights = np.array([counts[t] for t in kinds], dtype=np.float64)
        t = kinds[int(rng.choice(len(kinds), p=weights / weights.sum()))]
        pool[t] -= 1
        types.append(t)

    edges = set(_random_tree_edges(m, rng))
    target = min(int(round(mean_degree * m / 2)), m * (m - 1) // 2)
    while len(edges) < target:
        a, b = rng.choice(m, size=2, replace=False)
        edges.add((int(min(a, b)), int(max(a, b))))

    ids = [f"{t.value.lower()}{i}" for i, t in enumerate(types)]
    nets = [[ids[a], ids[b]] for a, b in sorted(edges)]
    pins = {}
    if fix_io:
        mid = arch.height // 2
        for bid, loc in zip(ids[:2], (arch.index(mid, 0), arch.index(mid, arch.width - 1))):
            if arch.cell_type(loc) is not CellType.IO:
                raise ValueError("border midpoints are not IO cells")
            pins[bid] = arch.coords(loc)
    return Netlist(list(zip(ids, types)), nets, pins)


def placement_to_json(netlist: Netlist, arch: FpgaArchitecture, P: SubPermutation) -> dict:
    out = {}
    for (bid, _), loc in zip(netlist.blocks, P.assign):
        r, c = arch.coords(loc)
        out[bid] = {"row": r, "col": c}
    return out


def placement_from_json(doc: dict, netlist: Netlist, arch: FpgaArchitecture) -> np.ndarray:
    """Location per block in netlist order (not checked for injectivity)."""
    _validate(doc, PLACEMENT_SCHEMA, "placement")
    missing = [b for b in netlist.ids() if b not in doc]
    if missing:
        raise NetlistError(f"placement lacks blocks: {', '.join(missing[:5])}")
    extra = sorted(set(doc) - set(netlist.ids()))
    if extra:
        raise NetlistError(f"placement has unknown blocks: {', '.join(extra[:5])}")
    return np.array([arch.index(doc[b]["row"], doc[b]["col"]) for b in netlist.ids()], dtype=np.int64)
