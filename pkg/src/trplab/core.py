"""Partial Latin squares as 3-partite 3-uniform hypergraphs.

Vertices are kept as (part, local index) pairs internally.  Global labels
(rows 1..n, columns n+1..2n, symbols 2n+1..3n) only appear at the I/O
boundary, see :func:`encode` / :func:`decode`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np


class Part(enum.IntEnum):
    ROW = 0
    COLUMN = 1
    SYMBOL = 2

    @property
    def short(self) -> str:
        return "RCS"[self]


@dataclass(frozen=True, order=True)
class Vertex:
    part: Part
    index: int

    def global_id(self, n: int) -> int:
        return int(self.part) * n + self.index + 1

    @classmethod
    def from_global(cls, g: int, n: int) -> Vertex:
        if not 1 <= g <= 3 * n:
            raise ValueError(f"vertex label {g} outside [1, {3 * n}]")
        part, index = divmod(g - 1, n)
        return cls(Part(part), index)


class Triple(NamedTuple):
    """A hyperedge (row, column, symbol), each a 0-based local index."""

    r: int
    c: int
    s: int

    def to_global(self, n: int) -> tuple[int, int, int]:
        return (self.r + 1, n + self.c + 1, 2 * n + self.s + 1)

    @classmethod
    def from_global(cls, n: int, r: int, c: int, s: int) -> Triple:
        return cls(r - 1, c - n - 1, s - 2 * n - 1)

    def pairs(self) -> tuple[tuple, tuple, tuple]:
        """The three vertex pairs covered, keyed so that pairs from different
        triples compare equal exactly when they are the same pair."""
        return (("rc", self.r, self.c), ("rs", self.r, self.s), ("cs", self.c, self.s))

    def vertices(self) -> tuple[Vertex, Vertex, Vertex]:
        return (Vertex(Part.ROW, self.r), Vertex(Part.COLUMN, self.c), Vertex(Part.SYMBOL, self.s))


@dataclass(frozen=True)
class PartialLatinSquare:
    """An (ordered) partial Latin square of order ``n``.

    ``triples`` keeps insertion order, so the same value doubles as the
    ordered variant; use :meth:`as_set` for order-free comparison.
    Construction does not check the Latin property, call :func:`validate`.
    """

    n: int
    triples: tuple[Triple, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"order must be >= 1, got {self.n}")
        object.__setattr__(self, "triples", tuple(Triple(*t) for t in self.triples))

    @classmethod
    def from_global(cls, n: int, triples: Iterable[tuple[int, int, int]]) -> PartialLatinSquare:
        return cls(n, tuple(Triple.from_global(n, *t) for t in triples))

    def to_global(self) -> list[tuple[int, int, int]]:
        return [t.to_global(self.n) for t in self.triples]

    @property
    def N(self) -> int:
        return self.n * self.n

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def __contains__(self, t: object) -> bool:
        return t in self.triples

    def as_set(self) -> frozenset[Triple]:
        return frozenset(self.triples)

    def is_full(self) -> bool:
        return len(self.triples) == self.N and validate(self) is None

    def prefix(self, i: int) -> PartialLatinSquare:
        """The ordered square consisting of the first ``i`` triples."""
        if not 0 <= i <= len(self.triples):
            raise IndexError(f"prefix length {i} outside [0, {len(self.triples)}]")
        return PartialLatinSquare(self.n, self.triples[:i])

    def extend(self, more: Iterable[Triple]) -> PartialLatinSquare:
        return PartialLatinSquare(self.n, self.triples + tuple(more))

    def grid(self) -> np.ndarray:
        """n x n array; 0 marks an empty cell, k > 0 means symbol index k-1."""
        g = np.zeros((self.n, self.n), dtype=np.int64)
        for r, c, s in self.triples:
            if g[r, c]:
                raise ValueError(f"cell ({r + 1}, {self.n + c + 1}) filled twice")
            g[r, c] = s + 1
        return g

    @classmethod
    def from_grid(cls, grid) -> PartialLatinSquare:
        g = np.asarray(grid, dtype=np.int64)
        n = g.shape[0]
        if g.shape != (n, n):
            raise ValueError(f"grid must be square, got shape {g.shape}")
        rows, cols = np.nonzero(g)
        return cls(n, tuple(Triple(int(r), int(c), int(g[r, c]) - 1) for r, c in zip(rows, cols)))


@dataclass(frozen=True)
class Violation:
    """Why a triple set fails to be a partial Latin square.

    ``kind`` is ``"out_of_range"`` or ``"duplicate_pair"``; ``pair`` holds
    the offending global vertex labels and ``positions`` the indices of the
    triples involved.
    """

    kind: str
    pair: tuple[int, ...]
    positions: tuple[int, ...]

    def __str__(self) -> str:
        if self.kind == "out_of_range":
            return f"triple #{self.positions[0]} has a vertex out of range: {self.pair}"
        return f"pair {self.pair} used by triples #{self.positions[0]} and #{self.positions[1]}"


def validate(pls: PartialLatinSquare) -> Violation | None:
    """Return ``None`` if ``pls`` is a partial Latin square, else the first violation."""
    n = pls.n
    seen: dict[tuple, int] = {}
    for pos, t in enumerate(pls.triples):
        if not all(0 <= x < n for x in t):
            return Violation("out_of_range", t.to_global(n), (pos,))
        g = t.to_global(n)
        for key, labels in zip(t.pairs(), ((g[0], g[1]), (g[0], g[2]), (g[1], g[2]))):
            if key in seen:
                return Violation("duplicate_pair", labels, (seen[key], pos))
            seen[key] = pos
    return None


def cyclic_square(n: int) -> PartialLatinSquare:
    """The addition table of Z_n as a full Latin square, row-major order."""
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    return PartialLatinSquare(n, tuple(Triple(i, j, (i + j) % n) for i in range(n) for j in range(n)))


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


FORMATS = ("triples", "grid")


def encode(pls: PartialLatinSquare, fmt: str = "triples") -> bytes:
    n = pls.n
    if fmt == "triples":
        lines = [f"{n} {len(pls)}"]
        lines += ["{} {} {}".format(*t.to_global(n)) for t in pls.triples]
        return ("\n".join(lines) + "\n").encode("ascii")
    if fmt == "grid":
        g = pls.grid()
        return "".join(" ".join(str(int(x)) for x in row) + "\n" for row in g).encode("ascii")
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def _ints(line: str, lineno: int) -> list[int]:
    try:
        return [int(tok) for tok in line.split(" ")]
    except ValueError:
        raise ParseError(f"expected space-separated integers, got {line!r}", lineno) from None


def decode(data: bytes | str, fmt: str = "triples") -> PartialLatinSquare:
    text = data.decode("ascii") if isinstance(data, bytes) else data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if fmt == "triples":
        return _decode_triples(lines)
    if fmt == "grid":
        return _decode_grid(lines)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def _decode_triples(lines: list[str]) -> PartialLatinSquare:
    if not lines:
        raise ParseError("missing header 'n m'", 1)
    header = _ints(lines[0], 1)
    if len(header) != 2 or header[0] < 1 or header[1] < 0:
        raise ParseError(f"malformed header {lines[0]!r}", 1)
    n, m = header
    if len(lines) - 1 != m:
        # point at the first surplus line, or just past the end when short
        at = m + 2 if len(lines) - 1 > m else len(lines) + 1
        raise ParseError(f"header announces {m} triples but {len(lines) - 1} follow", at)
    triples = []
    lo = (1, n + 1, 2 * n + 1)
    for k, line in enumerate(lines[1:], start=2):
        vals = _ints(line, k)
        if len(vals) != 3:
            raise ParseError(f"expected 3 labels, got {len(vals)}", k)
        for v, low, part in zip(vals, lo, ("row", "column", "symbol")):
            if not low <= v < low + n:
                raise ParseError(f"{part} label {v} outside [{low}, {low + n - 1}]", k)
        triples.append(Triple.from_global(n, *vals))
    return PartialLatinSquare(n, tuple(triples))


def _decode_grid(lines: list[str]) -> PartialLatinSquare:
    n = len(lines)
    if n == 0:
        raise ParseError("empty grid", 1)
    rows = []
    for k, line in enumerate(lines, start=1):
        vals = _ints(line, k)
        if len(vals) != n:
            raise ParseError(f"expected {n} entries, got {len(vals)}", k)
        for v in vals:
            if not 0 <= v <= n:
                raise ParseError(f"entry {v} outside [0, {n}]", k)
        rows.append(vals)
    return PartialLatinSquare.from_grid(rows)
