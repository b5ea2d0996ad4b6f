"""The 3-partite triangle removal process.

The leave graph keeps each of the three bipartite adjacency matrices as
rows of Python ints (bit ``j`` of ``rc[r]`` set means the pair (r, c=j) is
unused), together with the transposed rows.  For every row/column cell the
number of symbols completing a triangle (its codegree) is kept up to date,
and a Fenwick tree over the n^2 cells turns a single uniform draw on
``[0, Q)`` into a uniformly random triangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import PartialLatinSquare, Triple, validate
from .fenwick import FenwickTree
from .seeding import make_rng


def _nth_bit(mask: int, j: int) -> int:
    """Position of the j-th (0-based) set bit of ``mask``."""
    for _ in range(j):
        mask &= mask - 1
    return (mask & -mask).bit_length() - 1


def _bits(mask: int) -> Iterable[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _unpack(rows: list[int], n: int) -> np.ndarray:
    nbytes = (n + 7) // 8
    buf = b"".join(x.to_bytes(nbytes, "little") for x in rows)
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8).reshape(len(rows), nbytes), axis=1, bitorder="little")
    return bits[:, :n].astype(bool)


class LeaveGraph:
    """Unused pairs of K_{n,n,n} with incrementally maintained triangle counts."""

    __slots__ = ("n", "rc", "cr", "rs", "sr", "cs", "sc", "codeg", "index", "q", "removed")

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"order must be >= 1, got {n}")
        self.n = n
        full = (1 << n) - 1
        self.rc = [full] * n
        self.cr = [full] * n
        self.rs = [full] * n
        self.sr = [full] * n
        self.cs = [full] * n
        self.sc = [full] * n
        self.codeg = [n] * (n * n)
        self.index = FenwickTree(self.codeg)
        self.q = n ** 3
        self.removed = 0

    @classmethod
    def complete(cls, n: int) -> LeaveGraph:
        return cls(n)

    def copy(self) -> LeaveGraph:
        g = LeaveGraph.__new__(LeaveGraph)
        g.n = self.n
        for name in ("rc", "cr", "rs", "sr", "cs", "sc", "codeg"):
            setattr(g, name, list(getattr(self, name)))
        idx = FenwickTree.__new__(FenwickTree)
        idx.size, idx.tree, idx._top = self.index.size, list(self.index.tree), self.index._top
        g.index = idx
        g.q = self.q
        g.removed = self.removed
        return g

    @property
    def N(self) -> int:
        return self.n * self.n

    def edge_count(self) -> int:
        return 3 * (self.N - self.removed)

    def has_triangle(self, t: Triple) -> bool:
        r, c, s = t
        n = self.n
        if not (0 <= r < n and 0 <= c < n and 0 <= s < n):
            return False
        return bool((self.rc[r] >> c) & 1 and (self.rs[r] >> s) & 1 and (self.cs[c] >> s) & 1)

    def remove(self, t: Triple, check: bool = True) -> None:
        """Delete the three edges of triangle ``t`` and update all counts."""
        if check and not self.has_triangle(t):
            raise ValueError(f"{tuple(t)} is not a triangle of the leave graph")
        r, c, s = t
        n = self.n
        rbit, cbit, sbit = 1 << r, 1 << c, 1 << s
        self.rc[r] &= ~cbit
        self.cr[c] &= ~rbit
        self.rs[r] &= ~sbit
        self.sr[s] &= ~rbit
        self.cs[c] &= ~sbit
        self.sc[s] &= ~cbit

        codeg, add = self.codeg, self.index.add
        cell = r * n + c
        lost = codeg[cell]
        codeg[cell] = 0
        add(cell, -lost)
        # cells (r, c') lose s: the pair (r, s) is gone
        mask = self.rc[r] & self.sc[s]
        base = r * n
        while mask:
            low = mask & -mask
            k = base + low.bit_length() - 1
            codeg[k] -= 1
            add(k, -1)
            lost += 1
            mask ^= low
        # cells (r', c) lose s: the pair (c, s) is gone
        mask = self.cr[c] & self.sr[s]
        while mask:
            low = mask & -mask
            k = (low.bit_length() - 1) * n + c
            codeg[k] -= 1
            add(k, -1)
            lost += 1
            mask ^= low
        self.q -= lost
        self.removed += 1

    def sample(self, rng: np.random.Generator) -> Triple | None:
        """A uniformly random triangle, or ``None`` if there is none."""
        if self.q == 0:
            return None
        u = int(rng.integers(self.q))
        cell, offset = self.index.find(u)
        r, c = divmod(cell, self.n)
        s = _nth_bit(self.rs[r] & self.cs[c], offset)
        return Triple(r, c, s)

    def triangles(self) -> list[Triple]:
        out = []
        for r in range(self.n):
            for c in _bits(self.rc[r]):
                out.extend(Triple(r, c, s) for s in _bits(self.rs[r] & self.cs[c]))
        return out

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Boolean (RC, RS, CS) adjacency matrices, rows indexed by the first part."""
        n = self.n
        return _unpack(self.rc, n), _unpack(self.rs, n), _unpack(self.cs, n)

    def codegree_table(self) -> np.ndarray:
        return np.array(self.codeg, dtype=np.int64).reshape(self.n, self.n)

    def neighbour_rows(self, part: int) -> list[int]:
        """Bitsets of neighbours in ``part`` for all 2n vertices outside it.

        Vertices are listed part by part in increasing part order, matching
        global labels.
        """
        if part == 0:
            return self.cr + self.sr
        if part == 1:
            return self.rc + self.sc
        return self.rs + self.cs


def leave_from(pls: PartialLatinSquare | int) -> LeaveGraph:
    """Leave graph of a partial Latin square (or of the empty one, given ``n``)."""
    if isinstance(pls, int):
        return LeaveGraph(pls)
    bad = validate(pls)
    if bad is not None:
        raise ValueError(f"not a partial Latin square: {bad}")
    g = LeaveGraph(pls.n)
    for t in pls.triples:
        g.remove(t, check=False)
    return g


def triangle_count(leave: LeaveGraph) -> int:
    return leave.q


@dataclass(frozen=True)
class Frozen:
    """The process ran out of triangles after ``step`` successful removals."""

    step: int


@dataclass
class RunOutcome:
    square: PartialLatinSquare
    frozen_at: int | None = None
    q_trace: list[int] | None = None
    start_size: int = 0

    @property
    def frozen(self) -> bool:
        return self.frozen_at is not None

    @property
    def result(self) -> PartialLatinSquare | Frozen:
        return Frozen(self.frozen_at) if self.frozen else self.square

    @property
    def steps(self) -> int:
        return len(self.square) - self.start_size


@dataclass
class TrpState:
    leave: LeaveGraph
    history: list[Triple] = field(default_factory=list)
    rng: np.random.Generator = field(default_factory=lambda: make_rng(None))
    frozen_at: int | None = None

    @classmethod
    def start(cls, start: PartialLatinSquare | int, seed=None) -> TrpState:
        leave = leave_from(start)
        history = [] if isinstance(start, int) else list(start.triples)
        return cls(leave, history, make_rng(seed))

    def step(self) -> Triple | None:
        """One removal; returns the triangle, or ``None`` once frozen."""
        t = self.leave.sample(self.rng)
        if t is None:
            if self.frozen_at is None:
                self.frozen_at = self.leave.removed
            return None
        self.leave.remove(t, check=False)
        self.history.append(t)
        return t


def sample_triangle(state: TrpState | LeaveGraph, rng=None) -> Triple | None:
    if isinstance(state, TrpState):
        return state.leave.sample(state.rng if rng is None else make_rng(rng))
    return state.sample(make_rng(rng))


def remove_triangle(state: TrpState, t: Triple, check: bool = True) -> TrpState:
    state.leave.remove(t, check=check)
    state.history.append(Triple(*t))
    return state


def run(start: PartialLatinSquare | int, steps: int, seed=None, record_q: bool = False) -> RunOutcome:
    """Run ``steps`` removals from ``start`` (a partial square, or ``n`` for K_{n,n,n}).

    Stops early and reports ``frozen_at`` (steps completed in this run) when
    no triangle is left.
    """
    state = TrpState.start(start, seed)
    n = state.leave.n
    base = len(state.history)
    if steps < 0 or steps > n * n - base:
        raise ValueError(f"steps must lie in [0, {n * n - base}], got {steps}")
    leave, rng, hist = state.leave, state.rng, state.history
    trace = [leave.q] if record_q else None
    frozen_at = None
    for i in range(steps):
        t = leave.sample(rng)
        if t is None:
            frozen_at = i
            break
        leave.remove(t, check=False)
        hist.append(t)
        if trace is not None:
            trace.append(leave.q)
    return RunOutcome(PartialLatinSquare(n, tuple(hist)), frozen_at, trace, base)


def history_q_sequence(L: PartialLatinSquare) -> list[int]:
    """Triangle counts Q(0), ..., Q(|L|-1) seen while replaying ``L`` from K_{n,n,n}."""
    g = LeaveGraph(L.n)
    qs = []
    for i, t in enumerate(L.triples):
        if not g.has_triangle(t):
            raise ValueError(f"step {i}: {t.to_global(L.n)} is not a triangle of the leave graph")
        qs.append(g.q)
        g.remove(t, check=False)
    return qs


def history_probability(L: PartialLatinSquare) -> float:
    """Natural log of the probability that the process emits exactly ``L``."""
    return -math.fsum(math.log(q) for q in history_q_sequence(L))
