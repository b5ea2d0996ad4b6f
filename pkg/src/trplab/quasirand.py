"""Codegree quasirandomness of leave graphs.

For a part ``q`` and a vertex set ``A`` outside it, the common
neighbourhood of ``A`` in ``q`` should hold about ``d^|A| * n`` vertices.
Deviations are computed with integer arithmetic and reported as exact
fractions: with ``d = E / D`` the numerator ``|count * D^k - E^k * n|`` is
an integer over the fixed denominator ``E^k * n``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import Part, Vertex
from .engine import LeaveGraph, _bits
from .seeding import make_rng

DEFAULT_SAMPLES = 100_000


def density(leave: LeaveGraph) -> Fraction:
    return Fraction(leave.edge_count(), 3 * leave.N)


@dataclass(frozen=True)
class QuasiEntry:
    q: Part
    k: int
    worst_dev: Fraction
    witness: tuple[int, ...]  # global vertex labels of the worst set
    mode: str
    checked: int

    def to_json(self) -> dict:
        return {
            "q": self.q.short,
            "k": self.k,
            "worst_dev": float(self.worst_dev),
            "worst_dev_exact": str(self.worst_dev),
            "witness": list(self.witness),
            "mode": self.mode,
            "checked": self.checked,
        }


@dataclass
class QuasiReport:
    n: int
    density: Fraction
    h: int
    entries: list[QuasiEntry] = field(default_factory=list)

    @property
    def mode(self) -> str:
        modes = {e.mode for e in self.entries}
        return modes.pop() if len(modes) == 1 else "mixed"

    def worst(self, k: int | None = None) -> Fraction:
        devs = [e.worst_dev for e in self.entries if k is None or e.k == k]
        return max(devs, default=Fraction(0))

    def worst_entry(self) -> QuasiEntry | None:
        return max(self.entries, key=lambda e: e.worst_dev, default=None)

    def is_quasirandom(self, eps: float | Fraction) -> bool:
        return self.worst() <= Fraction(eps)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "d": float(self.density),
            "d_exact": str(self.density),
            "h": self.h,
            "mode": self.mode,
            "worst_dev": float(self.worst()),
            "entries": [e.to_json() for e in self.entries],
        }


def _other_vertices(part: Part) -> list[Part]:
    return [p for p in Part if p != part]


def _label(part: Part, idx: int, n: int) -> int:
    """Global label of position ``idx`` in the 2n-vertex list outside ``part``."""
    others = _other_vertices(part)
    return Vertex(others[idx // n], idx % n).global_id(n)


class _Scale:
    """Integer scaling for deviations at a fixed density ``E / D``."""

    def __init__(self, edges: int, denom: int, n: int, k: int):
        self.Dk = denom ** k
        self.target_num = edges ** k * n  # target * D^k
        self.k = k

    def frac(self, count: int) -> Fraction:
        if self.target_num == 0:
            return Fraction(0)
        return Fraction(abs(count * self.Dk - self.target_num), self.target_num)


def _extremes(counts: np.ndarray, target: Fraction) -> int:
    """Flat index of the count furthest from ``target``."""
    hi, lo = int(counts.argmax()), int(counts.argmin())
    return hi if int(counts.flat[hi]) - target >= target - int(counts.flat[lo]) else lo


def random_subsets(rng: np.random.Generator, m: int, k: int, samples: int) -> np.ndarray:
    """``samples`` uniform k-subsets of range(m), one per row."""
    if 2 * k > m:
        return np.argsort(rng.random((samples, m)), axis=1)[:, :k]
    out = rng.integers(m, size=(samples, k))
    while True:
        srt = np.sort(out, axis=1)
        bad = (srt[:, 1:] == srt[:, :-1]).any(axis=1)
        if not bad.any():
            return out
        out[bad] = rng.integers(m, size=(int(bad.sum()), k))


def check(leave: LeaveGraph, h: int = 2, mode: str = "auto", samples: int = DEFAULT_SAMPLES, seed=None) -> QuasiReport:
    """Worst relative common-neighbourhood deviation per (part, |A|).

    ``mode`` is ``"exact"`` (enumerate every A), ``"sampled"`` (``samples``
    uniform sets per (q, k)) or ``"auto"``: exact for k <= 2, sampled above.
    An edgeless graph counts as quasirandom: every target is 0.
    """
    if h < 1:
        raise ValueError(f"h must be >= 1, got {h}")
    if mode not in ("auto", "exact", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sampled" and samples < 1:
        raise ValueError("sampled mode needs samples >= 1")
    n = leave.n
    edges, denom = leave.edge_count(), 3 * leave.N
    d = Fraction(edges, denom)
    report = QuasiReport(n, d, h)
    rng = make_rng(seed)
    mats = None
    for part in Part:
        rows = leave.neighbour_rows(part)
        for k in range(1, h + 1):
            if k > 2 * n:
                continue
            scale = _Scale(edges, denom, n, k)
            target = d ** k * n
            exact = mode == "exact" or (mode == "auto" and k <= 2)
            if exact and k > 2:
                entry = _exact_combinations(part, k, rows, scale, n)
                report.entries.append(entry)
                continue
            if mats is None:
                mats = _part_matrices(leave)
            if exact:
                entry = _exact_small(part, k, mats[part], scale, target, n)
            else:
                entry = _sampled(part, k, mats[part], scale, target, n, samples, rng)
            report.entries.append(entry)
    return report


def _part_matrices(leave: LeaveGraph) -> dict[Part, np.ndarray]:
    """Per part q, the 0/1 matrix of neighbours in q (rows: the 2n vertices outside q)."""
    rc, rs, cs = (m.astype(np.float64) for m in leave.matrices())
    return {
        Part.ROW: np.vstack([rc.T, rs.T]),
        Part.COLUMN: np.vstack([rc, cs.T]),
        Part.SYMBOL: np.vstack([rs, cs]),
    }


@functools.lru_cache(maxsize=32)
def _pairs(m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(m, 1)


def _exact_small(part, k, M, scale, target, n) -> QuasiEntry:
    if k == 1:
        counts = M.sum(axis=1).astype(np.int64)
        i = _extremes(counts, target)
        return QuasiEntry(part, 1, scale.frac(int(counts[i])), (_label(part, i, n),), "exact", len(counts))
    # float64 products of 0/1 matrices are exact for n < 2^53
    G = M @ M.T
    iu, ju = _pairs(G.shape[0])
    counts = G[iu, ju].astype(np.int64)
    j = _extremes(counts, target)
    witness = (_label(part, int(iu[j]), n), _label(part, int(ju[j]), n))
    return QuasiEntry(part, 2, scale.frac(int(counts[j])), witness, "exact", len(counts))


def _exact_combinations(part, k, rows, scale, n) -> QuasiEntry:
    Dk, tnum = scale.Dk, scale.target_num
    best, best_set, checked = -1, (), 0
    for combo in itertools.combinations(range(len(rows)), k):
        common = rows[combo[0]]
        for i in combo[1:]:
            common &= rows[i]
        num = abs(common.bit_count() * Dk - tnum)
        checked += 1
        if num > best:
            best, best_set = num, combo
    dev = Fraction(best, tnum) if tnum else Fraction(0)
    return QuasiEntry(part, k, dev, tuple(_label(part, i, n) for i in best_set), "exact", checked)


def _sampled(part, k, M, scale, target, n, samples, rng, chunk=8192) -> QuasiEntry:
    best_count, best_set, best_gap = None, (), Fraction(-1)
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        picks = random_subsets(rng, M.shape[0], k, size)
        counts = M[picks].min(axis=1).sum(axis=1).astype(np.int64)
        j = _extremes(counts, target)
        gap = abs(int(counts[j]) - target)
        if gap > best_gap:
            best_gap, best_count, best_set = gap, int(counts[j]), tuple(sorted(int(i) for i in picks[j]))
        done += size
    return QuasiEntry(part, k, scale.frac(best_count), tuple(_label(part, i, n) for i in best_set), "sampled", samples)


def common_neighbours(leave: LeaveGraph, part: Part, A: tuple[Vertex, ...]) -> int:
    """|common neighbourhood of A in ``part``| for vertices A outside ``part``."""
    rows = leave.neighbour_rows(part)
    others = _other_vertices(part)
    common = (1 << leave.n) - 1
    for v in A:
        if v.part == part:
            raise ValueError(f"{v} lies in the target part")
        common &= rows[others.index(v.part) * leave.n + v.index]
    return common.bit_count()


def degree(leave: LeaveGraph, v: Vertex, part: Part) -> int:
    return common_neighbours(leave, part, (v,))


@dataclass(frozen=True)
class TrianglePrediction:
    predicted: Fraction
    actual: int
    relative_error: float


def triangle_count_prediction(leave: LeaveGraph) -> TrianglePrediction:
    """Compare the triangle count with n^3 d^3."""
    predicted = leave.n ** 3 * density(leave) ** 3
    actual = leave.q
    if predicted == 0:
        err = 0.0 if actual == 0 else float("inf")
    else:
        err = float(abs(actual - predicted) / predicted)
    return TrianglePrediction(predicted, actual, err)


def neighbour_set(leave: LeaveGraph, part: Part, v: Vertex) -> list[int]:
    """Local indices of v's neighbours in ``part``."""
    rows = leave.neighbour_rows(part)
    others = _other_vertices(part)
    return list(_bits(rows[others.index(v.part) * leave.n + v.index]))
