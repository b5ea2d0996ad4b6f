"""Brute-force reference computations, written without the package internals.

Everything here works from plain tuples of 0-based (r, c, s) triples.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def used_pairs(triples, n):
    """Boolean matrices RC, RS, CS marking pairs covered by ``triples``."""
    rc = np.zeros((n, n), dtype=bool)
    rs = np.zeros((n, n), dtype=bool)
    cs = np.zeros((n, n), dtype=bool)
    for r, c, s in triples:
        rc[r, c] = rs[r, s] = cs[c, s] = True
    return rc, rs, cs


def leave_matrices(triples, n):
    rc, rs, cs = used_pairs(triples, n)
    return ~rc, ~rs, ~cs


def codegrees(triples, n):
    """codeg[r, c] = #symbols s with all three pairs of (r, c, s) unused."""
    RC, RS, CS = leave_matrices(triples, n)
    cube = RC[:, :, None] & RS[:, None, :] & CS[None, :, :]
    return cube.sum(axis=2)


def triangle_count(triples, n):
    return int(codegrees(triples, n).sum())


def triangles(triples, n):
    RC, RS, CS = leave_matrices(triples, n)
    return [
        (r, c, s)
        for r, c, s in itertools.product(range(n), repeat=3)
        if RC[r, c] and RS[r, s] and CS[c, s]
    ]


def neighbourhood_rows(triples, n, part):
    """0/1 matrix of neighbours in ``part`` for the 2n vertices outside it."""
    RC, RS, CS = leave_matrices(triples, n)
    if part == 0:
        return np.vstack([RC.T, RS.T]).astype(int)
    if part == 1:
        return np.vstack([RC, CS.T]).astype(int)
    return np.vstack([RS, CS]).astype(int)


def worst_deviation(triples, n, k, part):
    """Largest |common(A) - d^k n| / (d^k n) over all k-sets A outside ``part``."""
    d = Fraction(3 * (n * n - len(triples)), 3 * n * n)
    target = d ** k * n
    if target == 0:
        return Fraction(0)
    M = neighbourhood_rows(triples, n, part)
    worst = Fraction(0)
    for A in itertools.combinations(range(2 * n), k):
        common = int(np.prod(M[list(A)], axis=0).sum())
        worst = max(worst, abs(common - target) / target)
    return worst


def process_tree(n, prefix=()):
    """Exact law of the removal process run to exhaustion from ``prefix``.

    Returns {outcome: probability} where an outcome is the ordered tuple of
    removed triples; the process is frozen iff the tuple has fewer than n^2
    entries.
    """
    out: dict[tuple, Fraction] = {}

    def walk(hist, p):
        tri = triangles(hist, n)
        if not tri:
            out[hist] = out.get(hist, Fraction(0)) + p
            return
        for t in tri:
            walk(hist + (t,), p / len(tri))

    walk(tuple(prefix), Fraction(1))
    return out


def count_completions(triples, n):
    """Latin squares containing ``triples``, by trying every row permutation."""
    fixed = {(r, c): s for r, c, s in triples}
    perms = list(itertools.permutations(range(n)))
    rows = [[p for p in perms if all(p[c] == s for (r2, c), s in fixed.items() if r2 == r)] for r in range(n)]

    def extend(r, used_cols):
        if r == n:
            return 1
        total = 0
        for p in rows[r]:
            if all(not (used_cols[c] >> p[c]) & 1 for c in range(n)):
                nxt = [used_cols[c] | (1 << p[c]) for c in range(n)]
                total += extend(r + 1, nxt)
        return total

    return extend(0, [0] * n)
