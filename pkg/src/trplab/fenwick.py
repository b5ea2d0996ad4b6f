from __future__ import annotations

from typing import Sequence


class FenwickTree:
    """Binary indexed tree over non-negative integer weights, 0-based.

    ``find(u)`` locates the cell holding unit ``u`` of the running total,
    which is what weighted sampling needs: with ``u`` uniform on
    ``[0, total)`` cell ``k`` comes back with probability ``w[k] / total``.
    """

    __slots__ = ("size", "tree", "_top")

    def __init__(self, weights: Sequence[int]):
        self.size = len(weights)
        tree = [0] + list(weights)
        for i in range(1, self.size + 1):
            j = i + (i & -i)
            if j <= self.size:
                tree[j] += tree[i]
        self.tree = tree
        self._top = 1 << (self.size.bit_length() - 1) if self.size else 0

    def add(self, k: int, delta: int) -> None:
        tree, size = self.tree, self.size
        i = k + 1
        while i <= size:
            tree[i] += delta
            i += i & -i

    def prefix(self, k: int) -> int:
        """Sum of weights[0:k]."""
        total, tree = 0, self.tree
        i = k
        while i > 0:
            total += tree[i]
            i -= i & -i
        return total

    def total(self) -> int:
        return self.prefix(self.size)

    def weight(self, k: int) -> int:
        return self.prefix(k + 1) - self.prefix(k)

    def find(self, u: int) -> tuple[int, int]:
        """Return ``(k, u - prefix(k))`` for the cell ``k`` with
        ``prefix(k) <= u < prefix(k + 1)``.  Requires ``0 <= u < total``."""
        tree, size = self.tree, self.size
        pos = 0
        step = self._top
        while step:
            nxt = pos + step
            if nxt <= size and tree[nxt] <= u:
                pos = nxt
                u -= tree[nxt]
            step >>= 1
        return pos, u
