from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trplab.core import (
    ParseError,
    Part,
    PartialLatinSquare,
    Triple,
    Vertex,
    cyclic_square,
    decode,
    encode,
    validate,
)


def test_global_labels_round_trip():
    t = Triple.from_global(2, 1, 3, 5)
    assert t == Triple(0, 0, 0)
    assert Triple(1, 1, 1).to_global(2) == (2, 4, 6)
    assert Vertex.from_global(5, 2) == Vertex(Part.SYMBOL, 0)
    assert [Vertex.from_global(g, 3).global_id(3) for g in range(1, 10)] == list(range(1, 10))
    with pytest.raises(ValueError):
        Vertex.from_global(7, 2)


def test_single_triple_is_valid():
    P = PartialLatinSquare.from_global(2, [(1, 3, 5)])
    assert validate(P) is None
    assert len(P) == 1 and not P.is_full()


def test_duplicate_pair_is_reported():
    # rows 1 and symbol 5 appear together twice
    P = PartialLatinSquare.from_global(2, [(1, 3, 5), (1, 4, 5)])
    v = validate(P)
    assert v.kind == "duplicate_pair"
    assert v.pair == (1, 5)
    assert v.positions == (0, 1)


def test_out_of_range_is_reported():
    P = PartialLatinSquare(2, ((0, 0, 2),))
    assert validate(P).kind == "out_of_range"


def test_order_must_be_positive():
    with pytest.raises(ValueError):
        PartialLatinSquare(0)
    with pytest.raises(ValueError):
        cyclic_square(0)


@pytest.mark.parametrize("n", range(1, 65))
def test_cyclic_square_is_a_latin_square(n):
    L = cyclic_square(n)
    assert validate(L) is None and L.is_full()
    g = L.grid() - 1
    want = np.arange(n)
    assert all((np.sort(row) == want).all() for row in g)
    assert all((np.sort(col) == want).all() for col in g.T)


def test_prefixes():
    L = cyclic_square(5)
    for i in range(L.N + 1):
        P = L.prefix(i)
        assert len(P) == i and validate(P) is None
        assert P.triples == L.triples[:i]
    assert L.prefix(L.N) == L
    with pytest.raises(IndexError):
        L.prefix(L.N + 1)
    with pytest.raises(IndexError):
        L.prefix(-1)


def test_encode_triples_example():
    P = PartialLatinSquare.from_global(2, [(1, 3, 5)])
    assert encode(P, "triples") == b"2 1\n1 3 5\n"


def test_encode_grid_example():
    P = PartialLatinSquare.from_global(2, [(1, 3, 5), (2, 4, 5)])
    assert encode(P, "grid") == b"1 0\n0 1\n"
    assert decode(b"1 0\n0 1\n", "grid").as_set() == P.as_set()


@pytest.mark.parametrize(
    "data, line",
    [
        (b"", 1),
        (b"2\n", 1),
        (b"2 2\n1 3 5\n", 3),
        (b"2 1\n1 3 5\n2 4 6\n", 3),
        (b"2 1\n1 3 7\n", 2),
        (b"2 1\n1 3\n", 2),
        (b"2 1\n1 x 5\n", 2),
        (b"2 1\n3 3 5\n", 2),
    ],
)
def test_decode_triples_errors(data, line):
    with pytest.raises(ParseError) as info:
        decode(data, "triples")
    assert info.value.line == line


@pytest.mark.parametrize("data, line", [(b"", 1), (b"1 0\n0\n", 2), (b"1 3\n0 0\n", 1)])
def test_decode_grid_errors(data, line):
    with pytest.raises(ParseError) as info:
        decode(data, "grid")
    assert info.value.line == line


def test_unknown_format():
    with pytest.raises(ValueError):
        encode(cyclic_square(2), "json")
    with pytest.raises(ValueError):
        decode(b"", "json")


@st.composite
def partial_squares(draw):
    n = draw(st.integers(1, 8))
    cand = draw(st.lists(st.tuples(*[st.integers(0, n - 1)] * 3), max_size=3 * n * n))
    seen, kept = set(), []
    for t in cand:
        keys = {("rc", t[0], t[1]), ("rs", t[0], t[2]), ("cs", t[1], t[2])}
        if keys & seen:
            continue
        seen |= keys
        kept.append(t)
    return PartialLatinSquare(n, tuple(kept))


@settings(max_examples=10_000, deadline=None)
@given(partial_squares())
def test_codec_round_trip(P):
    assert validate(P) is None
    assert decode(encode(P, "triples"), "triples") == P
    # the grid format forgets the order, nothing else
    assert decode(encode(P, "grid"), "grid").as_set() == P.as_set()
