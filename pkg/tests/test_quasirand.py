from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

import oracles
from trplab.core import Part, PartialLatinSquare, Vertex, cyclic_square
from trplab.engine import LeaveGraph, leave_from, run
from trplab.quasirand import (
    check,
    common_neighbours,
    degree,
    density,
    neighbour_set,
    random_subsets,
    triangle_count_prediction,
)


def _random_leaves():
    for n in (3, 4, 5, 6):
        for steps in (1, n, n * n // 2, n * n - n):
            out = run(n, steps, seed=100 * n + steps)
            yield out.square


def test_complete_graph_is_perfectly_quasirandom():
    rep = check(LeaveGraph(5), h=3, mode="exact")
    assert rep.density == 1
    assert rep.worst() == 0 and rep.is_quasirandom(0)


def test_single_removal_at_n2():
    g = leave_from(PartialLatinSquare.from_global(2, [(1, 3, 5)]))
    assert density(g) == Fraction(3, 4)
    rep = check(g, h=1)
    assert [e.worst_dev for e in rep.entries] == [Fraction(1, 3)] * 3
    assert rep.is_quasirandom(Fraction(1, 3)) and not rep.is_quasirandom(0.3)


def test_empty_leave_counts_as_quasirandom():
    rep = check(leave_from(cyclic_square(4)), h=2)
    assert rep.density == 0 and rep.worst() == 0
    assert rep.is_quasirandom(0)


@pytest.mark.parametrize("P", list(_random_leaves()), ids=lambda P: f"n{P.n}m{len(P)}")
def test_exact_deviations_match_brute_force(P):
    g = leave_from(P)
    rep = check(g, h=2)
    for e in rep.entries:
        assert e.worst_dev == oracles.worst_deviation(P.triples, P.n, e.k, e.q)


@pytest.mark.parametrize("P", [P for P in _random_leaves() if P.n <= 4], ids=lambda P: f"n{P.n}m{len(P)}")
def test_exact_k3_matches_brute_force(P):
    rep = check(leave_from(P), h=3, mode="exact")
    for e in rep.entries:
        if e.k == 3:
            assert e.worst_dev == oracles.worst_deviation(P.triples, P.n, 3, e.q)


def test_witness_attains_the_reported_deviation():
    P = run(9, 40, seed=3).square
    g = leave_from(P)
    rep = check(g, h=3, mode="exact")
    d = density(g)
    for e in rep.entries:
        A = tuple(Vertex.from_global(x, P.n) for x in e.witness)
        target = d ** e.k * P.n
        assert abs(common_neighbours(g, e.q, A) - target) / target == e.worst_dev


def test_sampled_never_exceeds_exact():
    g = leave_from(run(8, 30, seed=9).square)
    exact = check(g, h=3, mode="exact")
    sampled = check(g, h=3, mode="sampled", samples=500, seed=1)
    for a, b in zip(exact.entries, sampled.entries):
        assert (a.q, a.k) == (b.q, b.k)
        assert b.worst_dev <= a.worst_dev
        assert b.mode == "sampled" and b.checked == 500
    assert sampled.mode == "sampled" and exact.mode == "exact"


def test_auto_mode_samples_above_k2():
    rep = check(LeaveGraph(6), h=3, samples=50, seed=0)
    assert {e.k: e.mode for e in rep.entries} == {1: "exact", 2: "exact", 3: "sampled"}
    assert rep.mode == "mixed"


def test_degree_entries_match_numpy_degrees():
    P = run(7, 20, seed=4).square
    g = leave_from(P)
    d = density(g)
    rep = check(g, h=1)
    for e in rep.entries:
        degs = oracles.neighbourhood_rows(P.triples, 7, e.q).sum(axis=1)
        want = max(abs(int(x) - d * 7) / (d * 7) for x in degs)
        assert e.worst_dev == want
    v = Vertex(Part.ROW, 0)
    assert degree(g, v, Part.COLUMN) == len(neighbour_set(g, Part.COLUMN, v))


def test_common_neighbours_rejects_same_part():
    with pytest.raises(ValueError):
        common_neighbours(LeaveGraph(3), Part.ROW, (Vertex(Part.ROW, 0),))


def test_check_argument_errors():
    g = LeaveGraph(3)
    with pytest.raises(ValueError):
        check(g, h=0)
    with pytest.raises(ValueError):
        check(g, mode="fast")


def test_triangle_prediction_example():
    g = leave_from(PartialLatinSquare.from_global(2, [(1, 3, 5)]))
    p = triangle_count_prediction(g)
    assert p.predicted == Fraction(27, 8) and p.actual == 4
    assert p.relative_error == pytest.approx(5 / 27)


def test_random_subsets_are_distinct_and_in_range():
    rng = np.random.default_rng(0)
    for m, k in ((10, 3), (6, 4), (5, 5)):
        picks = random_subsets(rng, m, k, 2000)
        assert picks.shape == (2000, k)
        assert (picks >= 0).all() and (picks < m).all()
        assert all(len(set(row)) == k for row in picks.tolist())


def test_report_json_is_plain():
    rep = check(leave_from(run(5, 6, seed=0).square), h=2)
    js = rep.to_json()
    assert js["h"] == 2 and len(js["entries"]) == 6
    assert Fraction(js["entries"][0]["worst_dev_exact"]) == rep.entries[0].worst_dev
