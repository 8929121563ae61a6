"""Shared topology/population catalogs for the test suite."""

import pytest

from netgauss import TopologySpec
from netgauss.graphs import DirectedGraph, GraphSequence
from netgauss.models import iid_population, linear_population


def small_window_sequences():
    """(name, GraphSequence) pairs with n <= 4 and window <= 2.

    Used by the mass-floor and noise-free bound checks; every sequence is
    strongly connected over its declared window.
    """
    seqs = []

    def static(name, n, edges):
        g = DirectedGraph(n, frozenset(edges))
        seqs.append((name, GraphSequence(n, (g,), window=1)))

    both = lambda pairs: [e for a, b in pairs for e in ((a, b), (b, a))]

    static("cycle2", 2, both([(1, 2)]))
    static("dicycle3", 3, [(1, 2), (2, 3), (3, 1)])
    static("cycle3", 3, both([(1, 2), (2, 3), (3, 1)]))
    static("dicycle4", 4, [(1, 2), (2, 3), (3, 4), (4, 1)])
    static("path3", 3, both([(1, 2), (2, 3)]))
    static("path4", 4, both([(1, 2), (2, 3), (3, 4)]))
    static("star4", 4, both([(1, 2), (1, 3), (1, 4)]))
    static("complete4", 4, [(j, i) for j in range(1, 5) for i in range(1, 5) if i != j])

    # period-2 schedules, strongly connected only over unions of 2 steps
    seqs.append(("alt2", GraphSequence(2, (
        DirectedGraph(2, frozenset({(1, 2)})),
        DirectedGraph(2, frozenset({(2, 1)})),
    ), window=2)))
    seqs.append(("alt3", GraphSequence(3, (
        DirectedGraph(3, frozenset({(1, 2), (2, 3)})),
        DirectedGraph(3, frozenset({(3, 1)})),
    ), window=2)))
    seqs.append(("alt4", GraphSequence(4, (
        DirectedGraph(4, frozenset({(1, 2), (2, 3), (3, 4)})),
        DirectedGraph(4, frozenset({(4, 1)})),
    ), window=2)))
    return seqs


def bound_check_scenarios():
    """(name, TopologySpec, Population) triples for noise-free bound checks."""
    cases = [
        ("dicycle3-linear", TopologySpec("cycle", 3, directed=True), linear_population(3)),
        ("dicycle3-iid", TopologySpec("cycle", 3, directed=True), iid_population(3, 4.0, 1.0)),
        ("cycle4-linear", TopologySpec("cycle", 4), linear_population(4)),
        ("complete4-linear", TopologySpec("complete", 4), linear_population(4)),
        ("star4-linear", TopologySpec("star", 4), linear_population(4)),
        ("grid25-iid", TopologySpec("grid", 25, rows=5, cols=5), iid_population(25, 4.0, 1.0)),
        ("path25-iid", TopologySpec("path", 25), iid_population(25, 4.0, 1.0)),
        ("roundrobin4-linear", TopologySpec("round-robin", 4), linear_population(4)),
        ("ringhub10-linear", TopologySpec("ring-hub", 10), linear_population(10)),
        ("custom-alt3-linear",
         TopologySpec("custom", 3, steps=(((1, 2), (2, 3)), ((3, 1),)), window=2),
         linear_population(3)),
    ]
    return cases


@pytest.fixture(scope="session")
def window_sequences():
    return small_window_sequences()


@pytest.fixture(scope="session")
def bound_scenarios():
    return bound_check_scenarios()
